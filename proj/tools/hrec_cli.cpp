// Command-line front end: simulate, forecast, tune-alpha, reconcile, evaluate, pipeline.

#include "hrec/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>

using namespace hrec;

namespace {

struct Overrides {
    std::string config_path;
    std::map<std::string, std::string> values;
};

/// Adds --config and one flag per config key to a subcommand.
void add_config_flags(CLI::App* cmd, Overrides& ov)
{
    cmd->add_option("-c,--config", ov.config_path, "key = value config file; flags override it");
    for (const auto& key : config_keys()) {
        std::string dashed = key;
        std::replace(dashed.begin(), dashed.end(), '_', '-');
        std::string names = "--" + dashed;
        if (dashed != key) names += ",--" + key;
        cmd->add_option_function<std::string>(
            names, [&ov, key](const std::string& v) { ov.values[key] = v; }, "config key '" + key + "'");
    }
}

RunConfig resolve(const Overrides& ov)
{
    RunConfig cfg = ov.config_path.empty() ? RunConfig{} : load_config(ov.config_path);
    for (const auto& [key, value] : ov.values) set_config_value(cfg, key, value);
    cfg.validate();
    return cfg;
}

std::shared_ptr<const Hierarchy> require_hierarchy(const RunConfig& cfg)
{
    if (cfg.hierarchy.empty()) throw ConfigError("--hierarchy is required");
    return std::make_shared<const Hierarchy>(load_hierarchy(cfg.hierarchy));
}

const std::string& require(const std::string& value, const char* flag)
{
    if (value.empty()) throw ConfigError(std::string(flag) + " is required");
    return value;
}

void cmd_simulate(const RunConfig& cfg)
{
    auto [train, test] = load_or_generate(cfg);
    const std::filesystem::path out = cfg.output_dir;
    std::filesystem::create_directories(out);
    save_hierarchy(*train.h, out / "hierarchy.csv");
    save_panel(train, out / "observations_train.csv");
    save_panel(test, out / "observations_test.csv");
    std::cout << "wrote " << (out / "hierarchy.csv").string() << ", observations_train.csv (T=" << train.T()
              << "), observations_test.csv (T'=" << test.T() << ")\n";
}

void cmd_forecast(const RunConfig& cfg)
{
    const auto h = require_hierarchy(cfg);
    const SeriesPanel obs = load_panel(h, require(cfg.data, "--data"), PanelKind::observations);
    BaseForecasts f;
    try {
        f = fit_predict(obs, BaseForecaster::parse(cfg.base_method, cfg.period), cfg.horizon);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    const std::filesystem::path out = cfg.output_dir;
    std::filesystem::create_directories(out);
    save_panel(f.insample, out / "base_insample.csv");
    save_panel(f.future, out / "base_forecast.csv");
    std::cout << "wrote base_insample.csv and base_forecast.csv (horizon " << cfg.horizon << ") to " << out.string()
              << '\n';
}

void cmd_tune_alpha(const RunConfig& cfg)
{
    const SeriesPanel train = load_or_generate(cfg).first;
    std::cout << "alpha=" << tune_alpha(cfg, train) << '\n';
}

void cmd_reconcile(const RunConfig& cfg)
{
    const auto h = require_hierarchy(cfg);
    const SeriesPanel obs = load_panel(h, require(cfg.data, "--data"), PanelKind::observations);
    const SeriesPanel insample = load_panel(h, require(cfg.insample, "--insample"), PanelKind::forecasts);
    const SeriesPanel base = load_panel(h, require(cfg.forecast, "--forecast"), PanelKind::forecasts);
    const std::filesystem::path out = cfg.output_dir;
    std::filesystem::create_directories(out);
    for (const auto& name : cfg.methods) {
        ReconciliationMatrix rm;
        if (parse_recon_method(name) == ReconMethod::robust) {
            const std::uint64_t seed = bootstrap_seed(cfg.seed);
            RobustFit fit;
            if (!cfg.set.empty()) {
                fit.set = load_uncertainty_set(cfg.set);
                RobustProblem rp{h, obs, insample, fit.set, 0.0, cfg.window};
                fit.solution = solve_robust(rp, cfg.tol);
                if (fit.solution.solver_status == conic::Status::failed) throw NumericError("robust: solver failed");
            } else {
                const double alpha = cfg.alpha ? *cfg.alpha : tune_alpha(cfg, obs);
                const Matrix reps = bootstrap_replicates(residuals(obs, insample), cfg.n_boot, seed);
                fit = fit_robust(obs, insample, reps, alpha, cfg, seed);
            }
            save_uncertainty_set(fit.set, out / "uncertainty_set.csv");
            std::cout << "robust: alpha=" << fit.set.alpha << " status=" << conic::to_string(fit.solution.solver_status)
                      << " objective=" << fit.solution.objective << '\n';
            rm = ReconciliationMatrix{fit.solution.P, ReconMethod::robust};
        } else {
            rm = classical_reconciliation(name, *h, obs, insample);
        }
        const std::string tag = to_string(rm.method);
        save_reconciliation(rm, out / ("P_" + tag + ".csv"));
        save_panel(apply(rm, base), out / ("forecast_" + tag + ".csv"));
        std::cout << "wrote P_" << tag << ".csv and forecast_" << tag << ".csv\n";
    }
}

void cmd_evaluate(const RunConfig& cfg, const std::vector<std::string>& compare)
{
    const auto h = require_hierarchy(cfg);
    const SeriesPanel actual = load_panel(h, require(cfg.actual, "--actual"), PanelKind::observations);
    const SeriesPanel base = load_panel(h, require(cfg.forecast, "--forecast"), PanelKind::forecasts);
    std::vector<std::pair<std::string, ScoreMap>> methods;
    for (const auto& item : compare) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) throw ConfigError("--compare expects name=path, got '" + item + "'");
        const SeriesPanel f = load_panel(h, item.substr(eq + 1), PanelKind::forecasts);
        methods.emplace_back(item.substr(0, eq), score(actual, f));
    }
    const EvalReport report = relative_report(score(actual, base), methods, *h);
    std::cout << report.text_table();
    if (!cfg.output_dir.empty()) {
        const std::filesystem::path out = cfg.output_dir;
        std::filesystem::create_directories(out);
        std::ofstream(out / "report.csv") << report.csv();
        std::ofstream(out / "per_series.csv") << report.per_series_csv(*h);
    }
}

void cmd_pipeline(const RunConfig& cfg)
{
    const PipelineResult r = run_pipeline(cfg);
    std::cout << r.report.text_table();
    if (r.alpha) std::cout << "alpha=" << *r.alpha << '\n';
    std::cout << "artifacts in " << cfg.output_dir << '\n';
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Hierarchical forecast reconciliation (BU, TD, OLS, MinT, robust box-uncertainty SDP)"};
    app.require_subcommand(1);

    std::map<std::string, Overrides> ov;
    std::vector<std::string> compare;
    auto* simulate = app.add_subcommand("simulate", "generate a synthetic hierarchical panel");
    auto* forecast = app.add_subcommand("forecast", "fit base forecasts per series");
    auto* tune = app.add_subcommand("tune-alpha", "choose the box width alpha by validation");
    auto* reconcile = app.add_subcommand("reconcile", "build reconciliation matrices and coherent forecasts");
    auto* evaluate = app.add_subcommand("evaluate", "relative MAE/RMSE report against the base forecasts");
    auto* pipeline = app.add_subcommand("pipeline", "forecast, reconcile with every method, evaluate");
    for (auto* cmd : {simulate, forecast, tune, reconcile, evaluate, pipeline}) add_config_flags(cmd, ov[cmd->get_name()]);
    evaluate->add_option("--compare", compare, "name=path of a reconciled forecast (repeatable)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*simulate) cmd_simulate(resolve(ov["simulate"]));
        else if (*forecast) cmd_forecast(resolve(ov["forecast"]));
        else if (*tune) cmd_tune_alpha(resolve(ov["tune-alpha"]));
        else if (*reconcile) cmd_reconcile(resolve(ov["reconcile"]));
        else if (*evaluate) cmd_evaluate(resolve(ov["evaluate"]), compare);
        else if (*pipeline) cmd_pipeline(resolve(ov["pipeline"]));
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const HierarchyError& e) {
        std::cerr << "error: hierarchy: " << e.what() << '\n';
        return 2;
    } catch (const DatasetError& e) {
        std::cerr << "error: dataset: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}

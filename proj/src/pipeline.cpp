#include "hrec/pipeline.hpp"

#include "hrec/csv.hpp"
#include "hrec/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

namespace hrec {

namespace {

const std::vector<Edge> kThreeLevelEdges = {{"Total", "A"}, {"Total", "B"}, {"A", "AA"}, {"A", "AB"},
                                      {"A", "AC"},    {"B", "BA"},    {"B", "BB"}};

std::string trim(const std::string& s)
{
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& v)
{
    std::vector<std::string> out;
    for (auto& item : split_csv_line(v)) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_double(const std::string& key, const std::string& v)
{
    const auto d = parse_double(trim(v));
    if (!d || !std::isfinite(*d)) throw ConfigError("config: " + key + " expects a number, got '" + v + "'");
    return *d;
}

std::uint64_t to_unsigned(const std::string& key, const std::string& v)
{
    const std::string t = trim(v);
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) {
        throw ConfigError("config: " + key + " expects a nonnegative integer, got '" + v + "'");
    }
    return out;
}

std::string join(const std::vector<std::string>& items)
{
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
    return out;
}

bool solver_verbose()
{
    const char* env = std::getenv("HREC_SOLVER_VERBOSE");
    return env && *env && std::string(env) != "0";
}

double mean_rmse(const ScoreMap& scores)
{
    double sum = 0.0;
    for (const auto& [label, s] : scores) sum += s.rmse;
    return sum / static_cast<double>(scores.size());
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
}

}  // namespace

void RunConfig::validate() const
{
    if (methods.empty()) throw ConfigError("config: methods is empty");
    for (const auto& m : methods) {
        try {
            parse_recon_method(m);
        } catch (const std::invalid_argument&) {
            throw ConfigError("config: unknown method '" + m + "'");
        }
    }
    try {
        BaseForecaster::parse(base_method, period);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (alpha && !(*alpha > 0.0 && *alpha <= 1.0)) throw ConfigError("config: alpha must be in (0, 1]");
    if (alpha_candidates.empty()) throw ConfigError("config: alpha_candidates is empty");
    for (double a : alpha_candidates) {
        if (!(a > 0.0 && a <= 1.0)) throw ConfigError("config: alpha candidates must lie in (0, 1]");
    }
    if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ConfigError("config: split_ratio must be in (0, 1)");
    if (n_boot < 1) throw ConfigError("config: n_boot must be >= 1");
    if (!(tol > 0.0)) throw ConfigError("config: tol must be positive");
    if (horizon < 1) throw ConfigError("config: horizon must be >= 1");
    if (data.empty()) {
        if (synth_T < 8) throw ConfigError("config: synth_t must be >= 8");
        if (synth_T_prime < 1) throw ConfigError("config: synth_t_prime must be >= 1");
        if (!(synth_shift >= 0.0)) throw ConfigError("config: synth_shift must be >= 0");
    }
}

const std::vector<std::string>& config_keys()
{
    static const std::vector<std::string> keys = {
        "hierarchy", "data",      "test",        "insample",         "forecast", "actual",      "set",
        "synth_t",   "synth_t_prime", "synth_shift", "base_method",  "period",   "horizon",     "methods",
        "n_boot",    "alpha",     "alpha_candidates", "split_ratio", "seed",     "tol",         "window",
        "output_dir"};
    return keys;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& raw)
{
    const std::string v = trim(raw);
    if (key == "hierarchy") cfg.hierarchy = v;
    else if (key == "data") cfg.data = v;
    else if (key == "test") cfg.test = v;
    else if (key == "insample") cfg.insample = v;
    else if (key == "forecast") cfg.forecast = v;
    else if (key == "actual") cfg.actual = v;
    else if (key == "set") cfg.set = v;
    else if (key == "synth_t") cfg.synth_T = to_unsigned(key, v);
    else if (key == "synth_t_prime") cfg.synth_T_prime = to_unsigned(key, v);
    else if (key == "synth_shift") cfg.synth_shift = to_double(key, v);
    else if (key == "base_method") cfg.base_method = v;
    else if (key == "period") cfg.period = static_cast<int>(to_unsigned(key, v));
    else if (key == "horizon") cfg.horizon = to_unsigned(key, v);
    else if (key == "methods") cfg.methods = split_list(v);
    else if (key == "n_boot") cfg.n_boot = to_unsigned(key, v);
    else if (key == "alpha") {
        if (v == "validate" || v.empty()) cfg.alpha.reset();
        else cfg.alpha = to_double(key, v);
    } else if (key == "alpha_candidates") {
        cfg.alpha_candidates.clear();
        for (const auto& item : split_list(v)) cfg.alpha_candidates.push_back(to_double(key, item));
    } else if (key == "split_ratio") cfg.split_ratio = to_double(key, v);
    else if (key == "seed") cfg.seed = to_unsigned(key, v);
    else if (key == "tol") cfg.tol = to_double(key, v);
    else if (key == "window") cfg.window = to_unsigned(key, v);
    else if (key == "output_dir") cfg.output_dir = v;
    else throw ConfigError("config: unknown key '" + key + "'");
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: " + path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        }
        set_config_value(base, trim(line.substr(0, eq)), line.substr(eq + 1));
    }
    return base;
}

std::string dump_config(const RunConfig& cfg)
{
    std::ostringstream os;
    os << "hierarchy = " << cfg.hierarchy << '\n'
       << "data = " << cfg.data << '\n'
       << "test = " << cfg.test << '\n'
       << "insample = " << cfg.insample << '\n'
       << "forecast = " << cfg.forecast << '\n'
       << "actual = " << cfg.actual << '\n'
       << "set = " << cfg.set << '\n'
       << "synth_t = " << cfg.synth_T << '\n'
       << "synth_t_prime = " << cfg.synth_T_prime << '\n'
       << "synth_shift = " << format_double(cfg.synth_shift) << '\n'
       << "base_method = " << cfg.base_method << '\n'
       << "period = " << cfg.period << '\n'
       << "horizon = " << cfg.horizon << '\n'
       << "methods = " << join(cfg.methods) << '\n'
       << "n_boot = " << cfg.n_boot << '\n'
       << "alpha = " << (cfg.alpha ? format_double(*cfg.alpha) : std::string("validate")) << '\n';
    std::vector<std::string> cands;
    for (double a : cfg.alpha_candidates) cands.push_back(format_double(a));
    os << "alpha_candidates = " << join(cands) << '\n'
       << "split_ratio = " << format_double(cfg.split_ratio) << '\n'
       << "seed = " << cfg.seed << '\n'
       << "tol = " << format_double(cfg.tol) << '\n'
       << "window = " << cfg.window << '\n'
       << "output_dir = " << cfg.output_dir << '\n';
    return os.str();
}

std::uint64_t bootstrap_seed(std::uint64_t seed)
{
    return splitmix64(seed ^ 0xb007b007b007b007ULL);
}

RobustFit fit_robust(const SeriesPanel& obs, const SeriesPanel& insample, const Matrix& replicates, double alpha,
                     const RunConfig& cfg, std::uint64_t seed)
{
    RobustFit fit;
    fit.set = bounds_from_replicates(replicates, obs.n(), alpha);
    fit.set.seed = seed;
    const Matrix reference = shrink(estimate_cov(obs, insample)).W;
    const bool ok = enforce_feasibility(fit.set, reference,
                                       [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; });
    if (!ok) std::cerr << "warning: uncertainty set: still no strictly feasible PD point after 10 widenings\n";

    RobustProblem rp{obs.h, obs, insample, fit.set, 0.0, cfg.window};
    try {
        fit.solution = solve_robust(rp, cfg.tol, {}, solver_verbose());
    } catch (const RobustError& e) {
        throw NumericError(std::string("robust: ") + e.what());
    }
    if (fit.solution.solver_status == conic::Status::failed) {
        std::ostringstream msg;
        msg << "robust: solver failed after " << fit.solution.iterations << " iterations (kkt residual "
            << fit.solution.kkt_residual << "): " << fit.solution.message;
        throw NumericError(msg.str());
    }
    if (fit.solution.solver_status == conic::Status::near_optimal) {
        std::cerr << "warning: robust: solver stopped near optimal (kkt residual " << fit.solution.kkt_residual
                  << ", tol " << cfg.tol << ")\n";
    }
    fit.rm = ReconciliationMatrix{fit.solution.P, ReconMethod::robust};
    return fit;
}

double tune_alpha(const std::vector<double>& candidates, const AlphaEvaluator& evaluate)
{
    if (candidates.empty()) throw ConfigError("tune_alpha: no candidates");
    if (candidates.size() == 1) return candidates.front();
    std::vector<double> sorted = candidates;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::optional<double> best;
    double best_score = std::numeric_limits<double>::infinity();
    std::string last_error;
    for (double a : sorted) {
        double s = 0.0;
        try {
            s = evaluate(a);
        } catch (const std::exception& e) {
            last_error = e.what();
            std::cerr << "warning: tune_alpha: alpha " << a << " failed: " << e.what() << '\n';
            continue;
        }
        if (!std::isfinite(s)) continue;
        if (!best || s < best_score) {
            best = a;
            best_score = s;
        }
    }
    if (!best) throw NumericError("tune_alpha: every candidate failed" + (last_error.empty() ? "" : ": " + last_error));
    return *best;
}

AlphaEvaluator validation_evaluator(const RunConfig& cfg, const SeriesPanel& obs)
{
    const std::size_t T = obs.T();
    const auto n_train = static_cast<std::size_t>(std::ceil(cfg.split_ratio * static_cast<double>(T) - 1e-9));
    if (n_train >= T || T - n_train < 2) {
        throw ConfigError("tune_alpha: validation segment needs >= 2 points (T=" + std::to_string(T) + ")");
    }
    const SeriesPanel train = obs.slice(0, n_train);
    const SeriesPanel valid = obs.slice(n_train, T - n_train);
    BaseForecasts base;
    try {
        base = fit_predict(train, BaseForecaster::parse(cfg.base_method, cfg.period), valid.T());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("tune_alpha: ") + e.what());
    }
    const std::uint64_t seed = bootstrap_seed(cfg.seed);
    const Matrix replicates = bootstrap_replicates(residuals(train, base.insample), cfg.n_boot, seed);
    return [=](double alpha) {
        const RobustFit fit = fit_robust(train, base.insample, replicates, alpha, cfg, seed);
        return mean_rmse(score(valid, apply(fit.rm, base.future)));
    };
}

double tune_alpha(const RunConfig& cfg, const SeriesPanel& obs)
{
    if (cfg.alpha_candidates.size() == 1) return cfg.alpha_candidates.front();
    return tune_alpha(cfg.alpha_candidates, validation_evaluator(cfg, obs));
}

ReconciliationMatrix classical_reconciliation(const std::string& method, const Hierarchy& h, const SeriesPanel& obs,
                                              const SeriesPanel& insample)
{
    switch (parse_recon_method(method)) {
    case ReconMethod::bottom_up: return bottom_up(h);
    case ReconMethod::top_down: return top_down(h, obs);
    case ReconMethod::ols: return ols(h);
    case ReconMethod::mint: return mint(h, shrink(estimate_cov(obs, insample)));
    case ReconMethod::robust: break;
    }
    throw std::invalid_argument("classical_reconciliation: robust needs an uncertainty set");
}

std::pair<SeriesPanel, SeriesPanel> load_or_generate(const RunConfig& cfg)
{
    std::shared_ptr<const Hierarchy> h;
    if (!cfg.hierarchy.empty()) {
        h = std::make_shared<const Hierarchy>(load_hierarchy(cfg.hierarchy));
    } else if (cfg.data.empty()) {
        h = std::make_shared<const Hierarchy>(build_hierarchy(kThreeLevelEdges));
    } else {
        throw ConfigError("config: data given without a hierarchy file");
    }
    if (cfg.data.empty()) {
        SyntheticSplit s = synth_generate(h, cfg.synth_T, cfg.synth_T_prime, cfg.seed, cfg.synth_shift);
        return {std::move(s.train), std::move(s.test)};
    }
    SeriesPanel obs = load_panel(h, cfg.data, PanelKind::observations);
    if (!cfg.test.empty()) return {std::move(obs), load_panel(h, cfg.test, PanelKind::observations)};
    if (obs.T() <= cfg.horizon + 1) throw ConfigError("config: horizon leaves fewer than 2 training points");
    const std::size_t T = obs.T() - cfg.horizon;
    return {obs.slice(0, T), obs.slice(T, cfg.horizon)};
}

PipelineResult run_pipeline(const RunConfig& cfg)
{
    cfg.validate();
    const auto [train, test] = load_or_generate(cfg);
    const auto h = train.h;
    const std::filesystem::path out = cfg.output_dir;
    std::filesystem::create_directories(out);

    save_hierarchy(*h, out / "hierarchy.csv");
    save_panel(train, out / "observations_train.csv");
    save_panel(test, out / "observations_test.csv");
    write_text(out / "config.txt", dump_config(cfg));

    BaseForecasts base;
    try {
        base = fit_predict(train, BaseForecaster::parse(cfg.base_method, cfg.period), test.T());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("forecast: ") + e.what());
    }
    base.future.timestamps = test.timestamps;
    save_panel(base.insample, out / "base_insample.csv");
    save_panel(base.future, out / "base_forecast.csv");

    PipelineResult result;
    nlohmann::ordered_json summary;
    summary["hierarchy"] = {{"n", h->n()}, {"m", h->m()}};
    summary["T"] = train.T();
    summary["T_prime"] = test.T();
    summary["seed"] = cfg.seed;

    std::vector<std::pair<std::string, ScoreMap>> scores;
    for (const auto& name : cfg.methods) {
        const ReconMethod method = parse_recon_method(name);
        const std::string tag = to_string(method);
        ReconciliationMatrix rm;
        if (method == ReconMethod::robust) {
            RobustFit fit;
            const std::uint64_t seed = bootstrap_seed(cfg.seed);
            if (!cfg.set.empty()) {
                fit.set = load_uncertainty_set(cfg.set);
                RobustProblem rp{h, train, base.insample, fit.set, 0.0, cfg.window};
                fit.solution = solve_robust(rp, cfg.tol, {}, solver_verbose());
                if (fit.solution.solver_status == conic::Status::failed) throw NumericError("robust: solver failed");
                fit.rm = ReconciliationMatrix{fit.solution.P, ReconMethod::robust};
            } else {
                const double alpha = cfg.alpha ? *cfg.alpha : tune_alpha(cfg, train);
                result.alpha = alpha;
                const Matrix replicates = bootstrap_replicates(residuals(train, base.insample), cfg.n_boot, seed);
                fit = fit_robust(train, base.insample, replicates, alpha, cfg, seed);
            }
            save_uncertainty_set(fit.set, out / "uncertainty_set.csv");
            const RobustSolution& sol = fit.solution;
            summary["robust"] = {{"alpha", fit.set.alpha},
                                 {"alpha_validated", !cfg.alpha.has_value() && cfg.set.empty()},
                                 {"n_boot", fit.set.n_boot},
                                 {"box_inflations", fit.set.inflations},
                                 {"status", conic::to_string(sol.solver_status)},
                                 {"objective", sol.objective},
                                 {"kkt_residual", sol.kkt_residual},
                                 {"duality_gap", sol.duality_gap_cert},
                                 {"iterations", sol.iterations},
                                 {"ps_identity_gap", sol.ps_identity_gap}};
            result.robust = sol;
            rm = fit.rm;
        } else {
            rm = classical_reconciliation(name, *h, train, base.insample);
        }
        save_reconciliation(rm, out / ("P_" + tag + ".csv"));
        SeriesPanel coherent = apply(rm, base.future);
        save_panel(coherent, out / ("forecast_" + tag + ".csv"));
        scores.emplace_back(tag, score(test, coherent));
        result.coherent.emplace(tag, std::move(coherent));
    }

    result.report = relative_report(score(test, base.future), scores, *h);
    write_text(out / "report.txt", result.report.text_table());
    write_text(out / "report.csv", result.report.csv());
    write_text(out / "per_series.csv", result.report.per_series_csv(*h));
    std::vector<std::string> tags;
    for (const auto& [tag, s] : scores) tags.push_back(tag);
    summary["methods"] = tags;
    write_text(out / "summary.json", summary.dump(2) + "\n");
    return result;
}

}  // namespace hrec

#include "doctest.h"

#include "hrec/pipeline.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace hrec;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / ("hrec_pipeline_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunConfig small_config(const fs::path& out)
{
    RunConfig cfg;
    cfg.synth_T = 40;
    cfg.synth_T_prime = 6;
    cfg.horizon = 6;
    cfg.n_boot = 200;
    cfg.alpha = 0.8;
    cfg.output_dir = out.string();
    return cfg;
}

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(HREC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config file parsing, overrides and errors")
{
    const fs::path dir = scratch("config");
    {
        std::ofstream f(dir / "run.conf");
        f << "# comment line\n"
          << "methods = bu, mint\n"
          << "n_boot = 300   # trailing comment\n"
          << "alpha = 0.7\n"
          << "alpha_candidates = 0.5,0.9\n"
          << "\n"
          << "seed = 42\n";
    }
    RunConfig cfg = load_config(dir / "run.conf");
    CHECK(cfg.methods == std::vector<std::string>{"bu", "mint"});
    CHECK(cfg.n_boot == 300);
    REQUIRE(cfg.alpha.has_value());
    CHECK(*cfg.alpha == 0.7);
    CHECK(cfg.alpha_candidates == std::vector<double>{0.5, 0.9});
    CHECK(cfg.seed == 42);
    CHECK(cfg.horizon == 12);

    set_config_value(cfg, "seed", "7");
    CHECK(cfg.seed == 7);

    // dump/load round trip
    {
        std::ofstream f(dir / "dump.conf");
        f << dump_config(cfg);
    }
    const RunConfig again = load_config(dir / "dump.conf");
    CHECK(dump_config(again) == dump_config(cfg));

    CHECK_THROWS_AS(set_config_value(cfg, "no_such_key", "1"), ConfigError);
    CHECK_THROWS_AS(set_config_value(cfg, "n_boot", "many"), ConfigError);
    {
        std::ofstream f(dir / "bad.conf");
        f << "just a line without equals\n";
    }
    CHECK_THROWS_AS(load_config(dir / "bad.conf"), ConfigError);
    CHECK_THROWS_AS(load_config(dir / "missing.conf"), ConfigError);

    RunConfig bad;
    bad.split_ratio = 1.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = RunConfig{};
    bad.alpha = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = RunConfig{};
    bad.methods = {"bu", "magic"};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("alpha selection with a mock evaluator")
{
    int calls = 0;
    auto table = [&](std::map<double, double> scores) {
        return [&calls, scores](double a) {
            ++calls;
            return scores.at(a);
        };
    };
    CHECK(tune_alpha({0.5, 1.0}, table({{0.5, 3.0}, {1.0, 2.0}})) == 1.0);
    CHECK(tune_alpha({0.9, 0.6}, table({{0.6, 1.5}, {0.9, 1.5}})) == 0.6);

    calls = 0;
    CHECK(tune_alpha({0.7}, table({})) == 0.7);
    CHECK(calls == 0);

    // a failing candidate is skipped; all failing is an error
    auto flaky = [](double a) -> double {
        if (a < 0.8) throw NumericError("solver failed");
        return 1.0 / a;
    };
    CHECK(tune_alpha({0.5, 0.8, 1.0}, flaky) == 1.0);
    auto broken = [](double) -> double { throw NumericError("solver failed"); };
    CHECK_THROWS_AS(tune_alpha({0.5, 0.8}, broken), NumericError);
}

TEST_CASE("bottom-up only run on synthetic data")
{
    const fs::path out = scratch("bu");
    RunConfig cfg = small_config(out);
    cfg.methods = {"bu"};
    const PipelineResult r = run_pipeline(cfg);
    REQUIRE(r.coherent.count("bu"));
    const SeriesPanel& f = r.coherent.at("bu");
    for (Eigen::Index t = 0; t < f.values.cols(); ++t) {
        CHECK(check_coherent(*f.h, f.values.col(t), 1e-9));
    }
    for (const auto& row : r.report.per_level.at("base")) {
        CHECK(row.mae.mean == doctest::Approx(1.0));
        CHECK(row.rmse.mean == doctest::Approx(1.0));
    }
    CHECK_FALSE(r.alpha.has_value());
    CHECK(fs::exists(out / "forecast_bu.csv"));
    CHECK(fs::exists(out / "report.txt"));
    CHECK(fs::exists(out / "summary.json"));
}

TEST_CASE("all methods: outputs are coherent on reload and reruns are byte-identical")
{
    const fs::path out1 = scratch("all1");
    const fs::path out2 = scratch("all2");
    RunConfig cfg = small_config(out1);
    cfg.alpha.reset();
    cfg.alpha_candidates = {0.6, 0.9};
    const PipelineResult r = run_pipeline(cfg);
    REQUIRE(r.alpha.has_value());
    CHECK((*r.alpha == 0.6 || *r.alpha == 0.9));
    REQUIRE(r.robust.has_value());
    CHECK(r.robust->solver_status != conic::Status::failed);
    CHECK(r.report.methods.size() == 6);

    const auto h = std::make_shared<const Hierarchy>(load_hierarchy(out1 / "hierarchy.csv"));
    for (const char* tag : {"bu", "td", "ols", "mint", "robust"}) {
        const SeriesPanel f = load_panel(h, out1 / ("forecast_" + std::string(tag) + ".csv"), PanelKind::forecasts);
        for (Eigen::Index t = 0; t < f.values.cols(); ++t) {
            const double scale = 1.0 + f.values.col(t).cwiseAbs().maxCoeff();
            CHECK(coherence_gap(*h, f.values.col(t)) <= 1e-8 * scale);
        }
    }

    cfg.output_dir = out2.string();
    run_pipeline(cfg);
    for (const auto& entry : fs::directory_iterator(out1)) {
        const auto name = entry.path().filename();
        if (name == "config.txt") continue;  // contains output_dir
        INFO(name.string());
        CHECK(slurp(entry.path()) == slurp(out2 / name));
    }
}

TEST_CASE("command-line exit codes")
{
    const fs::path dir = scratch("cli");
    const std::string out = " --output-dir " + (dir / "out").string();
    CHECK(run_cli("pipeline --synth-t 40 --synth-t-prime 6 --horizon 6 --methods bu,ols --n-boot 50" + out) == 0);
    CHECK(fs::exists(dir / "out" / "report.csv"));
    CHECK(run_cli("pipeline --n-boot 0" + out) == 2);
    CHECK(run_cli("pipeline --data " + (dir / "absent.csv").string() + out) == 2);
    CHECK(run_cli("no-such-subcommand") == 2);
    {
        std::ofstream f(dir / "cycle.csv");
        f << "parent,child\nA,B\nB,A\n";
    }
    CHECK(run_cli("pipeline --hierarchy " + (dir / "cycle.csv").string() + out) == 2);
}

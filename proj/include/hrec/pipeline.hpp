#pragma once

#include "hrec/base_forecast.hpp"
#include "hrec/covariance.hpp"
#include "hrec/eval.hpp"
#include "hrec/reconcile.hpp"
#include "hrec/robust_sdp.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hrec {

/// Bad configuration or input files (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical or solver failure (CLI exit code 3).
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/**
 * Run settings. Read from a flat `key = value` file; every key can also be
 * given as a command-line flag `--key value`, which wins.
 *
 * Data comes from `data` (observations CSV, with `test` or the last
 * `horizon` columns held out) or, when `data` is empty, from the synthetic
 * generator (`synth_t`, `synth_t_prime`, `synth_shift`, `seed`).
 * Solver progress is printed when HREC_SOLVER_VERBOSE is set to anything but 0.
 */
struct RunConfig {
    std::string hierarchy;  // parent,child CSV; empty with synthetic data means the three-level Total/A/B example
    std::string data;
    std::string test;
    std::string insample;   // reconcile/evaluate subcommands
    std::string forecast;
    std::string actual;
    std::string set;        // saved uncertainty set to reuse

    std::size_t synth_T = 96;
    std::size_t synth_T_prime = 12;
    double synth_shift = 1.0;

    std::string base_method = "trend_seasonal_ar";
    int period = 4;
    std::size_t horizon = 12;

    std::vector<std::string> methods = {"bu", "td", "ols", "mint", "robust"};
    std::size_t n_boot = 5000;
    std::optional<double> alpha;  // empty: choose by validation
    std::vector<double> alpha_candidates = {0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    double split_ratio = 0.9;
    std::uint64_t seed = 1;
    double tol = 1e-7;
    std::size_t window = 0;
    std::string output_dir = "hrec_out";

    /// Throws ConfigError on out-of-range values.
    void validate() const;
};

/// Names accepted by set_config_value, in documentation order.
const std::vector<std::string>& config_keys();

/// Sets one key from its textual value; throws ConfigError.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// Parses `key = value` lines; `#` starts a comment.
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

/// Writes every key in the file format above.
std::string dump_config(const RunConfig& cfg);

/// Seed for the bootstrap, kept apart from the data generator streams.
std::uint64_t bootstrap_seed(std::uint64_t seed);

struct RobustFit {
    ReconciliationMatrix rm;
    RobustSolution solution;
    UncertaintySet set;
};

/// Box from pre-computed replicates at `alpha` (with the feasibility guard) and its robust solve.
RobustFit fit_robust(const SeriesPanel& obs, const SeriesPanel& insample, const Matrix& replicates, double alpha,
                     const RunConfig& cfg, std::uint64_t seed);

/// Mean per-series RMSE on the validation segment for one alpha; throws on failure.
using AlphaEvaluator = std::function<double(double)>;

/**
 * Smallest validation score wins; ties go to the smaller alpha. A single
 * candidate is returned without evaluation. Throws NumericError when every
 * candidate fails.
 */
double tune_alpha(const std::vector<double>& candidates, const AlphaEvaluator& evaluate);

/**
 * Chronological split: the first ceil(split_ratio * T) columns train, the
 * rest validate. Base forecasts are refit on the train part and the box is
 * bootstrapped from its residuals once, shared by all candidates.
 */
AlphaEvaluator validation_evaluator(const RunConfig& cfg, const SeriesPanel& obs);
double tune_alpha(const RunConfig& cfg, const SeriesPanel& obs);

/// Reconciliation matrix for a classical method name (bu, td, ols/gls, mint).
ReconciliationMatrix classical_reconciliation(const std::string& method, const Hierarchy& h, const SeriesPanel& obs,
                                              const SeriesPanel& insample);

struct PipelineResult {
    EvalReport report;
    std::optional<double> alpha;
    std::optional<RobustSolution> robust;
    std::map<std::string, SeriesPanel> coherent;  // method -> reconciled forecasts
};

/// Train/test panels for a config (file or synthetic).
std::pair<SeriesPanel, SeriesPanel> load_or_generate(const RunConfig& cfg);

/// Full run; writes artifacts under cfg.output_dir.
PipelineResult run_pipeline(const RunConfig& cfg);

}  // namespace hrec

#pragma once

#include "hrec/dataset.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>

namespace hrec {

/// Base-forecast error covariance with its shrinkage metadata.
struct CovEstimate {
    Matrix W;
    double lambda = 0.0;
    std::size_t T_used = 0;
    /// Mean-centred residuals (n x T) the estimate was built from; needed by shrink().
    Matrix centered;
};

/// Box [lower, upper] on the covariance (intersected with the PSD cone downstream).
struct UncertaintySet {
    Matrix lower;
    Matrix upper;
    double alpha = 1.0;
    std::size_t n_boot = 0;
    std::uint64_t seed = 0;
    /// Number of 5% widening steps the feasibility guard applied.
    int inflations = 0;

    std::size_t n() const { return static_cast<std::size_t>(lower.rows()); }
};

/// Residuals y - yhat, n x T.
Matrix residuals(const SeriesPanel& obs, const SeriesPanel& insample);

/// Unbiased sample covariance of mean-centred residual columns; lambda = 0.
CovEstimate estimate_cov(const SeriesPanel& obs, const SeriesPanel& insample);
CovEstimate estimate_cov_from_residuals(const Matrix& resid);

/// Schafer-Strimmer off-diagonal intensity for a diagonal target, clipped to [0, 1].
double shrinkage_intensity(const CovEstimate& cov);

/// lambda * diag(W) + (1 - lambda) * W with the estimated intensity.
CovEstimate shrink(const CovEstimate& cov);

/// Same blend with a caller-fixed intensity.
CovEstimate shrink_with(const CovEstimate& cov, double lambda);

/// Linear interpolation between order statistics ("type 7"); q in [0, 1].
double percentile_type7(std::vector<double> values, double q);

/// Elementwise bounds from bootstrap replicate covariances stored as columns
/// of packed upper triangles.
UncertaintySet bounds_from_replicates(const Matrix& packed, std::size_t n, double alpha);

/**
 * Bootstrap box construction:
 *   1. W from all residuals, lambda from its shrinkage step;
 *   2. N_B paired resamples of T time indices, each covariance shrunk with
 *      that fixed lambda;
 *   3. per element, the 100(1-alpha)/2 and 100(1+alpha)/2 percentiles.
 * Replicate s draws from its own stream derived from (seed, s). The result
 * then passes through the strict-feasibility guard.
 */
UncertaintySet build_uncertainty_set(const SeriesPanel& obs, const SeriesPanel& insample, std::size_t n_boot,
                                     double alpha, std::uint64_t seed);

/// Replicate covariances (packed upper triangle per column) from the
/// bootstrap loop; exposed so several alphas can share one set of samples.
Matrix bootstrap_replicates(const Matrix& resid, std::size_t n_boot, std::uint64_t seed, double* lambda_out = nullptr);

struct FeasibilityCheck {
    bool ok = false;
    double min_eigenvalue = 0.0;
    Matrix witness;
};

/// Clips `reference` into [lower + eps, upper - eps] (eps = 1e-9 * max diag)
/// and tests positive definiteness. Entries whose box is narrower than 2 eps
/// take the box midpoint.
FeasibilityCheck check_strict_feasibility(const UncertaintySet& set, const Matrix& reference);

/// Widens the box symmetrically in 5% steps (at most 10) until the check passes.
/// Returns false if it never does. `warn` receives a message per inflation.
bool enforce_feasibility(UncertaintySet& set, const Matrix& reference,
                         const std::function<void(const std::string&)>& warn = {});

void save_uncertainty_set(const UncertaintySet& set, const std::filesystem::path& path);
UncertaintySet load_uncertainty_set(const std::filesystem::path& path);

}  // namespace hrec

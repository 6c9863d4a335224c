#pragma once

#include "hrec/conic.hpp"
#include "hrec/covariance.hpp"
#include "hrec/reconcile.hpp"

#include <cstdint>
#include <optional>

namespace hrec {

class RobustError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Data of the min-max problem  min_P max_{W in box, W psd} sum_t e_t^T W e_t,
/// e_t = y_t - S P yhat_t.
struct RobustProblem {
    std::shared_ptr<const Hierarchy> h;
    SeriesPanel obs;
    SeriesPanel insample;
    UncertaintySet set;
    /// Residual magnitude used for conditioning; <= 0 picks it from the data.
    double scale = 0.0;
    /// Use only the last `window` time columns; 0 uses all.
    std::size_t window = 0;

    /// Observation and in-sample matrices restricted to the window.
    std::pair<Matrix, Matrix> windowed() const;
};

struct SdpOptions {
    /// Replace the T residual columns by an orthonormal basis of their row
    /// space (at most 2n columns). Exact: E E^T is unchanged.
    bool compress = true;
    /// Parametrize P around the OLS map through the SVD of the in-sample
    /// forecasts. Directions outside their range keep the OLS action.
    bool whiten = true;
};

/**
 * Conic form of the reformulated problem
 *
 *   min  Wu . Xu - Wl . Xl
 *   s.t. [[Xu - Xl, E], [E^T, I]] psd,  Xu, Xl >= 0 elementwise,
 *
 * with E affine in the reconciliation variables. Box entries with
 * Wl == Wu become a single free variable Xu - Xl.
 */
struct BuiltSdp {
    conic::Program program;
    Eigen::Index n = 0;
    Eigen::Index m = 0;
    Eigen::Index columns = 0;  // residual columns in the PSD block
    Eigen::Index rank = 0;     // reconciliation coordinates per bottom series

    std::vector<int> upper_var;  // per packed (i <= j); -1 if absent
    std::vector<int> lower_var;
    std::vector<int> diff_var;
    std::vector<int> coef_var;   // m x rank, row-major

    Matrix summing;
    Matrix E0;        // scaled constant part of E, n x columns
    Matrix coef;      // columns x rank; E = E0 - S K coef^T
    Matrix P_base;    // P = P_base + K * back_map
    Matrix back_map;  // rank x n
    double residual_scale = 1.0;  // E_scaled = residual_scale * E
    double weight_scale = 1.0;    // W_scaled = W / weight_scale

    int psd_size() const { return static_cast<int>(n + columns); }
    /// P for a given vector of program variables.
    Matrix reconciliation(const Eigen::VectorXd& x) const;
    /// Scaled E for a given vector of program variables.
    Matrix residual_block(const Eigen::VectorXd& x) const;
};

/// Throws RobustError when no PD matrix lies strictly inside the box.
BuiltSdp build_sdp(const RobustProblem& rp, const SdpOptions& opts = {});

struct RobustSolution {
    Matrix P;
    Matrix X_upper;
    Matrix X_lower;
    Matrix worst_case_W;  // dual block: the maximizing covariance
    double objective = 0.0;
    conic::Status solver_status = conic::Status::failed;
    double duality_gap_cert = 0.0;
    double kkt_residual = 0.0;
    int iterations = 0;
    double ps_identity_gap = 0.0;  // ||P S - I||_max, recorded only
    std::string message;
};

RobustSolution solve_robust(const RobustProblem& rp, double tol = 1e-7, const SdpOptions& opts = {},
                            bool verbose = false);

/// Unscaled residual matrix E = Y - S P Yhat over the window.
Matrix residual_matrix(const RobustProblem& rp, const Matrix& P);

/// Exact worst-case objective for diagnostics: max M . W over the box (no
/// PSD constraint) is an upper bound, sum of the per-entry extremes.
double box_only_bound(const Matrix& M, const UncertaintySet& set);

/**
 * Verification oracle for small n: maximizes (E E^T) . W over the box
 * intersected with the PSD cone by projected gradient ascent (20 seeded
 * starts, 500 rounds, Dykstra box/PSD projection), plus box vertices
 * filtered for PSD when n <= 3. Returns the best feasible value found.
 */
double inner_max_oracle(const Matrix& P, const UncertaintySet& set, const RobustProblem& rp, std::uint64_t seed = 0);
double inner_max_oracle(const Matrix& M, const UncertaintySet& set, std::uint64_t seed = 0);

}  // namespace hrec

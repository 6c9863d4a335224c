#pragma once

#include "hrec/covariance.hpp"
#include "hrec/dataset.hpp"

#include <filesystem>
#include <string>

namespace hrec {

enum class ReconMethod { bottom_up, top_down, ols, mint, robust };

std::string to_string(ReconMethod m);
ReconMethod parse_recon_method(const std::string& name);

/// m x n map from base forecasts to bottom-level values; coherent forecasts are S * P * yhat.
struct ReconciliationMatrix {
    Matrix P;
    ReconMethod method = ReconMethod::bottom_up;
};

class ReconcileError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

ReconciliationMatrix bottom_up(const Hierarchy& h);

/// Average historical proportions of each leaf in the root; periods with a
/// zero root total are skipped.
ReconciliationMatrix top_down(const Hierarchy& h, const SeriesPanel& obs);

/// (S^T S)^{-1} S^T.
ReconciliationMatrix ols(const Hierarchy& h);

/// (S^T W^{-1} S)^{-1} S^T W^{-1}; W must be positive definite.
ReconciliationMatrix mint(const Hierarchy& h, const CovEstimate& cov);
ReconciliationMatrix mint(const Hierarchy& h, const Matrix& W);

/// Columnwise S * P * yhat.
SeriesPanel apply(const ReconciliationMatrix& rm, const SeriesPanel& base);

/// Empirical weighted loss sum_t (y_t - S P yhat_t)^T W (y_t - S P yhat_t).
double weighted_loss(const Hierarchy& h, const Matrix& P, const Matrix& W, const Matrix& obs, const Matrix& base);

void save_reconciliation(const ReconciliationMatrix& rm, const std::filesystem::path& path);
ReconciliationMatrix load_reconciliation(const std::filesystem::path& path);

}  // namespace hrec

#include "hrec/reconcile.hpp"

#include "hrec/csv.hpp"

#include <fstream>

namespace hrec {

std::string to_string(ReconMethod m)
{
    switch (m) {
    case ReconMethod::bottom_up: return "bu";
    case ReconMethod::top_down: return "td";
    case ReconMethod::ols: return "ols";
    case ReconMethod::mint: return "mint";
    case ReconMethod::robust: return "robust";
    }
    return "?";
}

ReconMethod parse_recon_method(const std::string& name)
{
    if (name == "bu" || name == "bottom_up") return ReconMethod::bottom_up;
    if (name == "td" || name == "top_down") return ReconMethod::top_down;
    if (name == "ols" || name == "gls") return ReconMethod::ols;
    if (name == "mint") return ReconMethod::mint;
    if (name == "robust") return ReconMethod::robust;
    throw std::invalid_argument("reconcile: unknown method '" + name + "'");
}

ReconciliationMatrix bottom_up(const Hierarchy& h)
{
    const auto n = static_cast<Eigen::Index>(h.n());
    const auto m = static_cast<Eigen::Index>(h.m());
    ReconciliationMatrix rm{Matrix::Zero(m, n), ReconMethod::bottom_up};
    rm.P.rightCols(m).setIdentity();
    return rm;
}

ReconciliationMatrix top_down(const Hierarchy& h, const SeriesPanel& obs)
{
    if (obs.n() != h.n()) throw ReconcileError("top_down: panel does not match hierarchy");
    const auto n = static_cast<Eigen::Index>(h.n());
    const auto m = static_cast<Eigen::Index>(h.m());
    Vector share = Vector::Zero(m);
    std::size_t kept = 0;
    for (Eigen::Index t = 0; t < obs.values.cols(); ++t) {
        const double total = obs.values(0, t);
        if (total == 0.0) continue;
        share += obs.values.col(t).tail(m) / total;
        ++kept;
    }
    if (kept == 0) throw ReconcileError("top_down: top-level series is zero at every time point");
    ReconciliationMatrix rm{Matrix::Zero(m, n), ReconMethod::top_down};
    rm.P.col(0) = share / static_cast<double>(kept);
    return rm;
}

ReconciliationMatrix ols(const Hierarchy& h)
{
    const Matrix& S = h.summing();
    const Matrix G = S.transpose() * S;
    return {G.llt().solve(S.transpose()), ReconMethod::ols};
}

ReconciliationMatrix mint(const Hierarchy& h, const Matrix& W)
{
    if (static_cast<std::size_t>(W.rows()) != h.n() || W.rows() != W.cols()) {
        throw ReconcileError("mint: covariance must be n x n");
    }
    const Eigen::LLT<Matrix> llt(W);
    if (llt.info() != Eigen::Success || llt.matrixL().toDenseMatrix().diagonal().minCoeff() <= 0.0) {
        throw ReconcileError("mint: covariance is not positive definite; apply shrinkage first");
    }
    const Matrix& S = h.summing();
    const Matrix WinvS = llt.solve(S);
    const Matrix G = S.transpose() * WinvS;
    const Eigen::LLT<Matrix> g_llt(G);
    if (g_llt.info() != Eigen::Success) throw ReconcileError("mint: S^T W^-1 S is not positive definite");
    return {g_llt.solve(WinvS.transpose()), ReconMethod::mint};
}

ReconciliationMatrix mint(const Hierarchy& h, const CovEstimate& cov)
{
    return mint(h, cov.W);
}

SeriesPanel apply(const ReconciliationMatrix& rm, const SeriesPanel& base)
{
    const Hierarchy& h = *base.h;
    if (static_cast<std::size_t>(rm.P.rows()) != h.m() || static_cast<std::size_t>(rm.P.cols()) != h.n() ||
        base.n() != h.n()) {
        throw ReconcileError("apply: P is " + std::to_string(rm.P.rows()) + "x" + std::to_string(rm.P.cols()) +
                             ", expected " + std::to_string(h.m()) + "x" + std::to_string(h.n()));
    }
    // S * (P * yhat) keeps the bottom block exactly equal to the summed rows.
    const Matrix bottom = rm.P * base.values;
    SeriesPanel out{base.h, Matrix(base.values.rows(), base.values.cols()), base.timestamps, PanelKind::forecasts};
    for (Eigen::Index t = 0; t < bottom.cols(); ++t) {
        const Vector b = bottom.col(t);
        out.values.col(t) = h.summing() * b;
    }
    return out;
}

double weighted_loss(const Hierarchy& h, const Matrix& P, const Matrix& W, const Matrix& obs, const Matrix& base)
{
    const Matrix E = obs - h.summing() * (P * base);
    return (W.cwiseProduct(E * E.transpose())).sum();
}

void save_reconciliation(const ReconciliationMatrix& rm, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("reconcile: cannot write " + path.string());
    out << "method=" << to_string(rm.method) << '\n';
    for (Eigen::Index i = 0; i < rm.P.rows(); ++i) {
        for (Eigen::Index j = 0; j < rm.P.cols(); ++j) out << (j ? "," : "") << format_double(rm.P(i, j));
        out << '\n';
    }
}

ReconciliationMatrix load_reconciliation(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("reconcile: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("method=", 0) != 0) {
        throw std::runtime_error("reconcile: missing method header in " + path.string());
    }
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ReconciliationMatrix rm;
    rm.method = parse_recon_method(line.substr(7));
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        std::vector<double> row;
        for (const auto& cell : split_csv_line(line)) {
            const auto v = parse_double(cell);
            if (!v) throw std::runtime_error("reconcile: non-numeric cell '" + cell + "'");
            row.push_back(*v);
        }
        if (!rows.empty() && row.size() != rows.front().size()) throw std::runtime_error("reconcile: ragged rows");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("reconcile: empty matrix");
    rm.P.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            rm.P(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return rm;
}

}  // namespace hrec

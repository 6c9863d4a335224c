#include "hrec/robust_sdp.hpp"

#include "hrec/rng.hpp"

#include <algorithm>
#include <cmath>

namespace hrec {

std::pair<Matrix, Matrix> RobustProblem::windowed() const
{
    if (!h) throw RobustError("robust: missing hierarchy");
    if (obs.n() != h->n() || insample.n() != h->n() || obs.T() != insample.T()) {
        throw RobustError("robust: observation and in-sample panels are not aligned");
    }
    if (set.lower.rows() != static_cast<Eigen::Index>(h->n()) || set.upper.rows() != set.lower.rows() ||
        set.lower.cols() != set.lower.rows() || set.upper.cols() != set.upper.rows()) {
        throw RobustError("robust: uncertainty set must be n x n");
    }
    const auto T = static_cast<Eigen::Index>(obs.T());
    const Eigen::Index L = window == 0 ? T : std::min<Eigen::Index>(T, static_cast<Eigen::Index>(window));
    return {obs.values.rightCols(L), insample.values.rightCols(L)};
}

Matrix residual_matrix(const RobustProblem& rp, const Matrix& P)
{
    const auto [Y, Yhat] = rp.windowed();
    return Y - rp.h->summing() * (P * Yhat);
}

Matrix BuiltSdp::reconciliation(const Eigen::VectorXd& x) const
{
    Matrix K(m, rank);
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = 0; b < rank; ++b) K(a, b) = x(coef_var[static_cast<std::size_t>(a * rank + b)]);
    return P_base + K * back_map;
}

namespace {

std::size_t packed_index(Eigen::Index n, Eigen::Index i, Eigen::Index j)
{
    // row-major upper triangle, i <= j
    return static_cast<std::size_t>(i * n - i * (i - 1) / 2 + (j - i));
}

}  // namespace

BuiltSdp build_sdp(const RobustProblem& rp, const SdpOptions& opts)
{
    auto [Y, Yhat] = rp.windowed();
    const Hierarchy& h = *rp.h;
    const Matrix& S = h.summing();
    const UncertaintySet& set = rp.set;

    if ((set.lower.array() > set.upper.array()).any()) throw RobustError("robust: uncertainty set has lower > upper");
    if (!set.lower.isApprox(set.lower.transpose()) || !set.upper.isApprox(set.upper.transpose())) {
        throw RobustError("robust: uncertainty set bounds must be symmetric");
    }

    // Strict feasibility of the inner maximization.
    {
        FeasibilityCheck check = check_strict_feasibility(set, 0.5 * (set.lower + set.upper));
        if (!check.ok && rp.obs.T() >= 2) {
            const Matrix reference = shrink(estimate_cov(rp.obs, rp.insample)).W;
            check = check_strict_feasibility(set, reference);
        }
        if (!check.ok) {
            throw RobustError("robust: infeasible-set guard failed, no positive definite covariance lies inside "
                              "the box (min eigenvalue " + std::to_string(check.min_eigenvalue) + ")");
        }
    }

    BuiltSdp out;
    out.n = static_cast<Eigen::Index>(h.n());
    out.m = static_cast<Eigen::Index>(h.m());
    out.summing = S;
    const Eigen::Index n = out.n;
    const Eigen::Index m = out.m;
    const Eigen::Index T = Y.cols();

    // E = B0 - S dP H with P = P_base + dP.
    Matrix B0;
    Matrix H = Yhat;
    if (opts.whiten) {
        out.P_base = ols(h).P;
        B0 = Y - S * (out.P_base * Yhat);
    } else {
        out.P_base = Matrix::Zero(m, n);
        B0 = Y;
    }

    double g = rp.scale;
    if (!(g > 0.0)) {
        g = B0.norm() / std::sqrt(static_cast<double>(n * T));
        if (!(g > 0.0)) g = Y.norm() / std::sqrt(static_cast<double>(n * T));
        if (!(g > 0.0)) g = 1.0;
    }
    out.residual_scale = 1.0 / (g * std::sqrt(static_cast<double>(T)));

    if (opts.compress && T > 2 * n) {
        Matrix stacked(2 * n, T);
        stacked << B0, H;
        const Eigen::ColPivHouseholderQR<Matrix> qr(stacked.transpose());
        const Eigen::Index r = std::max<Eigen::Index>(qr.rank(), 1);
        const Matrix Q = qr.householderQ() * Matrix::Identity(T, r);
        B0 = B0 * Q;
        H = H * Q;
    }
    B0 *= out.residual_scale;
    H *= out.residual_scale;
    out.columns = B0.cols();

    if (opts.whiten) {
        const Eigen::JacobiSVD<Matrix> svd(H, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Vector sv = svd.singularValues();
        const double cutoff = 1e-10 * (sv.size() ? sv(0) : 0.0);
        Eigen::Index k = 0;
        while (k < sv.size() && sv(k) > cutoff) ++k;
        out.rank = k;
        out.coef = svd.matrixV().leftCols(k);
        out.back_map = sv.head(k).cwiseInverse().asDiagonal() * svd.matrixU().leftCols(k).transpose();
    } else {
        out.rank = n;
        out.coef = H.transpose();
        out.back_map = Matrix::Identity(n, n);
    }
    out.E0 = B0;

    double w_scale = std::max(set.upper.cwiseAbs().maxCoeff(), set.lower.cwiseAbs().maxCoeff());
    if (!(w_scale > 0.0)) w_scale = 1.0;
    out.weight_scale = w_scale;
    const Matrix Wu = set.upper / w_scale;
    const Matrix Wl = set.lower / w_scale;
    const double collapse_tol = 1e-14;

    conic::Program& prog = out.program;
    const auto npack = static_cast<std::size_t>(n * (n + 1) / 2);
    out.upper_var.assign(npack, -1);
    out.lower_var.assign(npack, -1);
    out.diff_var.assign(npack, -1);

    std::vector<double> cost;
    int lp_size = 0;
    auto add_var = [&](std::string name, double c, std::vector<conic::Entry> entries) {
        prog.names.push_back(std::move(name));
        cost.push_back(c);
        prog.coeff.push_back(std::move(entries));
        return static_cast<int>(prog.coeff.size() - 1);
    };
    auto tag = [](const char* base, Eigen::Index i, Eigen::Index j) {
        return std::string(base) + "[" + std::to_string(i) + "," + std::to_string(j) + "]";
    };

    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            const double mult = i == j ? 1.0 : 2.0;
            const auto pi = packed_index(n, i, j);
            const int r = static_cast<int>(i);
            const int c = static_cast<int>(j);
            if (Wu(i, j) - Wl(i, j) <= collapse_tol) {
                out.diff_var[pi] = add_var(tag("Xd", i, j), mult * 0.5 * (Wu(i, j) + Wl(i, j)), {{0, r, c, 1.0}});
                continue;
            }
            out.upper_var[pi] = add_var(tag("Xu", i, j), mult * Wu(i, j), {{0, r, c, 1.0}, {1, lp_size, lp_size, 1.0}});
            ++lp_size;
            out.lower_var[pi] = add_var(tag("Xl", i, j), -mult * Wl(i, j), {{0, r, c, -1.0}, {1, lp_size, lp_size, 1.0}});
            ++lp_size;
        }
    }

    const Eigen::Index cols = out.columns;
    const char* coef_name = opts.whiten ? "K" : "P";
    out.coef_var.assign(static_cast<std::size_t>(m * out.rank), -1);
    for (Eigen::Index a = 0; a < m; ++a) {
        for (Eigen::Index b = 0; b < out.rank; ++b) {
            std::vector<conic::Entry> entries;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (S(i, a) == 0.0) continue;
                for (Eigen::Index t = 0; t < cols; ++t) {
                    const double v = -S(i, a) * out.coef(t, b);
                    if (v != 0.0) entries.push_back({0, static_cast<int>(i), static_cast<int>(n + t), v});
                }
            }
            out.coef_var[static_cast<std::size_t>(a * out.rank + b)] = add_var(tag(coef_name, a, b), 0.0, std::move(entries));
        }
    }

    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index t = 0; t < cols; ++t)
            if (B0(i, t) != 0.0) prog.constant.push_back({0, static_cast<int>(i), static_cast<int>(n + t), B0(i, t)});
    for (Eigen::Index t = 0; t < cols; ++t) {
        prog.constant.push_back({0, static_cast<int>(n + t), static_cast<int>(n + t), 1.0});
    }

    prog.cones.push_back({conic::ConeKind::psd, static_cast<int>(n + cols)});
    if (lp_size > 0) prog.cones.push_back({conic::ConeKind::nonneg, lp_size});
    prog.c = Eigen::Map<const Vector>(cost.data(), static_cast<Eigen::Index>(cost.size()));
    prog.validate();
    return out;
}

Matrix BuiltSdp::residual_block(const Eigen::VectorXd& x) const
{
    Matrix K(m, rank);
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = 0; b < rank; ++b) K(a, b) = x(coef_var[static_cast<std::size_t>(a * rank + b)]);
    return E0 - summing * K * coef.transpose();
}

RobustSolution solve_robust(const RobustProblem& rp, double tol, const SdpOptions& opts, bool verbose)
{
    const BuiltSdp sdp = build_sdp(rp, opts);
    conic::Settings settings;
    settings.tol = tol;
    settings.verbose = verbose;
    const conic::Result res = conic::solve(sdp.program, settings);

    RobustSolution sol;
    sol.solver_status = res.status;
    sol.kkt_residual = res.kkt_residual();
    sol.iterations = res.iterations;
    sol.message = res.message;
    sol.P = sdp.reconciliation(res.x);

    const Eigen::Index n = sdp.n;
    const double back = 1.0 / (sdp.residual_scale * sdp.residual_scale);
    sol.X_upper = Matrix::Zero(n, n);
    sol.X_lower = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i; j < n; ++j) {
            const auto pi = packed_index(n, i, j);
            double up = 0.0;
            double lo = 0.0;
            if (sdp.diff_var[pi] >= 0) {
                const double d = res.x(sdp.diff_var[pi]);
                up = std::max(d, 0.0);
                lo = std::max(-d, 0.0);
            } else {
                up = std::max(res.x(sdp.upper_var[pi]), 0.0);
                lo = std::max(res.x(sdp.lower_var[pi]), 0.0);
            }
            sol.X_upper(i, j) = sol.X_upper(j, i) = up * back;
            sol.X_lower(i, j) = sol.X_lower(j, i) = lo * back;
        }
    }
    sol.objective = rp.set.upper.cwiseProduct(sol.X_upper).sum() - rp.set.lower.cwiseProduct(sol.X_lower).sum();
    sol.duality_gap_cert = (res.primal_obj - res.dual_obj) * sdp.weight_scale * back;
    sol.worst_case_W = sdp.weight_scale * res.X.blocks.front().topLeftCorner(n, n);

    const Matrix& S = rp.h->summing();
    sol.ps_identity_gap = (sol.P * S - Matrix::Identity(sdp.m, sdp.m)).cwiseAbs().maxCoeff();
    return sol;
}

double box_only_bound(const Matrix& M, const UncertaintySet& set)
{
    return (M.array() > 0.0).select(M.cwiseProduct(set.upper), M.cwiseProduct(set.lower)).sum();
}

namespace {

Matrix psd_clip(const Matrix& A)
{
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (A + A.transpose()));
    const Vector lam = eig.eigenvalues().cwiseMax(0.0);
    return eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
}

Matrix box_clip(const Matrix& A, const Matrix& lo, const Matrix& hi)
{
    return A.cwiseMax(lo).cwiseMin(hi);
}

/// Dykstra's alternating projection onto box intersect PSD; returns the box iterate.
Matrix project(const Matrix& V, const Matrix& lo, const Matrix& hi, int rounds)
{
    Matrix x = V;
    Matrix y = V;
    Matrix p = Matrix::Zero(V.rows(), V.cols());
    Matrix q = Matrix::Zero(V.rows(), V.cols());
    for (int k = 0; k < rounds; ++k) {
        y = box_clip(x + p, lo, hi);
        p = x + p - y;
        const Matrix x_next = psd_clip(y + q);
        q = y + q - x_next;
        const double moved = (x_next - x).norm();
        x = x_next;
        if (moved < 1e-15 * (1.0 + x.norm()) && (x - y).norm() < 1e-13 * (1.0 + x.norm())) break;
    }
    return box_clip(x, lo, hi);
}

double min_eig(const Matrix& A)
{
    return Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (A + A.transpose()), Eigen::EigenvaluesOnly)
        .eigenvalues()
        .minCoeff();
}

}  // namespace

double inner_max_oracle(const Matrix& M_raw, const UncertaintySet& set, std::uint64_t seed)
{
    const Eigen::Index n = M_raw.rows();
    const double m_scale = std::max(M_raw.norm(), 1e-300);
    const double w_scale = std::max({set.upper.cwiseAbs().maxCoeff(), set.lower.cwiseAbs().maxCoeff(), 1e-300});
    const Matrix M = M_raw / m_scale;
    const Matrix lo = set.lower / w_scale;
    const Matrix hi = set.upper / w_scale;
    const double feas_tol = 1e-10;

    double best = -std::numeric_limits<double>::infinity();
    auto consider = [&](const Matrix& W) {
        const bool in_box = (W.array() >= lo.array() - 1e-14).all() && (W.array() <= hi.array() + 1e-14).all();
        if (in_box && min_eig(W) >= -feas_tol) best = std::max(best, M.cwiseProduct(W).sum());
    };

    if (n <= 3) {
        std::vector<std::pair<Eigen::Index, Eigen::Index>> cells;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i; j < n; ++j) cells.emplace_back(i, j);
        for (std::uint64_t mask = 0; mask < (1ULL << cells.size()); ++mask) {
            Matrix W(n, n);
            for (std::size_t c = 0; c < cells.size(); ++c) {
                const auto [i, j] = cells[c];
                W(i, j) = W(j, i) = (mask >> c) & 1ULL ? hi(i, j) : lo(i, j);
            }
            consider(W);
        }
    }

    const double step = std::max((hi - lo).norm(), 1e-3 * hi.diagonal().cwiseAbs().maxCoeff());
    for (int start = 0; start < 20; ++start) {
        auto eng = stream_engine(seed, static_cast<std::uint64_t>(start));
        Matrix W(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = i; j < n; ++j) {
                const double u = draw_unit(eng);
                W(i, j) = W(j, i) = lo(i, j) + u * (hi(i, j) - lo(i, j));
            }
        }
        W = project(W, lo, hi, 200);
        consider(W);
        for (int round = 0; round < 500; ++round) {
            W = project(W + step * M, lo, hi, 200);
            consider(W);
        }
    }
    return best * m_scale * w_scale;
}

double inner_max_oracle(const Matrix& P, const UncertaintySet& set, const RobustProblem& rp, std::uint64_t seed)
{
    const Matrix E = residual_matrix(rp, P);
    return inner_max_oracle(Matrix(E * E.transpose()), set, seed);
}

}  // namespace hrec

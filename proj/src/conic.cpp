#include "hrec/conic.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <limits>
#include <stdexcept>

namespace hrec::conic {

std::string to_string(Status s)
{
    switch (s) {
    case Status::optimal: return "optimal";
    case Status::near_optimal: return "near_optimal";
    case Status::failed: return "failed";
    }
    return "?";
}

double Result::kkt_residual() const
{
    return std::max({primal_infeas, dual_infeas, rel_gap});
}

void Program::validate() const
{
    if (c.size() != num_vars()) throw std::invalid_argument("conic: objective length does not match variables");
    if (!names.empty() && static_cast<int>(names.size()) != num_vars()) {
        throw std::invalid_argument("conic: names length does not match variables");
    }
    auto check = [&](const Entry& e) {
        if (e.cone < 0 || e.cone >= static_cast<int>(cones.size())) throw std::invalid_argument("conic: bad cone index");
        const Cone& k = cones[static_cast<std::size_t>(e.cone)];
        if (e.row < 0 || e.col < 0 || e.row >= k.size || e.col >= k.size) {
            throw std::invalid_argument("conic: entry outside its cone");
        }
        if (e.row > e.col) throw std::invalid_argument("conic: entries must be upper-triangular");
        if (k.kind == ConeKind::nonneg && e.row != e.col) {
            throw std::invalid_argument("conic: nonneg cone entries must be diagonal");
        }
    };
    for (const auto& e : constant) check(e);
    for (const auto& list : coeff)
        for (const auto& e : list) check(e);
}

void Program::dump(std::ostream& os) const
{
    os << "# conic program: minimize c'x s.t. F0 + sum_i x_i F_i in K\n";
    os << "cones " << cones.size() << '\n';
    for (std::size_t k = 0; k < cones.size(); ++k) {
        os << "cone " << k << ' ' << (cones[k].kind == ConeKind::psd ? "psd" : "nonneg") << ' ' << cones[k].size
           << '\n';
    }
    os << "variables " << num_vars() << '\n';
    const auto old_precision = os.precision(17);
    for (int i = 0; i < num_vars(); ++i) {
        os << "var " << i << ' ' << (names.empty() ? "x" + std::to_string(i) : names[static_cast<std::size_t>(i)])
           << " c=" << c(i) << '\n';
        for (const auto& e : coeff[static_cast<std::size_t>(i)]) {
            os << "  F " << e.cone << ' ' << e.row << ' ' << e.col << ' ' << e.value << '\n';
        }
    }
    os << "constant " << constant.size() << '\n';
    for (const auto& e : constant) os << "  F0 " << e.cone << ' ' << e.row << ' ' << e.col << ' ' << e.value << '\n';
    os.precision(old_precision);
}

namespace {

BlockMatrix zeros(const Program& prog)
{
    BlockMatrix out;
    for (const auto& k : prog.cones) {
        out.blocks.push_back(k.kind == ConeKind::psd ? Matrix::Zero(k.size, k.size) : Matrix::Zero(k.size, 1));
    }
    return out;
}

BlockMatrix identity(const Program& prog, const std::vector<double>& scale)
{
    BlockMatrix out;
    for (std::size_t k = 0; k < prog.cones.size(); ++k) {
        const int n = prog.cones[k].size;
        out.blocks.push_back(prog.cones[k].kind == ConeKind::psd ? Matrix(scale[k] * Matrix::Identity(n, n))
                                                                  : Matrix(Matrix::Constant(n, 1, scale[k])));
    }
    return out;
}

void accumulate(const Program& prog, BlockMatrix& M, const std::vector<Entry>& entries, double scale)
{
    for (const auto& e : entries) {
        Matrix& B = M.blocks[static_cast<std::size_t>(e.cone)];
        if (prog.cones[static_cast<std::size_t>(e.cone)].kind == ConeKind::nonneg) {
            B(e.row, 0) += scale * e.value;
        } else {
            B(e.row, e.col) += scale * e.value;
            if (e.row != e.col) B(e.col, e.row) += scale * e.value;
        }
    }
}

/// <F, T> for a general (not necessarily symmetric) T.
double pair_inner(const Program& prog, const std::vector<Entry>& entries, const BlockMatrix& T)
{
    double s = 0.0;
    for (const auto& e : entries) {
        const Matrix& B = T.blocks[static_cast<std::size_t>(e.cone)];
        if (prog.cones[static_cast<std::size_t>(e.cone)].kind == ConeKind::nonneg) {
            s += e.value * B(e.row, 0);
        } else if (e.row == e.col) {
            s += e.value * B(e.row, e.row);
        } else {
            s += e.value * (B(e.row, e.col) + B(e.col, e.row));
        }
    }
    return s;
}

Vector apply_A(const Program& prog, const BlockMatrix& T)
{
    Vector out(prog.num_vars());
    for (int i = 0; i < prog.num_vars(); ++i) out(i) = pair_inner(prog, prog.coeff[static_cast<std::size_t>(i)], T);
    return out;
}

BlockMatrix apply_At(const Program& prog, const Vector& y)
{
    BlockMatrix out = zeros(prog);
    for (int i = 0; i < prog.num_vars(); ++i) {
        if (y(i) != 0.0) accumulate(prog, out, prog.coeff[static_cast<std::size_t>(i)], y(i));
    }
    return out;
}

double inner(const BlockMatrix& A, const BlockMatrix& B)
{
    double s = 0.0;
    for (std::size_t k = 0; k < A.blocks.size(); ++k) s += A.blocks[k].cwiseProduct(B.blocks[k]).sum();
    return s;
}

double norm(const BlockMatrix& A)
{
    double s = 0.0;
    for (const auto& b : A.blocks) s += b.squaredNorm();
    return std::sqrt(s);
}

void axpy(BlockMatrix& Y, double a, const BlockMatrix& X)
{
    for (std::size_t k = 0; k < Y.blocks.size(); ++k) Y.blocks[k] += a * X.blocks[k];
}

BlockMatrix minus(const BlockMatrix& A, const BlockMatrix& B)
{
    BlockMatrix out = A;
    axpy(out, -1.0, B);
    return out;
}

void symmetrize(const Program& prog, BlockMatrix& A)
{
    for (std::size_t k = 0; k < A.blocks.size(); ++k) {
        if (prog.cones[k].kind == ConeKind::psd) A.blocks[k] = 0.5 * (A.blocks[k] + A.blocks[k].transpose()).eval();
    }
}

/// Largest step keeping V + a*dV in the cone, scaled by `fraction` and capped at 1.
double max_step(const Program& prog, const BlockMatrix& V, const BlockMatrix& dV, double fraction)
{
    double amax = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < V.blocks.size(); ++k) {
        if (prog.cones[k].kind == ConeKind::nonneg) {
            for (Eigen::Index i = 0; i < V.blocks[k].rows(); ++i) {
                const double d = dV.blocks[k](i, 0);
                if (d < 0.0) amax = std::min(amax, -V.blocks[k](i, 0) / d);
            }
        } else {
            const Eigen::LLT<Matrix> llt(V.blocks[k]);
            if (llt.info() != Eigen::Success) return 0.0;
            const Matrix Linv = llt.matrixL().solve(Matrix::Identity(V.blocks[k].rows(), V.blocks[k].cols()));
            Matrix W = Linv * dV.blocks[k] * Linv.transpose();
            W = 0.5 * (W + W.transpose()).eval();
            const double lmin = Eigen::SelfAdjointEigenSolver<Matrix>(W, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
            if (lmin < 0.0) amax = std::min(amax, -1.0 / lmin);
        }
    }
    return std::min(1.0, fraction * amax);
}

/// Per-cone lists of (variable, entries) for Schur-complement assembly.
struct ConeIndex {
    std::vector<std::vector<std::pair<int, std::vector<Entry>>>> by_cone;
};

ConeIndex index_entries(const Program& prog)
{
    ConeIndex idx;
    idx.by_cone.resize(prog.cones.size());
    for (int i = 0; i < prog.num_vars(); ++i) {
        std::vector<std::vector<Entry>> split(prog.cones.size());
        for (const auto& e : prog.coeff[static_cast<std::size_t>(i)]) split[static_cast<std::size_t>(e.cone)].push_back(e);
        for (std::size_t k = 0; k < split.size(); ++k) {
            if (!split[k].empty()) idx.by_cone[k].emplace_back(i, std::move(split[k]));
        }
    }
    return idx;
}

/// M_ij = <F_i, Z^{-1} F_j X> (HKM Schur complement).
Matrix schur(const Program& prog, const ConeIndex& idx, const BlockMatrix& Zinv, const BlockMatrix& X)
{
    const int nv = prog.num_vars();
    Matrix M = Matrix::Zero(nv, nv);
    for (std::size_t k = 0; k < prog.cones.size(); ++k) {
        const auto& vars = idx.by_cone[k];
        if (prog.cones[k].kind == ConeKind::nonneg) {
            const Matrix& xv = X.blocks[k];
            const Matrix& ziv = Zinv.blocks[k];
            // group by position
            std::vector<std::vector<std::pair<int, double>>> at(static_cast<std::size_t>(prog.cones[k].size));
            for (const auto& [var, entries] : vars)
                for (const auto& e : entries) at[static_cast<std::size_t>(e.row)].emplace_back(var, e.value);
            for (std::size_t p = 0; p < at.size(); ++p) {
                const double w = xv(static_cast<Eigen::Index>(p), 0) * ziv(static_cast<Eigen::Index>(p), 0);
                for (const auto& [a, va] : at[p])
                    for (const auto& [b, vb] : at[p]) M(a, b) += w * va * vb;
            }
            continue;
        }
        const Matrix& Xk = X.blocks[k];
        const Matrix& Zk = Zinv.blocks[k];
        const Eigen::Index N = Xk.rows();
        Matrix G(N, N);
        for (const auto& [j, entries_j] : vars) {
            G.setZero();
            for (const auto& e : entries_j) {
                G.row(e.row) += e.value * Xk.row(e.col);
                if (e.row != e.col) G.row(e.col) += e.value * Xk.row(e.row);
            }
            const Matrix B = Zk * G;
            for (const auto& [i, entries_i] : vars) {
                if (i < j) continue;
                double s = 0.0;
                for (const auto& e : entries_i) {
                    s += e.row == e.col ? e.value * B(e.row, e.row) : e.value * (B(e.row, e.col) + B(e.col, e.row));
                }
                M(i, j) += s;
                if (i != j) M(j, i) += s;
            }
        }
    }
    return M;
}

struct Direction {
    Vector dx;
    BlockMatrix dZ;
    BlockMatrix dX;
};

}  // namespace

BlockMatrix affine_value(const Program& prog, const Vector& x)
{
    BlockMatrix Z = apply_At(prog, x);
    accumulate(prog, Z, prog.constant, 1.0);
    return Z;
}

Result solve(const Program& prog, const Settings& settings)
{
    prog.validate();
    const int nv = prog.num_vars();
    const ConeIndex idx = index_entries(prog);

    BlockMatrix F0 = zeros(prog);
    accumulate(prog, F0, prog.constant, 1.0);
    const double normF0 = norm(F0);
    const double normC = prog.c.norm();

    double total_dim = 0.0;
    for (const auto& k : prog.cones) total_dim += k.size;

    // Starting point in the style of SDPT3: scaled identities.
    std::vector<double> xi(prog.cones.size()), eta(prog.cones.size());
    std::vector<double> normF(static_cast<std::size_t>(nv), 0.0);
    for (int i = 0; i < nv; ++i) {
        BlockMatrix Fi = zeros(prog);
        accumulate(prog, Fi, prog.coeff[static_cast<std::size_t>(i)], 1.0);
        normF[static_cast<std::size_t>(i)] = norm(Fi);
    }
    for (std::size_t k = 0; k < prog.cones.size(); ++k) {
        const double nk = prog.cones[k].size;
        double ratio = 0.0;
        double fmax = normF0;
        for (int i = 0; i < nv; ++i) {
            ratio = std::max(ratio, (1.0 + std::abs(prog.c(i))) / (1.0 + normF[static_cast<std::size_t>(i)]));
            fmax = std::max(fmax, normF[static_cast<std::size_t>(i)]);
        }
        xi[k] = std::max({10.0, std::sqrt(nk), nk * ratio});
        eta[k] = std::max({10.0, std::sqrt(nk), fmax});
    }

    Result res;
    Vector x = Vector::Zero(nv);
    BlockMatrix X = identity(prog, xi);
    BlockMatrix Z = identity(prog, eta);

    auto measure = [&](Result& r, const Vector& xv, const BlockMatrix& Xv, const BlockMatrix& Zv) {
        r.primal_obj = prog.c.dot(xv);
        r.dual_obj = -inner(F0, Xv);
        r.primal_infeas = norm(minus(Zv, affine_value(prog, xv))) / (1.0 + normF0);
        r.dual_infeas = (prog.c - apply_A(prog, Xv)).norm() / (1.0 + normC);
        const double denom = 1.0 + std::abs(r.primal_obj) + std::abs(r.dual_obj);
        r.rel_gap = std::max(std::abs(r.primal_obj - r.dual_obj), std::abs(inner(Xv, Zv))) / denom;
    };

    Result best;
    best.primal_infeas = best.dual_infeas = best.rel_gap = std::numeric_limits<double>::infinity();
    int stalls = 0;

    for (int iter = 0; iter <= settings.max_iter; ++iter) {
        Result cur;
        measure(cur, x, X, Z);
        cur.iterations = iter;
        if (cur.kkt_residual() < best.kkt_residual()) {
            best = cur;
            best.x = x;
            best.X = X;
            best.Z = Z;
        }
        if (settings.verbose) {
            std::cerr << "conic it " << std::setw(3) << iter << "  pobj " << std::setw(14) << cur.primal_obj
                      << "  dobj " << std::setw(14) << cur.dual_obj << "  pinf " << cur.primal_infeas << "  dinf "
                      << cur.dual_infeas << "  gap " << cur.rel_gap << '\n';
        }
        if (cur.kkt_residual() <= settings.tol) {
            best = cur;
            best.x = x;
            best.X = X;
            best.Z = Z;
            best.status = Status::optimal;
            best.message = "converged";
            return best;
        }
        if (iter == settings.max_iter) break;
        if (best.kkt_residual() < 1e3 * settings.tol && cur.kkt_residual() > 1e2 * best.kkt_residual()) {
            best.message = "numerical accuracy limit";
            break;
        }

        // Factorizations for this iterate.
        BlockMatrix Zinv = zeros(prog);
        bool ok = true;
        for (std::size_t k = 0; k < prog.cones.size() && ok; ++k) {
            if (prog.cones[k].kind == ConeKind::nonneg) {
                Zinv.blocks[k] = Z.blocks[k].cwiseInverse();
            } else {
                const Eigen::LLT<Matrix> llt(Z.blocks[k]);
                if (llt.info() != Eigen::Success) ok = false;
                Zinv.blocks[k] = llt.solve(Matrix::Identity(Z.blocks[k].rows(), Z.blocks[k].cols()));
                Zinv.blocks[k] = 0.5 * (Zinv.blocks[k] + Zinv.blocks[k].transpose()).eval();
            }
        }
        if (!ok) {
            best.message = "slack lost positive definiteness";
            break;
        }

        const double mu = inner(X, Z) / total_dim;
        const Matrix M = schur(prog, idx, Zinv, X);
        Eigen::LLT<Matrix> mfac(M);
        if (mfac.info() != Eigen::Success) {
            // Tiny diagonal regularization for nearly dependent constraints.
            const double reg = 1e-12 * std::max(1.0, M.diagonal().maxCoeff());
            mfac.compute(M + reg * Matrix::Identity(nv, nv));
            if (mfac.info() != Eigen::Success) {
                best.message = "Schur complement not positive definite";
                break;
            }
        }

        const BlockMatrix Rd = minus(Z, affine_value(prog, x));
        const Vector rp = prog.c - apply_A(prog, X);

        // Z^{-1} Rd X is shared by both solves.
        BlockMatrix ZiRdX = zeros(prog);
        for (std::size_t k = 0; k < prog.cones.size(); ++k) {
            ZiRdX.blocks[k] = prog.cones[k].kind == ConeKind::nonneg
                                  ? Matrix(Zinv.blocks[k].cwiseProduct(Rd.blocks[k]).cwiseProduct(X.blocks[k]))
                                  : Matrix(Zinv.blocks[k] * Rd.blocks[k] * X.blocks[k]);
        }

        auto direction = [&](double sigma, const BlockMatrix* corr) {
            BlockMatrix Tm = zeros(prog);
            for (std::size_t k = 0; k < prog.cones.size(); ++k) {
                const bool lp = prog.cones[k].kind == ConeKind::nonneg;
                Tm.blocks[k] = sigma * mu * Zinv.blocks[k] - X.blocks[k] + ZiRdX.blocks[k];
                if (corr) {
                    Tm.blocks[k] -= lp ? Matrix(Zinv.blocks[k].cwiseProduct(corr->blocks[k]))
                                       : Matrix(Zinv.blocks[k] * corr->blocks[k]);
                }
            }
            Direction d;
            const Vector rhs = apply_A(prog, Tm) - rp;
            d.dx = mfac.solve(rhs);
            for (int refine = 0; refine < 2; ++refine) d.dx += mfac.solve(rhs - M * d.dx);
            d.dZ = apply_At(prog, d.dx);
            axpy(d.dZ, -1.0, Rd);
            d.dX = Tm;
            for (std::size_t k = 0; k < prog.cones.size(); ++k) {
                if (prog.cones[k].kind == ConeKind::nonneg) {
                    d.dX.blocks[k] -= Zinv.blocks[k].cwiseProduct(d.dZ.blocks[k]).cwiseProduct(X.blocks[k]);
                } else {
                    d.dX.blocks[k] -= Zinv.blocks[k] * d.dZ.blocks[k] * X.blocks[k];
                }
            }
            symmetrize(prog, d.dX);
            symmetrize(prog, d.dZ);
            return d;
        };

        // Predictor.
        const Direction pred = direction(0.0, nullptr);
        const double ap = max_step(prog, X, pred.dX, 1.0);
        const double ad = max_step(prog, Z, pred.dZ, 1.0);
        BlockMatrix Xa = X;
        axpy(Xa, ap, pred.dX);
        BlockMatrix Za = Z;
        axpy(Za, ad, pred.dZ);
        const double mu_aff = inner(Xa, Za) / total_dim;
        const double sigma = std::clamp(std::pow(std::max(mu_aff, 0.0) / mu, 3.0), 0.0, 1.0);

        // Corrector with the second-order term dZ_a * dX_a.
        BlockMatrix corr = zeros(prog);
        for (std::size_t k = 0; k < prog.cones.size(); ++k) {
            corr.blocks[k] = prog.cones[k].kind == ConeKind::nonneg
                                 ? Matrix(pred.dZ.blocks[k].cwiseProduct(pred.dX.blocks[k]))
                                 : Matrix(pred.dZ.blocks[k] * pred.dX.blocks[k]);
        }
        const Direction step = direction(sigma, &corr);
        const double fp = max_step(prog, X, step.dX, settings.step_fraction);
        const double fd = max_step(prog, Z, step.dZ, settings.step_fraction);

        axpy(X, fp, step.dX);
        x += fd * step.dx;
        axpy(Z, fd, step.dZ);
        symmetrize(prog, X);
        symmetrize(prog, Z);

        if (fp < 1e-10 && fd < 1e-10) {
            if (++stalls >= 3) {
                best.message = "step length stalled";
                break;
            }
        } else {
            stalls = 0;
        }
    }

    if (best.message.empty()) best.message = "iteration limit";
    best.status = best.kkt_residual() <= 100.0 * settings.tol ? Status::near_optimal : Status::failed;
    if (best.x.size() == 0) {
        best.x = x;
        best.X = X;
        best.Z = Z;
    }
    return best;
}

}  // namespace hrec::conic

#include "hrec/covariance.hpp"

#include "hrec/csv.hpp"
#include "hrec/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

namespace hrec {

Matrix residuals(const SeriesPanel& obs, const SeriesPanel& insample)
{
    if (obs.values.rows() != insample.values.rows() || obs.values.cols() != insample.values.cols()) {
        throw std::invalid_argument("covariance: observation and in-sample panels are not aligned");
    }
    return obs.values - insample.values;
}

CovEstimate estimate_cov_from_residuals(const Matrix& resid)
{
    if (resid.cols() < 2) throw std::invalid_argument("covariance: need T >= 2");
    CovEstimate cov;
    const Vector mean = resid.rowwise().mean();
    cov.centered = resid.colwise() - mean;
    cov.W = cov.centered * cov.centered.transpose() / static_cast<double>(resid.cols() - 1);
    cov.W = 0.5 * (cov.W + cov.W.transpose()).eval();
    cov.T_used = static_cast<std::size_t>(resid.cols());
    return cov;
}

CovEstimate estimate_cov(const SeriesPanel& obs, const SeriesPanel& insample)
{
    return estimate_cov_from_residuals(residuals(obs, insample));
}

double shrinkage_intensity(const CovEstimate& cov)
{
    const Matrix& X = cov.centered;
    const Eigen::Index n = X.rows();
    const double T = static_cast<double>(X.cols());
    if (X.cols() < 2) throw std::invalid_argument("shrink: need T >= 2");

    // Standardize each series; zero-variance series drop out of both sums.
    Matrix Z = Matrix::Zero(n, X.cols());
    std::vector<bool> active(static_cast<std::size_t>(n), false);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double sd = std::sqrt(X.row(i).squaredNorm() / (T - 1.0));
        if (sd > 0.0) {
            Z.row(i) = X.row(i) / sd;
            active[static_cast<std::size_t>(i)] = true;
        }
    }

    double num = 0.0;
    double den = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!active[static_cast<std::size_t>(i)]) continue;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            if (!active[static_cast<std::size_t>(j)]) continue;
            const Eigen::ArrayXd w = Z.row(i).array() * Z.row(j).array();
            const double w_bar = w.mean();
            const double r = T / (T - 1.0) * w_bar;
            const double var_r = T / std::pow(T - 1.0, 3) * (w - w_bar).square().sum();
            num += var_r;
            den += r * r;
        }
    }
    if (den <= 0.0) return 1.0;
    return std::clamp(num / den, 0.0, 1.0);
}

CovEstimate shrink_with(const CovEstimate& cov, double lambda)
{
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw std::invalid_argument("shrink: lambda outside [0, 1]");
    CovEstimate out = cov;
    out.lambda = lambda;
    out.W = (1.0 - lambda) * cov.W;
    out.W.diagonal() = cov.W.diagonal();
    return out;
}

CovEstimate shrink(const CovEstimate& cov)
{
    return shrink_with(cov, shrinkage_intensity(cov));
}

double percentile_type7(std::vector<double> values, double q)
{
    if (values.empty()) throw std::invalid_argument("percentile: no values");
    q = std::clamp(q, 0.0, 1.0);
    std::sort(values.begin(), values.end());
    const double h = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

Eigen::Index packed_size(std::size_t n) { return static_cast<Eigen::Index>(n * (n + 1) / 2); }

void pack_upper(const Matrix& W, Eigen::Ref<Vector> out)
{
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < W.rows(); ++i)
        for (Eigen::Index j = i; j < W.cols(); ++j) out(k++) = W(i, j);
}

}  // namespace

Matrix bootstrap_replicates(const Matrix& resid, std::size_t n_boot, std::uint64_t seed, double* lambda_out)
{
    if (n_boot < 1) throw std::invalid_argument("uncertainty set: N_B must be >= 1");
    const double lambda = shrinkage_intensity(estimate_cov_from_residuals(resid));
    if (lambda_out) *lambda_out = lambda;

    const auto n = static_cast<std::size_t>(resid.rows());
    const Eigen::Index T = resid.cols();
    Matrix packed(packed_size(n), static_cast<Eigen::Index>(n_boot));
    Matrix sample(resid.rows(), T);
    for (std::size_t s = 0; s < n_boot; ++s) {
        auto eng = stream_engine(seed, s);
        for (Eigen::Index t = 0; t < T; ++t) {
            sample.col(t) = resid.col(static_cast<Eigen::Index>(draw_index(eng, static_cast<std::uint64_t>(T))));
        }
        const CovEstimate shrunk = shrink_with(estimate_cov_from_residuals(sample), lambda);
        pack_upper(shrunk.W, packed.col(static_cast<Eigen::Index>(s)));
    }
    return packed;
}

UncertaintySet bounds_from_replicates(const Matrix& packed, std::size_t n, double alpha)
{
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("uncertainty set: alpha must be in (0, 1]");
    if (packed.rows() != packed_size(n)) throw std::invalid_argument("uncertainty set: packed size mismatch");
    const auto N = static_cast<Eigen::Index>(n);
    UncertaintySet set;
    set.alpha = alpha;
    set.n_boot = static_cast<std::size_t>(packed.cols());
    set.lower.resize(N, N);
    set.upper.resize(N, N);
    Eigen::Index k = 0;
    std::vector<double> values(static_cast<std::size_t>(packed.cols()));
    for (Eigen::Index i = 0; i < N; ++i) {
        for (Eigen::Index j = i; j < N; ++j, ++k) {
            for (Eigen::Index s = 0; s < packed.cols(); ++s) values[static_cast<std::size_t>(s)] = packed(k, s);
            const double hi = percentile_type7(values, (1.0 + alpha) / 2.0);
            const double lo = percentile_type7(values, (1.0 - alpha) / 2.0);
            set.upper(i, j) = set.upper(j, i) = hi;
            set.lower(i, j) = set.lower(j, i) = lo;
        }
    }
    return set;
}

FeasibilityCheck check_strict_feasibility(const UncertaintySet& set, const Matrix& reference)
{
    const Eigen::Index n = set.lower.rows();
    const double eps = 1e-9 * std::max(set.upper.diagonal().cwiseAbs().maxCoeff(), 0.0);
    FeasibilityCheck check;
    check.witness = reference;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double lo = set.lower(i, j) + eps;
            const double hi = set.upper(i, j) - eps;
            check.witness(i, j) = lo <= hi ? std::clamp(reference(i, j), lo, hi)
                                           : 0.5 * (set.lower(i, j) + set.upper(i, j));
        }
    }
    check.witness = 0.5 * (check.witness + check.witness.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(check.witness, Eigen::EigenvaluesOnly);
    check.min_eigenvalue = eig.eigenvalues().minCoeff();
    check.ok = check.min_eigenvalue > 0.0;
    return check;
}

bool enforce_feasibility(UncertaintySet& set, const Matrix& reference,
                         const std::function<void(const std::string&)>& warn)
{
    if (check_strict_feasibility(set, reference).ok) return true;
    const double floor_width = 1e-6 * std::max(set.upper.diagonal().cwiseAbs().maxCoeff(), 1e-300);
    for (int step = 1; step <= 10; ++step) {
        const Matrix width = (set.upper - set.lower).cwiseMax(floor_width);
        set.lower -= 0.05 * width;
        set.upper += 0.05 * width;
        set.inflations = step;
        const auto check = check_strict_feasibility(set, reference);
        if (warn) {
            std::ostringstream msg;
            msg << "uncertainty set: no strictly feasible PD point, widened box by 5% (step " << step
                << ", min eigenvalue " << check.min_eigenvalue << ")";
            warn(msg.str());
        }
        if (check.ok) return true;
    }
    return false;
}

UncertaintySet build_uncertainty_set(const SeriesPanel& obs, const SeriesPanel& insample, std::size_t n_boot,
                                     double alpha, std::uint64_t seed)
{
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("uncertainty set: alpha must be in (0, 1]");
    const Matrix resid = residuals(obs, insample);
    const Matrix packed = bootstrap_replicates(resid, n_boot, seed);
    UncertaintySet set = bounds_from_replicates(packed, obs.n(), alpha);
    set.seed = seed;
    const bool ok = enforce_feasibility(set, shrink(estimate_cov_from_residuals(resid)).W,
                                        [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; });
    if (!ok) std::cerr << "warning: uncertainty set: still no strictly feasible PD point after 10 widenings\n";
    return set;
}

void save_uncertainty_set(const UncertaintySet& set, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("uncertainty set: cannot write " + path.string());
    out << "n,alpha,n_boot,seed\n"
        << set.n() << ',' << format_double(set.alpha) << ',' << set.n_boot << ',' << set.seed << '\n';
    auto dump = [&](const char* name, const Matrix& M) {
        out << name << '\n';
        for (Eigen::Index i = 0; i < M.rows(); ++i) {
            for (Eigen::Index j = 0; j < M.cols(); ++j) out << (j ? "," : "") << format_double(M(i, j));
            out << '\n';
        }
    };
    dump("lower", set.lower);
    dump("upper", set.upper);
}

UncertaintySet load_uncertainty_set(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("uncertainty set: cannot open " + path.string());
    std::string line;
    auto next = [&]() -> std::string {
        if (!std::getline(in, line)) throw std::runtime_error("uncertainty set: truncated " + path.string());
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
    };
    if (next() != "n,alpha,n_boot,seed") throw std::runtime_error("uncertainty set: bad header");
    const auto meta = split_csv_line(next());
    if (meta.size() != 4) throw std::runtime_error("uncertainty set: bad metadata row");
    UncertaintySet set;
    const auto n = static_cast<Eigen::Index>(std::stoul(meta[0]));
    set.alpha = parse_double(meta[1]).value_or(-1.0);
    set.n_boot = std::stoul(meta[2]);
    set.seed = std::stoull(meta[3]);
    auto read_block = [&](const char* name) {
        if (next() != name) throw std::runtime_error(std::string("uncertainty set: expected '") + name + "'");
        Matrix M(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto cells = split_csv_line(next());
            if (static_cast<Eigen::Index>(cells.size()) != n) throw std::runtime_error("uncertainty set: bad row");
            for (Eigen::Index j = 0; j < n; ++j) {
                const auto v = parse_double(cells[static_cast<std::size_t>(j)]);
                if (!v) throw std::runtime_error("uncertainty set: non-numeric cell");
                M(i, j) = *v;
            }
        }
        return M;
    };
    set.lower = read_block("lower");
    set.upper = read_block("upper");
    return set;
}

}  // namespace hrec

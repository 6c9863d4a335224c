#include "doctest.h"

#include "hrec/covariance.hpp"
#include "hrec/rng.hpp"
#include "oracles.hpp"

#include <filesystem>

using namespace hrec;

namespace {

std::shared_ptr<const Hierarchy> three_level()
{
    return std::make_shared<const Hierarchy>(build_hierarchy(
        {{"Total", "A"}, {"Total", "B"}, {"A", "AA"}, {"A", "AB"}, {"A", "AC"}, {"B", "BA"}, {"B", "BB"}}));
}

/// Residuals with a shared factor so correlations are nonzero.
Matrix correlated_residuals(std::mt19937_64& eng, Eigen::Index n, Eigen::Index T)
{
    const Matrix f = oracle::random_matrix(eng, 1, T);
    Matrix R = oracle::random_matrix(eng, n, T);
    for (Eigen::Index i = 0; i < n; ++i) R.row(i) += (0.5 + 0.2 * static_cast<double>(i)) * f;
    return R;
}

std::pair<SeriesPanel, SeriesPanel> panels_with_residuals(std::shared_ptr<const Hierarchy> h, const Matrix& R)
{
    const Matrix Y = h->summing() * Matrix::Constant(static_cast<Eigen::Index>(h->m()), R.cols(), 10.0);
    SeriesPanel obs{h, Y, integer_timestamps(1, static_cast<std::size_t>(R.cols())), PanelKind::observations};
    SeriesPanel fit{h, Y - R, obs.timestamps, PanelKind::forecasts};
    return {obs, fit};
}

double min_eig(const Matrix& A)
{
    return Eigen::SelfAdjointEigenSolver<Matrix>(A, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

}  // namespace

TEST_CASE("sample covariance of small residual sets")
{
    Matrix R(2, 4);
    R << 1, -1, 0, 0,
         0, 0, 1, -1;
    const CovEstimate c = estimate_cov_from_residuals(R);
    CHECK((c.W - Matrix(Vector::Constant(2, 2.0 / 3.0).asDiagonal())).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(c.lambda == 0.0);
    CHECK(c.T_used == 4);

    CHECK(estimate_cov_from_residuals(Matrix::Zero(3, 5)).W == Matrix::Zero(3, 3));

    std::mt19937_64 eng(1);
    for (int rep = 0; rep < 10; ++rep) {
        const Matrix X = oracle::random_matrix(eng, 5, 20, 3.0);
        const Matrix W = estimate_cov_from_residuals(X).W;
        CHECK((W - oracle::brute_covariance(X)).cwiseAbs().maxCoeff() < 1e-12 * (1 + W.norm()));
        CHECK((estimate_cov_from_residuals(2.5 * X).W - 6.25 * W).cwiseAbs().maxCoeff() < 1e-12 * (1 + W.norm()));
    }
    CHECK_THROWS_AS(estimate_cov_from_residuals(Matrix::Ones(3, 1)), std::invalid_argument);
}

TEST_CASE("estimate_cov uses observation minus in-sample residuals")
{
    std::mt19937_64 eng(2);
    auto h = three_level();
    const Matrix R = correlated_residuals(eng, 8, 30);
    const auto [obs, fit] = panels_with_residuals(h, R);
    CHECK((estimate_cov(obs, fit).W - oracle::brute_covariance(R)).cwiseAbs().maxCoeff() < 1e-12);
    SeriesPanel short_fit = fit.slice(0, 20);
    CHECK_THROWS_AS(estimate_cov(obs, short_fit), std::invalid_argument);
}

TEST_CASE("shrinkage matches the reference formulas")
{
    std::mt19937_64 eng(3);
    for (int rep = 0; rep < 20; ++rep) {
        const Eigen::Index n = 2 + rep % 6;
        const Matrix X = correlated_residuals(eng, n, 50);
        const CovEstimate s = shrink(estimate_cov_from_residuals(X));
        const auto [W_ref, lambda_ref] = oracle::schafer_strimmer_reference(X);
        CHECK(std::abs(s.lambda - lambda_ref) < 1e-12);
        CHECK((s.W - W_ref).cwiseAbs().maxCoeff() < 1e-12 * (1 + W_ref.norm()));
        CHECK(s.lambda >= 0.0);
        CHECK(s.lambda <= 1.0);
        CHECK(s.W.diagonal() == estimate_cov_from_residuals(X).W.diagonal());
        if (s.lambda > 0.0) CHECK(min_eig(s.W) > 0.0);
    }
}

TEST_CASE("shrinkage degenerate cases")
{
    // uncorrelated by construction: every off-diagonal correlation is exactly zero
    Matrix R(2, 4);
    R << 1, -1, 1, -1,
         1, 1, -1, -1;
    const CovEstimate s = shrink(estimate_cov_from_residuals(R));
    CHECK(s.lambda == 1.0);
    CHECK(s.W == Matrix(s.W.diagonal().asDiagonal()));

    // a constant series drops out; the rest still shrink
    std::mt19937_64 eng(4);
    Matrix X = correlated_residuals(eng, 4, 30);
    X.row(2).setConstant(1.0);
    const CovEstimate t = shrink(estimate_cov_from_residuals(X));
    Matrix X3(3, 30);
    X3 << X.row(0), X.row(1), X.row(3);
    CHECK(t.lambda == doctest::Approx(shrink(estimate_cov_from_residuals(X3)).lambda).epsilon(1e-14));
    CHECK(t.W(2, 2) == 0.0);

    // perfectly stable correlation: constant standardized products give var(r) = 0, lambda = 0
    Matrix Y(2, 20);
    for (Eigen::Index t = 0; t < 20; ++t) Y(0, t) = t % 2 ? 1.0 : -1.0;
    Y.row(1) = 3.0 * Y.row(0);
    const CovEstimate u = shrink(estimate_cov_from_residuals(Y));
    CHECK(u.lambda < 1e-12);
    CHECK((u.W - estimate_cov_from_residuals(Y).W).norm() < 1e-10);

    CHECK_THROWS_AS(shrink_with(u, 1.5), std::invalid_argument);
}

TEST_CASE("type-7 percentiles")
{
    CHECK(percentile_type7({3, 1, 2, 4}, 0.0) == 1.0);
    CHECK(percentile_type7({3, 1, 2, 4}, 1.0) == 4.0);
    CHECK(percentile_type7({3, 1, 2, 4}, 0.5) == 2.5);
    CHECK(percentile_type7({10, 20}, 0.25) == 12.5);
    CHECK(percentile_type7({7}, 0.3) == 7.0);
    CHECK_THROWS(percentile_type7({}, 0.5));
}

TEST_CASE("bootstrap replicates follow the seeded paired resampling")
{
    std::mt19937_64 eng(5);
    const Matrix R = correlated_residuals(eng, 3, 25);
    double lambda = -1.0;
    const Matrix packed = bootstrap_replicates(R, 6, 99, &lambda);
    CHECK(lambda == doctest::Approx(oracle::schafer_strimmer_reference(R).second).epsilon(1e-12));
    for (std::uint64_t s = 0; s < 6; ++s) {
        auto stream = stream_engine(99, s);
        Matrix sample(3, 25);
        for (Eigen::Index t = 0; t < 25; ++t) sample.col(t) = R.col(static_cast<Eigen::Index>(draw_index(stream, 25)));
        Matrix W = oracle::brute_covariance(sample);
        for (Eigen::Index i = 0; i < 3; ++i)
            for (Eigen::Index j = 0; j < 3; ++j)
                if (i != j) W(i, j) *= 1.0 - lambda;
        Eigen::Index k = 0;
        for (Eigen::Index i = 0; i < 3; ++i)
            for (Eigen::Index j = i; j < 3; ++j, ++k)
                CHECK(packed(k, static_cast<Eigen::Index>(s)) == doctest::Approx(W(i, j)).epsilon(1e-12));
    }
    CHECK(bootstrap_replicates(R, 6, 99) == packed);
    CHECK(bootstrap_replicates(R, 6, 100) != packed);
    CHECK_THROWS_AS(bootstrap_replicates(R, 0, 1), std::invalid_argument);
}

TEST_CASE("box bounds: endpoints, monotonicity in alpha, single replicate")
{
    std::mt19937_64 eng(6);
    const Matrix R = correlated_residuals(eng, 4, 30);
    const Matrix packed = bootstrap_replicates(R, 200, 7);

    const UncertaintySet full = bounds_from_replicates(packed, 4, 1.0);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < 4; ++i)
        for (Eigen::Index j = i; j < 4; ++j, ++k) {
            CHECK(full.upper(i, j) == packed.row(k).maxCoeff());
            CHECK(full.lower(i, j) == packed.row(k).minCoeff());
        }
    CHECK(full.upper == full.upper.transpose());
    CHECK(full.lower == full.lower.transpose());

    UncertaintySet prev = bounds_from_replicates(packed, 4, 0.1);
    for (double a : {0.2, 0.5, 0.6, 0.9, 1.0}) {
        const UncertaintySet cur = bounds_from_replicates(packed, 4, a);
        CHECK((cur.lower.array() <= prev.lower.array()).all());
        CHECK((cur.upper.array() >= prev.upper.array()).all());
        prev = cur;
    }

    const Matrix one = bootstrap_replicates(R, 1, 7);
    const UncertaintySet single = bounds_from_replicates(one, 4, 0.5);
    CHECK(single.lower == single.upper);
    CHECK(single.upper(0, 1) == one(1, 0));

    CHECK_THROWS_AS(bounds_from_replicates(packed, 4, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(bounds_from_replicates(packed, 4, 1.2), std::invalid_argument);
    CHECK_THROWS_AS(bounds_from_replicates(packed, 3, 0.5), std::invalid_argument);
}

TEST_CASE("build_uncertainty_set end to end")
{
    std::mt19937_64 eng(7);
    auto h = three_level();
    const Matrix R = correlated_residuals(eng, 8, 40);
    const auto [obs, fit] = panels_with_residuals(h, R);

    const UncertaintySet a = build_uncertainty_set(obs, fit, 300, 0.8, 11);
    const UncertaintySet b = build_uncertainty_set(obs, fit, 300, 0.8, 11);
    CHECK(a.lower == b.lower);
    CHECK(a.upper == b.upper);
    CHECK(a.n_boot == 300);
    CHECK(a.seed == 11);
    CHECK((a.lower.array() <= a.upper.array()).all());
    CHECK((a.upper.diagonal().array() > 0).all());
    CHECK(check_strict_feasibility(a, shrink(estimate_cov(obs, fit)).W).ok);

    const UncertaintySet one = build_uncertainty_set(obs, fit, 1, 0.5, 11);
    CHECK(one.lower == one.upper);
    CHECK(one.inflations == 0);

    CHECK_THROWS_AS(build_uncertainty_set(obs, fit, 10, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(build_uncertainty_set(obs, fit, 0, 0.5, 1), std::invalid_argument);
}

TEST_CASE("median of 5000 replicates lies inside the alpha = 0.5 box")
{
    auto h = three_level();
    const SyntheticSplit s = synth_generate(h, 96, 12, 3, 0.0);
    Matrix R = s.train.values;
    R.colwise() -= R.rowwise().mean();
    const Matrix packed = bootstrap_replicates(R, 5000, 21);
    const UncertaintySet set = bounds_from_replicates(packed, 8, 0.5);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < 8; ++i)
        for (Eigen::Index j = i; j < 8; ++j, ++k) {
            std::vector<double> v;
            for (Eigen::Index c = 0; c < packed.cols(); ++c) v.push_back(packed(k, c));
            std::sort(v.begin(), v.end());
            const double median = 0.5 * (v[2499] + v[2500]);
            CHECK(set.lower(i, j) <= median);
            CHECK(median <= set.upper(i, j));
        }
}

TEST_CASE("feasibility guard")
{
    const Matrix W0 = (Matrix(2, 2) << 1.0, 0.5, 0.5, 1.0).finished();
    UncertaintySet ok;
    ok.lower = W0 - Matrix::Constant(2, 2, 0.1);
    ok.upper = W0 + Matrix::Constant(2, 2, 0.1);
    CHECK(check_strict_feasibility(ok, W0).ok);

    // every matrix in this box has off-diagonal 2 > diagonal 1: never PSD until widened a lot
    UncertaintySet bad;
    bad.lower = (Matrix(2, 2) << 1.0, 2.0, 2.0, 1.0).finished();
    bad.upper = (Matrix(2, 2) << 1.0, 2.1, 2.1, 1.0).finished();
    CHECK_FALSE(check_strict_feasibility(bad, W0).ok);
    std::vector<std::string> warnings;
    CHECK_FALSE(enforce_feasibility(bad, W0, [&](const std::string& m) { warnings.push_back(m); }));
    CHECK(warnings.size() == 10);
    CHECK(bad.inflations == 10);

    // a box just missing PD points recovers after a few widenings
    UncertaintySet near;
    near.lower = (Matrix(2, 2) << 1.0, 0.9, 0.9, 1.0).finished();
    near.upper = (Matrix(2, 2) << 2.0, 1.05, 1.05, 2.0).finished();
    near.lower(0, 1) = near.lower(1, 0) = 1.02;
    near.upper(0, 0) = near.upper(1, 1) = 1.0;
    near.lower(0, 0) = near.lower(1, 1) = 0.9;
    CHECK_FALSE(check_strict_feasibility(near, W0).ok);
    CHECK(enforce_feasibility(near, W0));
    CHECK(near.inflations > 0);
    CHECK(check_strict_feasibility(near, W0).ok);
}

TEST_CASE("uncertainty set file round trip")
{
    const auto dir = std::filesystem::temp_directory_path() / "hrec_test_cov";
    std::filesystem::create_directories(dir);
    std::mt19937_64 eng(8);
    UncertaintySet set = bounds_from_replicates(bootstrap_replicates(correlated_residuals(eng, 3, 20), 50, 4), 3, 0.7);
    set.seed = 4;
    save_uncertainty_set(set, dir / "set.csv");
    const UncertaintySet back = load_uncertainty_set(dir / "set.csv");
    CHECK(back.lower == set.lower);
    CHECK(back.upper == set.upper);
    CHECK(back.alpha == set.alpha);
    CHECK(back.n_boot == 50);
    CHECK(back.seed == 4);
    std::filesystem::remove_all(dir);
}

#include "doctest.h"

#include "hrec/dataset.hpp"
#include "oracles.hpp"

#include <filesystem>
#include <fstream>

using namespace hrec;

namespace {

std::shared_ptr<const Hierarchy> three_level()
{
    return std::make_shared<const Hierarchy>(build_hierarchy(
        {{"Total", "A"}, {"Total", "B"}, {"A", "AA"}, {"A", "AB"}, {"A", "AC"}, {"B", "BA"}, {"B", "BB"}}));
}

struct TempDir {
    std::filesystem::path path;
    TempDir() : path(std::filesystem::temp_directory_path() / "hrec_test_dataset")
    {
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

/// Three-level example observation CSV with T rows; can drop BB, break Total at one t, or corrupt AC at t=2.
void write_three_level_csv(const std::filesystem::path& p, int T, bool drop_bb = false, int break_at = -1,
                    const std::string& bad_cell = "")
{
    std::ofstream out(p);
    out << "time,Total,A,B,AA,AB,AC" << (drop_bb ? "" : ",BA,BB") << (drop_bb ? ",BA" : "") << '\n';
    for (int t = 1; t <= T; ++t) {
        const double aa = t, ab = 2 * t, ac = 1, ba = 3, bb = 0.5 * t;
        double total = aa + ab + ac + ba + bb;
        if (t == break_at) total += 1.0;
        out << t << ',' << total << ',' << aa + ab + ac << ',' << ba + bb << ',' << aa << ',' << ab << ','
            << (bad_cell.empty() || t != 2 ? std::to_string(ac) : bad_cell) << ',' << ba;
        if (!drop_bb) out << ',' << bb;
        out << '\n';
    }
}

}  // namespace

TEST_CASE("load a three-level observation panel")
{
    TempDir dir;
    write_three_level_csv(dir.path / "obs.csv", 10);
    const SeriesPanel p = load_panel(three_level(), dir.path / "obs.csv", PanelKind::observations);
    CHECK(p.n() == 8);
    CHECK(p.T() == 10);
    CHECK(p.timestamps.front() == "1");
    CHECK(p.values(0, 0) == doctest::Approx(7.5));
    CHECK(p.values(3, 9) == 10.0);
}

TEST_CASE("load errors")
{
    TempDir dir;
    write_three_level_csv(dir.path / "nobb.csv", 10, true);
    CHECK_THROWS_WITH_AS(load_panel(three_level(), dir.path / "nobb.csv", PanelKind::observations),
                         doctest::Contains("missing series 'BB'"), DatasetError);

    write_three_level_csv(dir.path / "broken.csv", 10, false, 3);
    CHECK_THROWS_WITH_AS(load_panel(three_level(), dir.path / "broken.csv", PanelKind::observations),
                         doctest::Contains("t=3"), DatasetError);
    // forecasts need not be coherent
    CHECK_NOTHROW(load_panel(three_level(), dir.path / "broken.csv", PanelKind::forecasts));

    write_three_level_csv(dir.path / "text.csv", 10, false, -1, "abc");
    CHECK_THROWS_WITH_AS(load_panel(three_level(), dir.path / "text.csv", PanelKind::forecasts),
                         doctest::Contains("non-numeric"), DatasetError);

    write_three_level_csv(dir.path / "short.csv", 1);
    CHECK_THROWS_WITH_AS(load_panel(three_level(), dir.path / "short.csv", PanelKind::observations),
                         doctest::Contains("T >= 2"), DatasetError);

    CHECK_THROWS_AS(load_panel(three_level(), dir.path / "absent.csv", PanelKind::observations), DatasetError);
}

TEST_CASE("save then load reproduces values bit for bit")
{
    TempDir dir;
    std::mt19937_64 eng(5);
    auto h = three_level();
    const Matrix noisy = oracle::random_matrix(eng, 8, 13, 1e3) / 7.0;
    const SeriesPanel p = make_panel(h, noisy, {}, PanelKind::forecasts);
    save_panel(p, dir.path / "p.csv");
    const SeriesPanel q = load_panel(h, dir.path / "p.csv", PanelKind::forecasts);
    CHECK(q.values == p.values);
    CHECK(q.timestamps == p.timestamps);
}

TEST_CASE("make_panel validation and timestamps")
{
    auto h = three_level();
    CHECK_THROWS_AS(make_panel(h, Matrix::Zero(7, 4), {}, PanelKind::forecasts), DatasetError);
    CHECK_THROWS_AS(make_panel(h, Matrix::Zero(8, 1), {}, PanelKind::forecasts), DatasetError);
    Matrix bad = h->summing() * Matrix::Ones(5, 3);
    bad(1, 2) += 1.0;
    CHECK_THROWS_AS(make_panel(h, bad, {}, PanelKind::observations), DatasetError);

    CHECK(continue_timestamps({"1", "2", "9"}, 2) == std::vector<std::string>{"10", "11"});
    CHECK(continue_timestamps({"2020-01"}, 2) == std::vector<std::string>{"h1", "h2"});

    const SeriesPanel p = make_panel(h, h->summing() * Matrix::Ones(5, 6), {}, PanelKind::observations);
    const SeriesPanel s = p.slice(2, 3);
    CHECK(s.T() == 3);
    CHECK(s.timestamps.front() == "3");
    CHECK_THROWS_AS(p.slice(4, 3), DatasetError);
}

TEST_CASE("synthetic panels are exactly coherent and deterministic")
{
    auto h = three_level();
    const SyntheticSplit a = synth_generate(h, 96, 12, 7, 1.0);
    const SyntheticSplit b = synth_generate(h, 96, 12, 7, 1.0);
    CHECK(a.train.T() == 96);
    CHECK(a.test.T() == 12);
    CHECK(a.test.timestamps.front() == "97");
    for (Eigen::Index t = 0; t < 96; ++t) CHECK(check_coherent(*h, a.train.values.col(t), 0.0));
    for (Eigen::Index t = 0; t < 12; ++t) CHECK(check_coherent(*h, a.test.values.col(t), 0.0));
    CHECK(a.train.values == b.train.values);
    CHECK(a.test.values == b.test.values);
    const SyntheticSplit c = synth_generate(h, 96, 12, 8, 1.0);
    CHECK(c.train.values != a.train.values);
    CHECK_THROWS_AS(synth_generate(h, 4, 2, 1, 0.0), DatasetError);
    CHECK_THROWS_AS(synth_generate(h, 10, 0, 1, 0.0), DatasetError);
}

TEST_CASE("without shift the train and test noise covariances agree")
{
    auto h = three_level();
    const SyntheticSplit s = synth_generate(h, 5000, 5000, 7, 0.0);
    const Matrix c_train = oracle::brute_covariance(s.train_noise);
    const Matrix c_test = oracle::brute_covariance(s.test_noise);
    CHECK((c_train - c_test).norm() <= 0.1 * c_train.norm());

    // stationary AR(1) covariance is the innovation covariance over 1 - phi^2
    const auto [sig_train, sig_test] = synth_innovation_covariances(*h, 7, 0.0);
    CHECK((sig_train - sig_test).norm() < 1e-12 * sig_train.norm());
    CHECK((c_train - sig_train / 0.75).norm() <= 0.1 * c_train.norm());

    // with shift the test covariance grows by the factor (1 + shift) in trace
    const auto [s1_train, s1_test] = synth_innovation_covariances(*h, 7, 1.0);
    CHECK(s1_test.trace() == doctest::Approx(2.0 * s1_train.trace()).epsilon(1e-10));
    CHECK((s1_test - 2.0 * s1_train).norm() > 1e-3);
}

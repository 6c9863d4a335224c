#include "doctest.h"

#include "hrec/csv.hpp"
#include "hrec/eval.hpp"
#include "oracles.hpp"

#include <algorithm>

using namespace hrec;

namespace {

std::shared_ptr<const Hierarchy> three_level()
{
    return std::make_shared<const Hierarchy>(build_hierarchy(
        {{"Total", "A"}, {"Total", "B"}, {"A", "AA"}, {"A", "AB"}, {"A", "AC"}, {"B", "BA"}, {"B", "BB"}}));
}

std::shared_ptr<const Hierarchy> tiny()
{
    return std::make_shared<const Hierarchy>(build_hierarchy({{"T", "A"}, {"T", "B"}}));
}

SeriesPanel fc(std::shared_ptr<const Hierarchy> h, Matrix v)
{
    return make_panel(std::move(h), std::move(v), {}, PanelKind::forecasts);
}

}  // namespace

TEST_CASE("score by hand")
{
    const auto h = tiny();
    Matrix actual(3, 2), forecast(3, 2);
    actual << 5, 5,
              2, 2,
              3, 3;
    forecast << 4, 6,
                2, 0,
                3, 3;
    const ScoreMap s = score(fc(h, actual), fc(h, forecast));
    CHECK(s.at("T").mae == 1.0);
    CHECK(s.at("T").rmse == 1.0);
    CHECK(s.at("A").mae == 1.0);
    CHECK(s.at("A").rmse == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    CHECK(s.at("B").mae == 0.0);
    CHECK(s.at("B").rmse == 0.0);
    CHECK_THROWS_AS(score(fc(h, actual), fc(three_level(), Matrix::Zero(8, 2))), std::invalid_argument);
}

TEST_CASE("rmse dominates mae and score is permutation-equivariant in time")
{
    std::mt19937_64 eng(1);
    const auto h = three_level();
    const Matrix a = oracle::random_matrix(eng, 8, 9, 4.0);
    const Matrix f = oracle::random_matrix(eng, 8, 9, 4.0);
    const ScoreMap s = score(fc(h, a), fc(h, f));
    for (const auto& [label, v] : s) CHECK(v.rmse >= v.mae);

    std::vector<Eigen::Index> perm(9);
    for (Eigen::Index t = 0; t < 9; ++t) perm[static_cast<std::size_t>(t)] = t;
    std::shuffle(perm.begin(), perm.end(), eng);
    Matrix ap(8, 9), fp(8, 9);
    for (Eigen::Index t = 0; t < 9; ++t) {
        ap.col(t) = a.col(perm[static_cast<std::size_t>(t)]);
        fp.col(t) = f.col(perm[static_cast<std::size_t>(t)]);
    }
    const ScoreMap sp = score(fc(h, ap), fc(h, fp));
    for (const auto& [label, v] : s) {
        CHECK(sp.at(label).mae == doctest::Approx(v.mae).epsilon(1e-14));
        CHECK(sp.at(label).rmse == doctest::Approx(v.rmse).epsilon(1e-14));
    }
    const ScoreMap self = score(fc(h, a), fc(h, a));
    for (const auto& [label, v] : self) CHECK((v.mae == 0.0 && v.rmse == 0.0));
}

TEST_CASE("relative report against itself is all ones")
{
    std::mt19937_64 eng(2);
    const auto h = three_level();
    const ScoreMap base = score(fc(h, oracle::random_matrix(eng, 8, 5)), fc(h, oracle::random_matrix(eng, 8, 5)));
    const EvalReport r = relative_report(base, {{"bu", base}}, *h);
    CHECK(r.methods == std::vector<std::string>{"base", "bu"});
    CHECK(r.level_sizes == std::vector<std::size_t>{1, 2, 5});
    for (const auto& m : r.methods) {
        for (std::size_t lv = 0; lv < 3; ++lv) {
            const LevelRow& row = r.per_level.at(m)[lv];
            CHECK(row.mae.mean == 1.0);
            CHECK(row.rmse.mean == 1.0);
            if (lv == 0) {
                CHECK_FALSE(row.mae.std.has_value());
            } else {
                REQUIRE(row.mae.std.has_value());
                CHECK(*row.mae.std == 0.0);
                CHECK(*row.rmse.std == 0.0);
            }
        }
    }
}

TEST_CASE("level mean and population std")
{
    const auto h = tiny();
    const ScoreMap base{{"T", {1.0, 1.0}}, {"A", {1.0, 2.0}}, {"B", {2.0, 4.0}}};
    const ScoreMap m1{{"T", {0.9, 0.9}}, {"A", {0.8, 1.6}}, {"B", {2.4, 4.8}}};
    const ScoreMap m2{{"T", {0.95, 1.1}}, {"A", {1.0, 2.0}}, {"B", {2.0, 4.0}}};
    const EvalReport r = relative_report(base, {{"mint", m1}, {"robust", m2}}, *h);
    const LevelRow& bottom = r.per_level.at("mint")[1];
    CHECK(bottom.mae.mean == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(*bottom.mae.std == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(bottom.mae.count == 2);
    CHECK(r.best_mae[0] == "mint");
    CHECK(r.best_rmse[0] == "mint");
    CHECK(r.best_mae[1] == "mint");  // tie at 1.0 goes to the first listed method

    const std::string text = r.text_table();
    CHECK(text.find("1.000 ± 0.200") != std::string::npos);
    CHECK(text.find("Relative RMSE") != std::string::npos);
    CHECK(text.find("0.900 *") != std::string::npos);
    const std::string csv = r.csv();
    CHECK(csv.rfind("metric,level,method,mean,std,count,excluded,best\n", 0) == 0);
    const auto at = csv.find("mae,level1,mint,");
    REQUIRE(at != std::string::npos);
    const auto fields = split_csv_line(csv.substr(at, csv.find('\n', at) - at));
    REQUIRE(fields.size() == 8);
    CHECK(std::stod(fields[3]) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(std::stod(fields[4]) == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(fields[5] == "2");
    CHECK(fields[7] == "1");
    CHECK(r.per_series_csv(*h).find("A,level1,mint,0.8") != std::string::npos);
}

TEST_CASE("zero base scores are excluded and counted")
{
    const auto h = tiny();
    const ScoreMap base{{"T", {1.0, 1.0}}, {"A", {0.0, 0.0}}, {"B", {2.0, 2.0}}};
    const ScoreMap m{{"T", {0.5, 0.5}}, {"A", {1.0, 1.0}}, {"B", {1.0, 3.0}}};
    const EvalReport r = relative_report(base, {{"ols", m}}, *h);
    CHECK_FALSE(r.relative.at("ols").at("A").has_value());
    const LevelRow& bottom = r.per_level.at("ols")[1];
    CHECK(bottom.mae.count == 1);
    CHECK(bottom.mae.excluded == 1);
    CHECK(bottom.mae.mean == 0.5);
    CHECK(*bottom.mae.std == 0.0);
    CHECK(bottom.rmse.mean == 1.5);

    const ScoreMap partial{{"T", {0.5, 0.5}}};
    CHECK_THROWS_AS(relative_report(base, {{"ols", partial}}, *h), std::invalid_argument);
}

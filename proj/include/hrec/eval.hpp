#pragma once

#include "hrec/dataset.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace hrec {

struct SeriesScore {
    double mae = 0.0;
    double rmse = 0.0;
};

/// label -> score
using ScoreMap = std::map<std::string, SeriesScore>;

/// Per-series MAE and RMSE over the forecast horizon.
ScoreMap score(const SeriesPanel& actual, const SeriesPanel& forecast);

/// Mean and population std of relative errors within one level.
struct LevelStat {
    double mean = 0.0;
    std::optional<double> std;  // absent for single-series levels
    std::size_t count = 0;      // series that contributed
    std::size_t excluded = 0;   // series with a zero base score
};

struct LevelRow {
    LevelStat mae;
    LevelStat rmse;
};

struct EvalReport {
    std::vector<std::string> methods;                // "base" first
    std::vector<std::string> level_names;
    std::vector<std::size_t> level_sizes;
    std::map<std::string, ScoreMap> per_series;      // method -> label -> absolute score
    std::map<std::string, std::map<std::string, std::optional<SeriesScore>>> relative;  // method -> label -> rel
    std::map<std::string, std::vector<LevelRow>> per_level;  // method -> level
    std::vector<std::string> best_mae;               // per level, among non-base methods
    std::vector<std::string> best_rmse;

    /// Two aligned tables (relative MAE, relative RMSE), "mean ± std", best marked with '*'.
    std::string text_table() const;
    /// metric,level,method,mean,std,count,excluded,best
    std::string csv() const;
    /// label,level,method,mae,rmse,rel_mae,rel_rmse
    std::string per_series_csv(const Hierarchy& h) const;
};

/**
 * Relative metrics method/base per series, summarized per hierarchy level.
 * A zero base score makes that ratio missing; it is excluded from the level
 * mean and std and counted in `excluded`.
 */
EvalReport relative_report(const ScoreMap& base, const std::vector<std::pair<std::string, ScoreMap>>& methods,
                           const Hierarchy& h);

}  // namespace hrec

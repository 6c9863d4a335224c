#include "hrec/eval.hpp"

#include "hrec/csv.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace hrec {

ScoreMap score(const SeriesPanel& actual, const SeriesPanel& forecast)
{
    if (actual.values.rows() != forecast.values.rows() || actual.values.cols() != forecast.values.cols()) {
        throw std::invalid_argument("eval: actual and forecast panels are not aligned");
    }
    if (actual.values.cols() < 1) throw std::invalid_argument("eval: empty horizon");
    if (!actual.h || actual.h->n() != actual.n()) throw std::invalid_argument("eval: panel lacks a matching hierarchy");
    const Matrix err = actual.values - forecast.values;
    const double T = static_cast<double>(err.cols());
    ScoreMap out;
    for (Eigen::Index i = 0; i < err.rows(); ++i) {
        SeriesScore s;
        s.mae = err.row(i).cwiseAbs().sum() / T;
        s.rmse = std::sqrt(err.row(i).squaredNorm() / T);
        out[actual.h->label(static_cast<std::size_t>(i))] = s;
    }
    return out;
}

namespace {

LevelStat summarize(const std::vector<double>& values, std::size_t excluded, std::size_t level_size)
{
    LevelStat st;
    st.count = values.size();
    st.excluded = excluded;
    if (values.empty()) {
        st.mean = std::nan("");
        return st;
    }
    double sum = 0.0;
    for (double v : values) sum += v;
    st.mean = sum / static_cast<double>(values.size());
    if (level_size > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - st.mean) * (v - st.mean);
        st.std = std::sqrt(ss / static_cast<double>(values.size()));
    }
    return st;
}

std::string best_of(const EvalReport& r, std::size_t level, bool mae)
{
    std::string best;
    double best_val = std::numeric_limits<double>::infinity();
    for (const auto& m : r.methods) {
        if (m == "base") continue;
        const LevelRow& row = r.per_level.at(m)[level];
        const double v = mae ? row.mae.mean : row.rmse.mean;
        if (std::isfinite(v) && v < best_val) {
            best_val = v;
            best = m;
        }
    }
    return best;
}

std::string fmt3(double v)
{
    if (!std::isfinite(v)) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

}  // namespace

EvalReport relative_report(const ScoreMap& base, const std::vector<std::pair<std::string, ScoreMap>>& methods,
                           const Hierarchy& h)
{
    EvalReport r;
    r.methods.push_back("base");
    for (const auto& [name, scores] : methods) {
        if (name == "base") continue;
        r.methods.push_back(name);
    }
    const int levels = h.num_levels();
    r.level_sizes.assign(static_cast<std::size_t>(levels), 0);
    for (int lv : h.levels()) ++r.level_sizes[static_cast<std::size_t>(lv)];
    for (int lv = 0; lv < levels; ++lv) r.level_names.push_back(lv == 0 ? h.root() : "level" + std::to_string(lv));

    auto process = [&](const std::string& name, const ScoreMap& scores) {
        r.per_series[name] = scores;
        auto& rel = r.relative[name];
        std::vector<std::vector<double>> mae(static_cast<std::size_t>(levels)), rmse(mae);
        std::vector<std::size_t> ex_mae(static_cast<std::size_t>(levels), 0), ex_rmse(ex_mae);
        for (std::size_t i = 0; i < h.n(); ++i) {
            const std::string& label = h.label(i);
            const auto b = base.find(label);
            const auto s = scores.find(label);
            if (b == base.end() || s == scores.end()) {
                throw std::invalid_argument("eval: series '" + label + "' missing from scores of " + name);
            }
            const auto lv = static_cast<std::size_t>(h.levels()[i]);
            std::optional<SeriesScore> ratio;
            if (b->second.mae > 0.0 && b->second.rmse > 0.0) {
                ratio = SeriesScore{s->second.mae / b->second.mae, s->second.rmse / b->second.rmse};
                mae[lv].push_back(ratio->mae);
                rmse[lv].push_back(ratio->rmse);
            } else {
                // MAE and RMSE vanish together, so one check covers both
                ++ex_mae[lv];
                ++ex_rmse[lv];
            }
            rel[label] = ratio;
        }
        auto& rows = r.per_level[name];
        for (std::size_t lv = 0; lv < static_cast<std::size_t>(levels); ++lv) {
            rows.push_back({summarize(mae[lv], ex_mae[lv], r.level_sizes[lv]),
                            summarize(rmse[lv], ex_rmse[lv], r.level_sizes[lv])});
        }
    };
    process("base", base);
    for (const auto& [name, scores] : methods) {
        if (name != "base") process(name, scores);
    }
    for (std::size_t lv = 0; lv < static_cast<std::size_t>(levels); ++lv) {
        r.best_mae.push_back(best_of(r, lv, true));
        r.best_rmse.push_back(best_of(r, lv, false));
    }
    return r;
}

std::string EvalReport::text_table() const
{
    std::ostringstream os;
    auto table = [&](const char* title, bool mae) {
        std::vector<std::vector<std::string>> cells;
        std::vector<std::string> head{""};
        for (const auto& m : methods) head.push_back(m);
        cells.push_back(head);
        for (std::size_t lv = 0; lv < level_names.size(); ++lv) {
            std::vector<std::string> row{level_names[lv]};
            const std::string& best = mae ? best_mae[lv] : best_rmse[lv];
            for (const auto& m : methods) {
                const LevelStat& st = mae ? per_level.at(m)[lv].mae : per_level.at(m)[lv].rmse;
                std::string cell = fmt3(st.mean);
                if (st.std && m != "base") cell += " ± " + fmt3(*st.std);
                if (m == best) cell += " *";
                row.push_back(cell);
            }
            cells.push_back(row);
        }
        // widths count code points so the ± sign lines up
        auto width = [](const std::string& s) {
            std::size_t w = 0;
            for (unsigned char c : s) w += (c & 0xC0) != 0x80;
            return w;
        };
        std::vector<std::size_t> w(head.size(), 0);
        for (const auto& row : cells)
            for (std::size_t c = 0; c < row.size(); ++c) w[c] = std::max(w[c], width(row[c]));
        os << title << '\n';
        for (const auto& row : cells) {
            for (std::size_t c = 0; c < row.size(); ++c) {
                const std::string pad(w[c] - width(row[c]), ' ');
                os << (c == 0 ? row[c] + pad : "  " + pad + row[c]);
            }
            os << '\n';
        }
    };
    table("Relative MAE", true);
    os << '\n';
    table("Relative RMSE", false);
    os << "(* best reconciliation method per level; mean ± population std over the level)\n";
    return os.str();
}

std::string EvalReport::csv() const
{
    std::ostringstream os;
    os << "metric,level,method,mean,std,count,excluded,best\n";
    for (int k = 0; k < 2; ++k) {
        const bool mae = k == 0;
        for (std::size_t lv = 0; lv < level_names.size(); ++lv) {
            for (const auto& m : methods) {
                const LevelStat& st = mae ? per_level.at(m)[lv].mae : per_level.at(m)[lv].rmse;
                os << (mae ? "mae" : "rmse") << ',' << level_names[lv] << ',' << m << ',' << format_double(st.mean) << ',';
                if (st.std) os << format_double(*st.std);
                os << ',' << st.count << ',' << st.excluded << ','
                   << ((mae ? best_mae[lv] : best_rmse[lv]) == m ? 1 : 0) << '\n';
            }
        }
    }
    return os.str();
}

std::string EvalReport::per_series_csv(const Hierarchy& h) const
{
    std::ostringstream os;
    os << "label,level,method,mae,rmse,rel_mae,rel_rmse\n";
    for (std::size_t i = 0; i < h.n(); ++i) {
        const std::string& label = h.label(i);
        for (const auto& m : methods) {
            const SeriesScore& s = per_series.at(m).at(label);
            const auto& rel = relative.at(m).at(label);
            os << label << ',' << level_names[static_cast<std::size_t>(h.levels()[i])] << ',' << m << ',' << format_double(s.mae)
               << ',' << format_double(s.rmse) << ',';
            if (rel) os << format_double(rel->mae);
            os << ',';
            if (rel) os << format_double(rel->rmse);
            os << '\n';
        }
    }
    return os.str();
}

}  // namespace hrec

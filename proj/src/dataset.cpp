#include "hrec/dataset.hpp"

#include "hrec/csv.hpp"
#include "hrec/rng.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

namespace hrec {

SeriesPanel SeriesPanel::slice(std::size_t first, std::size_t count) const
{
    if (first + count > T()) throw DatasetError("panel: slice out of range");
    SeriesPanel out;
    out.h = h;
    out.values = values.middleCols(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(count));
    out.timestamps.assign(timestamps.begin() + static_cast<std::ptrdiff_t>(first),
                          timestamps.begin() + static_cast<std::ptrdiff_t>(first + count));
    out.kind = kind;
    return out;
}

std::vector<std::string> integer_timestamps(long long first, std::size_t count)
{
    std::vector<std::string> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(std::to_string(first + static_cast<long long>(i)));
    return out;
}

std::vector<std::string> continue_timestamps(const std::vector<std::string>& existing, std::size_t count)
{
    if (!existing.empty()) {
        const std::string& last = existing.back();
        long long v = 0;
        const auto [ptr, ec] = std::from_chars(last.data(), last.data() + last.size(), v);
        if (ec == std::errc{} && ptr == last.data() + last.size()) return integer_timestamps(v + 1, count);
    }
    std::vector<std::string> out;
    for (std::size_t i = 1; i <= count; ++i) out.push_back("h" + std::to_string(i));
    return out;
}

void validate_observations(const SeriesPanel& panel)
{
    for (Eigen::Index t = 0; t < panel.values.cols(); ++t) {
        const Vector col = panel.values.col(t);
        const double tol = 1e-6 * col.cwiseAbs().maxCoeff();
        if (!check_coherent(*panel.h, col, tol)) {
            const std::string ts = static_cast<std::size_t>(t) < panel.timestamps.size()
                                       ? panel.timestamps[static_cast<std::size_t>(t)]
                                       : std::to_string(t);
            throw DatasetError("coherence violation at t=" + ts + " (gap " +
                               format_double(coherence_gap(*panel.h, col)) + ")");
        }
    }
}

SeriesPanel make_panel(std::shared_ptr<const Hierarchy> h, Matrix values, std::vector<std::string> timestamps,
                       PanelKind kind)
{
    if (!h) throw DatasetError("panel: missing hierarchy");
    if (static_cast<std::size_t>(values.rows()) != h->n()) {
        throw DatasetError("panel: " + std::to_string(values.rows()) + " rows, hierarchy has n=" +
                           std::to_string(h->n()));
    }
    if (values.cols() < 2) throw DatasetError("panel: need T >= 2, got T=" + std::to_string(values.cols()));
    if (timestamps.empty()) timestamps = integer_timestamps(1, static_cast<std::size_t>(values.cols()));
    if (timestamps.size() != static_cast<std::size_t>(values.cols())) {
        throw DatasetError("panel: timestamp count does not match T");
    }
    SeriesPanel p{std::move(h), std::move(values), std::move(timestamps), kind};
    if (kind == PanelKind::observations) validate_observations(p);
    return p;
}

SeriesPanel load_panel(std::shared_ptr<const Hierarchy> h, const std::filesystem::path& path, PanelKind kind)
{
    CsvTable table = [&] {
        try {
            return read_csv(path);
        } catch (const std::runtime_error& e) {
            throw DatasetError(e.what());
        }
    }();
    const auto tcol = table.column("time");
    if (!tcol) throw DatasetError(path.string() + ": missing `time` column");

    std::vector<std::size_t> cols;
    for (const auto& label : h->labels()) {
        const auto c = table.column(label);
        if (!c) throw DatasetError(path.string() + ": missing series '" + label + "'");
        cols.push_back(*c);
    }

    const auto T = table.rows.size();
    if (T < 2) throw DatasetError(path.string() + ": need T >= 2, got T=" + std::to_string(T));
    Matrix values(static_cast<Eigen::Index>(h->n()), static_cast<Eigen::Index>(T));
    std::vector<std::string> stamps;
    stamps.reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
        const auto& row = table.rows[t];
        stamps.push_back(row[*tcol]);
        for (std::size_t i = 0; i < cols.size(); ++i) {
            const auto v = parse_double(row[cols[i]]);
            if (!v) {
                throw DatasetError(path.string() + ": non-numeric cell '" + row[cols[i]] + "' in column '" +
                                   h->label(i) + "' at t=" + row[*tcol]);
            }
            values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = *v;
        }
    }
    return make_panel(std::move(h), std::move(values), std::move(stamps), kind);
}

void save_panel(const SeriesPanel& panel, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DatasetError("cannot write " + path.string());
    out << "time";
    for (const auto& label : panel.h->labels()) out << ',' << label;
    out << '\n';
    for (Eigen::Index t = 0; t < panel.values.cols(); ++t) {
        out << panel.timestamps[static_cast<std::size_t>(t)];
        for (Eigen::Index i = 0; i < panel.values.rows(); ++i) out << ',' << format_double(panel.values(i, t));
        out << '\n';
    }
}

namespace {

struct SynthModel {
    Matrix sigma_train;
    Matrix sigma_test;
    Vector level;
    Vector slope;
    Matrix seasonal;  // m x period
};

SynthModel synth_model(const Hierarchy& h, std::uint64_t seed, double shift, const SynthOptions& opts)
{
    const auto m = static_cast<Eigen::Index>(h.m());
    auto eng = stream_engine(seed, 0);
    std::normal_distribution<double> gauss;

    // Correlated bottom covariance from a two-factor model.
    Matrix F(m, 2);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index k = 0; k < 2; ++k) F(i, k) = 0.8 * gauss(eng);
    Matrix C = F * F.transpose();
    C.diagonal().array() += 0.5;
    const Vector d = C.diagonal().cwiseSqrt().cwiseInverse();
    C = d.asDiagonal() * C * d.asDiagonal();
    Vector scale(m);
    for (Eigen::Index i = 0; i < m; ++i) scale(i) = 1.0 + 2.0 * draw_unit(eng);

    SynthModel model;
    model.sigma_train = scale.asDiagonal() * C * scale.asDiagonal();

    // Rotation as a product of Givens rotations; angles vanish with shift.
    Matrix R = Matrix::Identity(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = i + 1; j < m; ++j) {
            const double angle = shift * (std::numbers::pi / 8.0) * gauss(eng);
            Matrix G = Matrix::Identity(m, m);
            G(i, i) = G(j, j) = std::cos(angle);
            G(i, j) = -std::sin(angle);
            G(j, i) = std::sin(angle);
            R = G * R;
        }
    }
    model.sigma_test = (1.0 + shift) * R * model.sigma_train * R.transpose();
    model.sigma_test = 0.5 * (model.sigma_test + model.sigma_test.transpose()).eval();

    model.level.resize(m);
    model.slope.resize(m);
    model.seasonal.resize(m, opts.period);
    for (Eigen::Index i = 0; i < m; ++i) {
        model.level(i) = 20.0 + 30.0 * draw_unit(eng);
        model.slope(i) = opts.trend_scale * (2.0 * draw_unit(eng) - 1.0);
        double mean = 0.0;
        for (int k = 0; k < opts.period; ++k) {
            model.seasonal(i, k) = opts.seasonal_amplitude * gauss(eng) / 2.0;
            mean += model.seasonal(i, k);
        }
        model.seasonal.row(i).array() -= mean / opts.period;
    }
    return model;
}

}  // namespace

std::pair<Matrix, Matrix> synth_innovation_covariances(const Hierarchy& h, std::uint64_t seed, double shift)
{
    auto model = synth_model(h, seed, shift, SynthOptions{});
    return {model.sigma_train, model.sigma_test};
}

SyntheticSplit synth_generate(std::shared_ptr<const Hierarchy> h, std::size_t T, std::size_t T_prime,
                              std::uint64_t seed, double shift, const SynthOptions& opts)
{
    if (!h) throw DatasetError("synth: missing hierarchy");
    if (T < 8) throw DatasetError("synth: need T >= 8, got T=" + std::to_string(T));
    if (T_prime < 1) throw DatasetError("synth: need T_prime >= 1");
    if (!(shift >= 0.0)) throw DatasetError("synth: shift must be nonnegative");
    if (opts.period < 1) throw DatasetError("synth: period must be positive");

    const SynthModel model = synth_model(*h, seed, shift, opts);
    const auto m = static_cast<Eigen::Index>(h->m());
    const auto n = static_cast<Eigen::Index>(h->n());
    const Matrix L_train = model.sigma_train.llt().matrixL();
    const Matrix L_test = model.sigma_test.llt().matrixL();

    auto eng = stream_engine(seed, 1);
    std::normal_distribution<double> gauss;
    auto draw = [&] {
        Vector z(m);
        for (Eigen::Index i = 0; i < m; ++i) z(i) = gauss(eng);
        return z;
    };

    Vector noise = Vector::Zero(m);
    for (int burn = 0; burn < 50; ++burn) noise = opts.ar_coef * noise + L_train * draw();

    const auto total = static_cast<Eigen::Index>(T + T_prime);
    Matrix noise_all(m, total);
    Matrix y(n, total);
    for (Eigen::Index t = 0; t < total; ++t) {
        const Matrix& L = t < static_cast<Eigen::Index>(T) ? L_train : L_test;
        noise = opts.ar_coef * noise + L * draw();
        noise_all.col(t) = noise;
        Vector b = model.level + model.slope * static_cast<double>(t) + model.seasonal.col(t % opts.period) + noise;
        y.col(t) = h->summing() * b;
    }

    const auto Ti = static_cast<Eigen::Index>(T);
    const auto Tp = static_cast<Eigen::Index>(T_prime);
    SyntheticSplit out;
    out.train = SeriesPanel{h, y.leftCols(Ti), integer_timestamps(1, T), PanelKind::observations};
    out.test = SeriesPanel{h, y.rightCols(Tp), integer_timestamps(static_cast<long long>(T) + 1, T_prime),
                           PanelKind::observations};
    out.train_noise = noise_all.leftCols(Ti);
    out.test_noise = noise_all.rightCols(Tp);
    return out;
}

}  // namespace hrec

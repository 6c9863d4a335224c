#include "hrec/base_forecast.hpp"

#include <algorithm>
#include <stdexcept>

namespace hrec {

BaseForecaster BaseForecaster::parse(const std::string& name, int period)
{
    BaseForecaster f;
    f.period = period;
    if (name == "mean") {
        f.method = ForecastMethod::mean;
    } else if (name == "seasonal_naive" || name == "snaive") {
        f.method = ForecastMethod::seasonal_naive;
    } else if (name == "linear_trend_seasonal" || name == "lts") {
        f.method = ForecastMethod::linear_trend_seasonal;
    } else if (name == "trend_seasonal_ar" || name == "lts_ar") {
        f.method = ForecastMethod::trend_seasonal_ar;
    } else {
        throw std::invalid_argument("base_forecast: unknown method '" + name + "'");
    }
    return f;
}

std::string BaseForecaster::name() const
{
    switch (method) {
    case ForecastMethod::mean: return "mean";
    case ForecastMethod::seasonal_naive: return "seasonal_naive";
    case ForecastMethod::linear_trend_seasonal: return "linear_trend_seasonal";
    case ForecastMethod::trend_seasonal_ar: return "trend_seasonal_ar";
    }
    return "?";
}

namespace {

void fit_mean(const Vector& y, Eigen::Ref<Vector> fitted, Eigen::Ref<Vector> future)
{
    const double mu = y.mean();
    fitted.setConstant(mu);
    future.setConstant(mu);
}

void fit_seasonal_naive(const Vector& y, int period, Eigen::Ref<Vector> fitted, Eigen::Ref<Vector> future)
{
    const Eigen::Index T = y.size();
    const Eigen::Index p = period;
    for (Eigen::Index t = 0; t < T; ++t) fitted(t) = t >= p ? y(t - p) : y(t + p);
    for (Eigen::Index k = 0; k < future.size(); ++k) future(k) = y(T - p + k % p);
}

Matrix trend_season_design(Eigen::Index first, Eigen::Index count, int period)
{
    Matrix X = Matrix::Zero(count, 1 + period);
    for (Eigen::Index r = 0; r < count; ++r) {
        const Eigen::Index t = first + r;
        X(r, 0) = 1.0;
        X(r, 1) = static_cast<double>(t);
        const auto season = static_cast<Eigen::Index>(t % period);
        if (season > 0) X(r, 1 + season) = 1.0;  // season 0 is the baseline
    }
    return X;
}

/// Least-squares lag-1 coefficient of a residual series, kept inside the stationary range.
double ar1_coefficient(const Vector& r)
{
    const Eigen::Index T = r.size();
    const double den = r.head(T - 1).squaredNorm();
    if (den <= 0.0) return 0.0;
    return std::clamp(r.tail(T - 1).dot(r.head(T - 1)) / den, -0.99, 0.99);
}

}  // namespace

BaseForecasts fit_predict(const SeriesPanel& panel, const BaseForecaster& method, std::size_t horizon)
{
    if (horizon < 1) throw std::invalid_argument("base_forecast: horizon must be >= 1");
    const bool seasonal = method.method != ForecastMethod::mean;
    if (seasonal && method.period < 2) {
        throw std::invalid_argument("base_forecast: period must be >= 2 for seasonal methods");
    }
    const auto T = static_cast<Eigen::Index>(panel.T());
    if (seasonal && T < 2 * method.period) {
        throw std::invalid_argument("base_forecast: need T >= 2*period (T=" + std::to_string(T) +
                                    ", period=" + std::to_string(method.period) + ")");
    }

    const auto n = panel.values.rows();
    const auto H = static_cast<Eigen::Index>(horizon);
    Matrix fitted(n, T);
    Matrix future(n, H);

    // Design and its factorization are shared across series; fits stay per-series.
    Matrix X;
    Matrix X_future;
    Eigen::ColPivHouseholderQR<Matrix> qr;
    if (method.method == ForecastMethod::linear_trend_seasonal || method.method == ForecastMethod::trend_seasonal_ar) {
        X = trend_season_design(0, T, method.period);
        X_future = trend_season_design(T, H, method.period);
        qr.compute(X);
    }

    for (Eigen::Index i = 0; i < n; ++i) {
        const Vector y = panel.values.row(i).transpose();
        Vector f(T);
        Vector g(H);
        switch (method.method) {
        case ForecastMethod::mean: fit_mean(y, f, g); break;
        case ForecastMethod::seasonal_naive: fit_seasonal_naive(y, method.period, f, g); break;
        case ForecastMethod::linear_trend_seasonal: {
            const Vector beta = qr.solve(y);
            f = X * beta;
            g = X_future * beta;
            break;
        }
        case ForecastMethod::trend_seasonal_ar: {
            const Vector beta = qr.solve(y);
            f = X * beta;
            g = X_future * beta;
            const Vector r = y - f;
            const double phi = ar1_coefficient(r);
            for (Eigen::Index t = 1; t < T; ++t) f(t) += phi * r(t - 1);
            double carry = r(T - 1);
            for (Eigen::Index k = 0; k < H; ++k) {
                carry *= phi;
                g(k) += carry;
            }
            break;
        }
        }
        fitted.row(i) = f.transpose();
        future.row(i) = g.transpose();
    }

    BaseForecasts out{
        SeriesPanel{panel.h, std::move(fitted), panel.timestamps, PanelKind::forecasts},
        SeriesPanel{panel.h, std::move(future), continue_timestamps(panel.timestamps, horizon),
                    PanelKind::forecasts},
    };
    return out;
}

}  // namespace hrec

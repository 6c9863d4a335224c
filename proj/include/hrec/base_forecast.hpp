#pragma once

#include "hrec/dataset.hpp"

#include <string>

namespace hrec {

enum class ForecastMethod { mean, seasonal_naive, linear_trend_seasonal, trend_seasonal_ar };

struct BaseForecaster {
    ForecastMethod method = ForecastMethod::linear_trend_seasonal;
    int period = 4;

    /// "mean", "seasonal_naive", "linear_trend_seasonal", "trend_seasonal_ar".
    static BaseForecaster parse(const std::string& name, int period);
    std::string name() const;
};

struct BaseForecasts {
    SeriesPanel insample;  // fitted values over the observation period
    SeriesPanel future;    // horizon columns after the last observation
};

/**
 * Fits each series independently and returns in-sample fitted values plus
 * `horizon` forecasts.
 *
 * seasonal_naive uses y[t - period] as the fitted value; the first cycle,
 * which has no predecessor, uses the following cycle's value instead.
 * linear_trend_seasonal is OLS on [1, t, seasonal dummies].
 * trend_seasonal_ar adds a per-series AR(1) fitted to those OLS residuals:
 * fitted values are one-step predictions and forecasts decay the last
 * residual geometrically.
 */
BaseForecasts fit_predict(const SeriesPanel& panel, const BaseForecaster& method, std::size_t horizon);

}  // namespace hrec

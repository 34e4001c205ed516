#include "archboot/temporal.hpp"

#include <stdexcept>

namespace archboot::temporal {

void LocationSeries::validate() const
{
    if (dates.size() != conf.size()) {
        throw std::invalid_argument("series dates/conf misaligned");
    }
    for (std::size_t i = 1; i < dates.size(); ++i) {
        if (!(dates[i - 1] < dates[i])) {
            throw std::invalid_argument(
                "series dates must be strictly increasing");
        }
    }
    for (double c : conf) {
        if (!(c >= 0.0 && c <= 1.0)) {
            throw std::invalid_argument("confidence outside [0,1]");
        }
    }
}

StepFit fit_step(const LocationSeries& series)
{
    series.validate();
    const std::size_t n = series.size();
    if (n == 0) {
        throw std::out_of_range("cannot fit a step to an empty series");
    }
    // Candidate t0's residual: sum of conf^2 before t0 plus (1-conf)^2 from
    // t0 on. Series are short (yearly captures), so each candidate is
    // evaluated directly.
    StepFit best{0, 0.0};
    bool have_best = false;
    for (std::size_t t0 = 0; t0 <= n; ++t0) {
        double residual = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double target = i >= t0 ? 1.0 : 0.0;
            const double err = series.conf[i] - target;
            residual += err * err;
        }
        if (!have_best || residual < best.residual) {
            best = {t0, residual};
            have_best = true;
        }
    }
    return best;
}

LocationSeries smooth_series(const LocationSeries& series)
{
    const StepFit fit = fit_step(series);
    LocationSeries smoothed = series;
    for (std::size_t i = 0; i < smoothed.size(); ++i) {
        smoothed.conf[i] = i >= fit.t0 ? 1.0 : 0.0;
    }
    return smoothed;
}

std::optional<int> first_detection_year(const LocationSeries& series,
                                        double threshold)
{
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw std::invalid_argument("threshold must be inside (0,1)");
    }
    const LocationSeries smoothed = smooth_series(series);
    for (std::size_t i = 0; i < smoothed.size(); ++i) {
        if (smoothed.conf[i] >= threshold) {
            return smoothed.dates[i].year;
        }
    }
    return std::nullopt;
}

} // namespace archboot::temporal

#ifndef ARCHBOOT_TEMPORAL_HPP
#define ARCHBOOT_TEMPORAL_HPP

#include "archboot/date.hpp"

#include <optional>
#include <string>
#include <vector>

namespace archboot::temporal {

/// Task confidences at one location over its archival captures.
struct LocationSeries {
    std::string location_id;
    std::vector<Date> dates;  // strictly increasing
    std::vector<double> conf; // [0, 1], aligned with dates

    std::size_t size() const { return conf.size(); }
    void validate() const;
};

/// Least-squares fit of a monotone 0 -> 1 step. t0 is the first "on" index;
/// t0 == n means the step never turns on.
struct StepFit {
    std::size_t t0 = 0;
    double residual = 0.0;
};

/// Evaluates all n+1 candidate change positions and returns the one with the
/// smallest sum of squared errors; ties go to the smallest t0.
StepFit fit_step(const LocationSeries& series);

/// Projects the confidences onto the fitted step (0s before t0, 1s after).
LocationSeries smooth_series(const LocationSeries& series);

/// Year of the earliest capture whose smoothed confidence reaches the
/// threshold; absent when none does.
std::optional<int> first_detection_year(const LocationSeries& series,
                                        double threshold);

} // namespace archboot::temporal

#endif

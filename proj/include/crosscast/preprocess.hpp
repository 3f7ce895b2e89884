#pragma once

#include <array>
#include <span>
#include <utility>
#include <vector>

#include "crosscast/corpus.hpp"

namespace crosscast {

/// Window length used for model training rows; also the minimum history
/// before a series becomes forecastable.
inline constexpr int kMinWindow = 11;
inline constexpr int kMaxHorizon = 4;

/// A history window rescaled by its final observation (or a smoothed
/// analogue). scale_factor falls back to 1 when the divisor is zero, in
/// which case values pass through unchanged.
struct ScaledWindow {
    StreamKey origin;
    WeekIndex end_week = 0;
    std::vector<double> raw;
    double scale_factor = 1.0;
    std::vector<double> scaled;          // outlier-cleaned, divided by scale_factor
    std::vector<bool> outlier_mask;      // true where a value was replaced

    double last_scaled() const { return scaled.back(); }
};

/// Scales a gap-free window by its last value. With smoothed=true the
/// divisor is the kernel smooth of the given values evaluated at the end.
/// No outlier filtering is applied here.
ScaledWindow last_value_scale(std::span<const double> values, bool smoothed = false);

/// Original-scale values: raw where unmasked, replacement * scale_factor
/// where the outlier filter substituted a value.
std::vector<double> unscale(const ScaledWindow& window);

/// Local-linear kernel smooth (tricube weights, bandwidth
/// max(9, 10% of length)). Reproduces constants and straight lines
/// exactly; output clamped at 0. Missing values are skipped as fit points.
std::vector<double> smooth_series(std::span<const double> values);

/// The same smoother evaluated at a single index.
double smooth_at(std::span<const double> values, std::size_t at);

/// Flags points farther than 5 MAD (floored at 1) from a centered
/// rolling median (window 9) and replaces them with that median. At most
/// 20% of the window is flagged; beyond that only the most extreme
/// deviations are kept.
std::pair<std::vector<double>, std::vector<bool>> filter_outliers(std::span<const double> window);

/// One boosted-model training row: an 11-week cleaned, scaled window plus
/// up to four subsequent targets on the same scale.
struct TrainingRow {
    ScaledWindow window;
    std::array<double, kMaxHorizon> future{};  // NaN where the week is absent
    int end_index = 0;                         // index of the window's last week

    bool has_future(int h) const { return !is_missing(future[h - 1]); }
};

/// Rolling row construction: one row per window end u = kMinWindow-1 .. t-2
/// (0-based) whose 11-week window is gap-free and which has at least one
/// future week present. Scale factors come from smoothing the full prefix.
std::vector<TrainingRow> make_training_rows(const ObservationSeries& series, int H = kMaxHorizon);

/// Single-threaded reference for make_training_rows.
std::vector<TrainingRow> make_training_rows_serial(const ObservationSeries& series,
                                                   int H = kMaxHorizon);

/// The row a forecaster sees at a given origin index, or an empty optional
/// when the trailing window is not gap-free. Same construction as
/// make_training_rows but with no future requirement.
struct PredictionInput {
    ScaledWindow window;
    std::vector<double> history;  // prefix of raw values up to the origin
};
bool make_prediction_input(const ObservationSeries& series, int origin_index,
                           PredictionInput& out);

}  // namespace crosscast

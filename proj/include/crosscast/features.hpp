#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "crosscast/preprocess.hpp"

namespace crosscast {

/// Sentinel for features that cannot be computed from the available
/// history; tree models split it away from real values.
inline constexpr double kMissingFeature = -999.0;

inline constexpr int kFeatureCount = 14;

/// Per-window inputs to the boosted model, all on the scaled series except
/// level_log10 (which encodes the magnitude the scaling removed). horizon
/// rides along as a regular feature so one model serves all four horizons.
struct FeatureVector {
    std::array<double, 5> last_scaled;  // lags 1..5, most recent first
    double growth_rate_4wk = 0;
    double growth_rate_10wk = 0;
    double cov_10wk = 0;
    double autocorr_lag52 = kMissingFeature;  // sentinel when history < 104 weeks
    double weeks_since_max_norm = 0;
    double level_log10 = 0;
    double near_peak_flag = 0;
    double near_trough_flag = 0;
    double horizon = 1;

    std::array<double, kFeatureCount> to_array() const;
    static const std::array<std::string, kFeatureCount>& names();
};

/// Features from an 11-week scaled window. `history` is the raw prefix of
/// the series up to and including the window's last week (used for the
/// seasonality and peak-recency features); it may contain missing weeks.
FeatureVector compute_features(const ScaledWindow& window, std::span<const double> history,
                               int horizon);

/// Sample standard deviation / mean of the last `span` values (missing
/// entries skipped). 0 when all values are equal; +inf when the mean is
/// zero but the spread is not.
double coefficient_of_variation(std::span<const double> values, int span = 10);

/// SampEn(m, r_factor * sd): negative log of the conditional probability
/// that template matches of length m extend to length m+1. +inf when no
/// templates of length m+1 match.
double sample_entropy(std::span<const double> values, int m = 2, double r_factor = 0.2);

/// Single-threaded reference for sample_entropy.
double sample_entropy_serial(std::span<const double> values, int m = 2, double r_factor = 0.2);

/// Longest run of consecutive non-missing values; SampEn inputs must be
/// gap-free.
std::span<const double> longest_contiguous_run(std::span<const double> values);

/// Writes one row per training row (window features plus the four scaled
/// targets) with named columns, for offline inspection.
void write_feature_matrix(const ObservationSeries& series, const std::string& path);

}  // namespace crosscast

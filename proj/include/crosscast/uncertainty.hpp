#pragma once

#include <array>
#include <span>
#include <utility>
#include <vector>

#include "crosscast/preprocess.hpp"

namespace crosscast {

/// Minimum (forecast, truth) pairs before a dispersion fit is attempted.
inline constexpr int kMinResidualPairs = 20;

inline constexpr std::array<double, 3> kDefaultIntervalLevels = {0.5, 0.8, 0.95};

/// Per-horizon record of past point forecasts and what actually happened.
struct ResidualHistory {
    std::array<std::vector<std::pair<double, double>>, kMaxHorizon> pairs;

    int count(int horizon) const;
};

/// Appends one (forecast, truth) pair for the given horizon (1..4).
void update_history(ResidualHistory& history, int horizon, double forecast, double truth);

enum class FitMode { negbin, poisson_fallback, insufficient };

/// Mean-parameterized negative binomial: variance = mu + phi * mu^2.
struct NegBinParams {
    double phi = 0.0;
    FitMode mode = FitMode::insufficient;
};

/// Method-of-moments dispersion over one horizon's residual pairs, with
/// m_i = max(forecast_i, 0.5): phi = mean[(z_i - m_i)^2 - m_i] /
/// mean[m_i^2]. Non-positive estimates fall back to Poisson.
NegBinParams fit_dispersion(const ResidualHistory& history, int horizon);

/// Integer alpha-quantile of NB(mean, phi) (Poisson in fallback mode) by
/// CDF scan.
long long nb_quantile(double alpha, double mean, const NegBinParams& params);

/// Central intervals [q_{(1-l)/2}, q_{1-(1-l)/2}] of the predictive
/// distribution at each level; nested and non-negative by construction.
std::vector<std::pair<double, double>> prediction_intervals(
    double point_forecast, const NegBinParams& params,
    std::span<const double> levels = kDefaultIntervalLevels);

}  // namespace crosscast

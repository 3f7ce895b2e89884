#include "crosscast/uncertainty.hpp"

#include <algorithm>
#include <cmath>

namespace crosscast {

int ResidualHistory::count(int horizon) const {
    if (horizon < 1 || horizon > kMaxHorizon)
        throw Error("horizon must be in 1.." + std::to_string(kMaxHorizon));
    return static_cast<int>(pairs[horizon - 1].size());
}

void update_history(ResidualHistory& history, int horizon, double forecast, double truth) {
    if (horizon < 1 || horizon > kMaxHorizon)
        throw Error("horizon must be in 1.." + std::to_string(kMaxHorizon));
    history.pairs[horizon - 1].emplace_back(forecast, truth);
}

NegBinParams fit_dispersion(const ResidualHistory& history, int horizon) {
    const auto& p = history.pairs.at(horizon - 1);
    if (static_cast<int>(p.size()) < kMinResidualPairs)
        throw InsufficientHistory("dispersion fit needs " + std::to_string(kMinResidualPairs) +
                                  " pairs, have " + std::to_string(p.size()));
    double num = 0, den = 0;
    for (const auto& [forecast, truth] : p) {
        double m = std::max(forecast, 0.5);
        num += (truth - m) * (truth - m) - m;
        den += m * m;
    }
    NegBinParams params;
    double phi = num / den;
    if (phi > 0) {
        params.phi = phi;
        params.mode = FitMode::negbin;
    } else {
        params.phi = 0.0;
        params.mode = FitMode::poisson_fallback;
    }
    return params;
}

namespace {

double log_pmf(long long x, double mean, const NegBinParams& params) {
    double xd = static_cast<double>(x);
    if (params.mode == FitMode::poisson_fallback || params.phi <= 0)
        return -mean + xd * std::log(mean) - std::lgamma(xd + 1.0);
    double r = 1.0 / params.phi;
    double p = r / (r + mean);  // success probability; E = r(1-p)/p = mean
    return std::lgamma(xd + r) - std::lgamma(r) - std::lgamma(xd + 1.0) + r * std::log(p) +
           xd * std::log1p(-p);
}

}  // namespace

long long nb_quantile(double alpha, double mean, const NegBinParams& params) {
    if (params.mode == FitMode::insufficient)
        throw UnfitParams("dispersion parameters were never fit");
    if (mean <= 0)
        return 0;
    double variance = mean + params.phi * mean * mean;
    long long cap = static_cast<long long>(mean + 20.0 * std::sqrt(variance)) + 1000;
    double cdf = 0;
    for (long long x = 0; x <= cap; ++x) {
        cdf += std::exp(log_pmf(x, mean, params));
        if (cdf >= alpha)
            return x;
    }
    return cap;  // alpha ~ 1 with accumulated rounding
}

std::vector<std::pair<double, double>> prediction_intervals(double point_forecast,
                                                            const NegBinParams& params,
                                                            std::span<const double> levels) {
    if (params.mode == FitMode::insufficient)
        throw UnfitParams("dispersion parameters were never fit");
    std::vector<std::pair<double, double>> out;
    out.reserve(levels.size());
    for (double level : levels) {
        double lo = static_cast<double>(nb_quantile((1.0 - level) / 2.0, point_forecast, params));
        double hi =
            static_cast<double>(nb_quantile(1.0 - (1.0 - level) / 2.0, point_forecast, params));
        out.emplace_back(lo, hi);
    }
    return out;
}

}  // namespace crosscast

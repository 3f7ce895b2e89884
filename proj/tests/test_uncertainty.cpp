#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "crosscast/uncertainty.hpp"

using namespace crosscast;

namespace {

// independent quantile oracle: pmf by multiplicative recurrence, then a
// CDF walk. Poisson: p(0)=e^-mu, p(x+1)=p(x)*mu/(x+1). NB with r=1/phi,
// psucc=r/(r+mu): p(0)=psucc^r, p(x+1)=p(x)*(x+r)/(x+1)*(1-psucc).
long long quantile_oracle(double alpha, double mean, double phi) {
    double pmf, one_minus_p = 0, r = 0;
    if (phi <= 0) {
        pmf = std::exp(-mean);
    } else {
        r = 1.0 / phi;
        double psucc = r / (r + mean);
        pmf = std::exp(r * std::log(psucc));
        one_minus_p = 1.0 - psucc;
    }
    double cdf = pmf;
    long long x = 0;
    while (cdf < alpha && x < 100000000) {
        pmf *= phi <= 0 ? mean / static_cast<double>(x + 1)
                        : (static_cast<double>(x) + r) / static_cast<double>(x + 1) * one_minus_p;
        cdf += pmf;
        ++x;
    }
    return x;
}

ResidualHistory history_with(int horizon, const std::vector<std::pair<double, double>>& pairs) {
    ResidualHistory h;
    for (const auto& [f, z] : pairs)
        update_history(h, horizon, f, z);
    return h;
}

}  // namespace

TEST_CASE("residual history bookkeeping") {
    ResidualHistory h;
    CHECK(h.count(1) == 0);
    update_history(h, 1, 10.0, 12.0);
    update_history(h, 1, 11.0, 9.0);
    update_history(h, 3, 20.0, 25.0);
    CHECK(h.count(1) == 2);
    CHECK(h.count(2) == 0);
    CHECK(h.count(3) == 1);
    CHECK(h.pairs[0][0] == std::pair<double, double>{10.0, 12.0});

    CHECK_THROWS_AS(update_history(h, 0, 1.0, 1.0), Error);
    CHECK_THROWS_AS(update_history(h, 5, 1.0, 1.0), Error);
    CHECK_THROWS_AS(h.count(5), Error);
}

TEST_CASE("fit_dispersion needs twenty pairs") {
    std::vector<std::pair<double, double>> pairs;
    for (int i = 0; i < 19; ++i)
        pairs.emplace_back(10.0, 10.0 + i % 5);
    auto h = history_with(2, pairs);
    CHECK_THROWS_AS(fit_dispersion(h, 2), InsufficientHistory);
    CHECK_THROWS_AS(fit_dispersion(h, 1), InsufficientHistory);  // other horizons independent

    update_history(h, 2, 10.0, 11.0);
    CHECK_NOTHROW(fit_dispersion(h, 2));
}

TEST_CASE("perfect forecasts collapse to Poisson") {
    std::vector<std::pair<double, double>> pairs;
    for (int i = 0; i < 30; ++i)
        pairs.emplace_back(40.0 + i, 40.0 + i);  // truth == forecast
    auto h = history_with(1, pairs);
    auto params = fit_dispersion(h, 1);
    CHECK(params.mode == FitMode::poisson_fallback);
    CHECK(params.phi == 0.0);
}

TEST_CASE("method of moments recovers the dispersion") {
    // z ~ NB(mean 50, phi 0.2) via the gamma-Poisson mixture
    const double mu = 50.0, phi = 0.2, r = 1.0 / phi;
    std::mt19937 rng(321);
    std::gamma_distribution<double> gamma(r, mu / r);
    ResidualHistory h;
    for (int i = 0; i < 4000; ++i) {
        std::poisson_distribution<int> pois(gamma(rng));
        update_history(h, 1, mu, pois(rng));
    }
    auto params = fit_dispersion(h, 1);
    CHECK(params.mode == FitMode::negbin);
    CHECK(params.phi == doctest::Approx(phi).epsilon(0.2));

    // the hand formula on a small fixed set
    std::vector<std::pair<double, double>> tiny;
    for (int i = 0; i < 20; ++i)
        tiny.emplace_back(10.0, i % 2 ? 25.0 : 0.0);
    auto th = history_with(4, tiny);
    double num = 0, den = 0;
    for (const auto& [f, z] : tiny) {
        double m = std::max(f, 0.5);
        num += (z - m) * (z - m) - m;
        den += m * m;
    }
    CHECK(fit_dispersion(th, 4).phi == doctest::Approx(num / den));
}

TEST_CASE("forecast floor enters the moment formula") {
    // near-zero forecasts are floored at 0.5, keeping the estimate finite
    std::vector<std::pair<double, double>> pairs;
    for (int i = 0; i < 24; ++i)
        pairs.emplace_back(0.0, i % 3 == 0 ? 4.0 : 0.0);
    auto h = history_with(1, pairs);
    auto params = fit_dispersion(h, 1);
    CHECK(params.mode == FitMode::negbin);
    CHECK(std::isfinite(params.phi));
    double m = 0.5;
    double num = 0, den = 0;
    for (const auto& [f, z] : pairs) {
        num += (z - m) * (z - m) - m;
        den += m * m;
    }
    CHECK(params.phi == doctest::Approx(num / den));
}

TEST_CASE("Poisson quantiles at mean 100") {
    NegBinParams pois{0.0, FitMode::poisson_fallback};
    const double levels[] = {0.025, 0.1, 0.25, 0.5, 0.75, 0.9, 0.975};
    const long long expect[] = {81, 87, 93, 100, 107, 113, 120};
    for (int i = 0; i < 7; ++i) {
        CHECK(nb_quantile(levels[i], 100.0, pois) == expect[i]);
        CHECK(nb_quantile(levels[i], 100.0, pois) == quantile_oracle(levels[i], 100.0, 0.0));
    }
}

TEST_CASE("negative binomial intervals at mean 50, phi 0.2") {
    NegBinParams nb{0.2, FitMode::negbin};
    auto iv = prediction_intervals(50.0, nb, std::vector<double>{0.5, 0.95});
    CHECK(iv[0].first == 33.0);
    CHECK(iv[0].second == 63.0);
    CHECK(iv[1].first == 15.0);
    CHECK(iv[1].second == 105.0);

    // cross-check every bound against the recurrence oracle
    for (double a : {0.025, 0.25, 0.75, 0.975})
        CHECK(nb_quantile(a, 50.0, nb) == quantile_oracle(a, 50.0, 0.2));
}

TEST_CASE("quantile agrees with the oracle across regimes") {
    for (double mean : {0.7, 3.0, 12.5, 200.0}) {
        for (double phi : {0.0, 0.05, 0.4, 1.5}) {
            NegBinParams p{phi, phi > 0 ? FitMode::negbin : FitMode::poisson_fallback};
            for (double a : {0.025, 0.1, 0.5, 0.9, 0.975}) {
                INFO("mean=", mean, " phi=", phi, " alpha=", a);
                CHECK(nb_quantile(a, mean, p) == quantile_oracle(a, mean, phi));
            }
        }
    }
}

TEST_CASE("degenerate and error paths") {
    NegBinParams pois{0.0, FitMode::poisson_fallback};
    CHECK(nb_quantile(0.5, 0.0, pois) == 0);
    CHECK(nb_quantile(0.975, -3.0, pois) == 0);

    auto iv = prediction_intervals(0.0, pois);
    for (const auto& [lo, hi] : iv) {
        CHECK(lo == 0.0);
        CHECK(hi == 0.0);
    }

    NegBinParams unfit;
    CHECK_THROWS_AS(nb_quantile(0.5, 10.0, unfit), UnfitParams);
    CHECK_THROWS_AS(prediction_intervals(10.0, unfit), UnfitParams);
}

TEST_CASE("intervals nest and widen with dispersion") {
    NegBinParams nb{0.3, FitMode::negbin};
    auto iv = prediction_intervals(80.0, nb);  // default levels 0.5, 0.8, 0.95
    REQUIRE(iv.size() == 3);
    for (std::size_t i = 1; i < iv.size(); ++i) {
        CHECK(iv[i].first <= iv[i - 1].first);
        CHECK(iv[i].second >= iv[i - 1].second);
    }
    for (const auto& [lo, hi] : iv) {
        CHECK(lo >= 0.0);
        CHECK(lo <= hi);
    }

    // more dispersion, wider 95% band
    double prev_width = -1;
    for (double phi : {0.01, 0.1, 0.5, 2.0}) {
        NegBinParams p{phi, FitMode::negbin};
        auto one = prediction_intervals(80.0, p, std::vector<double>{0.95});
        double width = one[0].second - one[0].first;
        CHECK(width > prev_width);
        prev_width = width;
    }

    // Poisson fallback is tighter than any fitted NB at the same mean
    NegBinParams pois{0.0, FitMode::poisson_fallback};
    auto pv = prediction_intervals(80.0, pois, std::vector<double>{0.95});
    CHECK(pv[0].second - pv[0].first < prev_width);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

#include "crosscast/gbt.hpp"

using namespace crosscast;

namespace {

std::array<double, kFeatureCount> random_features(std::mt19937& rng) {
    std::uniform_real_distribution<double> val(0.0, 2.0);
    std::array<double, kFeatureCount> x;
    for (double& v : x)
        v = val(rng);
    return x;
}

// y rises with feature 0; spread rises with feature 1
DataMatrix learnable_data(int n, std::uint32_t seed) {
    std::mt19937 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    DataMatrix d;
    for (int i = 0; i < n; ++i) {
        auto x = random_features(rng);
        d.x.push_back(x);
        d.y.push_back(2.0 * x[0] + (0.2 + x[1]) * noise(rng));
    }
    return d;
}

double empirical_quantile(std::vector<double> v, double alpha) {
    std::sort(v.begin(), v.end());
    int idx = static_cast<int>(std::ceil(alpha * v.size())) - 1;
    return v[std::clamp(idx, 0, static_cast<int>(v.size()) - 1)];
}

ScaledWindow plain_window(double last = 1.0) {
    ScaledWindow w;
    w.scaled.assign(11, last);
    w.raw.assign(11, last);
    w.outlier_mask.assign(11, false);
    w.scale_factor = 1.0;
    return w;
}

}  // namespace

TEST_CASE("pinball_loss") {
    CHECK(pinball_loss(3.0, 3.0, 0.9) == 0.0);
    CHECK(pinball_loss(10.0, 8.0, 0.9) == doctest::Approx(1.8));   // under-prediction, high alpha
    CHECK(pinball_loss(8.0, 10.0, 0.9) == doctest::Approx(0.2));
    CHECK(pinball_loss(10.0, 8.0, 0.5) == doctest::Approx(0.5 * 2.0));
    CHECK(pinball_loss(8.0, 10.0, 0.5) == doctest::Approx(0.5 * 2.0));
    CHECK(pinball_loss(0.0, 4.0, 0.025) == doctest::Approx(0.975 * 4.0));
}

TEST_CASE("constant target collapses to a constant model") {
    std::mt19937 rng(3);
    DataMatrix d;
    for (int i = 0; i < 60; ++i) {
        d.x.push_back(random_features(rng));
        d.y.push_back(7.25);
    }
    GbtParams params;
    params.n_trees = 20;
    params.min_samples_leaf = 5;
    auto model = fit_boosted_model(d, params);
    for (int rep = 0; rep < 5; ++rep) {
        auto q = model.predict_raw(random_features(rng));
        for (double v : q)
            CHECK(v == doctest::Approx(7.25).epsilon(1e-12));
    }
}

TEST_CASE("depth-zero model reproduces empirical quantiles") {
    std::mt19937 rng(9);
    DataMatrix d;
    for (int i = 0; i < 10; ++i) {
        d.x.push_back(random_features(rng));
        d.y.push_back(static_cast<double>(i + 1));  // y = 1..10
    }
    GbtParams params;
    params.n_trees = 1;
    params.learning_rate = 1.0;
    params.max_depth = 0;
    params.min_samples_leaf = 5;
    for (double alpha : {0.25, 0.5, 0.9, 0.975}) {
        auto ens = fit_quantile_model(d, alpha, params);
        // ceil(alpha*n)-th order statistic
        CHECK(ens.predict(d.x[0]) == doctest::Approx(empirical_quantile(d.y, alpha)));
    }
}

TEST_CASE("training pinball loss never increases") {
    auto d = learnable_data(300, 77);
    GbtParams params;
    params.n_trees = 40;
    params.max_depth = 3;
    params.min_samples_leaf = 10;
    for (double alpha : {0.1, 0.5, 0.9}) {
        auto ens = fit_quantile_model(d, alpha, params);
        REQUIRE(ens.train_loss.size() == 41);
        for (std::size_t i = 1; i < ens.train_loss.size(); ++i)
            CHECK(ens.train_loss[i] <= ens.train_loss[i - 1] + 1e-12);
        // a learnable signal reduces the loss materially
        CHECK(ens.train_loss.back() < 0.9 * ens.train_loss.front());
    }
}

TEST_CASE("row floor is enforced") {
    auto d = learnable_data(39, 5);
    GbtParams params;  // min_samples_leaf 20 -> needs 40 rows
    CHECK_THROWS_AS(fit_quantile_model(d, 0.5, params), InsufficientRows);
    CHECK_THROWS_AS(fit_boosted_model(d, params), InsufficientRows);

    BoostedModel untrained;
    CHECK_THROWS_AS(untrained.predict_raw(d.x[0]), ModelUntrained);
    CHECK_THROWS_AS(predict_quantiles(untrained, plain_window(), d.y, 1.0), ModelUntrained);
}

TEST_CASE("predict_quantiles sorts, unscales, and clamps") {
    auto d = learnable_data(400, 123);
    GbtParams params;
    params.n_trees = 30;
    params.max_depth = 3;
    params.min_samples_leaf = 15;
    auto model = fit_boosted_model(d, params);

    ScaledWindow w = plain_window();
    // vary the window so features move around
    for (int i = 0; i < 11; ++i)
        w.scaled[i] = w.raw[i] = 0.5 + 0.05 * i;
    std::vector<double> history(w.raw.begin(), w.raw.end());

    auto f = predict_quantiles(model, w, history, 80.0);
    for (int h = 0; h < kMaxHorizon; ++h) {
        CHECK(std::is_sorted(f.quantiles[h].begin(), f.quantiles[h].end()));
        for (double q : f.quantiles[h])
            CHECK(q >= 0.0);
        CHECK(f.point[h] == f.quantiles[h][kNumQuantiles / 2]);
    }

    // quantiles scale linearly with the factor
    auto f2 = predict_quantiles(model, w, history, 160.0);
    for (int h = 0; h < kMaxHorizon; ++h)
        for (int qi = 0; qi < kNumQuantiles; ++qi)
            CHECK(f2.quantiles[h][qi] == doctest::Approx(2.0 * f.quantiles[h][qi]));

    // nonpositive factors fall back to the scaled axis
    auto f0 = predict_quantiles(model, w, history, 0.0);
    auto f1 = predict_quantiles(model, w, history, 1.0);
    for (int h = 0; h < kMaxHorizon; ++h)
        CHECK(f0.quantiles[h] == f1.quantiles[h]);

    // nested central intervals come for free after sorting
    for (int h = 0; h < kMaxHorizon; ++h) {
        CHECK(f.quantiles[h][0] <= f.quantiles[h][1]);  // 95% contains 80%
        CHECK(f.quantiles[h][5] <= f.quantiles[h][6]);
        CHECK(f.quantiles[h][1] <= f.quantiles[h][2]);  // 80% contains 50%
        CHECK(f.quantiles[h][4] <= f.quantiles[h][5]);
    }
}

TEST_CASE("fallback model predicts persistence") {
    BoostedModel model;
    model.fallback = true;
    model.trained = true;
    ScaledWindow w = plain_window(0.85);
    std::vector<double> history(w.raw.begin(), w.raw.end());
    auto f = predict_quantiles(model, w, history, 40.0);
    for (int h = 0; h < kMaxHorizon; ++h) {
        for (double q : f.quantiles[h])
            CHECK(q == doctest::Approx(0.85 * 40.0));
        CHECK(f.point[h] == doctest::Approx(34.0));
    }
}

TEST_CASE("same seed, same model; feature subsetting is deterministic") {
    auto d = learnable_data(250, 2024);
    GbtParams params;
    params.n_trees = 15;
    params.max_depth = 3;
    params.min_samples_leaf = 10;
    params.feature_subsample = 0.6;
    params.seed = 99;
    auto a = fit_boosted_model(d, params);
    auto b = fit_boosted_model(d, params);
    std::mt19937 rng(1);
    for (int rep = 0; rep < 10; ++rep) {
        auto x = random_features(rng);
        CHECK(a.predict_raw(x) == b.predict_raw(x));
    }
}

TEST_CASE("save_model / load_model round trip") {
    auto d = learnable_data(200, 31);
    GbtParams params;
    params.n_trees = 10;
    params.max_depth = 3;
    params.min_samples_leaf = 10;
    params.seed = 7;
    auto model = fit_boosted_model(d, params);
    model.scope = "single_disease";
    model.year = 2014;
    model.cutoff_day = first_day_of_year(2014);

    auto path = (std::filesystem::temp_directory_path() / "crosscast_gbt_model.json").string();
    save_model(model, path);
    auto re = load_model(path);
    CHECK(re.scope == model.scope);
    CHECK(re.year == 2014);
    CHECK(re.cutoff_day == model.cutoff_day);
    CHECK(re.fallback == model.fallback);
    CHECK(re.params.n_trees == params.n_trees);
    CHECK(re.params.seed == params.seed);
    std::mt19937 rng(8);
    for (int rep = 0; rep < 20; ++rep) {
        auto x = random_features(rng);
        CHECK(re.predict_raw(x) == model.predict_raw(x));
    }
    std::filesystem::remove(path);

    auto bogus = (std::filesystem::temp_directory_path() / "crosscast_gbt_bogus.json").string();
    {
        std::ofstream out(bogus);
        out << "{\"format\": \"something-else\"}";
    }
    CHECK_THROWS_AS(load_model(bogus), SchemaError);
    std::filesystem::remove(bogus);
    CHECK_THROWS_AS(load_model("/nonexistent/path/model.json"), SchemaError);
}

TEST_CASE("assemble_training_matrix respects the cutoff") {
    ObservationSeries s;
    s.key = {"src", "flu", "", "loc"};
    s.start_week = week_of_day(parse_iso_date("2012-01-02"));
    s.weekday_offset = static_cast<int>(parse_iso_date("2012-01-02") - 7 * s.start_week);
    s.values.resize(120);
    std::mt19937 rng(44);
    std::uniform_real_distribution<double> val(20.0, 80.0);
    for (double& v : s.values)
        v = std::round(val(rng));

    std::vector<const ObservationSeries*> set{&s};
    TrainingScope scope = TrainingScope::make(ScopeKind::single_disease);

    // cutoff far beyond the series: every row and future contributes
    DayNumber far = parse_iso_date("2030-01-01");
    auto full = assemble_training_matrix(set, scope, far);
    CHECK(full.size() == 4 * (120 - 11) - (3 + 2 + 1));

    // cutoff inside the series: windows and futures before it only
    DayNumber cutoff = s.day_of(60);
    auto cut = assemble_training_matrix(set, scope, cutoff);
    CHECK(cut.size() < full.size());
    // rows ending at index 55 keep all 4 futures (56..59 < 60); index 56 keeps 3, ...
    // window ends 10..55 complete, 56..58 truncated
    std::size_t expect = 4 * (56 - 10) + 3 + 2 + 1;
    CHECK(cut.size() == expect);

    // the horizon feature column cycles 1..4
    CHECK(full.x[0][kFeatureCount - 1] == 1.0);
    CHECK(full.x[1][kFeatureCount - 1] == 2.0);
    CHECK(full.x[3][kFeatureCount - 1] == 4.0);

    // targets sit on the window's scale
    auto rows = make_training_rows(s);
    CHECK(full.y[0] == rows[0].future[0]);
}

TEST_CASE("retrain_schedule trains one model per year") {
    Corpus corpus;
    corpus.taxonomy.mode_of["flu"] = Transmission::respiratory;
    ObservationSeries s;
    s.key = {"src", "flu", "", "loc"};
    s.start_week = week_of_day(parse_iso_date("2011-01-03"));
    s.weekday_offset = static_cast<int>(parse_iso_date("2011-01-03") - 7 * s.start_week);
    std::mt19937 rng(15);
    std::uniform_real_distribution<double> val(30.0, 90.0);
    s.values.resize(200);
    for (double& v : s.values)
        v = std::round(val(rng));
    corpus.series.push_back(std::move(s));

    GbtParams params;
    params.n_trees = 5;
    params.max_depth = 2;
    params.min_samples_leaf = 10;
    std::vector<int> years{2012, 2013};
    auto models = retrain_schedule(corpus, corpus.series[0].key,
                                   TrainingScope::make(ScopeKind::single_stream), years, params);
    REQUIRE(models.size() == 2);
    CHECK(models.at(2012).year == 2012);
    CHECK(models.at(2012).cutoff_day == first_day_of_year(2012));
    CHECK(models.at(2013).cutoff_day == parse_iso_date("2013-01-01"));
    CHECK_FALSE(models.at(2013).fallback);
    CHECK(models.at(2012).scope == "single_stream");

    // 2011 cutoff leaves almost no rows: flagged fallback, not an error
    std::vector<int> early{2011};
    auto fb = retrain_schedule(corpus, corpus.series[0].key,
                               TrainingScope::make(ScopeKind::single_stream), early, params);
    CHECK(fb.at(2011).fallback);
    CHECK(fb.at(2011).trained);
}

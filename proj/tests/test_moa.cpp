#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "crosscast/moa.hpp"

using namespace crosscast;

namespace {

ObservationSeries make_series(const std::string& source, const std::string& disease,
                              std::vector<double> values, WeekIndex start = 2200,
                              const std::string& location = "loc") {
    ObservationSeries s;
    s.key = {source, disease, "", location};
    s.start_week = start;
    s.values = std::move(values);
    return s;
}

std::vector<const ObservationSeries*> ptrs(const std::vector<ObservationSeries>& all) {
    std::vector<const ObservationSeries*> out;
    for (const auto& s : all)
        out.push_back(&s);
    return out;
}

bool same_snippet(const Snippet& a, const Snippet& b) {
    if (a.origin != b.origin || a.end_week != b.end_week || a.scale_factor != b.scale_factor)
        return false;
    if (a.x != b.x)
        return false;
    for (int h = 0; h < kMaxHorizon; ++h) {
        if (is_missing(a.y[h]) != is_missing(b.y[h]))
            return false;
        if (!is_missing(a.y[h]) && a.y[h] != b.y[h])
            return false;
    }
    return true;
}

bool same_library(const SnippetLibrary& a, const SnippetLibrary& b) {
    if (a.size() != b.size() || a.composition != b.composition)
        return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!same_snippet(a.snippets[i], b.snippets[i]))
            return false;
    return true;
}

// exhaustive reference: sort all eligible snippets by (L1 distance, index)
std::vector<std::size_t> brute_neighbors(const SnippetLibrary& lib,
                                         const std::array<double, kSnippetLength>& q, int l) {
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t i = 0; i < lib.size(); ++i) {
        double d = 0;
        for (int k = 0; k < kSnippetLength; ++k)
            d += std::abs(lib.snippets[i].x[k] - q[k]);
        all.emplace_back(d, i);
    }
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> out;
    for (int i = 0; i < l && i < static_cast<int>(all.size()); ++i)
        out.push_back(all[i].second);
    return out;
}

Snippet raw_snippet(std::array<double, kSnippetLength> x, std::array<double, kMaxHorizon> y,
                    const std::string& disease = "d") {
    Snippet s;
    s.x = x;
    s.y = y;
    s.origin = {"src", disease, "", "loc"};
    s.end_week = 0;
    return s;
}

}  // namespace

TEST_CASE("build_library snippet layout") {
    std::vector<ObservationSeries> all{
        make_series("srcA", "flu", {10, 12, 14, 16, 18, 20, 22, 24, 26})};
    auto set = ptrs(all);
    auto lib = build_library(set, all[0].week_of(8));
    REQUIRE(lib.size() == 5);  // end indices 4..8
    CHECK(lib.composition.at("flu") == 5);

    const Snippet& first = lib.snippets[0];
    CHECK(first.end_week == all[0].week_of(4));
    CHECK(first.scale_factor == 18.0);
    CHECK(first.x[4] == 1.0);
    CHECK(first.x[0] == doctest::Approx(10.0 / 18.0));
    for (int h = 0; h < kMaxHorizon; ++h)  // only this snippet sees all four futures
        CHECK(first.y[h] == doctest::Approx(all[0].values[5 + h] / 18.0));

    const Snippet& last = lib.snippets[4];
    CHECK(last.end_week == all[0].week_of(8));
    for (int h = 0; h < kMaxHorizon; ++h)
        CHECK(is_missing(last.y[h]));  // nothing beyond the library horizon yet

    const Snippet& mid = lib.snippets[1];  // ends at index 5, sees 6,7,8
    CHECK_FALSE(is_missing(mid.y[2]));
    CHECK(is_missing(mid.y[3]));
}

TEST_CASE("build_library edge cases") {
    std::vector<ObservationSeries> none;
    auto empty_set = ptrs(none);
    auto lib = build_library(empty_set, 2300);
    CHECK(lib.size() == 0);
    std::array<double, kSnippetLength> q{1, 1, 1, 1, 1};
    CHECK_THROWS_AS(find_neighborhood(lib, q), EmptyLibrary);

    // identical series under different keys both contribute
    std::vector<ObservationSeries> dup{
        make_series("srcA", "flu", {5, 6, 7, 8, 9, 10}),
        make_series("srcB", "flu", {5, 6, 7, 8, 9, 10})};
    auto dup_set = ptrs(dup);
    auto dlib = build_library(dup_set, dup[0].week_of(5));
    CHECK(dlib.size() == 4);
    CHECK(dlib.snippets[0].x == dlib.snippets[1].x);

    // gap interrupts window collection
    std::vector<ObservationSeries> gappy{
        make_series("srcA", "flu", {5, 6, kMissing, 8, 9, 10, 11, 12})};
    auto gset = ptrs(gappy);
    auto glib = build_library(gset, gappy[0].week_of(7));
    REQUIRE(glib.size() == 1);  // only the window ending at index 7 avoids the gap
    CHECK(glib.snippets[0].end_week == gappy[0].week_of(7));

    // a zero final value passes through unscaled
    std::vector<ObservationSeries> zero{make_series("srcA", "flu", {4, 3, 2, 1, 0})};
    auto zset = ptrs(zero);
    auto zlib = build_library(zset, zero[0].week_of(4));
    REQUIRE(zlib.size() == 1);
    CHECK(zlib.snippets[0].scale_factor == 1.0);
    CHECK(zlib.snippets[0].x[0] == 4.0);
}

TEST_CASE("update_library equals a fresh rebuild") {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> val(5.0, 60.0);
    std::vector<ObservationSeries> all{make_series("srcA", "flu", {}, 2200),
                                       make_series("srcB", "rsv", {}, 2195)};
    for (int i = 0; i < 30; ++i)
        all[0].values.push_back(std::round(val(rng)));
    for (int i = 0; i < 40; ++i)
        all[1].values.push_back(std::round(val(rng)));
    all[1].values[12] = kMissing;
    auto set = ptrs(all);

    WeekIndex w0 = 2215;
    auto incremental = build_library(set, w0);
    auto weekly = build_library(set, w0);
    for (WeekIndex w = w0 + 1; w <= 2229; ++w)
        update_library(weekly, set, w);
    update_library(incremental, set, 2229);  // one batch jump

    auto rebuilt = build_library(set, 2229);
    CHECK(same_library(weekly, rebuilt));
    CHECK(same_library(incremental, rebuilt));
    CHECK(weekly.last_update == 2229);

    CHECK_THROWS_AS(update_library(weekly, set, 2229), NonMonotoneUpdate);
    CHECK_THROWS_AS(update_library(weekly, set, 2210), NonMonotoneUpdate);

    // one more week appends exactly the windows ending that week;
    // srcA is exhausted at 2229, so only srcB contributes
    std::size_t before = rebuilt.size();
    update_library(rebuilt, set, 2230);
    CHECK(rebuilt.size() == before + 1);
}

TEST_CASE("default_neighborhood_size") {
    CHECK(default_neighborhood_size(50) == 5);
    CHECK(default_neighborhood_size(59) == 6);  // ceil
    CHECK(default_neighborhood_size(9) == 1);
    CHECK(default_neighborhood_size(100000) == 4422);  // cap
    CHECK(default_neighborhood_size(44220) == 4422);
}

TEST_CASE("find_neighborhood matches exhaustive search") {
    std::mt19937 rng(4711);
    std::uniform_real_distribution<double> val(10.0, 100.0);
    std::vector<ObservationSeries> all;
    for (int s = 0; s < 6; ++s) {
        std::vector<double> v(80);
        for (double& x : v)
            x = std::round(val(rng));
        all.push_back(make_series("src" + std::to_string(s), s % 2 ? "flu" : "rsv", std::move(v),
                                  2100 + 3 * s));
    }
    auto set = ptrs(all);
    auto lib = build_library(set, 2240);
    REQUIRE(lib.size() > 300);

    std::uniform_real_distribution<double> qv(0.2, 2.0);
    for (int rep = 0; rep < 25; ++rep) {
        std::array<double, kSnippetLength> q;
        for (double& x : q)
            x = qv(rng);
        int l = 1 + rep % 40;
        auto nb = find_neighborhood(lib, q, l);
        auto ser = find_neighborhood_serial(lib, q, l);
        auto brute = brute_neighbors(lib, q, l);
        REQUIRE(nb.members.size() == brute.size());
        CHECK(nb.members == brute);
        CHECK(ser.members == brute);
        CHECK(nb.distances == ser.distances);
        CHECK(std::is_sorted(nb.distances.begin(), nb.distances.end()));
        CHECK(nb.l_effective == l);
    }

    // smaller L takes a prefix of the larger neighborhood
    std::array<double, kSnippetLength> q{1.0, 0.9, 1.1, 1.0, 1.0};
    auto big = find_neighborhood(lib, q, 30);
    auto small = find_neighborhood(lib, q, 7);
    CHECK(std::equal(small.members.begin(), small.members.end(), big.members.begin()));

    // an exact copy of a library window comes back at distance zero
    std::array<double, kSnippetLength> copy = lib.snippets[42].x;
    auto hit = find_neighborhood(lib, copy, 3);
    CHECK(hit.distances[0] == 0.0);
    CHECK(lib.snippets[hit.members[0]].x == copy);

    // default L is 10% of the library
    auto def = find_neighborhood(lib, q);
    CHECK(def.l_effective == default_neighborhood_size(lib.size()));
}

TEST_CASE("self-exclusion masks the query's own weeks") {
    std::vector<double> v(30);
    for (int i = 0; i < 30; ++i)
        v[i] = 10.0 + (i % 7);
    std::vector<ObservationSeries> all{make_series("srcA", "flu", v, 2200),
                                       make_series("srcB", "flu", v, 2200)};
    auto set = ptrs(all);
    auto lib = build_library(set, 2229);

    std::array<double, kSnippetLength> q;
    double sf = 0;
    REQUIRE(make_snippet_query(all[0], 20, q, sf));

    QueryProvenance prov{all[0].key, all[0].week_of(20)};
    auto nb = find_neighborhood(lib, q, static_cast<int>(lib.size()), &prov);
    auto ser = find_neighborhood_serial(lib, q, static_cast<int>(lib.size()), &prov);
    CHECK(nb.members == ser.members);
    for (std::size_t m : nb.members) {
        const Snippet& s = lib.snippets[m];
        bool same_key = s.origin == all[0].key;
        auto gap = s.end_week - prov.end_week;
        bool overlaps = gap >= -(kSnippetLength - 1) && gap <= kSnippetLength - 1;
        CHECK_FALSE((same_key && overlaps));
    }
    // srcB windows at the very same weeks stay eligible
    bool found_other_source = false;
    for (std::size_t m : nb.members)
        if (lib.snippets[m].origin.source == "srcB" && lib.snippets[m].end_week == prov.end_week)
            found_other_source = true;
    CHECK(found_other_source);
    // exactly 9 own windows are excluded (end week within +/-4)
    CHECK(nb.members.size() == lib.size() - (2 * (kSnippetLength - 1) + 1));
}

TEST_CASE("make_snippet_query") {
    ObservationSeries s = make_series("srcA", "flu", {3, 4, 5, 6, 7, 8, 9, kMissing, 11, 12});
    std::array<double, kSnippetLength> x;
    double sf = 0;
    CHECK_FALSE(make_snippet_query(s, 3, x, sf));   // too early
    CHECK_FALSE(make_snippet_query(s, 10, x, sf));  // past the end
    CHECK_FALSE(make_snippet_query(s, 9, x, sf));   // gap in the window
    REQUIRE(make_snippet_query(s, 6, x, sf));
    CHECK(sf == 9.0);
    CHECK(x[4] == 1.0);
    CHECK(x[0] == doctest::Approx(5.0 / 9.0));
}

TEST_CASE("moa_forecast median conventions") {
    SnippetLibrary lib;
    lib.snippets = {raw_snippet({1, 1, 1, 1, 1}, {0.9, 0.8, kMissing, kMissing}),
                    raw_snippet({1, 1, 1, 1, 1}, {1.0, 1.2, 0.7, kMissing}),
                    raw_snippet({1, 1, 1, 1, 1}, {1.4, kMissing, kMissing, kMissing})};
    Neighborhood nb;
    nb.members = {0, 1, 2};

    auto f = moa_forecast(nb, lib, 100.0);
    CHECK(f[0] == doctest::Approx(100.0));         // odd count: middle value
    CHECK(f[1] == doctest::Approx(100.0));         // even count: midpoint of 0.8, 1.2
    CHECK(f[2] == doctest::Approx(70.0));          // single contributor
    CHECK(is_missing(f[3]));                       // nobody covers horizon 4

    Neighborhood one;
    one.members = {2};
    auto g = moa_forecast(one, lib, 50.0);
    CHECK(g[0] == doctest::Approx(70.0));

    // negative scaled futures clamp at zero after rescaling
    SnippetLibrary lib2;
    lib2.snippets = {raw_snippet({1, 1, 1, 1, 1}, {-0.5, 0.1, kMissing, kMissing})};
    Neighborhood n2;
    n2.members = {0};
    auto h = moa_forecast(n2, lib2, 10.0);
    CHECK(h[0] == 0.0);

    // neighbors with no futures at all cannot forecast
    SnippetLibrary lib3;
    lib3.snippets = {raw_snippet({1, 1, 1, 1, 1}, {kMissing, kMissing, kMissing, kMissing})};
    Neighborhood n3;
    n3.members = {0};
    CHECK_THROWS_AS(moa_forecast(n3, lib3, 1.0), NoFutureData);
}

TEST_CASE("forecast stays inside the neighbors' envelope") {
    std::mt19937 rng(88);
    std::uniform_real_distribution<double> val(0.1, 2.5);
    SnippetLibrary lib;
    for (int i = 0; i < 40; ++i) {
        std::array<double, kMaxHorizon> y;
        for (double& x : y)
            x = val(rng);
        lib.snippets.push_back(raw_snippet({1, 1, 1, 1, 1}, y));
    }
    Neighborhood nb;
    for (std::size_t i = 0; i < lib.size(); ++i)
        nb.members.push_back(i);
    double scale = 80.0;
    auto f = moa_forecast(nb, lib, scale);
    for (int h = 0; h < kMaxHorizon; ++h) {
        double lo = 1e18, hi = -1e18;
        for (const auto& s : lib.snippets) {
            lo = std::min(lo, s.y[h] * scale);
            hi = std::max(hi, s.y[h] * scale);
        }
        CHECK(f[h] >= lo);
        CHECK(f[h] <= hi);
    }
}

TEST_CASE("composition accounting") {
    SnippetLibrary lib;
    for (int i = 0; i < 10; ++i)
        lib.snippets.push_back(raw_snippet({1, 1, 1, 1, 1}, {1, 1, 1, 1}, i < 4 ? "flu" : "rsv"));
    Taxonomy tax;
    tax.mode_of["flu"] = Transmission::respiratory;
    tax.mode_of["rsv"] = Transmission::respiratory;

    Neighborhood nb;
    nb.members = {0, 1, 4, 5};
    auto shares = neighborhood_composition(nb, lib, tax);
    CHECK(shares.at("flu") == doctest::Approx(0.5));
    CHECK(shares.at("rsv") == doctest::Approx(0.5));
    double total = 0;
    for (const auto& [d, s] : shares)
        total += s;
    CHECK(total == doctest::Approx(1.0));

    Taxonomy missing;
    missing.mode_of["flu"] = Transmission::respiratory;
    CHECK_THROWS_AS(neighborhood_composition(nb, lib, missing), MissingTaxonomyEntry);
}

TEST_CASE("composition_relative_to_library ratios") {
    std::map<std::string, long long> nbc{{"dengue", 40}, {"zika", 60}};
    std::map<std::string, long long> libc{{"dengue", 150}, {"zika", 850}, {"malaria", 500}};
    auto r = composition_relative_to_library(nbc, libc);
    CHECK(r.at("dengue") == doctest::Approx(4.0));  // 0.4 selected vs 0.1 available
    CHECK(r.at("zika") == doctest::Approx((60.0 / 100.0) / (850.0 / 1500.0)));
    CHECK(r.at("malaria") == 0.0);  // present in the library, never selected

    std::map<std::string, long long> orphan{{"ghost", 3}};
    CHECK_THROWS_AS(composition_relative_to_library(orphan, libc), DivisionByZero);
}

TEST_CASE("all_data scope subsamples the library") {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> val(10.0, 50.0);
    std::vector<ObservationSeries> all;
    std::vector<double> v(300);
    for (double& x : v)
        x = std::round(val(rng));
    all.push_back(make_series("srcA", "flu", v));
    auto set = ptrs(all);

    auto full = build_library(set, all[0].week_of(299));
    auto sparse =
        build_library(set, all[0].week_of(299), TrainingScope::make(ScopeKind::all_data, 11));
    CHECK(full.size() == 296);
    CHECK(sparse.size() < full.size());
    CHECK(sparse.size() > full.size() / 4);  // roughly half survives
    // retained snippets are exactly those keep_training_row admits
    auto scope = TrainingScope::make(ScopeKind::all_data, 11);
    std::size_t expect = 0;
    for (int e = kSnippetLength - 1; e < 300; ++e)
        if (keep_training_row(scope, all[0].key, e))
            ++expect;
    CHECK(sparse.size() == expect);

    // deterministic: same seed, same library
    auto again =
        build_library(set, all[0].week_of(299), TrainingScope::make(ScopeKind::all_data, 11));
    CHECK(same_library(sparse, again));
}

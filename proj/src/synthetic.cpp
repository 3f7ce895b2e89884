#include "crosscast/synthetic.hpp"

#include <cmath>
#include <random>

namespace crosscast::synth {

namespace {

constexpr double kTau = 6.283185307179586;

struct SeriesSpec {
    StreamKey key;
    const char* start_date = "2010-01-04";
    int n_weeks = 260;
    double base = 100.0;
    double amplitude = 0.6;  // seasonal swing as a fraction of base
    double phase = 0.0;      // fraction of a year
    double noise_sd = 0.1;   // sigma of multiplicative lognormal noise
};

std::uint64_t stream_seed(std::uint64_t corpus_seed, const StreamKey& key) {
    return hash_combine(mix64(corpus_seed + 0x9e3779b97f4a7c15ULL), hash_string(key.label()));
}

ObservationSeries gen_series(const SeriesSpec& spec, std::uint64_t corpus_seed) {
    ObservationSeries s;
    s.key = spec.key;
    DayNumber day = parse_iso_date(spec.start_date);
    s.start_week = week_of_day(day);
    s.weekday_offset = static_cast<int>(day - 7 * s.start_week);
    std::mt19937_64 eng(stream_seed(corpus_seed, spec.key));
    std::normal_distribution<double> noise(0.0, spec.noise_sd);
    s.values.reserve(spec.n_weeks);
    for (int i = 0; i < spec.n_weeks; ++i) {
        WeekIndex w = s.start_week + i;
        double season =
            1.0 + spec.amplitude * std::sin(kTau * (static_cast<double>(w) / 52.0 + spec.phase));
        double v = spec.base * std::max(0.05, season) * std::exp(noise(eng));
        s.values.push_back(std::round(std::max(0.0, v)));
    }
    return s;
}

Corpus make_basic(std::uint64_t seed) {
    Corpus c;
    c.taxonomy.mode_of = {{"alpha", Transmission::respiratory},
                          {"beta", Transmission::respiratory},
                          {"gamma", Transmission::fecal_oral}};
    std::vector<SeriesSpec> specs = {
        {{"synthA", "alpha", "", "loc00"}, "2012-07-02", 156, 220, 0.65, 0.15, 0.08},
        {{"synthA", "alpha", "", "loc01"}, "2011-01-03", 260, 150, 0.65, 0.15, 0.10},
        {{"synthB", "alpha", "", "loc00"}, "2011-01-03", 260, 400, 0.60, 0.15, 0.12},
        {{"synthA", "beta", "", "loc00"}, "2011-01-03", 240, 90, 0.50, 0.40, 0.12},
        {{"synthA", "gamma", "", "loc00"}, "2011-01-03", 250, 60, 0.40, 0.65, 0.15},
    };
    for (const auto& spec : specs)
        c.series.push_back(gen_series(spec, seed));
    return c;
}

Corpus make_positive(std::uint64_t seed) {
    Corpus c;
    for (const char* d : {"d1", "d2", "d3", "d4", "d5", "d6"})
        c.taxonomy.mode_of[d] = Transmission::vector_borne;
    c.taxonomy.mode_of["x1"] = Transmission::fecal_oral;

    // every vector-borne stream rides the same seasonal latent
    double phase = hash_to_unit(mix64(seed ^ 0x706f73ULL));
    std::vector<SeriesSpec> specs = {
        {{"synthA", "d1", "", "loc00"}, "2013-01-07", 80, 180, 0.7, phase, 0.18},
        {{"synthB", "d1", "", "loc01"}, "2010-01-04", 260, 320, 0.7, phase, 0.18},
        {{"synthB", "d1", "", "loc02"}, "2010-01-04", 260, 90, 0.7, phase, 0.18},
        {{"synthB", "d1", "", "loc03"}, "2010-01-04", 260, 150, 0.7, phase, 0.18},
    };
    const double bases[] = {60, 400, 130, 240, 75, 310, 180, 95, 520, 45};
    int bi = 0;
    for (const char* d : {"d2", "d3", "d4", "d5", "d6"}) {
        for (const char* loc : {"loc01", "loc02"}) {
            specs.push_back(
                {{"synthB", d, "", loc}, "2010-01-04", 260, bases[bi++], 0.7, phase, 0.18});
        }
    }
    specs.push_back({{"synthA", "x1", "", "loc00"}, "2010-01-04", 200, 140, 0.3,
                     phase + 0.37, 0.25});
    for (const auto& spec : specs)
        c.series.push_back(gen_series(spec, seed));
    return c;
}

Corpus make_negative(std::uint64_t seed) {
    Corpus c;
    c.taxonomy.mode_of["d1"] = Transmission::vector_borne;
    for (int i = 1; i <= 10; ++i)
        c.taxonomy.mode_of["n" + std::string(i < 10 ? "0" : "") + std::to_string(i)] =
            Transmission::vector_borne;
    c.taxonomy.mode_of["r1"] = Transmission::respiratory;

    double phase = hash_to_unit(mix64(seed ^ 0x6e6567ULL));
    std::vector<SeriesSpec> specs = {
        {{"synthA", "d1", "", "loc00"}, "2012-06-04", 100, 200, 0.7, phase, 0.12},
        {{"synthB", "d1", "", "loc01"}, "2010-01-04", 260, 340, 0.7, phase, 0.12},
        {{"synthB", "d1", "", "loc02"}, "2010-01-04", 260, 110, 0.7, phase, 0.12},
        {{"synthB", "d1", "", "loc03"}, "2010-01-04", 260, 170, 0.7, phase, 0.12},
        {{"synthA", "r1", "", "loc00"}, "2010-01-04", 220, 80, 0.5, phase + 0.3, 0.12},
    };
    for (int i = 1; i <= 10; ++i) {
        std::string d = "n" + std::string(i < 10 ? "0" : "") + std::to_string(i);
        // amplitude 0 + heavy lognormal noise: bursty, structureless counts
        specs.push_back({{"synthB", d, "", "loc00"}, "2010-01-04", 260, 40, 0.0, 0.0, 1.5});
    }
    for (const auto& spec : specs)
        c.series.push_back(gen_series(spec, seed));
    return c;
}

Corpus make_selfsim(std::uint64_t seed) {
    Corpus c;
    c.taxonomy.mode_of = {{"motif", Transmission::vector_borne},
                          {"steady", Transmission::vector_borne}};

    // one shared trajectory; siblings are exact rescalings of it
    const int n = 180;
    DayNumber day0 = parse_iso_date("2011-01-03");
    WeekIndex w0 = week_of_day(day0);
    std::mt19937_64 eng(mix64(seed ^ 0x73656c66ULL));
    std::normal_distribution<double> wiggle(0.0, 0.05);
    std::vector<double> latent(n);
    for (int i = 0; i < n; ++i) {
        double season = 1.0 + 0.85 * std::sin(kTau * static_cast<double>(w0 + i) / 52.0);
        latent[i] = 120.0 * std::max(0.05, season) * std::exp(wiggle(eng));
    }
    auto scaled_copy = [&](StreamKey key, double scale) {
        ObservationSeries s;
        s.key = std::move(key);
        s.start_week = w0;
        s.weekday_offset = static_cast<int>(day0 - 7 * w0);
        for (int i = 0; i < n; ++i)
            s.values.push_back(std::round(scale * latent[i]));
        return s;
    };
    c.series.push_back(scaled_copy({"synthA", "motif", "", "loc00"}, 1.0));
    c.series.push_back(scaled_copy({"synthB", "motif", "", "loc01"}, 2.4));
    c.series.push_back(scaled_copy({"synthB", "motif", "", "loc02"}, 0.6));
    for (const char* loc : {"loc01", "loc02", "loc03"}) {
        SeriesSpec spec{{"synthB", "steady", "", loc}, "2011-01-03", n, 300, 0.0, 0.0, 0.12};
        c.series.push_back(gen_series(spec, seed));
    }
    return c;
}

}  // namespace

Corpus make_scenario(const std::string& name, std::uint64_t seed) {
    if (name == "basic")
        return make_basic(seed);
    if (name == "positive")
        return make_positive(seed);
    if (name == "negative")
        return make_negative(seed);
    if (name == "selfsim")
        return make_selfsim(seed);
    throw SchemaError("unknown scenario '" + name + "'");
}

std::vector<std::string> scenario_names() {
    return {"basic", "positive", "negative", "selfsim"};
}

StreamKey scenario_target(const std::string& name) {
    if (name == "basic")
        return {"synthA", "alpha", "", "loc00"};
    if (name == "positive")
        return {"synthA", "d1", "", "loc00"};
    if (name == "negative")
        return {"synthA", "d1", "", "loc00"};
    if (name == "selfsim")
        return {"synthA", "motif", "", "loc00"};
    throw SchemaError("unknown scenario '" + name + "'");
}

}  // namespace crosscast::synth

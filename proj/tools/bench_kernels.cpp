// Compares the OpenMP kernels against their single-threaded reference
// implementations on synthetic workloads and reports speedups.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <vector>

#include "crosscast/features.hpp"
#include "crosscast/moa.hpp"
#include "crosscast/preprocess.hpp"
#include "crosscast/synthetic.hpp"

using namespace crosscast;

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
    auto dt = std::chrono::steady_clock::now() - t0;
    return std::chrono::duration<double, std::milli>(dt).count();
}

ObservationSeries long_series(int n, std::uint64_t seed) {
    ObservationSeries s;
    s.key = {"bench", "alpha", "", "loc00"};
    s.start_week = week_of_day(parse_iso_date("2000-01-03"));
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> noise(0.0, 0.15);
    for (int i = 0; i < n; ++i) {
        double season = 1.0 + 0.6 * std::sin(2.0 * 3.14159265358979 * i / 52.0);
        s.values.push_back(std::round(150.0 * season * std::exp(noise(eng))));
    }
    return s;
}

void bench_neighborhood() {
    Corpus corpus = synth::make_scenario("negative", 1);
    std::vector<const ObservationSeries*> training;
    for (const auto& s : corpus.series)
        training.push_back(&s);
    WeekIndex last = corpus.series[0].week_of(corpus.series[0].size() - 1);
    SnippetLibrary lib = build_library(training, last);

    const int n_queries = 400;
    std::mt19937_64 eng(7);
    std::uniform_real_distribution<double> u(0.2, 1.8);
    std::vector<std::array<double, kSnippetLength>> queries(n_queries);
    for (auto& q : queries)
        for (double& v : q)
            v = u(eng);

    auto t0 = std::chrono::steady_clock::now();
    double checksum_serial = 0;
    for (const auto& q : queries) {
        Neighborhood nb = find_neighborhood_serial(lib, q);
        checksum_serial += nb.distances.front() + nb.distances.back();
    }
    double serial_ms = ms_since(t0);

    t0 = std::chrono::steady_clock::now();
    double checksum_parallel = 0;
    for (const auto& q : queries) {
        Neighborhood nb = find_neighborhood(lib, q);
        checksum_parallel += nb.distances.front() + nb.distances.back();
    }
    double parallel_ms = ms_since(t0);

    std::printf("neighborhood scan   %7zu snippets x %d queries  serial %8.2f ms  "
                "parallel %8.2f ms  speedup %.2fx%s\n",
                lib.snippets.size(), n_queries, serial_ms, parallel_ms,
                serial_ms / parallel_ms,
                checksum_serial == checksum_parallel ? "" : "  [MISMATCH]");
}

void bench_sampen() {
    ObservationSeries s = long_series(6000, 11);
    auto t0 = std::chrono::steady_clock::now();
    double a = sample_entropy_serial(s.values);
    double serial_ms = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    double b = sample_entropy(s.values);
    double parallel_ms = ms_since(t0);
    std::printf("sample entropy      %7d points                serial %8.2f ms  "
                "parallel %8.2f ms  speedup %.2fx%s\n",
                s.size(), serial_ms, parallel_ms, serial_ms / parallel_ms,
                a == b ? "" : "  [MISMATCH]");
}

void bench_training_rows() {
    ObservationSeries s = long_series(20000, 23);
    auto t0 = std::chrono::steady_clock::now();
    auto rows_serial = make_training_rows_serial(s);
    double serial_ms = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    auto rows_parallel = make_training_rows(s);
    double parallel_ms = ms_since(t0);
    bool same = rows_serial.size() == rows_parallel.size();
    for (std::size_t i = 0; same && i < rows_serial.size(); ++i)
        same = rows_serial[i].end_index == rows_parallel[i].end_index &&
               rows_serial[i].window.scaled == rows_parallel[i].window.scaled;
    std::printf("training rows       %7d weeks -> %zu rows     serial %8.2f ms  "
                "parallel %8.2f ms  speedup %.2fx%s\n",
                s.size(), rows_parallel.size(), serial_ms, parallel_ms,
                serial_ms / parallel_ms, same ? "" : "  [MISMATCH]");
}

}  // namespace

int main() {
    bench_neighborhood();
    bench_sampen();
    bench_training_rows();
    return 0;
}

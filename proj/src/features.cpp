#include "crosscast/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "crosscast/csv.hpp"

namespace crosscast {

namespace {

// Least-squares slope of the last n values against week index.
double trailing_slope(std::span<const double> values, int n) {
    if (static_cast<int>(values.size()) < n)
        return kMissingFeature;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        double x = i;
        double y = values[values.size() - n + i];
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    double det = n * sxx - sx * sx;
    return (n * sxy - sx * sy) / det;
}

double pearson(std::span<const double> a, std::span<const double> b) {
    double ma = 0, mb = 0;
    int n = static_cast<int>(a.size());
    for (int i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double saa = 0, sbb = 0, sab = 0;
    for (int i = 0; i < n; ++i) {
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
        sab += (a[i] - ma) * (b[i] - mb);
    }
    if (saa == 0 || sbb == 0)
        return kMissingFeature;
    return sab / std::sqrt(saa * sbb);
}

constexpr double kCovCap = 1e6;  // keeps the feature finite when the mean is 0

}  // namespace

std::array<double, kFeatureCount> FeatureVector::to_array() const {
    return {last_scaled[0], last_scaled[1], last_scaled[2], last_scaled[3], last_scaled[4],
            growth_rate_4wk, growth_rate_10wk, cov_10wk, autocorr_lag52,
            weeks_since_max_norm, level_log10, near_peak_flag, near_trough_flag, horizon};
}

const std::array<std::string, kFeatureCount>& FeatureVector::names() {
    static const std::array<std::string, kFeatureCount> kNames = {
        "lag1", "lag2", "lag3", "lag4", "lag5",
        "growth_rate_4wk", "growth_rate_10wk", "cov_10wk", "autocorr_lag52",
        "weeks_since_max_norm", "level_log10", "near_peak_flag", "near_trough_flag", "horizon"};
    return kNames;
}

double coefficient_of_variation(std::span<const double> values, int span) {
    int first = std::max(0, static_cast<int>(values.size()) - span);
    double sum = 0;
    int n = 0;
    for (int i = first; i < static_cast<int>(values.size()); ++i) {
        if (is_missing(values[i]))
            continue;
        sum += values[i];
        ++n;
    }
    if (n < 2)
        throw InsufficientData("coefficient_of_variation needs at least 2 observations in span");
    double mean = sum / n;
    double ss = 0;
    bool all_equal = true;
    double first_val = kMissing;
    for (int i = first; i < static_cast<int>(values.size()); ++i) {
        if (is_missing(values[i]))
            continue;
        if (is_missing(first_val))
            first_val = values[i];
        else if (values[i] != first_val)
            all_equal = false;
        ss += (values[i] - mean) * (values[i] - mean);
    }
    if (all_equal)
        return 0.0;
    double sd = std::sqrt(ss / (n - 1));
    if (mean == 0)
        return std::numeric_limits<double>::infinity();
    return sd / mean;
}

FeatureVector compute_features(const ScaledWindow& window, std::span<const double> history,
                               int horizon) {
    const auto& s = window.scaled;
    if (static_cast<int>(s.size()) < kMinWindow)
        throw TooShort("feature window must have at least " + std::to_string(kMinWindow) +
                       " points");

    FeatureVector f;
    for (int k = 0; k < 5; ++k)
        f.last_scaled[k] = s[s.size() - 1 - k];
    f.growth_rate_4wk = trailing_slope(s, 4);
    f.growth_rate_10wk = trailing_slope(s, 10);

    double cov = coefficient_of_variation(s, 10);
    f.cov_10wk = std::isfinite(cov) ? std::min(cov, kCovCap) : kCovCap;

    // seasonality: correlation against the same week one year back
    f.autocorr_lag52 = kMissingFeature;
    if (history.size() >= 104) {
        std::vector<double> cur, lag;
        for (std::size_t i = 52; i < history.size(); ++i) {
            if (is_missing(history[i]) || is_missing(history[i - 52]))
                continue;
            cur.push_back(history[i]);
            lag.push_back(history[i - 52]);
        }
        if (cur.size() >= 26)
            f.autocorr_lag52 = pearson(cur, lag);
    }

    // recency of the all-time maximum over the available history
    double hist_max = -1;
    int max_idx = -1;
    for (std::size_t i = 0; i < history.size(); ++i) {
        if (is_missing(history[i]))
            continue;
        if (history[i] >= hist_max) {
            hist_max = history[i];
            max_idx = static_cast<int>(i);
        }
    }
    f.weeks_since_max_norm =
        max_idx < 0 ? kMissingFeature
                    : static_cast<double>(history.size() - 1 - max_idx) /
                          static_cast<double>(history.size());

    f.level_log10 = std::log10(window.scale_factor + 1.0);

    double wmax = *std::max_element(s.begin(), s.end());
    double wmin = *std::min_element(s.begin(), s.end());
    double last = s.back();
    if (wmax > wmin) {
        f.near_peak_flag = (last >= 0.95 * wmax && f.growth_rate_4wk <= 0) ? 1.0 : 0.0;
        f.near_trough_flag = (last <= 1.05 * wmin && f.growth_rate_4wk >= 0) ? 1.0 : 0.0;
    }
    f.horizon = horizon;
    return f;
}

namespace {

double sampen_tolerance(std::span<const double> values, double r_factor) {
    double mean = 0;
    for (double v : values) {
        if (is_missing(v))
            throw InsufficientData("sample_entropy input contains missing values");
        mean += v;
    }
    mean /= static_cast<double>(values.size());
    double ss = 0;
    for (double v : values)
        ss += (v - mean) * (v - mean);
    double sd = std::sqrt(ss / (static_cast<double>(values.size()) - 1));
    if (sd == 0)
        throw ZeroVariance("sample_entropy undefined for a constant sequence");
    return r_factor * sd;
}

}  // namespace

double sample_entropy_serial(std::span<const double> values, int m, double r_factor) {
    const int n = static_cast<int>(values.size());
    if (n < 20)
        throw TooShort("sample_entropy needs at least 20 points, got " + std::to_string(n));
    const double r = sampen_tolerance(values, r_factor);

    const int nt = n - m;  // templates of length m that can extend to m+1
    long long match_m = 0, match_m1 = 0;
    for (int i = 0; i < nt; ++i) {
        for (int j = i + 1; j < nt; ++j) {
            double d = 0;
            for (int k = 0; k < m; ++k)
                d = std::max(d, std::abs(values[i + k] - values[j + k]));
            if (d <= r) {
                ++match_m;
                if (std::abs(values[i + m] - values[j + m]) <= r)
                    ++match_m1;
            }
        }
    }
    if (match_m1 == 0 || match_m == 0)
        return std::numeric_limits<double>::infinity();
    return -std::log(static_cast<double>(match_m1) / static_cast<double>(match_m));
}

double sample_entropy(std::span<const double> values, int m, double r_factor) {
    const int n = static_cast<int>(values.size());
    if (n < 20)
        throw TooShort("sample_entropy needs at least 20 points, got " + std::to_string(n));
    const double r = sampen_tolerance(values, r_factor);

    const int nt = n - m;
    long long match_m = 0, match_m1 = 0;
#pragma omp parallel for schedule(dynamic, 16) reduction(+ : match_m, match_m1)
    for (int i = 0; i < nt; ++i) {
        long long bm = 0, bm1 = 0;
        for (int j = i + 1; j < nt; ++j) {
            double d = 0;
            for (int k = 0; k < m; ++k)
                d = std::max(d, std::abs(values[i + k] - values[j + k]));
            if (d <= r) {
                ++bm;
                if (std::abs(values[i + m] - values[j + m]) <= r)
                    ++bm1;
            }
        }
        match_m += bm;
        match_m1 += bm1;
    }
    if (match_m1 == 0 || match_m == 0)
        return std::numeric_limits<double>::infinity();
    return -std::log(static_cast<double>(match_m1) / static_cast<double>(match_m));
}

std::span<const double> longest_contiguous_run(std::span<const double> values) {
    std::size_t best_start = 0, best_len = 0, start = 0, len = 0;
    for (std::size_t i = 0; i <= values.size(); ++i) {
        if (i < values.size() && !is_missing(values[i])) {
            if (len == 0)
                start = i;
            ++len;
        } else {
            if (len > best_len) {
                best_len = len;
                best_start = start;
            }
            len = 0;
        }
    }
    return values.subspan(best_start, best_len);
}

void write_feature_matrix(const ObservationSeries& series, const std::string& path) {
    auto rows = make_training_rows(series);
    std::ofstream out(path);
    if (!out)
        throw Error("cannot write " + path);
    out << "source,disease,subtype,location,end_week";
    for (const auto& name : FeatureVector::names())
        if (name != "horizon")
            out << "," << name;
    for (int h = 1; h <= kMaxHorizon; ++h)
        out << ",future_" << h;
    out << "\n";
    for (const auto& row : rows) {
        std::span<const double> history(series.values.data(),
                                        static_cast<std::size_t>(row.end_index) + 1);
        auto f = compute_features(row.window, history, 1).to_array();
        out << series.key.source << "," << series.key.disease << "," << series.key.subtype
            << "," << series.key.location << ","
            << format_iso_date(series.day_of(row.end_index));
        for (int k = 0; k < kFeatureCount - 1; ++k)  // all but horizon
            out << "," << csv::format_value(f[k]);
        for (int h = 0; h < kMaxHorizon; ++h)
            out << "," << csv::format_value(row.future[h]);
        out << "\n";
    }
}

}  // namespace crosscast

#include "crosscast/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace crosscast {

namespace {

double median_of(std::vector<double>& scratch) {
    std::size_t n = scratch.size();
    std::nth_element(scratch.begin(), scratch.begin() + n / 2, scratch.end());
    double hi = scratch[n / 2];
    if (n % 2 == 1)
        return hi;
    double lo = *std::max_element(scratch.begin(), scratch.begin() + n / 2);
    return 0.5 * (lo + hi);
}

double smooth_bandwidth(std::size_t n) {
    return std::max(9.0, 0.10 * static_cast<double>(n));
}

}  // namespace

double smooth_at(std::span<const double> values, std::size_t at) {
    const double bw = smooth_bandwidth(values.size());
    const std::size_t lo = at > static_cast<std::size_t>(bw) ? at - static_cast<std::size_t>(bw) : 0;
    const std::size_t hi = std::min(values.size() - 1, at + static_cast<std::size_t>(bw));

    // Weighted local-linear fit around `at`; tricube kernel.
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t j = lo; j <= hi; ++j) {
        if (is_missing(values[j]))
            continue;
        double u = (static_cast<double>(j) - static_cast<double>(at)) / bw;
        double au = std::abs(u);
        if (au >= 1.0)
            continue;
        double w = std::pow(1.0 - au * au * au, 3);
        double x = static_cast<double>(j) - static_cast<double>(at);
        sw += w;
        sx += w * x;
        sy += w * values[j];
        sxx += w * x * x;
        sxy += w * x * values[j];
    }
    if (sw == 0)
        return is_missing(values[at]) ? 0.0 : values[at];
    double det = sw * sxx - sx * sx;
    double fit;
    if (std::abs(det) < 1e-12 * sw * sxx || sxx == 0) {
        fit = sy / sw;  // degenerate spread, fall back to the weighted mean
    } else {
        double intercept = (sy * sxx - sx * sxy) / det;
        fit = intercept;  // evaluated at x = 0, i.e. at `at`
    }
    return std::max(0.0, fit);
}

std::vector<double> smooth_series(std::span<const double> values) {
    if (values.size() < 5)
        throw TooShort("smooth_series needs at least 5 points, got " +
                       std::to_string(values.size()));
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        out[i] = is_missing(values[i]) ? kMissing : smooth_at(values, i);
    return out;
}

std::pair<std::vector<double>, std::vector<bool>> filter_outliers(std::span<const double> window) {
    const int n = static_cast<int>(window.size());
    if (n < kMinWindow)
        throw TooShort("filter_outliers needs at least " + std::to_string(kMinWindow) +
                       " points, got " + std::to_string(n));
    constexpr int kHalf = 4;  // rolling window of 9, centered
    constexpr double kCut = 5.0;
    constexpr double kMadFloor = 1.0;

    std::vector<double> med(n), thresh(n);
    std::vector<double> scratch;
    for (int i = 0; i < n; ++i) {
        int lo = std::max(0, i - kHalf);
        int hi = std::min(n - 1, i + kHalf);
        scratch.assign(window.begin() + lo, window.begin() + hi + 1);
        med[i] = median_of(scratch);
        for (double& v : scratch)
            v = std::abs(v - med[i]);
        // scratch was partially reordered by median_of; absolute deviations
        // are position-independent so reuse is fine
        double mad = median_of(scratch);
        thresh[i] = kCut * std::max(mad, kMadFloor);
    }

    std::vector<std::pair<double, int>> candidates;
    for (int i = 0; i < n; ++i) {
        double dev = std::abs(window[i] - med[i]);
        if (dev > thresh[i])
            candidates.emplace_back(dev, i);
    }
    const std::size_t cap = static_cast<std::size_t>(0.20 * n);
    if (candidates.size() > cap) {
        std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        candidates.resize(cap);
    }

    std::vector<double> cleaned(window.begin(), window.end());
    std::vector<bool> mask(n, false);
    for (const auto& [dev, i] : candidates) {
        cleaned[i] = med[i];
        mask[i] = true;
    }
    return {std::move(cleaned), std::move(mask)};
}

namespace {

ScaledWindow scale_with_factor(std::span<const double> values, double divisor) {
    ScaledWindow w;
    w.raw.assign(values.begin(), values.end());
    w.scale_factor = divisor > 0 ? divisor : 1.0;
    w.scaled.resize(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        w.scaled[i] = values[i] / w.scale_factor;
    w.outlier_mask.assign(values.size(), false);
    return w;
}

}  // namespace

ScaledWindow last_value_scale(std::span<const double> values, bool smoothed) {
    if (values.empty())
        throw TooShort("cannot scale an empty window");
    for (double v : values)
        if (is_missing(v))
            throw GapInWindow("window contains a missing week");
    double divisor = smoothed ? smooth_at(values, values.size() - 1) : values.back();
    return scale_with_factor(values, divisor);
}

std::vector<double> unscale(const ScaledWindow& window) {
    std::vector<double> out(window.raw.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = window.outlier_mask[i] ? window.scaled[i] * window.scale_factor : window.raw[i];
    return out;
}

namespace {

// Builds the row ending at index u, or returns false when the window has a
// gap or no future week exists. Shared by the serial and parallel paths.
bool build_row(const ObservationSeries& series, int u, int H, TrainingRow& row) {
    if (!series.gap_free(u - kMinWindow + 1, u))
        return false;
    bool any_future = false;
    for (int h = 1; h <= H; ++h) {
        int i = u + h;
        row.future[h - 1] = (i < series.size()) ? series.values[i] : kMissing;
        if (!is_missing(row.future[h - 1]))
            any_future = true;
    }
    if (!any_future)
        return false;

    std::span<const double> prefix(series.values.data(), static_cast<std::size_t>(u) + 1);
    double divisor = smooth_at(prefix, static_cast<std::size_t>(u));
    std::span<const double> window = prefix.subspan(u - kMinWindow + 1, kMinWindow);

    auto [cleaned, mask] = filter_outliers(window);
    ScaledWindow w;
    w.origin = series.key;
    w.end_week = series.week_of(u);
    w.raw.assign(window.begin(), window.end());
    w.scale_factor = divisor > 0 ? divisor : 1.0;
    w.scaled.resize(cleaned.size());
    for (std::size_t i = 0; i < cleaned.size(); ++i)
        w.scaled[i] = cleaned[i] / w.scale_factor;
    w.outlier_mask = std::move(mask);

    row.window = std::move(w);
    row.end_index = u;
    for (double& f : row.future)
        if (!is_missing(f))
            f /= row.window.scale_factor;
    return true;
}

}  // namespace

std::vector<TrainingRow> make_training_rows_serial(const ObservationSeries& series, int H) {
    if (series.size() < kMinWindow + 1)
        throw TooShort("series " + series.key.label() + " too short for training rows");
    std::vector<TrainingRow> rows;
    for (int u = kMinWindow - 1; u < series.size() - 1; ++u) {
        TrainingRow row;
        if (build_row(series, u, H, row))
            rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<TrainingRow> make_training_rows(const ObservationSeries& series, int H) {
    if (series.size() < kMinWindow + 1)
        throw TooShort("series " + series.key.label() + " too short for training rows");
    const int first = kMinWindow - 1;
    const int count = series.size() - 1 - first;
    std::vector<TrainingRow> slots(count);
    std::vector<char> valid(count, 0);
#pragma omp parallel for schedule(static)
    for (int j = 0; j < count; ++j)
        valid[j] = build_row(series, first + j, H, slots[j]) ? 1 : 0;

    std::vector<TrainingRow> rows;
    rows.reserve(count);
    for (int j = 0; j < count; ++j)
        if (valid[j])
            rows.push_back(std::move(slots[j]));
    return rows;
}

bool make_prediction_input(const ObservationSeries& series, int origin_index,
                           PredictionInput& out) {
    if (origin_index + 1 < kMinWindow || origin_index >= series.size())
        return false;
    if (!series.gap_free(origin_index - kMinWindow + 1, origin_index))
        return false;

    std::span<const double> prefix(series.values.data(),
                                   static_cast<std::size_t>(origin_index) + 1);
    double divisor = smooth_at(prefix, static_cast<std::size_t>(origin_index));
    std::span<const double> window = prefix.subspan(origin_index - kMinWindow + 1, kMinWindow);

    auto [cleaned, mask] = filter_outliers(window);
    ScaledWindow w;
    w.origin = series.key;
    w.end_week = series.week_of(origin_index);
    w.raw.assign(window.begin(), window.end());
    w.scale_factor = divisor > 0 ? divisor : 1.0;
    w.scaled.resize(cleaned.size());
    for (std::size_t i = 0; i < cleaned.size(); ++i)
        w.scaled[i] = cleaned[i] / w.scale_factor;
    w.outlier_mask = std::move(mask);

    out.window = std::move(w);
    out.history.assign(prefix.begin(), prefix.end());
    return true;
}

}  // namespace crosscast

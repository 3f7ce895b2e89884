#include "crosscast/moa.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace crosscast {

namespace {

struct WindowRef {
    WeekIndex end_week;
    std::size_t series_pos;
    int end_index;
};

/// All valid snippet windows of one series with end week in (after, upto].
void collect_windows(const ObservationSeries& series, std::size_t series_pos, WeekIndex after,
                     WeekIndex upto, std::vector<WindowRef>& out) {
    std::int64_t from = after < series.start_week ? 0 : after + 1 - series.start_week;
    if (upto < series.start_week)
        return;
    int lo = std::max<std::int64_t>(kSnippetLength - 1, from);
    int hi = std::min<std::int64_t>(series.size() - 1, upto - series.start_week);
    for (int e = lo; e <= hi; ++e) {
        if (!series.gap_free(e - kSnippetLength + 1, e))
            continue;
        out.push_back({series.week_of(e), series_pos, e});
    }
}

Snippet make_snippet(const ObservationSeries& series, int end_index) {
    Snippet s;
    s.origin = series.key;
    s.end_week = series.week_of(end_index);
    double last = series.values[end_index];
    s.scale_factor = last == 0 ? 1.0 : last;
    for (int i = 0; i < kSnippetLength; ++i)
        s.x[i] = series.values[end_index - kSnippetLength + 1 + i] / s.scale_factor;
    s.y.fill(kMissing);
    return s;
}

/// Fills future slots of `s` whose week is both observed and <= as_of.
/// Returns true when no slot can still arrive later.
bool fill_futures(Snippet& s, const ObservationSeries& series, WeekIndex as_of) {
    int end_index = series.index_of(s.end_week);
    for (int h = 1; h <= kMaxHorizon; ++h) {
        if (!is_missing(s.y[h - 1]))
            continue;
        if (s.end_week + h > as_of)
            return false;  // later slots are even further out
        int idx = end_index + h;
        if (idx < series.size() && !is_missing(series.values[idx]))
            s.y[h - 1] = series.values[idx] / s.scale_factor;
    }
    return s.end_week + kMaxHorizon <= as_of;
}

const ObservationSeries* series_for(std::span<const ObservationSeries* const> training_set,
                                    const StreamKey& key) {
    for (const ObservationSeries* s : training_set)
        if (s->key == key)
            return s;
    return nullptr;
}

}  // namespace

void SnippetLibrary::append_range(std::span<const ObservationSeries* const> training_set,
                                  WeekIndex after, WeekIndex upto, const TrainingScope& scope) {
    std::vector<WindowRef> refs;
    for (std::size_t p = 0; p < training_set.size(); ++p)
        collect_windows(*training_set[p], p, after, upto, refs);
    std::erase_if(refs, [&](const WindowRef& r) {
        return !keep_training_row(scope, training_set[r.series_pos]->key, r.end_index);
    });
    std::sort(refs.begin(), refs.end(), [](const WindowRef& a, const WindowRef& b) {
        return a.end_week != b.end_week ? a.end_week < b.end_week : a.series_pos < b.series_pos;
    });
    for (const WindowRef& r : refs) {
        const ObservationSeries& series = *training_set[r.series_pos];
        Snippet s = make_snippet(series, r.end_index);
        bool complete = fill_futures(s, series, upto);
        composition[s.origin.disease] += 1;
        snippets.push_back(std::move(s));
        if (!complete)
            pending_.push_back(snippets.size() - 1);
    }
}

SnippetLibrary build_library(std::span<const ObservationSeries* const> training_set,
                             WeekIndex as_of_week, const TrainingScope& scope) {
    SnippetLibrary library;
    library.last_update = as_of_week;
    library.append_range(training_set, std::numeric_limits<WeekIndex>::min() / 2, as_of_week,
                         scope);
    return library;
}

void update_library(SnippetLibrary& library,
                    std::span<const ObservationSeries* const> training_set, WeekIndex week,
                    const TrainingScope& scope) {
    if (week <= library.last_update)
        throw NonMonotoneUpdate("library already updated through week " +
                                std::to_string(library.last_update));
    std::vector<std::size_t> still_pending;
    for (std::size_t idx : library.pending_) {
        Snippet& s = library.snippets[idx];
        const ObservationSeries* series = series_for(training_set, s.origin);
        if (!series)
            continue;  // series left the scope; its futures never arrive
        if (!fill_futures(s, *series, week))
            still_pending.push_back(idx);
    }
    library.pending_ = std::move(still_pending);
    library.append_range(training_set, library.last_update, week, scope);
    library.last_update = week;
}

int default_neighborhood_size(std::size_t library_size) {
    return static_cast<int>(std::min<std::size_t>(kNeighborhoodCap, (library_size + 9) / 10));
}

namespace {

bool excluded(const Snippet& s, const QueryProvenance* q) {
    if (!q || s.origin != q->key)
        return false;
    auto gap = s.end_week - q->end_week;
    return gap >= -(kSnippetLength - 1) && gap <= kSnippetLength - 1;
}

double l1_distance(const std::array<double, kSnippetLength>& a, std::span<const double> b) {
    double d = 0;
    for (int i = 0; i < kSnippetLength; ++i)
        d += std::abs(a[i] - b[i]);
    return d;
}

using Candidate = std::pair<double, std::size_t>;  // (distance, insertion index)

Neighborhood from_candidates(std::vector<Candidate> cands, int l) {
    std::sort(cands.begin(), cands.end());
    if (static_cast<int>(cands.size()) > l)
        cands.resize(l);
    Neighborhood nb;
    nb.l_effective = l;
    nb.members.reserve(cands.size());
    nb.distances.reserve(cands.size());
    for (const auto& [d, i] : cands) {
        nb.members.push_back(i);
        nb.distances.push_back(d);
    }
    return nb;
}

int resolve_l(const SnippetLibrary& library, std::span<const double> x_test,
              std::optional<int> l_override) {
    if (library.snippets.empty())
        throw EmptyLibrary("cannot search an empty snippet library");
    if (x_test.size() != kSnippetLength)
        throw Error("query must have exactly " + std::to_string(kSnippetLength) + " values");
    int l = l_override ? *l_override : default_neighborhood_size(library.size());
    return std::max(l, 0);
}

}  // namespace

Neighborhood find_neighborhood_serial(const SnippetLibrary& library,
                                      std::span<const double> x_test,
                                      std::optional<int> l_override,
                                      const QueryProvenance* exclude) {
    int l = resolve_l(library, x_test, l_override);
    std::vector<Candidate> cands;
    for (std::size_t i = 0; i < library.snippets.size(); ++i) {
        const Snippet& s = library.snippets[i];
        if (excluded(s, exclude))
            continue;
        cands.emplace_back(l1_distance(s.x, x_test), i);
    }
    return from_candidates(std::move(cands), l);
}

Neighborhood find_neighborhood(const SnippetLibrary& library, std::span<const double> x_test,
                               std::optional<int> l_override, const QueryProvenance* exclude) {
    const int l = resolve_l(library, x_test, l_override);
    const auto n = static_cast<std::int64_t>(library.snippets.size());
    if (l == 0)
        return from_candidates({}, 0);

#ifdef _OPENMP
    int slots = omp_get_max_threads();
#else
    int slots = 1;
#endif
    std::vector<std::vector<Candidate>> partial(slots);

#pragma omp parallel num_threads(slots)
    {
#ifdef _OPENMP
        int tid = omp_get_thread_num();
#else
        int tid = 0;
#endif
        // max-heap on (distance, index): top is the current worst keeper
        std::priority_queue<Candidate> heap;
#pragma omp for schedule(static) nowait
        for (std::int64_t i = 0; i < n; ++i) {
            const Snippet& s = library.snippets[i];
            if (excluded(s, exclude))
                continue;
            double bound = static_cast<int>(heap.size()) == l
                               ? heap.top().first
                               : std::numeric_limits<double>::infinity();
            double d = 0;
            bool abandoned = false;
            for (int k = 0; k < kSnippetLength; ++k) {
                d += std::abs(s.x[k] - x_test[k]);
                if (d > bound) {  // partial sums only grow; ties must survive
                    abandoned = true;
                    break;
                }
            }
            if (abandoned)
                continue;
            Candidate c{d, static_cast<std::size_t>(i)};
            if (static_cast<int>(heap.size()) < l) {
                heap.push(c);
            } else if (c < heap.top()) {
                heap.pop();
                heap.push(c);
            }
        }
        auto& mine = partial[tid];
        mine.reserve(heap.size());
        while (!heap.empty()) {
            mine.push_back(heap.top());
            heap.pop();
        }
    }

    std::vector<Candidate> merged;
    for (auto& p : partial)
        merged.insert(merged.end(), p.begin(), p.end());
    return from_candidates(std::move(merged), l);
}

bool make_snippet_query(const ObservationSeries& series, int origin_index,
                        std::array<double, kSnippetLength>& x_out, double& scale_factor_out) {
    if (origin_index < kSnippetLength - 1 || origin_index >= series.size())
        return false;
    if (!series.gap_free(origin_index - kSnippetLength + 1, origin_index))
        return false;
    double last = series.values[origin_index];
    scale_factor_out = last == 0 ? 1.0 : last;
    for (int i = 0; i < kSnippetLength; ++i)
        x_out[i] = series.values[origin_index - kSnippetLength + 1 + i] / scale_factor_out;
    return true;
}

std::array<double, kMaxHorizon> moa_forecast(const Neighborhood& neighborhood,
                                             const SnippetLibrary& library,
                                             double scale_factor) {
    std::array<double, kMaxHorizon> forecast;
    forecast.fill(kMissing);
    bool any = false;
    std::vector<double> vals;
    for (int h = 0; h < kMaxHorizon; ++h) {
        vals.clear();
        for (std::size_t m : neighborhood.members) {
            double y = library.snippets[m].y[h];
            if (!is_missing(y))
                vals.push_back(y);
        }
        if (vals.empty())
            continue;
        any = true;
        std::sort(vals.begin(), vals.end());
        std::size_t n = vals.size();
        double med = n % 2 == 1 ? vals[n / 2] : 0.5 * (vals[n / 2 - 1] + vals[n / 2]);
        forecast[h] = std::max(0.0, med * scale_factor);
    }
    if (!any)
        throw NoFutureData("no neighborhood member carries any future value");
    return forecast;
}

std::map<std::string, double> neighborhood_composition(const Neighborhood& neighborhood,
                                                       const SnippetLibrary& library,
                                                       const Taxonomy& taxonomy) {
    std::map<std::string, double> shares;
    for (std::size_t m : neighborhood.members) {
        const std::string& disease = library.snippets[m].origin.disease;
        if (!taxonomy.has_disease(disease))
            throw MissingTaxonomyEntry("library snippet references unknown disease " + disease);
        shares[disease] += 1.0;
    }
    double total = static_cast<double>(neighborhood.members.size());
    for (auto& [disease, count] : shares)
        count /= total;
    return shares;
}

std::map<std::string, double> composition_relative_to_library(
    const std::map<std::string, long long>& neighborhood_counts,
    const std::map<std::string, long long>& library_counts) {
    long long n_total = 0, l_total = 0;
    for (const auto& [d, c] : neighborhood_counts)
        n_total += c;
    for (const auto& [d, c] : library_counts)
        l_total += c;

    std::map<std::string, double> ratios;
    for (const auto& [disease, lc] : library_counts)
        ratios[disease] = 0.0;
    for (const auto& [disease, nc] : neighborhood_counts) {
        if (nc == 0)
            continue;
        auto it = library_counts.find(disease);
        if (it == library_counts.end() || it->second == 0)
            throw DivisionByZero("disease " + disease + " selected but absent from the library");
        double n_share = static_cast<double>(nc) / static_cast<double>(n_total);
        double l_share = static_cast<double>(it->second) / static_cast<double>(l_total);
        ratios[disease] = n_share / l_share;
    }
    return ratios;
}

}  // namespace crosscast

#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "crosscast/preprocess.hpp"

namespace crosscast {

/// Snippet window length k.
inline constexpr int kSnippetLength = 5;

/// Hard cap on neighborhood size; below it L defaults to 10% of the
/// library.
inline constexpr int kNeighborhoodCap = 4422;

/// A length-k scaled window plus its next (up to) H observations on the
/// same scale. Future slots hold the missing marker until the
/// corresponding week becomes visible to the library.
struct Snippet {
    std::array<double, kSnippetLength> x{};
    std::array<double, kMaxHorizon> y{};
    StreamKey origin;
    WeekIndex end_week = 0;
    double scale_factor = 1.0;
};

/// Append-only snippet store. Snippet identity (x, origin, position) is
/// fixed at insertion; pending future slots are completed as later weeks
/// arrive, so weekly updates reproduce a fresh rebuild exactly.
///
/// One writer (the weekly update) and any number of concurrent readers
/// between updates; find_neighborhood never mutates the library.
struct SnippetLibrary {
    std::vector<Snippet> snippets;
    std::map<std::string, long long> composition;  // disease -> snippet count
    WeekIndex last_update = 0;

    std::size_t size() const { return snippets.size(); }

  private:
    std::vector<std::size_t> pending_;  // snippets with unfilled future slots

    /// Inserts every eligible window with end week in (after, upto].
    void append_range(std::span<const ObservationSeries* const> training_set, WeekIndex after,
                      WeekIndex upto, const TrainingScope& scope);

    friend SnippetLibrary build_library(std::span<const ObservationSeries* const>, WeekIndex,
                                        const TrainingScope&);
    friend void update_library(SnippetLibrary&, std::span<const ObservationSeries* const>,
                               WeekIndex, const TrainingScope&);
};

/// One snippet per gap-free k-window ending on or before as_of_week,
/// last-value scaled (zero last values pass through unscaled). Insertion
/// order is (end week, training-set position), which makes the library
/// state a pure function of the training set, the scope, and as_of_week.
/// Subsampling scopes drop windows per keep_training_row.
SnippetLibrary build_library(std::span<const ObservationSeries* const> training_set,
                             WeekIndex as_of_week, const TrainingScope& scope = {});

/// Advances the library to `week`: fills future slots that became
/// visible and appends windows ending in (last_update, week]. A batch
/// update over several weeks equals the corresponding single-week
/// updates, and both equal build_library at the final week.
void update_library(SnippetLibrary& library,
                    std::span<const ObservationSeries* const> training_set, WeekIndex week,
                    const TrainingScope& scope = {});

/// min(4422, ceil(10% of library size)).
int default_neighborhood_size(std::size_t library_size);

/// Identifies the query's own weeks so the search can skip library
/// windows that overlap them for the same series.
struct QueryProvenance {
    StreamKey key;
    WeekIndex end_week = 0;
};

/// The L library snippets closest to a query under L1 distance.
/// members/distances are sorted by (distance, insertion index); that
/// total order also breaks ties at the cutoff.
struct Neighborhood {
    std::vector<std::size_t> members;
    std::vector<double> distances;
    int l_effective = 0;
};

/// Flat top-L scan with early abandon on partial L1 sums. Exact: returns
/// the same members as exhaustively sorting all eligible snippets.
Neighborhood find_neighborhood(const SnippetLibrary& library, std::span<const double> x_test,
                               std::optional<int> l_override = std::nullopt,
                               const QueryProvenance* exclude = nullptr);

/// Single-threaded exhaustive-sort reference for find_neighborhood.
Neighborhood find_neighborhood_serial(const SnippetLibrary& library,
                                      std::span<const double> x_test,
                                      std::optional<int> l_override = std::nullopt,
                                      const QueryProvenance* exclude = nullptr);

/// Scaled trailing k-window of a series at origin_index; false when any
/// of those weeks is missing.
bool make_snippet_query(const ObservationSeries& series, int origin_index,
                        std::array<double, kSnippetLength>& x_out, double& scale_factor_out);

/// Per-horizon medians (midpoint convention) of the neighbors' futures,
/// rescaled by scale_factor and clamped at 0. Horizons no neighbor
/// covers come back missing; all four missing raises NoFutureData.
std::array<double, kMaxHorizon> moa_forecast(const Neighborhood& neighborhood,
                                             const SnippetLibrary& library, double scale_factor);

/// Fraction of neighborhood members per disease; sums to 1.
std::map<std::string, double> neighborhood_composition(const Neighborhood& neighborhood,
                                                       const SnippetLibrary& library,
                                                       const Taxonomy& taxonomy);

/// (neighborhood share) / (library share) per disease in library_counts.
/// Diseases never selected report 0; a selected disease absent from the
/// library raises DivisionByZero.
std::map<std::string, double> composition_relative_to_library(
    const std::map<std::string, long long>& neighborhood_counts,
    const std::map<std::string, long long>& library_counts);

}  // namespace crosscast

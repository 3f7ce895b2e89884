#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "crosscast/common.hpp"

namespace crosscast {

/// Identifies one data stream (a disease reported by one source) at one
/// location. Subtype may be empty.
struct StreamKey {
    std::string source;
    std::string disease;
    std::string subtype;
    std::string location;

    auto operator<=>(const StreamKey&) const = default;

    /// Same (source, disease, subtype), any location.
    bool same_stream(const StreamKey& o) const {
        return source == o.source && disease == o.disease && subtype == o.subtype;
    }

    std::string label() const;
};

enum class Transmission { respiratory, sexual, fecal_oral, vector_borne };

Transmission parse_transmission(const std::string& text);
std::string to_string(Transmission t);

enum class Unit { cases, deaths, hospitalizations, proportion };

Unit parse_unit(const std::string& text);
std::string to_string(Unit u);

/// Disease metadata plus source-grouping aliases. Alias entries in the
/// taxonomy file ("alias=canonical" in the aliases column) fold reporting
/// systems that publish the same stream under different source names.
struct Taxonomy {
    std::map<std::string, Transmission> mode_of;
    std::map<std::string, std::vector<std::string>> subtypes_of;
    std::map<std::string, std::string> source_alias;

    bool has_disease(const std::string& disease) const { return mode_of.count(disease) != 0; }
    Transmission mode(const std::string& disease) const;
    std::string canonical_source(const std::string& source) const;
};

/// One weekly time series. `values` holds one slot per consecutive week;
/// missing weeks carry the NaN marker.
struct ObservationSeries {
    StreamKey key;
    Unit unit = Unit::cases;
    WeekIndex start_week = 0;  // global week index of values[0]
    int weekday_offset = 0;    // 0..6, preserves the source's week-start day

    std::vector<double> values;

    int size() const { return static_cast<int>(values.size()); }
    WeekIndex week_of(int i) const { return start_week + i; }
    DayNumber day_of(int i) const { return 7 * week_of(i) + weekday_offset; }
    int year_of(int i) const { return year_of_day(day_of(i)); }

    /// Index of a global week, or -1 when outside the series.
    int index_of(WeekIndex w) const {
        auto i = w - start_week;
        return (i >= 0 && i < values.size()) ? static_cast<int>(i) : -1;
    }
    bool has(int i) const { return i >= 0 && i < size() && !is_missing(values[i]); }

    /// True when every week in [first, last] is present.
    bool gap_free(int first, int last) const;

    /// Number of non-missing observations at indices < i.
    int observed_before(int i) const;
};

enum class ScopeKind { single_stream, single_disease, mode_of_transmission, all_data };

ScopeKind parse_scope(const std::string& text);
std::string to_string(ScopeKind k);

/// Which slice of the corpus feeds model training. all_data applies
/// row-level subsampling downstream, seeded for reproducibility.
struct TrainingScope {
    ScopeKind kind = ScopeKind::single_stream;
    double subsample_fraction = 1.0;
    std::uint64_t rng_seed = 0;

    static TrainingScope make(ScopeKind kind, std::uint64_t seed = 0);
};

struct Corpus {
    std::vector<ObservationSeries> series;
    Taxonomy taxonomy;

    const ObservationSeries* find(const StreamKey& key) const;
};

/// Loads every stream CSV under `root` plus taxonomy.csv. Gaps between
/// dated rows become explicit missing weeks. Rejects negative values,
/// non-monotone dates, diseases without a taxonomy row, and duplicate keys.
Corpus load_corpus(const std::filesystem::path& root);

/// Inverse of load_corpus: one CSV per (source, disease, subtype) stream
/// plus taxonomy.csv. Values round-trip exactly.
void write_corpus(const Corpus& corpus, const std::filesystem::path& root);

/// All series a scope admits for the given target, target's own series
/// included. Scopes nest: single_stream <= single_disease <=
/// mode_of_transmission <= all_data (before any subsampling).
std::vector<const ObservationSeries*> select_training_set(const Corpus& corpus,
                                                          const StreamKey& target,
                                                          const TrainingScope& scope);

/// Row-subsampling decision for all_data scopes: stable per (seed, series,
/// window end), independent of evaluation order.
bool keep_training_row(const TrainingScope& scope, const StreamKey& key, int end_index);

}  // namespace crosscast

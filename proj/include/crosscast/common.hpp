#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace crosscast {

/// Base class for all errors raised by the engine.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// corpus
struct SchemaError : Error { using Error::Error; };
struct MissingTaxonomyEntry : Error { using Error::Error; };
struct NonMonotoneDates : Error { using Error::Error; };
struct UnknownTarget : Error { using Error::Error; };

// preprocess / features
struct GapInWindow : Error { using Error::Error; };
struct TooShort : Error { using Error::Error; };
struct InsufficientData : Error { using Error::Error; };
struct ZeroVariance : Error { using Error::Error; };

// moa
struct NonMonotoneUpdate : Error { using Error::Error; };
struct EmptyLibrary : Error { using Error::Error; };
struct NoFutureData : Error { using Error::Error; };
struct DivisionByZero : Error { using Error::Error; };

// gbt
struct InsufficientRows : Error { using Error::Error; };
struct ModelUntrained : Error { using Error::Error; };

// uncertainty
struct InsufficientHistory : Error { using Error::Error; };
struct UnfitParams : Error { using Error::Error; };

// eval / cli
struct NoEvaluableWeeks : Error { using Error::Error; };
struct NoScoredRecords : Error { using Error::Error; };
struct ZeroBaseline : Error { using Error::Error; };
struct IncompleteGrid : Error { using Error::Error; };
struct NoCompositionLog : Error { using Error::Error; };

/// Marker for missing weekly observations.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

/// Day number (days since 1970-01-01) and global week index (floor(day/7)).
/// Consecutive weekly observations always map to consecutive week indices,
/// so series with different weekday conventions stay aligned.
using DayNumber = std::int64_t;
using WeekIndex = std::int64_t;

inline WeekIndex week_of_day(DayNumber day) {
    return day >= 0 ? day / 7 : -((-day + 6) / 7);
}

/// Parses "YYYY-MM-DD"; throws SchemaError on malformed input.
DayNumber parse_iso_date(const std::string& text);

std::string format_iso_date(DayNumber day);

int year_of_day(DayNumber day);

/// Day number of January 1 of the given year.
DayNumber first_day_of_year(int year);

/// splitmix64; used wherever a stable per-item hash is needed so results
/// do not depend on iteration order.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t v) {
    return mix64(seed ^ mix64(v));
}

std::uint64_t hash_string(const std::string& s);

/// Uniform double in [0,1) from a hash value.
inline double hash_to_unit(std::uint64_t h) {
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace crosscast

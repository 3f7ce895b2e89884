#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crosscast/gbt.hpp"
#include "crosscast/moa.hpp"
#include "crosscast/uncertainty.hpp"

namespace crosscast {

enum class ModelKind { moa, gbt };

ModelKind parse_model(const std::string& text);
std::string to_string(ModelKind m);

/// Evaluation window for one (target, model, scope) cell. MOA origins
/// start at the later of the first week of 2010 and the first week with
/// 11 prior observations; GBT origins need 52 prior observations.
struct BacktestPlan {
    StreamKey target;
    ModelKind model = ModelKind::moa;
    TrainingScope scope;
    WeekIndex start_week = 0;
    WeekIndex end_week = 0;  // last origin; forecasts may reach past it
};

BacktestPlan make_plan(const Corpus& corpus, const StreamKey& target, ModelKind model,
                       const TrainingScope& scope);

/// One issued forecast. Quantiles are present for every GBT record and
/// for MOA records once that horizon's residual history reaches 20
/// pairs. truth stays missing when the target week was never observed.
struct ForecastRecord {
    StreamKey target;
    ModelKind model = ModelKind::moa;
    ScopeKind scope = ScopeKind::single_stream;
    DayNumber origin_day = 0;
    int horizon = 1;
    double point = kMissing;
    std::array<double, kNumQuantiles> quantiles{};
    bool has_quantiles = false;
    double truth = kMissing;
    int model_year = 0;  // GBT: calendar year of the model used

    WeekIndex origin_week() const { return week_of_day(origin_day); }
};

/// Cell-level scores. MAE and interval metrics keep separate
/// denominators: a record can be MAE-scored before interval scoring has
/// begun.
struct ScoreRecord {
    StreamKey target;
    ModelKind model = ModelKind::moa;
    ScopeKind scope = ScopeKind::single_stream;
    double mae = kMissing;
    double wis = kMissing;
    double coverage95 = kMissing;
    long long n_forecasts = 0;        // (origin, horizon) pairs with truth
    long long n_interval_scored = 0;  // of those, with quantiles
    double mae_ratio_vs_single_stream = kMissing;
};

/// Weekly MOA neighborhood composition against the library of the same
/// week, for the analyze-neighborhoods report.
struct CompositionLog {
    struct WeekEntry {
        DayNumber origin_day = 0;
        std::map<std::string, long long> neighborhood;
        std::map<std::string, long long> library;
    };
    std::vector<WeekEntry> weeks;
    std::map<std::string, long long> total_neighborhood;
    std::map<std::string, long long> final_library;
};

struct BacktestOptions {
    GbtParams gbt;
    std::optional<int> moa_neighborhood;    // L override
    CompositionLog* composition = nullptr;  // MOA only, opt-in
};

struct BacktestResult {
    std::vector<ForecastRecord> records;
    ScoreRecord score;
    std::vector<int> model_years;  // distinct GBT training years referenced
    // first origin with quantiles, per horizon; missing marker when never
    std::array<double, kMaxHorizon> first_interval_day{};
};

/// Rolling-origin weekly forecasts over the plan's window. MOA updates
/// its library and residual histories each week before forecasting; GBT
/// swaps models at calendar-year boundaries. No origin consumes data
/// past itself.
BacktestResult run_backtest(const Corpus& corpus, const BacktestPlan& plan,
                            const BacktestOptions& options = {});

/// Mean absolute point error over records with truth; contributed-terms
/// divisor.
double mae(std::span<const ForecastRecord> records);

/// Fraction of interval-scored records whose truth lies in [q0.025, q0.975].
double coverage95(std::span<const ForecastRecord> records);

/// Weighted interval score for one record: K=3 central
/// intervals (50/80/95%) plus the median term, normalized by K + 1/2.
double wis_single(const std::array<double, kNumQuantiles>& quantiles, double truth);

/// Mean wis_single over interval-scored records with truth.
double wis(std::span<const ForecastRecord> records);

/// candidate.mae / baseline.mae; < 1 means the candidate's scope beat
/// single-stream training.
double mae_ratio(const ScoreRecord& candidate, const ScoreRecord& baseline);

/// Training-set shape statistics for one (target, scope) cell: rows after
/// subsampling, mean window CoV, mean sample entropy over each series'
/// longest gap-free run.
struct ScopeSummary {
    long long row_count = 0;
    double mean_cov = kMissing;
    double mean_sampen = kMissing;
};

ScopeSummary summarize_scope(const Corpus& corpus, const StreamKey& target,
                             const TrainingScope& scope);

struct ReportRow {
    StreamKey target;
    ModelKind model = ModelKind::moa;
    std::map<ScopeKind, double> mae;    // all four scopes
    std::map<ScopeKind, double> ratio;  // vs single_stream, non-baseline scopes
    ScopeKind winner = ScopeKind::single_stream;
};

struct ScopeReport {
    std::vector<ReportRow> rows;
    std::map<ScopeKind, double> fraction_outperformed;  // ratio < 1 rate
    std::map<ScopeKind, ScopeSummary> summaries;        // aggregated over targets
};

/// Requires every (target, model) in `scores` to carry all four scopes;
/// throws IncompleteGrid otherwise. `seed` reproduces the all_data
/// subsampling for the summary columns.
ScopeReport scope_comparison_report(const Corpus& corpus, std::span<const ScoreRecord> scores,
                                    std::uint64_t seed);

void write_forecast_csv(std::span<const ForecastRecord> records,
                        const std::filesystem::path& path);
void write_score_csv(std::span<const ScoreRecord> scores, const std::filesystem::path& path);
std::vector<ScoreRecord> read_score_csv(const std::filesystem::path& path);
void write_composition_csv(const StreamKey& target, const CompositionLog& log,
                           const std::filesystem::path& path);
void write_report_csv(const ScopeReport& report, const std::filesystem::path& path);
void write_report_summary_json(const ScopeReport& report, const std::filesystem::path& path);

}  // namespace crosscast

#include "crosscast/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "crosscast/csv.hpp"

namespace crosscast {

ModelKind parse_model(const std::string& text) {
    if (text == "moa")
        return ModelKind::moa;
    if (text == "gbt")
        return ModelKind::gbt;
    throw SchemaError("unknown model kind '" + text + "'");
}

std::string to_string(ModelKind m) {
    return m == ModelKind::moa ? "moa" : "gbt";
}

BacktestPlan make_plan(const Corpus& corpus, const StreamKey& target, ModelKind model,
                       const TrainingScope& scope) {
    const ObservationSeries* s = corpus.find(target);
    if (!s)
        throw UnknownTarget("target " + target.label() + " not in corpus");

    const int need = model == ModelKind::moa ? kMinWindow : 52;
    int first_ok = -1;
    for (int i = 0; i < s->size(); ++i) {
        if (s->observed_before(i) >= need) {
            first_ok = i;
            break;
        }
    }
    if (first_ok < 0)
        throw NoEvaluableWeeks(target.label() + " never accumulates " + std::to_string(need) +
                               " prior observations");

    WeekIndex start = s->week_of(first_ok);
    if (model == ModelKind::moa)
        start = std::max(start, week_of_day(first_day_of_year(2010)));
    WeekIndex end = s->week_of(s->size() - 1) - 1;
    if (start > end)
        throw NoEvaluableWeeks(target.label() + " ends before any origin qualifies");

    BacktestPlan plan;
    plan.target = target;
    plan.model = model;
    plan.scope = scope;
    plan.start_week = start;
    plan.end_week = end;
    return plan;
}

double wis_single(const std::array<double, kNumQuantiles>& q, double truth) {
    // central intervals at nominal alpha 0.5, 0.2, 0.05: (q25,q75),
    // (q10,q90), (q025,q975)
    static constexpr std::array<std::array<int, 2>, 3> kPairs = {{{2, 4}, {1, 5}, {0, 6}}};
    static constexpr std::array<double, 3> kAlphas = {0.5, 0.2, 0.05};
    double total = std::abs(q[3] - truth) / 2.0;
    for (int k = 0; k < 3; ++k) {
        double lo = q[kPairs[k][0]];
        double hi = q[kPairs[k][1]];
        double alpha = kAlphas[k];
        double interval_score = (hi - lo) + (2.0 / alpha) * std::max(0.0, lo - truth) +
                                (2.0 / alpha) * std::max(0.0, truth - hi);
        total += (alpha / 2.0) * interval_score;
    }
    return total / 3.5;  // K + 1/2 with K = 3
}

double mae(std::span<const ForecastRecord> records) {
    double sum = 0;
    long long n = 0;
    for (const auto& r : records) {
        if (is_missing(r.truth) || is_missing(r.point))
            continue;
        sum += std::abs(r.point - r.truth);
        ++n;
    }
    if (n == 0)
        throw NoScoredRecords("no (origin, horizon) pairs with truth");
    return sum / static_cast<double>(n);
}

double coverage95(std::span<const ForecastRecord> records) {
    long long inside = 0, n = 0;
    for (const auto& r : records) {
        if (!r.has_quantiles || is_missing(r.truth))
            continue;
        ++n;
        if (r.truth >= r.quantiles.front() && r.truth <= r.quantiles.back())
            ++inside;
    }
    if (n == 0)
        throw NoScoredRecords("no interval-scored records with truth");
    return static_cast<double>(inside) / static_cast<double>(n);
}

double wis(std::span<const ForecastRecord> records) {
    double sum = 0;
    long long n = 0;
    for (const auto& r : records) {
        if (!r.has_quantiles || is_missing(r.truth))
            continue;
        sum += wis_single(r.quantiles, r.truth);
        ++n;
    }
    if (n == 0)
        throw NoScoredRecords("no interval-scored records with truth");
    return sum / static_cast<double>(n);
}

double mae_ratio(const ScoreRecord& candidate, const ScoreRecord& baseline) {
    if (candidate.target != baseline.target || candidate.model != baseline.model)
        throw Error("mae_ratio requires matching target and model");
    if (is_missing(baseline.mae) || baseline.mae <= 0)
        throw ZeroBaseline("single-stream baseline MAE is zero or unscored");
    return candidate.mae / baseline.mae;
}

namespace {

double truth_at(const ObservationSeries& s, int idx) {
    return idx >= 0 && idx < s.size() && !is_missing(s.values[idx]) ? s.values[idx] : kMissing;
}

ScoreRecord make_score(const BacktestPlan& plan, std::span<const ForecastRecord> records) {
    ScoreRecord sc;
    sc.target = plan.target;
    sc.model = plan.model;
    sc.scope = plan.scope.kind;
    for (const auto& r : records) {
        if (is_missing(r.truth) || is_missing(r.point))
            continue;
        ++sc.n_forecasts;
        if (r.has_quantiles)
            ++sc.n_interval_scored;
    }
    if (sc.n_forecasts > 0)
        sc.mae = mae(records);
    if (sc.n_interval_scored > 0) {
        sc.wis = wis(records);
        sc.coverage95 = coverage95(records);
    }
    return sc;
}

BacktestResult backtest_moa(const Corpus& corpus, const BacktestPlan& plan,
                            const BacktestOptions& opt) {
    const ObservationSeries& s = *corpus.find(plan.target);
    auto training_set = select_training_set(corpus, plan.target, plan.scope);
    const int start = s.index_of(plan.start_week);
    const int end = s.index_of(plan.end_week);

    BacktestResult res;
    res.first_interval_day.fill(kMissing);
    SnippetLibrary library;
    bool built = false;
    ResidualHistory history;
    std::map<WeekIndex, std::array<double, kMaxHorizon>> issued;

    for (int t = start; t <= end; ++t) {
        WeekIndex wk = s.week_of(t);

        // score past forecasts against this week's truth before anything else
        if (!is_missing(s.values[t])) {
            for (int h = 1; h <= kMaxHorizon; ++h) {
                auto it = issued.find(wk - h);
                if (it != issued.end() && !is_missing(it->second[h - 1]))
                    update_history(history, h, it->second[h - 1], s.values[t]);
            }
        }

        if (!built) {
            library = build_library(training_set, wk, plan.scope);
            built = true;
        } else if (library.last_update < wk) {
            update_library(library, training_set, wk, plan.scope);
        }

        std::array<double, kSnippetLength> x;
        double factor = 1.0;
        if (!make_snippet_query(s, t, x, factor))
            continue;
        QueryProvenance prov{plan.target, wk};
        Neighborhood nb = find_neighborhood(library, x, opt.moa_neighborhood, &prov);
        if (nb.members.empty())
            continue;
        std::array<double, kMaxHorizon> points{};
        try {
            points = moa_forecast(nb, library, factor);
        } catch (const NoFutureData&) {
            continue;
        }
        issued[wk] = points;

        if (opt.composition) {
            CompositionLog::WeekEntry entry;
            entry.origin_day = s.day_of(t);
            for (std::size_t m : nb.members)
                entry.neighborhood[library.snippets[m].origin.disease] += 1;
            entry.library = library.composition;
            for (const auto& [disease, count] : entry.neighborhood)
                opt.composition->total_neighborhood[disease] += count;
            opt.composition->weeks.push_back(std::move(entry));
        }

        for (int h = 1; h <= kMaxHorizon; ++h) {
            if (is_missing(points[h - 1]))
                continue;
            ForecastRecord rec;
            rec.target = plan.target;
            rec.model = plan.model;
            rec.scope = plan.scope.kind;
            rec.origin_day = s.day_of(t);
            rec.horizon = h;
            rec.point = points[h - 1];
            rec.truth = truth_at(s, t + h);
            rec.quantiles.fill(kMissing);
            if (history.count(h) >= kMinResidualPairs) {
                NegBinParams params = fit_dispersion(history, h);
                for (int qi = 0; qi < kNumQuantiles; ++qi)
                    rec.quantiles[qi] = static_cast<double>(
                        nb_quantile(kQuantileLevels[qi], rec.point, params));
                rec.has_quantiles = true;
                if (is_missing(res.first_interval_day[h - 1]))
                    res.first_interval_day[h - 1] = static_cast<double>(rec.origin_day);
            }
            res.records.push_back(std::move(rec));
        }
    }

    if (opt.composition)
        opt.composition->final_library = library.composition;
    if (res.records.empty())
        throw NoEvaluableWeeks("no forecastable origin week for " + plan.target.label());
    res.score = make_score(plan, res.records);
    return res;
}

BacktestResult backtest_gbt(const Corpus& corpus, const BacktestPlan& plan,
                            const BacktestOptions& opt) {
    const ObservationSeries& s = *corpus.find(plan.target);
    const int start = s.index_of(plan.start_week);
    const int end = s.index_of(plan.end_week);

    std::vector<int> origins;
    std::vector<PredictionInput> inputs;
    std::set<int> year_set;
    for (int t = start; t <= end; ++t) {
        PredictionInput in;
        if (!make_prediction_input(s, t, in))
            continue;
        origins.push_back(t);
        inputs.push_back(std::move(in));
        year_set.insert(s.year_of(t));
    }
    if (origins.empty())
        throw NoEvaluableWeeks("no forecastable origin week for " + plan.target.label());

    std::vector<int> years(year_set.begin(), year_set.end());
    auto models = retrain_schedule(corpus, plan.target, plan.scope, years, opt.gbt);

    BacktestResult res;
    res.first_interval_day.fill(kMissing);
    res.model_years = years;
    for (std::size_t i = 0; i < origins.size(); ++i) {
        int t = origins[i];
        int year = s.year_of(t);
        const BoostedModel& model = models.at(year);
        QuantileForecast qf =
            predict_quantiles(model, inputs[i].window, inputs[i].history,
                              inputs[i].window.scale_factor);
        for (int h = 1; h <= kMaxHorizon; ++h) {
            ForecastRecord rec;
            rec.target = plan.target;
            rec.model = plan.model;
            rec.scope = plan.scope.kind;
            rec.origin_day = s.day_of(t);
            rec.horizon = h;
            rec.point = qf.point[h - 1];
            rec.quantiles = qf.quantiles[h - 1];
            rec.has_quantiles = true;
            rec.truth = truth_at(s, t + h);
            rec.model_year = year;
            if (is_missing(res.first_interval_day[h - 1]))
                res.first_interval_day[h - 1] = static_cast<double>(rec.origin_day);
            res.records.push_back(std::move(rec));
        }
    }
    res.score = make_score(plan, res.records);
    return res;
}

}  // namespace

BacktestResult run_backtest(const Corpus& corpus, const BacktestPlan& plan,
                            const BacktestOptions& options) {
    if (!corpus.find(plan.target))
        throw UnknownTarget("target " + plan.target.label() + " not in corpus");
    return plan.model == ModelKind::moa ? backtest_moa(corpus, plan, options)
                                        : backtest_gbt(corpus, plan, options);
}

ScopeSummary summarize_scope(const Corpus& corpus, const StreamKey& target,
                             const TrainingScope& scope) {
    auto training_set = select_training_set(corpus, target, scope);
    ScopeSummary out;
    double cov_sum = 0, se_sum = 0;
    long long cov_n = 0, se_n = 0;
    for (const ObservationSeries* series : training_set) {
        std::vector<TrainingRow> rows;
        try {
            rows = make_training_rows(*series);
        } catch (const TooShort&) {
            continue;
        }
        for (const TrainingRow& row : rows) {
            if (!keep_training_row(scope, series->key, row.end_index))
                continue;
            ++out.row_count;
            try {
                double cov = coefficient_of_variation(row.window.scaled, 10);
                if (std::isfinite(cov)) {
                    cov_sum += cov;
                    ++cov_n;
                }
            } catch (const InsufficientData&) {
            }
        }
        auto run = longest_contiguous_run(series->values);
        if (static_cast<int>(run.size()) >= 20) {
            try {
                double se = sample_entropy(run);
                if (std::isfinite(se)) {
                    se_sum += se;
                    ++se_n;
                }
            } catch (const Error&) {
            }
        }
    }
    if (cov_n > 0)
        out.mean_cov = cov_sum / static_cast<double>(cov_n);
    if (se_n > 0)
        out.mean_sampen = se_sum / static_cast<double>(se_n);
    return out;
}

ScopeReport scope_comparison_report(const Corpus& corpus, std::span<const ScoreRecord> scores,
                                    std::uint64_t seed) {
    static constexpr std::array<ScopeKind, 4> kAllScopes = {
        ScopeKind::single_stream, ScopeKind::single_disease, ScopeKind::mode_of_transmission,
        ScopeKind::all_data};

    std::map<std::pair<std::string, ModelKind>, std::map<ScopeKind, const ScoreRecord*>> grid;
    std::map<std::string, StreamKey> targets;
    for (const ScoreRecord& sc : scores) {
        grid[{sc.target.label(), sc.model}][sc.scope] = &sc;
        targets.emplace(sc.target.label(), sc.target);
    }
    if (grid.empty())
        throw IncompleteGrid("no scores to report");

    ScopeReport rep;
    std::map<ScopeKind, long long> better;
    long long cells = 0;
    for (const auto& [cell, by_scope] : grid) {
        for (ScopeKind k : kAllScopes)
            if (!by_scope.count(k))
                throw IncompleteGrid("missing scope " + to_string(k) + " for " + cell.first +
                                     " / " + to_string(cell.second));
        const ScoreRecord& base = *by_scope.at(ScopeKind::single_stream);
        ReportRow row;
        row.target = base.target;
        row.model = cell.second;
        double best = std::numeric_limits<double>::infinity();
        ++cells;
        for (ScopeKind k : kAllScopes) {
            double m = by_scope.at(k)->mae;
            row.mae[k] = m;
            if (k != ScopeKind::single_stream) {
                double r = mae_ratio(*by_scope.at(k), base);
                row.ratio[k] = r;
                if (r < 1.0)
                    ++better[k];
            }
            if (!is_missing(m) && m < best) {
                best = m;
                row.winner = k;
            }
        }
        rep.rows.push_back(std::move(row));
    }
    for (ScopeKind k : kAllScopes)
        if (k != ScopeKind::single_stream)
            rep.fraction_outperformed[k] =
                static_cast<double>(better[k]) / static_cast<double>(cells);

    for (ScopeKind k : kAllScopes) {
        ScopeSummary agg;
        double cov_sum = 0, se_sum = 0;
        long long cov_n = 0, se_n = 0;
        for (const auto& [label, key] : targets) {
            ScopeSummary one = summarize_scope(corpus, key, TrainingScope::make(k, seed));
            agg.row_count += one.row_count;
            if (!is_missing(one.mean_cov)) {
                cov_sum += one.mean_cov;
                ++cov_n;
            }
            if (!is_missing(one.mean_sampen)) {
                se_sum += one.mean_sampen;
                ++se_n;
            }
        }
        if (cov_n > 0)
            agg.mean_cov = cov_sum / static_cast<double>(cov_n);
        if (se_n > 0)
            agg.mean_sampen = se_sum / static_cast<double>(se_n);
        rep.summaries[k] = agg;
    }
    return rep;
}

namespace {

constexpr const char* kForecastHeader =
    "target_source,disease,subtype,location,model,scope,origin_week,horizon,point,"
    "q0.025,q0.1,q0.25,q0.5,q0.75,q0.9,q0.975,truth";
constexpr const char* kScoreHeader =
    "target_source,disease,subtype,location,model,scope,mae,wis,coverage95,n_forecasts,"
    "n_interval_scored,mae_ratio_vs_single_stream";

void key_fields(std::ostream& out, const StreamKey& key) {
    out << key.source << "," << key.disease << "," << key.subtype << "," << key.location;
}

}  // namespace

void write_forecast_csv(std::span<const ForecastRecord> records,
                        const std::filesystem::path& path) {
    std::ostringstream out;
    out << kForecastHeader << "\n";
    for (const auto& r : records) {
        key_fields(out, r.target);
        out << "," << to_string(r.model) << "," << to_string(r.scope) << ","
            << format_iso_date(r.origin_day) << "," << r.horizon << ","
            << csv::format_value(r.point);
        for (double q : r.quantiles)
            out << "," << csv::format_value(q);
        out << "," << csv::format_value(r.truth) << "\n";
    }
    csv::write_file_atomic(path.string(), out.str());
}

void write_score_csv(std::span<const ScoreRecord> scores, const std::filesystem::path& path) {
    std::ostringstream out;
    out << kScoreHeader << "\n";
    for (const auto& sc : scores) {
        key_fields(out, sc.target);
        out << "," << to_string(sc.model) << "," << to_string(sc.scope) << ","
            << csv::format_value(sc.mae) << "," << csv::format_value(sc.wis) << ","
            << csv::format_value(sc.coverage95) << "," << sc.n_forecasts << ","
            << sc.n_interval_scored << "," << csv::format_value(sc.mae_ratio_vs_single_stream)
            << "\n";
    }
    csv::write_file_atomic(path.string(), out.str());
}

std::vector<ScoreRecord> read_score_csv(const std::filesystem::path& path) {
    auto rows = csv::read_file(path.string());
    if (rows.empty() || rows[0] != csv::split_line(kScoreHeader))
        throw SchemaError(path.string() + " does not look like a score CSV");
    std::vector<ScoreRecord> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        std::string context = path.filename().string() + ":" + std::to_string(i + 1);
        if (row.size() != 12)
            throw SchemaError("bad score row " + context);
        ScoreRecord sc;
        sc.target = {row[0], row[1], row[2], row[3]};
        sc.model = parse_model(row[4]);
        sc.scope = parse_scope(row[5]);
        sc.mae = csv::parse_value(row[6], context);
        sc.wis = csv::parse_value(row[7], context);
        sc.coverage95 = csv::parse_value(row[8], context);
        sc.n_forecasts = std::stoll(row[9]);
        sc.n_interval_scored = std::stoll(row[10]);
        sc.mae_ratio_vs_single_stream = csv::parse_value(row[11], context);
        out.push_back(std::move(sc));
    }
    return out;
}

namespace {

void composition_rows(std::ostream& out, const std::string& target, const std::string& week,
                      const std::map<std::string, long long>& neighborhood,
                      const std::map<std::string, long long>& library) {
    auto ratios = composition_relative_to_library(neighborhood, library);
    long long n_total = 0, l_total = 0;
    for (const auto& [d, c] : neighborhood)
        n_total += c;
    for (const auto& [d, c] : library)
        l_total += c;
    for (const auto& [disease, ratio] : ratios) {
        auto it = neighborhood.find(disease);
        double n_share =
            it == neighborhood.end() || n_total == 0
                ? 0.0
                : static_cast<double>(it->second) / static_cast<double>(n_total);
        double l_share =
            static_cast<double>(library.at(disease)) / static_cast<double>(l_total);
        out << target << "," << week << "," << disease << "," << csv::format_value(n_share)
            << "," << csv::format_value(l_share) << "," << csv::format_value(ratio) << "\n";
    }
}

}  // namespace

void write_composition_csv(const StreamKey& target, const CompositionLog& log,
                           const std::filesystem::path& path) {
    if (log.weeks.empty())
        throw NoCompositionLog("no neighborhood composition was recorded");
    std::ostringstream out;
    out << "target,week,disease,neighborhood_share,library_share,ratio\n";
    std::string label = target.label();
    for (const auto& entry : log.weeks)
        composition_rows(out, label, format_iso_date(entry.origin_day), entry.neighborhood,
                         entry.library);
    composition_rows(out, label, "all", log.total_neighborhood, log.final_library);
    csv::write_file_atomic(path.string(), out.str());
}

void write_report_csv(const ScopeReport& report, const std::filesystem::path& path) {
    std::ostringstream out;
    out << "target_source,disease,subtype,location,model,mae_single_stream,"
           "mae_single_disease,mae_mode_of_transmission,mae_all_data,ratio_single_disease,"
           "ratio_mode_of_transmission,ratio_all_data,winner\n";
    for (const auto& row : report.rows) {
        key_fields(out, row.target);
        out << "," << to_string(row.model);
        for (ScopeKind k : {ScopeKind::single_stream, ScopeKind::single_disease,
                            ScopeKind::mode_of_transmission, ScopeKind::all_data})
            out << "," << csv::format_value(row.mae.at(k));
        for (ScopeKind k : {ScopeKind::single_disease, ScopeKind::mode_of_transmission,
                            ScopeKind::all_data})
            out << "," << csv::format_value(row.ratio.at(k));
        out << "," << to_string(row.winner) << "\n";
    }
    csv::write_file_atomic(path.string(), out.str());
}

void write_report_summary_json(const ScopeReport& report, const std::filesystem::path& path) {
    nlohmann::json j;
    for (const auto& [scope, fraction] : report.fraction_outperformed)
        j["fraction_outperformed"][to_string(scope)] = fraction;
    for (const auto& [scope, summary] : report.summaries) {
        auto& s = j["summaries"][to_string(scope)];
        s["row_count"] = summary.row_count;
        s["mean_cov"] = summary.mean_cov;
        s["mean_sampen"] = summary.mean_sampen;
    }
    csv::write_file_atomic(path.string(), j.dump(2) + "\n");
}

}  // namespace crosscast

#include "crosscast/cli.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "crosscast/csv.hpp"
#include "crosscast/eval.hpp"
#include "crosscast/synthetic.hpp"

namespace fs = std::filesystem;

namespace crosscast::cli {

namespace {

/// Maps exceptions to process exit codes: bad input or bad data is 1,
/// anything unexpected is 2.
template <typename Fn>
int guard(std::ostream& out, Fn&& fn) {
    try {
        return fn();
    } catch (const SchemaError& e) {
        out << "error: " << e.what() << "\n";
        return 1;
    } catch (const MissingTaxonomyEntry& e) {
        out << "error: " << e.what() << "\n";
        return 1;
    } catch (const NonMonotoneDates& e) {
        out << "error: " << e.what() << "\n";
        return 1;
    } catch (const UnknownTarget& e) {
        out << "error: " << e.what() << "\n";
        return 1;
    } catch (const NoEvaluableWeeks& e) {
        out << "error: " << e.what() << "\n";
        return 1;
    } catch (const IncompleteGrid& e) {
        out << "error: " << e.what() << "\n";
        return 1;
    } catch (const NoCompositionLog& e) {
        out << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        out << "internal error: " << e.what() << "\n";
        return 2;
    }
}

std::vector<std::string> split_on(const std::string& text, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : text) {
        if (ch == sep) {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    parts.push_back(cur);
    return parts;
}

void require_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                  const std::string& where) {
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key))
            throw SchemaError("unknown config key '" + key + "' in " + where);
}

std::string cell_stem(const StreamKey& key) {
    std::string stem = key.label();
    std::replace(stem.begin(), stem.end(), ':', '_');
    return stem;
}

}  // namespace

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw SchemaError("cannot open config file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("malformed config JSON in " + path + ": " + e.what());
    }
    if (!j.is_object())
        throw SchemaError("config root must be a JSON object in " + path);
    require_keys(j,
                 {"corpus", "output", "targets", "scopes", "models", "seed", "threads",
                  "log_composition", "moa_neighborhood", "gbt"},
                 path);

    RunConfig cfg;
    try {
        cfg.corpus = j.value("corpus", cfg.corpus);
        cfg.output = j.value("output", cfg.output);
        if (j.contains("targets"))
            cfg.targets = j.at("targets").get<std::vector<std::string>>();
        if (j.contains("scopes"))
            cfg.scopes = j.at("scopes").get<std::vector<std::string>>();
        if (j.contains("models"))
            cfg.models = j.at("models").get<std::vector<std::string>>();
        if (j.contains("seed")) {
            cfg.seed = j.at("seed").get<std::uint64_t>();
            cfg.seed_explicit = true;
        }
        cfg.threads = j.value("threads", cfg.threads);
        cfg.log_composition = j.value("log_composition", cfg.log_composition);
        cfg.moa_neighborhood = j.value("moa_neighborhood", cfg.moa_neighborhood);
        if (j.contains("gbt")) {
            const auto& g = j.at("gbt");
            require_keys(g,
                         {"n_trees", "learning_rate", "max_depth", "min_samples_leaf",
                          "feature_subsample"},
                         path + " (gbt block)");
            cfg.gbt.n_trees = g.value("n_trees", cfg.gbt.n_trees);
            cfg.gbt.learning_rate = g.value("learning_rate", cfg.gbt.learning_rate);
            cfg.gbt.max_depth = g.value("max_depth", cfg.gbt.max_depth);
            cfg.gbt.min_samples_leaf = g.value("min_samples_leaf", cfg.gbt.min_samples_leaf);
            cfg.gbt.feature_subsample = g.value("feature_subsample", cfg.gbt.feature_subsample);
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("bad config value in " + path + ": " + e.what());
    }
    if (cfg.corpus.empty())
        throw SchemaError("config key 'corpus' is required in " + path);
    if (cfg.threads < 1)
        throw SchemaError("config key 'threads' must be >= 1");
    return cfg;
}

std::vector<StreamKey> expand_targets(const Corpus& corpus,
                                      const std::vector<std::string>& patterns,
                                      std::vector<std::string>* unmatched) {
    auto field_match = [](const std::string& pat, const std::string& val) {
        return pat == "*" || pat == val;
    };
    std::vector<StreamKey> out;
    std::set<StreamKey> seen;
    for (const std::string& pattern : patterns) {
        auto parts = split_on(pattern, ':');
        if (parts.size() != 4)
            throw SchemaError("target pattern '" + pattern +
                              "' must have four ':'-separated fields");
        bool hit = false;
        for (const auto& series : corpus.series) {
            std::string subtype = series.key.subtype.empty() ? "-" : series.key.subtype;
            if (field_match(parts[0], series.key.source) &&
                field_match(parts[1], series.key.disease) && field_match(parts[2], subtype) &&
                field_match(parts[3], series.key.location)) {
                hit = true;
                if (seen.insert(series.key).second)
                    out.push_back(series.key);
            }
        }
        if (!hit && unmatched)
            unmatched->push_back(pattern);
    }
    return out;
}

int cmd_validate(const RunConfig& config, std::ostream& out) {
    return guard(out, [&] {
        Corpus corpus = load_corpus(config.corpus);
        out << "corpus: " << corpus.series.size() << " series, "
            << corpus.taxonomy.mode_of.size() << " taxonomy diseases\n";
        for (const auto& s : corpus.series) {
            int observed = s.observed_before(s.size());
            out << "  " << s.key.label() << ": " << s.size() << " weeks ("
                << format_iso_date(s.day_of(0)) << " .. "
                << format_iso_date(s.day_of(s.size() - 1)) << "), " << observed
                << " observed, " << (s.size() - observed) << " gap weeks, mode "
                << to_string(corpus.taxonomy.mode(s.key.disease)) << "\n";
        }
        return 0;
    });
}

namespace {

struct Cell {
    StreamKey target;
    ModelKind model;
    ScopeKind scope;
};

struct CellOutcome {
    bool ok = false;
    std::string reason;
    BacktestResult result;
    CompositionLog log;
};

}  // namespace

int cmd_backtest(const RunConfig& config, std::ostream& out) {
    return guard(out, [&] {
        std::vector<ScopeKind> scopes;
        for (const auto& s : config.scopes)
            scopes.push_back(parse_scope(s));
        std::vector<ModelKind> models;
        for (const auto& m : config.models)
            models.push_back(parse_model(m));
        bool wants_all_data =
            std::find(scopes.begin(), scopes.end(), ScopeKind::all_data) != scopes.end();
        if (wants_all_data && !config.seed_explicit)
            throw SchemaError("config must set 'seed' when the all_data scope is requested");

        Corpus corpus = load_corpus(config.corpus);
        std::vector<std::string> unmatched;
        auto targets = expand_targets(corpus, config.targets, &unmatched);

        std::vector<Cell> cells;
        for (const auto& target : targets)
            for (ModelKind model : models)
                for (ScopeKind scope : scopes)
                    cells.push_back({target, model, scope});
        out << "backtest grid: " << targets.size() << " targets x " << models.size()
            << " models x " << scopes.size() << " scopes = " << cells.size() << " cells\n";

        std::vector<CellOutcome> outcomes(cells.size());
        auto run_cell = [&](std::size_t i) {
            const Cell& cell = cells[i];
            CellOutcome& res = outcomes[i];
            try {
                TrainingScope scope = TrainingScope::make(cell.scope, config.seed);
                BacktestOptions options;
                options.gbt = config.gbt;
                options.gbt.seed = config.seed;
                if (config.moa_neighborhood > 0)
                    options.moa_neighborhood = config.moa_neighborhood;
                if (config.log_composition && cell.model == ModelKind::moa)
                    options.composition = &res.log;
                BacktestPlan plan = make_plan(corpus, cell.target, cell.model, scope);
                res.result = run_backtest(corpus, plan, options);
                res.ok = true;
            } catch (const std::exception& e) {
                res.reason = e.what();
            }
        };

        int workers = std::min<int>(config.threads, static_cast<int>(cells.size()));
        if (workers <= 1) {
            for (std::size_t i = 0; i < cells.size(); ++i)
                run_cell(i);
        } else {
            std::atomic<std::size_t> next{0};
            std::vector<std::thread> pool;
            for (int w = 0; w < workers; ++w) {
                pool.emplace_back([&] {
                    for (std::size_t i = next++; i < cells.size(); i = next++)
                        run_cell(i);
                });
            }
            for (auto& th : pool)
                th.join();
        }

        // single-stream baselines fix the ratio column
        std::map<std::pair<std::string, ModelKind>, const ScoreRecord*> baselines;
        for (std::size_t i = 0; i < cells.size(); ++i)
            if (outcomes[i].ok && cells[i].scope == ScopeKind::single_stream)
                baselines[{cells[i].target.label(), cells[i].model}] = &outcomes[i].result.score;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (!outcomes[i].ok)
                continue;
            auto it = baselines.find({cells[i].target.label(), cells[i].model});
            if (it == baselines.end() || is_missing(it->second->mae) || it->second->mae <= 0)
                continue;
            outcomes[i].result.score.mae_ratio_vs_single_stream =
                mae_ratio(outcomes[i].result.score, *it->second);
        }

        fs::create_directories(config.output);
        std::vector<ScoreRecord> scores;
        std::ostringstream skipped;
        skipped << "target,model,scope,reason\n";
        std::size_t n_ok = 0, n_skipped = unmatched.size();
        for (const std::string& pattern : unmatched)
            skipped << pattern << ",,,pattern matched no stream\n";
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const Cell& cell = cells[i];
            CellOutcome& res = outcomes[i];
            if (!res.ok) {
                ++n_skipped;
                skipped << cell.target.label() << "," << to_string(cell.model) << ","
                        << to_string(cell.scope) << "," << res.reason << "\n";
                out << "  skipped " << cell.target.label() << " " << to_string(cell.model)
                    << " " << to_string(cell.scope) << ": " << res.reason << "\n";
                continue;
            }
            ++n_ok;
            scores.push_back(res.result.score);
            std::string stem = cell_stem(cell.target) + "_" + to_string(cell.model) + "_" +
                               to_string(cell.scope);
            write_forecast_csv(res.result.records, fs::path(config.output) / ("forecasts_" + stem + ".csv"));
            if (!res.log.weeks.empty())
                write_composition_csv(cell.target, res.log,
                                      fs::path(config.output) / ("composition_" + stem + ".csv"));
        }
        write_score_csv(scores, fs::path(config.output) / "scores.csv");
        csv::write_file_atomic((fs::path(config.output) / "skipped_cells.csv").string(),
                               skipped.str());
        out << "wrote " << n_ok << " cells to " << config.output << " (" << n_skipped
            << " skipped)\n";
        return n_ok > 0 ? 0 : 1;
    });
}

int cmd_report(const RunConfig& config, std::ostream& out) {
    return guard(out, [&] {
        Corpus corpus = load_corpus(config.corpus);
        fs::path scores_path = fs::path(config.output) / "scores.csv";
        auto scores = read_score_csv(scores_path);
        ScopeReport report = scope_comparison_report(corpus, scores, config.seed);
        write_report_csv(report, fs::path(config.output) / "report.csv");
        write_report_summary_json(report, fs::path(config.output) / "report_summary.json");

        // long format for external plotting
        std::ostringstream long_csv;
        long_csv << "target,model,scope,metric,value\n";
        for (const auto& sc : scores) {
            auto row = [&](const char* metric, double value) {
                long_csv << sc.target.label() << "," << to_string(sc.model) << ","
                         << to_string(sc.scope) << "," << metric << ","
                         << csv::format_value(value) << "\n";
            };
            row("mae", sc.mae);
            row("wis", sc.wis);
            row("coverage95", sc.coverage95);
            row("mae_ratio_vs_single_stream", sc.mae_ratio_vs_single_stream);
        }
        csv::write_file_atomic((fs::path(config.output) / "scores_long.csv").string(),
                               long_csv.str());

        out << "report: " << report.rows.size() << " (target, model) rows\n";
        for (const auto& [scope, fraction] : report.fraction_outperformed)
            out << "  " << to_string(scope) << " beats single_stream on "
                << csv::format_value(fraction * 100.0) << "% of cells\n";
        return 0;
    });
}

int cmd_analyze_neighborhoods(const RunConfig& config, std::ostream& out) {
    return guard(out, [&] {
        if (!config.seed_explicit)
            throw SchemaError("analyze-neighborhoods uses the all_data scope; set 'seed'");
        Corpus corpus = load_corpus(config.corpus);
        std::vector<std::string> unmatched;
        auto targets = expand_targets(corpus, config.targets, &unmatched);
        if (targets.empty())
            throw UnknownTarget("no target pattern matched a corpus stream");

        fs::create_directories(config.output);
        for (const auto& target : targets) {
            CompositionLog log;
            BacktestOptions options;
            options.gbt = config.gbt;
            if (config.moa_neighborhood > 0)
                options.moa_neighborhood = config.moa_neighborhood;
            options.composition = &log;
            TrainingScope scope = TrainingScope::make(ScopeKind::all_data, config.seed);
            BacktestPlan plan = make_plan(corpus, target, ModelKind::moa, scope);
            run_backtest(corpus, plan, options);
            if (log.weeks.empty())
                throw NoCompositionLog("no neighborhoods recorded for " + target.label());
            fs::path path =
                fs::path(config.output) / ("composition_" + cell_stem(target) + ".csv");
            write_composition_csv(target, log, path);

            auto ratios = composition_relative_to_library(log.total_neighborhood,
                                                          log.final_library);
            out << target.label() << ": " << log.weeks.size() << " weeks analyzed";
            auto own = ratios.find(target.disease);
            if (own != ratios.end())
                out << ", own-disease ratio " << csv::format_value(own->second);
            out << "\n";
        }
        return 0;
    });
}

int cmd_gen_synthetic(const std::string& scenario, const std::string& out_dir,
                      std::uint64_t seed, std::ostream& out) {
    return guard(out, [&] {
        Corpus corpus = synth::make_scenario(scenario, seed);
        write_corpus(corpus, out_dir);
        out << "scenario " << scenario << " (seed " << seed << "): wrote "
            << corpus.series.size() << " series to " << out_dir << "\n";
        out << "suggested target: " << synth::scenario_target(scenario).label() << "\n";
        return 0;
    });
}

}  // namespace crosscast::cli

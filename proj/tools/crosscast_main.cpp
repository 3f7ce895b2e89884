#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "crosscast/cli.hpp"

namespace {

using crosscast::cli::RunConfig;

struct Flags {
    std::string config;
    std::string corpus;
    std::string output;
    std::vector<std::string> targets;
    std::vector<std::string> scopes;
    std::vector<std::string> models;
    std::uint64_t seed = 0;
    int threads = 0;
    int neighborhood = 0;
    bool log_composition = false;
    int n_trees = 0;
    double learning_rate = 0;
    int max_depth = 0;
    int min_samples_leaf = 0;
    double feature_subsample = 0;
};

struct CommonOpts {
    CLI::Option* corpus = nullptr;
    CLI::Option* output = nullptr;
    CLI::Option* targets = nullptr;
    CLI::Option* scopes = nullptr;
    CLI::Option* models = nullptr;
    CLI::Option* seed = nullptr;
    CLI::Option* threads = nullptr;
    CLI::Option* neighborhood = nullptr;
    CLI::Option* log_composition = nullptr;
    CLI::Option* n_trees = nullptr;
    CLI::Option* learning_rate = nullptr;
    CLI::Option* max_depth = nullptr;
    CLI::Option* min_samples_leaf = nullptr;
    CLI::Option* feature_subsample = nullptr;
};

CommonOpts add_common(CLI::App* cmd, Flags& f) {
    CommonOpts o;
    cmd->add_option("--config", f.config, "JSON run configuration file");
    o.corpus = cmd->add_option("--corpus", f.corpus, "corpus directory");
    o.output = cmd->add_option("--output", f.output, "output directory");
    o.targets = cmd->add_option("--target", f.targets,
                                "stream pattern source:disease:subtype:location ('*' wildcard)");
    o.scopes = cmd->add_option("--scope", f.scopes, "training scope(s)");
    o.models = cmd->add_option("--model", f.models, "model kind(s): moa, gbt");
    o.seed = cmd->add_option("--seed", f.seed, "root RNG seed");
    o.threads = cmd->add_option("--threads", f.threads, "worker threads for grid cells");
    o.neighborhood = cmd->add_option("--neighborhood", f.neighborhood,
                                     "MOA neighborhood size override");
    o.log_composition =
        cmd->add_flag("--log-composition", f.log_composition, "record MOA neighborhood makeup");
    o.n_trees = cmd->add_option("--gbt-trees", f.n_trees, "boosting rounds");
    o.learning_rate = cmd->add_option("--gbt-learning-rate", f.learning_rate, "shrinkage");
    o.max_depth = cmd->add_option("--gbt-max-depth", f.max_depth, "tree depth cap");
    o.min_samples_leaf =
        cmd->add_option("--gbt-min-leaf", f.min_samples_leaf, "min rows per leaf");
    o.feature_subsample =
        cmd->add_option("--gbt-feature-subsample", f.feature_subsample, "feature fraction per tree");
    return o;
}

RunConfig assemble(const Flags& f, const CommonOpts& o) {
    RunConfig cfg;
    if (!f.config.empty())
        cfg = crosscast::cli::load_config(f.config);
    if (o.corpus->count())
        cfg.corpus = f.corpus;
    if (o.output->count())
        cfg.output = f.output;
    if (o.targets->count())
        cfg.targets = f.targets;
    if (o.scopes->count())
        cfg.scopes = f.scopes;
    if (o.models->count())
        cfg.models = f.models;
    if (o.seed->count()) {
        cfg.seed = f.seed;
        cfg.seed_explicit = true;
    }
    if (o.threads->count())
        cfg.threads = f.threads;
    if (o.neighborhood->count())
        cfg.moa_neighborhood = f.neighborhood;
    if (o.log_composition->count())
        cfg.log_composition = f.log_composition;
    if (o.n_trees->count())
        cfg.gbt.n_trees = f.n_trees;
    if (o.learning_rate->count())
        cfg.gbt.learning_rate = f.learning_rate;
    if (o.max_depth->count())
        cfg.gbt.max_depth = f.max_depth;
    if (o.min_samples_leaf->count())
        cfg.gbt.min_samples_leaf = f.min_samples_leaf;
    if (o.feature_subsample->count())
        cfg.gbt.feature_subsample = f.feature_subsample;
    if (cfg.corpus.empty())
        throw crosscast::SchemaError("no corpus given (use --corpus or a config file)");
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"crosscast: probabilistic epidemic forecasting backtests"};
    app.require_subcommand(1);

    Flags flags;
    CLI::App* validate = app.add_subcommand("validate", "check a corpus directory");
    CommonOpts validate_opts = add_common(validate, flags);
    CLI::App* backtest = app.add_subcommand("backtest", "run the forecast grid");
    CommonOpts backtest_opts = add_common(backtest, flags);
    CLI::App* report = app.add_subcommand("report", "scope comparison from scores.csv");
    CommonOpts report_opts = add_common(report, flags);
    CLI::App* analyze =
        app.add_subcommand("analyze-neighborhoods", "MOA composition under all_data");
    CommonOpts analyze_opts = add_common(analyze, flags);

    std::string scenario, gen_out;
    std::uint64_t gen_seed = 0;
    CLI::App* gen = app.add_subcommand("gen-synthetic", "emit a synthetic test corpus");
    gen->add_option("--scenario", scenario, "basic, positive, negative, or selfsim")
        ->required();
    gen->add_option("--out", gen_out, "destination directory")->required();
    gen->add_option("--seed", gen_seed, "generator seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed())
            return crosscast::cli::cmd_gen_synthetic(scenario, gen_out, gen_seed, std::cout);
        const CommonOpts& opts = validate->parsed()   ? validate_opts
                                 : backtest->parsed() ? backtest_opts
                                 : report->parsed()   ? report_opts
                                                      : analyze_opts;
        RunConfig cfg = assemble(flags, opts);
        if (validate->parsed())
            return crosscast::cli::cmd_validate(cfg, std::cout);
        if (backtest->parsed())
            return crosscast::cli::cmd_backtest(cfg, std::cout);
        if (report->parsed())
            return crosscast::cli::cmd_report(cfg, std::cout);
        return crosscast::cli::cmd_analyze_neighborhoods(cfg, std::cout);
    } catch (const crosscast::Error& e) {
        std::cout << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cout << "internal error: " << e.what() << "\n";
        return 2;
    }
}

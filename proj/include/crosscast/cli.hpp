#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "crosscast/corpus.hpp"
#include "crosscast/gbt.hpp"

namespace crosscast::cli {

/// Declarative run configuration. Loaded from a JSON file; command-line
/// flags override individual fields. All randomness flows from `seed`.
struct RunConfig {
    std::string corpus;
    std::string output = "out";
    /// Stream patterns "source:disease:subtype:location"; '*' matches any
    /// field value and '-' stands for the empty subtype.
    std::vector<std::string> targets = {"*:*:*:*"};
    std::vector<std::string> scopes = {"single_stream", "single_disease",
                                       "mode_of_transmission", "all_data"};
    std::vector<std::string> models = {"moa", "gbt"};
    std::uint64_t seed = 0;
    bool seed_explicit = false;  // all_data scopes require an explicit seed
    int threads = 1;
    bool log_composition = false;
    int moa_neighborhood = 0;  // 0 keeps the library-size default
    GbtParams gbt;
};

/// Parses a config file. Unknown keys are rejected so typos fail loudly.
RunConfig load_config(const std::string& path);

/// Expands target patterns against the corpus, preserving pattern order
/// and dropping duplicates. Patterns matching nothing are returned in
/// `unmatched` when given.
std::vector<StreamKey> expand_targets(const Corpus& corpus,
                                      const std::vector<std::string>& patterns,
                                      std::vector<std::string>* unmatched = nullptr);

// Subcommand bodies. Each returns a process exit code: 0 success, 1 input
// error, 2 internal error. Human-readable progress goes to `out`.
int cmd_validate(const RunConfig& config, std::ostream& out);
int cmd_backtest(const RunConfig& config, std::ostream& out);
int cmd_report(const RunConfig& config, std::ostream& out);
int cmd_analyze_neighborhoods(const RunConfig& config, std::ostream& out);
int cmd_gen_synthetic(const std::string& scenario, const std::string& out_dir,
                      std::uint64_t seed, std::ostream& out);

}  // namespace crosscast::cli

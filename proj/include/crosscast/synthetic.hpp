#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crosscast/corpus.hpp"

namespace crosscast::synth {

/// Builds one of the named scenario corpora. All values are seeded and
/// reproducible; the same (name, seed) always yields the same corpus.
///
///   basic     one clean three-year target (starting mid-year) plus a
///             small mixed corpus covering two transmission modes
///   positive  six diseases sharing a seasonal latent signal; the target
///             stream is truncated to 80 weeks so wider scopes add data
///   negative  a clean seasonal disease plus ten high-CoV noise streams
///             sharing its transmission mode
///   selfsim   the target trajectory is mirrored exactly (up to scale) by
///             sibling streams of its own disease, while a second disease
///             with unrelated dynamics fills out the library
///
/// Throws SchemaError for an unknown scenario name.
Corpus make_scenario(const std::string& name, std::uint64_t seed);

std::vector<std::string> scenario_names();

/// The stream each scenario is designed to forecast.
StreamKey scenario_target(const std::string& name);

}  // namespace crosscast::synth

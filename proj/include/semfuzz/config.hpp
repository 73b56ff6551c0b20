// SPDX-License-Identifier: Apache-2.0
//
// Run configuration: defaults, overridden by a JSON file, overridden by
// command-line flags. The effective configuration and its hash go into every
// artifact.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "semfuzz/fixtures.hpp"
#include "semfuzz/llm.hpp"

namespace semfuzz {

inline constexpr int kSchemaVersion = 1;

struct RfcInput {
    std::string id;
    std::string file;
};

struct RunConfig {
    ProviderBinding provider;
    Sampling sampling;
    int llm_in_flight = 4;
    int workers = 4;
    int campaign_workers = 8;
    int timeout_ms = 2000;
    std::size_t strategy_cap = 5;
    double match_threshold = 0.5;

    std::vector<RfcInput> rfcs;
    std::string message_types;
    std::string templates;
    std::string seeds;
    std::string benchmark;
    std::string out = "out";

    /// Pipeline campaigns run against the bundled fixtures with these bugs.
    std::vector<BugId> bugs;
    bool probe = true;

    /// Directory relative paths are resolved against. Not part of the hash.
    std::string base_dir = ".";

    /// Relative to base_dir unless absolute; empty stays empty.
    std::string resolve(const std::string& path) const;
};

/// Command-line values; set ones replace what the file said. Paths are
/// relative to the working directory.
struct ConfigOverrides {
    std::optional<ProviderBinding::Kind> provider;
    std::optional<std::string> base_url;
    std::optional<std::string> model;
    std::optional<std::string> store_dir;
    std::optional<std::string> templates;
    std::optional<std::string> out;
    std::optional<double> temperature;
    std::optional<double> top_p;
    std::optional<int> workers;
    std::optional<int> llm_in_flight;
    std::optional<std::vector<BugId>> bugs;
};

void apply_overrides(RunConfig& c, const ConfigOverrides& o);

/// Unknown keys and ill-typed values throw ConfigError.
RunConfig config_from_json(const Json& j, const std::string& base_dir = ".");
/// base_dir becomes the file's directory. Throws IoError, ConfigError.
RunConfig load_config(const std::string& path);
/// Every field, paths as written.
Json to_json(const RunConfig& c);
/// sha256 of the compact effective config without paths.out, so the same
/// run written elsewhere keeps its hash.
std::string config_hash(const RunConfig& c);

}  // namespace semfuzz

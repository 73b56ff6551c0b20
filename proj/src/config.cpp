// SPDX-License-Identifier: Apache-2.0
#include "semfuzz/config.hpp"

#include <filesystem>
#include <set>

#include "semfuzz/errors.hpp"
#include "semfuzz/io.hpp"

namespace semfuzz {

namespace fs = std::filesystem;

namespace {

void check_keys(const Json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : j.items())
        if (!ok.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
}

template <class T>
void read(const Json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const Json::exception&) {
        throw ConfigError(where + "." + key + " has the wrong type");
    }
}

}  // namespace

std::string RunConfig::resolve(const std::string& path) const {
    if (path.empty()) return path;
    fs::path p(path);
    if (p.is_absolute()) return path;
    return (fs::path(base_dir) / p).lexically_normal().string();
}

RunConfig config_from_json(const Json& j, const std::string& base_dir) {
    RunConfig c;
    c.base_dir = base_dir;
    check_keys(j, "config", {"schema_version", "provider", "sampling", "concurrency", "timeout_ms", "strategy_cap",
                             "match_threshold", "paths", "campaign"});
    if (j.contains("schema_version") && j["schema_version"] != kSchemaVersion)
        throw ConfigError("unsupported config schema_version");
    if (j.contains("provider")) {
        const auto& p = j["provider"];
        check_keys(p, "provider", {"kind", "base_url", "model", "store_dir", "api_key_env", "max_attempts",
                                   "backoff_ms", "timeout_ms"});
        std::string kind;
        read(p, "kind", kind, "provider");
        if (!kind.empty()) c.provider.kind = provider_kind_from_string(kind);
        read(p, "base_url", c.provider.base_url, "provider");
        read(p, "model", c.provider.model, "provider");
        read(p, "store_dir", c.provider.store_dir, "provider");
        read(p, "api_key_env", c.provider.api_key_env, "provider");
        read(p, "max_attempts", c.provider.max_attempts, "provider");
        read(p, "backoff_ms", c.provider.backoff_ms, "provider");
        read(p, "timeout_ms", c.provider.timeout_ms, "provider");
        if (c.provider.max_attempts < 1) throw ConfigError("provider.max_attempts must be at least 1");
    }
    if (j.contains("sampling")) {
        check_keys(j["sampling"], "sampling", {"temperature", "top_p"});
        read(j["sampling"], "temperature", c.sampling.temperature, "sampling");
        read(j["sampling"], "top_p", c.sampling.top_p, "sampling");
    }
    if (j.contains("concurrency")) {
        const auto& k = j["concurrency"];
        check_keys(k, "concurrency", {"llm_in_flight", "workers", "campaign_workers"});
        read(k, "llm_in_flight", c.llm_in_flight, "concurrency");
        read(k, "workers", c.workers, "concurrency");
        read(k, "campaign_workers", c.campaign_workers, "concurrency");
        if (c.llm_in_flight < 1 || c.llm_in_flight > 64) throw ConfigError("llm_in_flight must be in 1..64");
        if (c.workers < 1 || c.campaign_workers < 1) throw ConfigError("worker counts must be at least 1");
    }
    read(j, "timeout_ms", c.timeout_ms, "config");
    read(j, "strategy_cap", c.strategy_cap, "config");
    read(j, "match_threshold", c.match_threshold, "config");
    if (c.timeout_ms <= 0) throw ConfigError("timeout_ms must be positive");
    if (j.contains("paths")) {
        const auto& p = j["paths"];
        check_keys(p, "paths", {"rfcs", "message_types", "templates", "seeds", "benchmark", "out"});
        if (p.contains("rfcs")) {
            if (!p["rfcs"].is_array()) throw ConfigError("paths.rfcs must be an array");
            for (const auto& r : p["rfcs"]) {
                check_keys(r, "paths.rfcs[]", {"id", "file"});
                RfcInput in;
                read(r, "id", in.id, "paths.rfcs[]");
                read(r, "file", in.file, "paths.rfcs[]");
                if (in.id.empty() || in.file.empty()) throw ConfigError("paths.rfcs[] needs id and file");
                c.rfcs.push_back(in);
            }
        }
        read(p, "message_types", c.message_types, "paths");
        read(p, "templates", c.templates, "paths");
        read(p, "seeds", c.seeds, "paths");
        read(p, "benchmark", c.benchmark, "paths");
        read(p, "out", c.out, "paths");
    }
    if (j.contains("campaign")) {
        const auto& k = j["campaign"];
        check_keys(k, "campaign", {"bugs", "probe"});
        std::vector<std::string> bugs;
        read(k, "bugs", bugs, "campaign");
        for (const auto& b : bugs) c.bugs.push_back(bug_from_string(b));
        read(k, "probe", c.probe, "campaign");
    }
    return c;
}

RunConfig load_config(const std::string& path) {
    auto j = read_json_file(path);
    auto dir = fs::path(path).parent_path();
    return config_from_json(j, dir.empty() ? "." : dir.string());
}

Json to_json(const RunConfig& c) {
    Json rfcs = Json::array();
    for (const auto& r : c.rfcs) rfcs.push_back({{"id", r.id}, {"file", r.file}});
    Json bugs = Json::array();
    for (auto b : c.bugs) bugs.push_back(std::string(to_string(b)));
    return Json{
        {"schema_version", kSchemaVersion},
        {"provider",
         {{"kind", std::string(to_string(c.provider.kind))},
          {"base_url", c.provider.base_url},
          {"model", c.provider.model},
          {"store_dir", c.provider.store_dir},
          {"api_key_env", c.provider.api_key_env},
          {"max_attempts", c.provider.max_attempts},
          {"backoff_ms", c.provider.backoff_ms},
          {"timeout_ms", c.provider.timeout_ms}}},
        {"sampling", {{"temperature", c.sampling.temperature}, {"top_p", c.sampling.top_p}}},
        {"concurrency",
         {{"llm_in_flight", c.llm_in_flight}, {"workers", c.workers}, {"campaign_workers", c.campaign_workers}}},
        {"timeout_ms", c.timeout_ms},
        {"strategy_cap", c.strategy_cap},
        {"match_threshold", c.match_threshold},
        {"paths",
         {{"rfcs", rfcs},
          {"message_types", c.message_types},
          {"templates", c.templates},
          {"seeds", c.seeds},
          {"benchmark", c.benchmark},
          {"out", c.out}}},
        {"campaign", {{"bugs", bugs}, {"probe", c.probe}}},
    };
}

void apply_overrides(RunConfig& c, const ConfigOverrides& o) {
    auto abs = [](const std::string& p) { return fs::absolute(p).lexically_normal().string(); };
    if (o.provider) c.provider.kind = *o.provider;
    if (o.base_url) c.provider.base_url = *o.base_url;
    if (o.model) c.provider.model = *o.model;
    if (o.store_dir) c.provider.store_dir = abs(*o.store_dir);
    if (o.templates) c.templates = abs(*o.templates);
    if (o.out) c.out = abs(*o.out);
    if (o.temperature) c.sampling.temperature = *o.temperature;
    if (o.top_p) c.sampling.top_p = *o.top_p;
    if (o.workers) c.workers = *o.workers;
    if (o.llm_in_flight) c.llm_in_flight = *o.llm_in_flight;
    if (o.bugs) c.bugs = *o.bugs;
}

std::string config_hash(const RunConfig& c) {
    auto j = to_json(c);
    j["paths"].erase("out");
    return sha256_hex(j.dump());
}

}  // namespace semfuzz

// SPDX-License-Identifier: Apache-2.0
//
// Chat-completion access for the four prompt templates, with a replay store
// keyed by the SHA-256 of the rendered prompt.
#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>

#include "semfuzz/message.hpp"

namespace semfuzz {

/// Template ids: spec_identify, rule_complete, strategy_gen, action_gen.
inline constexpr const char* kTemplateIds[] = {"spec_identify", "rule_complete", "strategy_gen",
                                               "action_gen"};

struct Sampling {
    double temperature = 0.5;
    double top_p = 0.1;
};

struct ChatRequest {
    std::string template_id;
    /// Placeholder name -> value. Strings are inserted verbatim, anything
    /// else as indented JSON.
    Json variables = Json::object();
    /// Unset: the gateway's sampling.
    std::optional<Sampling> sampling;
};

/// Root of the shipped data files (templates, message types, schemas):
/// $SEMFUZZ_DATA_DIR when set, else the directory compiled in.
std::string default_data_dir();

class TemplateStore {
public:
    /// Loads <dir>/<id>.txt for every template id. Throws IoError.
    static TemplateStore load(const std::string& dir);
    static TemplateStore load_default();

    /// Replaces every `${name}$`. Throws UnknownTemplate or MissingVariable.
    std::string render(const std::string& template_id, const Json& variables) const;
    const std::string& text(const std::string& template_id) const;

    void set(const std::string& template_id, std::string text) { texts_[template_id] = std::move(text); }

private:
    std::map<std::string, std::string> texts_;
};

std::string sha256_hex(std::string_view data);

struct ProviderBinding {
    enum class Kind { RemoteHttp, Replay, Record };
    Kind kind = Kind::Replay;
    /// OpenAI-compatible base URL, e.g. https://api.openai.com/v1
    std::string base_url;
    std::string model;
    std::string store_dir;
    std::string api_key_env = "LLM_API_KEY";
    int max_attempts = 3;
    int backoff_ms = 250;
    int timeout_ms = 60000;
};

ProviderBinding::Kind provider_kind_from_string(std::string_view s);
std::string_view to_string(ProviderBinding::Kind k) noexcept;

struct HttpReply {
    int status = 0;
    std::string body;
};

/// POST transport; throws TransportError when no HTTP reply was obtained.
using HttpPost = std::function<HttpReply(const std::string& url, const std::string& body,
                                         const std::map<std::string, std::string>& headers,
                                         int timeout_ms)>;

/// httplib-backed transport (http and https URLs).
HttpPost default_http_post();

/// The JSON body sent to {base_url}/chat/completions.
Json chat_request_body(const std::string& model, const std::string& prompt, const Sampling& s);

/// Extracts the first JSON object or array embedded in `raw` and validates it
/// against one of: spec_requirements, semantic_rule, mutation_strategies,
/// action_sequence. Wrapper objects such as {"mutation_strategies": [...]} are
/// unwrapped to the array. Throws SchemaViolation.
Json parse_structured(std::string_view raw, std::string_view schema_id);

using LogSink = std::function<void(const std::string&)>;

class LlmGateway {
public:
    LlmGateway(ProviderBinding binding, TemplateStore templates, int max_in_flight = 4,
               HttpPost post = {});

    std::string render(const ChatRequest& req) const;

    /// Throws TransportError (after retries), FixtureMiss (replay).
    std::string complete(const ChatRequest& req);
    std::string complete_prompt(const std::string& prompt, const Sampling& sampling);

    /// complete + parse_structured; on SchemaViolation re-prompts once with
    /// the violation appended, then rethrows.
    Json ask(const ChatRequest& req, std::string_view schema_id);

    void set_log(LogSink sink) { log_ = std::move(sink); }
    /// Sampling for requests that do not carry their own.
    void set_sampling(Sampling s) { sampling_ = s; }
    const Sampling& sampling() const noexcept { return sampling_; }
    std::size_t retries() const noexcept { return retries_.load(); }
    std::size_t calls() const noexcept { return calls_.load(); }
    const ProviderBinding& binding() const noexcept { return binding_; }

private:
    std::string remote(const std::string& prompt, const Sampling& sampling);
    std::string store_path(const std::string& key) const;

    ProviderBinding binding_;
    TemplateStore templates_;
    HttpPost post_;
    std::unique_ptr<std::counting_semaphore<64>> slots_;
    std::mutex record_mu_;
    std::atomic<std::size_t> retries_{0};
    std::atomic<std::size_t> calls_{0};
    LogSink log_;
    Sampling sampling_;
};

}  // namespace semfuzz

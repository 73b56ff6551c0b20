// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <thread>

#include "semfuzz/errors.hpp"
#include "semfuzz/io.hpp"
#include "semfuzz/llm.hpp"
#include "strutil.hpp"

#ifndef SEMFUZZ_DATA_DIR
#define SEMFUZZ_DATA_DIR "data"
#endif

namespace semfuzz {

namespace fs = std::filesystem;

std::string default_data_dir() {
    if (const char* env = std::getenv("SEMFUZZ_DATA_DIR"); env && *env) return env;
    return SEMFUZZ_DATA_DIR;
}

TemplateStore TemplateStore::load(const std::string& dir) {
    TemplateStore store;
    for (const char* id : kTemplateIds)
        store.texts_[id] = read_text_file((fs::path(dir) / (std::string(id) + ".txt")).string());
    return store;
}

TemplateStore TemplateStore::load_default() {
    return load((fs::path(default_data_dir()) / "templates").string());
}

const std::string& TemplateStore::text(const std::string& template_id) const {
    auto it = texts_.find(template_id);
    if (it == texts_.end()) throw UnknownTemplate("unknown template '" + template_id + "'");
    return it->second;
}

std::string TemplateStore::render(const std::string& template_id, const Json& variables) const {
    const auto& tpl = text(template_id);
    std::string out;
    std::size_t pos = 0;
    while (true) {
        auto open = tpl.find("${", pos);
        if (open == std::string::npos) break;
        auto close = tpl.find("}$", open + 2);
        if (close == std::string::npos) break;
        out.append(tpl, pos, open - pos);
        auto name = tpl.substr(open + 2, close - open - 2);
        if (!variables.is_object() || !variables.contains(name))
            throw MissingVariable("template '" + template_id + "' needs variable '" + name + "'");
        const auto& v = variables[name];
        out += v.is_string() ? v.get<std::string>() : v.dump(2);
        pos = close + 2;
    }
    out.append(tpl, pos, std::string::npos);
    return out;
}

ProviderBinding::Kind provider_kind_from_string(std::string_view s) {
    auto l = detail::to_lower(s);
    if (l == "remote" || l == "remote-http" || l == "http") return ProviderBinding::Kind::RemoteHttp;
    if (l == "replay") return ProviderBinding::Kind::Replay;
    if (l == "record") return ProviderBinding::Kind::Record;
    throw ConfigError("unknown provider kind '" + std::string(s) + "'");
}

std::string_view to_string(ProviderBinding::Kind k) noexcept {
    switch (k) {
        case ProviderBinding::Kind::RemoteHttp: return "remote-http";
        case ProviderBinding::Kind::Replay: return "replay";
        case ProviderBinding::Kind::Record: return "record";
    }
    return "?";
}

Json chat_request_body(const std::string& model, const std::string& prompt, const Sampling& s) {
    return Json{{"model", model},
                {"messages", Json::array({Json{{"role", "user"}, {"content", prompt}}})},
                {"temperature", s.temperature},
                {"top_p", s.top_p}};
}

// ---------------------------------------------------------------------------
// Structured output

namespace {

// End of the bracketed value starting at `start`, honouring JSON strings.
std::size_t matching_close(std::string_view s, std::size_t start) {
    std::vector<char> stack;
    bool in_str = false;
    for (std::size_t i = start; i < s.size(); ++i) {
        char c = s[i];
        if (in_str) {
            if (c == '\\') ++i;
            else if (c == '"') in_str = false;
            continue;
        }
        if (c == '"') in_str = true;
        else if (c == '{' || c == '[') stack.push_back(c == '{' ? '}' : ']');
        else if (c == '}' || c == ']') {
            if (stack.empty() || stack.back() != c) return std::string_view::npos;
            stack.pop_back();
            if (stack.empty()) return i;
        }
    }
    return std::string_view::npos;
}

std::optional<Json> first_json(std::string_view raw) {
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] != '{' && raw[i] != '[') continue;
        auto end = matching_close(raw, i);
        if (end == std::string_view::npos) continue;
        auto parsed = Json::parse(raw.substr(i, end - i + 1), nullptr, false);
        if (!parsed.is_discarded()) return parsed;
    }
    return std::nullopt;
}

[[noreturn]] void violation(const std::string& what) { throw SchemaViolation(what); }

void require_string(const Json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) violation(where + ": missing required \"" + key + "\"");
    if (!obj[key].is_string() || detail::trim(obj[key].get<std::string>()).empty())
        violation(where + ": \"" + key + "\" must be a non-empty string");
}

Json unwrap(const Json& j, std::initializer_list<const char*> keys) {
    if (j.is_object())
        for (const char* k : keys)
            if (j.contains(k)) return j[k];
    return j;
}

Json check_requirements(const Json& j) {
    auto arr = unwrap(j, {"specification_requirements", "requirements"});
    if (arr.is_object() && arr.contains("message_type")) arr = Json::array({arr});
    if (!arr.is_array()) violation("specification requirements must be a JSON array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
        auto where = "requirement " + std::to_string(i);
        if (!arr[i].is_object()) violation(where + " is not an object");
        require_string(arr[i], "message_type", where);
        require_string(arr[i], "content", where);
    }
    return arr;
}

void check_role_rule(Json& r, const std::string& where) {
    if (!r.is_object()) violation(where + " must be an object");
    require_string(r, "role", where);
    require_string(r, "content", where);
    auto role = detail::to_lower(detail::trim(r["role"].get<std::string>()));
    if (role != "client" && role != "server")
        violation(where + ": role must be \"client\" or \"server\", got \"" + role + "\"");
    r["role"] = role;
    if (r.contains("inferred") && !r["inferred"].is_boolean())
        violation(where + ": \"inferred\" must be a boolean");
}

Json check_semantic_rule(const Json& j) {
    auto obj = unwrap(j, {"semantic_rule", "rule"});
    if (obj.is_array() && obj.size() == 1) obj = obj[0];
    if (!obj.is_object()) violation("semantic rule must be a JSON object");
    require_string(obj, "field", "semantic rule");
    for (const char* k : {"construction", "processing"}) {
        if (!obj.contains(k)) violation(std::string("semantic rule: missing required \"") + k + "\"");
        check_role_rule(obj[k], std::string("semantic rule ") + k);
    }
    if (obj["construction"]["role"] == obj["processing"]["role"])
        violation("semantic rule: construction and processing must name different roles");
    return obj;
}

Json check_strategies(const Json& j) {
    auto arr = unwrap(j, {"mutation_strategies", "strategies"});
    if (arr.is_object() && arr.contains("description")) arr = Json::array({arr});
    if (!arr.is_array()) violation("mutation strategies must be a JSON array");
    if (arr.empty()) violation("mutation strategies: empty list");
    for (std::size_t i = 0; i < arr.size(); ++i) {
        auto where = "strategy " + std::to_string(i);
        if (!arr[i].is_object()) violation(where + " is not an object");
        require_string(arr[i], "description", where);
        require_string(arr[i], "expected_feedback", where);
    }
    return arr;
}

Json check_actions(const Json& j) {
    auto arr = unwrap(j, {"action_sequence", "actions"});
    if (!arr.is_array()) violation("action sequence must be a JSON array");
    if (arr.empty()) violation("action sequence: empty list");
    for (std::size_t i = 0; i < arr.size(); ++i) {
        auto where = "action " + std::to_string(i);
        auto& a = arr[i];
        if (!a.is_object()) violation(where + " is not an object");
        require_string(a, "action", where);
        auto kind = detail::to_lower(a["action"].get<std::string>());
        a["action"] = kind;
        if (kind == "add") {
            require_string(a, "target_parent", where);
            if (!a.contains("new_field") || !a["new_field"].is_object())
                violation(where + ": missing required \"new_field\" object");
            require_string(a["new_field"], "name", where + " new_field");
            if (!a["new_field"].contains("value")) violation(where + ": new_field lacks \"value\"");
            if (a.contains("position") && !a["position"].is_null() && !a["position"].is_number_unsigned())
                violation(where + ": \"position\" must be a non-negative integer or null");
        } else if (kind == "remove") {
            require_string(a, "target", where);
        } else if (kind == "update") {
            require_string(a, "target", where);
            if (a.contains("freeze_derived") && !a["freeze_derived"].is_boolean())
                violation(where + ": \"freeze_derived\" must be a boolean");
        } else {
            violation(where + ": unknown action \"" + kind + "\"");
        }
    }
    return arr;
}

}  // namespace

Json parse_structured(std::string_view raw, std::string_view schema_id) {
    auto j = first_json(raw);
    if (!j) violation("no JSON object or array found in the model output");
    if (schema_id == "spec_requirements") return check_requirements(*j);
    if (schema_id == "semantic_rule") return check_semantic_rule(*j);
    if (schema_id == "mutation_strategies") return check_strategies(*j);
    if (schema_id == "action_sequence") return check_actions(*j);
    throw ConfigError("unknown schema '" + std::string(schema_id) + "'");
}

// ---------------------------------------------------------------------------
// Gateway

LlmGateway::LlmGateway(ProviderBinding binding, TemplateStore templates, int max_in_flight,
                       HttpPost post)
    : binding_(std::move(binding)),
      templates_(std::move(templates)),
      post_(post ? std::move(post) : default_http_post()),
      slots_(std::make_unique<std::counting_semaphore<64>>(std::clamp(max_in_flight, 1, 64))),
      log_([](const std::string& line) { std::fprintf(stderr, "%s\n", line.c_str()); }) {}

std::string LlmGateway::render(const ChatRequest& req) const {
    return templates_.render(req.template_id, req.variables);
}

std::string LlmGateway::complete(const ChatRequest& req) {
    return complete_prompt(render(req), req.sampling.value_or(sampling_));
}

std::string LlmGateway::store_path(const std::string& key) const {
    return (fs::path(binding_.store_dir) / (key + ".json")).string();
}

std::string LlmGateway::complete_prompt(const std::string& prompt, const Sampling& sampling) {
    slots_->acquire();
    struct Release {
        std::counting_semaphore<64>& s;
        ~Release() { s.release(); }
    } release{*slots_};
    ++calls_;

    auto key = sha256_hex(prompt);
    switch (binding_.kind) {
        case ProviderBinding::Kind::Replay: {
            auto path = store_path(key);
            if (!fs::exists(path)) throw FixtureMiss("no recorded response for prompt " + key);
            auto rec = read_json_file(path);
            return rec.at("response").get<std::string>();
        }
        case ProviderBinding::Kind::RemoteHttp: return remote(prompt, sampling);
        case ProviderBinding::Kind::Record: {
            auto text = remote(prompt, sampling);
            Json rec{{"prompt", prompt},
                     {"response", text},
                     {"model", binding_.model},
                     {"sampling", {{"temperature", sampling.temperature}, {"top_p", sampling.top_p}}}};
            std::lock_guard lock(record_mu_);
            write_json_file(store_path(key), rec);
            return text;
        }
    }
    throw ConfigError("unsupported provider");
}

std::string LlmGateway::remote(const std::string& prompt, const Sampling& sampling) {
    std::map<std::string, std::string> headers{{"Content-Type", "application/json"}};
    if (const char* key = std::getenv(binding_.api_key_env.c_str()); key && *key)
        headers["Authorization"] = std::string("Bearer ") + key;
    auto url = binding_.base_url;
    while (!url.empty() && url.back() == '/') url.pop_back();
    url += "/chat/completions";
    auto body = chat_request_body(binding_.model, prompt, sampling).dump();

    std::string last_error;
    for (int attempt = 1; attempt <= std::max(1, binding_.max_attempts); ++attempt) {
        if (attempt > 1) {
            ++retries_;
            log_("llm: retry " + std::to_string(attempt - 1) + " after " + last_error);
            std::this_thread::sleep_for(std::chrono::milliseconds(binding_.backoff_ms << (attempt - 2)));
        }
        HttpReply reply;
        try {
            reply = post_(url, body, headers, binding_.timeout_ms);
        } catch (const TransportError& e) {
            last_error = e.what();
            continue;
        }
        if (reply.status == 429 || reply.status >= 500) {
            last_error = "HTTP " + std::to_string(reply.status);
            continue;
        }
        if (reply.status != 200)
            throw TransportError("HTTP " + std::to_string(reply.status) + ": " + reply.body.substr(0, 200));
        auto j = Json::parse(reply.body, nullptr, false);
        if (j.is_discarded() || !j.contains("choices") || j["choices"].empty())
            throw TransportError("malformed chat completion reply");
        const auto& msg = j["choices"][0]["message"];
        if (!msg.contains("content") || !msg["content"].is_string())
            throw TransportError("chat completion reply without text content");
        return msg["content"].get<std::string>();
    }
    throw TransportError("giving up after " + std::to_string(binding_.max_attempts) +
                         " attempts: " + last_error);
}

Json LlmGateway::ask(const ChatRequest& req, std::string_view schema_id) {
    auto prompt = render(req);
    auto sampling = req.sampling.value_or(sampling_);
    auto raw = complete_prompt(prompt, sampling);
    try {
        return parse_structured(raw, schema_id);
    } catch (const SchemaViolation& v) {
        log_("llm: schema violation (" + std::string(v.what()) + "), re-prompting once");
        auto retry = prompt + "\n\nYour previous answer was rejected: " + v.what() +
                     "\nAnswer again and follow @Format exactly.\n";
        return parse_structured(complete_prompt(retry, sampling), schema_id);
    }
}

}  // namespace semfuzz

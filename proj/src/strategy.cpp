// SPDX-License-Identifier: Apache-2.0
#include "semfuzz/strategy.hpp"

#include <set>

#include "parallel.hpp"
#include "semfuzz/errors.hpp"
#include "strutil.hpp"

namespace semfuzz {

namespace {

const std::set<std::string>& normal_words() {
    static const std::set<std::string> w = {
        "normal", "success", "successful", "successfully", "succeeds", "accept", "accepts",
        "accepted", "proceed", "proceeds", "continue", "continues", "serverhello", "200", "2xx",
        "ok", "resolves", "answers"};
    return w;
}

const std::set<std::string>& error_words() {
    static const std::set<std::string> w = {
        "error", "alert", "reject", "rejects", "rejected", "abort", "aborts", "aborted", "timeout",
        "drop", "drops", "dropped", "discard", "discards", "discarded", "400", "4xx", "500", "5xx",
        "501", "fail", "fails", "failure", "refuse", "refuses", "refused", "formerr", "servfail",
        "nxdomain", "notimp", "close", "closes", "terminate", "terminates", "reset", "crash"};
    return w;
}

const char* const kErrorPhrases[] = {"no response", "no reply", "not respond", "does not respond",
                                     "without response", "without a response", "no answer"};

std::vector<std::string> words(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        char l = detail::ascii_lower(c);
        if ((l >= 'a' && l <= 'z') || (l >= '0' && l <= '9') || l == '\'') {
            cur.push_back(l);
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::string last_name(std::string_view field) {
    std::string name;
    auto path = FieldPath::parse(field);
    for (const auto& seg : path.segments())
        if (!seg.name.empty()) name = seg.name;
    return name;
}

}  // namespace

std::string_view to_string(FeedbackClass c) noexcept {
    return c == FeedbackClass::Normal ? "Normal" : "Error";
}

FeedbackClass feedback_from_text(std::string_view phrase) {
    auto folded = detail::to_lower(detail::collapse_ws(phrase));
    if (folded == "normal" || folded == "normal feedback" || folded == "normal response")
        return FeedbackClass::Normal;
    if (folded == "error" || folded == "error feedback" || folded == "error response")
        return FeedbackClass::Error;

    bool err = false, normal = false;
    for (const char* p : kErrorPhrases)
        if (folded.find(p) != std::string::npos) err = true;
    bool negated = false;
    for (const auto& w : words(folded)) {
        if (normal_words().count(w)) normal = true;
        if (error_words().count(w)) err = true;
        if (w == "not" || w == "never" || w == "without" || w.ends_with("n't")) negated = true;
    }
    if (negated && normal)
        throw SchemaViolation("negated expectation '" + std::string(phrase) + "' is ambiguous");
    if (err != normal) return err ? FeedbackClass::Error : FeedbackClass::Normal;
    throw SchemaViolation("expected feedback '" + std::string(phrase) +
                          "' maps to neither or both response classes");
}

Json to_json(const MutationStrategy& s) {
    return Json{{"id", s.id},
                {"rule_id", s.rule_id},
                {"protocol", to_string(s.protocol)},
                {"message_type", s.message_type},
                {"field", s.field},
                {"description", s.description},
                {"expected", to_string(s.expected)},
                {"sender_role", s.sender_role}};
}

MutationStrategy strategy_from_json(const Json& j) {
    try {
        MutationStrategy s;
        s.id = j.at("id").get<std::string>();
        s.rule_id = j.value("rule_id", "");
        s.protocol = protocol_from_string(j.at("protocol").get<std::string>());
        s.message_type = j.at("message_type").get<std::string>();
        s.field = j.value("field", "");
        s.description = j.at("description").get<std::string>();
        s.expected = feedback_from_text(j.at("expected").get<std::string>());
        s.sender_role = j.value("sender_role", "client");
        return s;
    } catch (const Json::exception& e) {
        throw SchemaViolation(std::string("malformed strategy: ") + e.what());
    }
}

Json strategies_document(const std::vector<MutationStrategy>& s, const std::string& config_hash) {
    Json arr = Json::array();
    for (const auto& x : s) arr.push_back(to_json(x));
    return Json{{"schema_version", 1}, {"config_hash", config_hash}, {"strategies", std::move(arr)}};
}

std::vector<MutationStrategy> strategies_from_document(const Json& doc) {
    const Json& arr = doc.is_object() && doc.contains("strategies") ? doc["strategies"] : doc;
    if (!arr.is_array()) throw SchemaViolation("strategies file must hold an array of strategies");
    std::vector<MutationStrategy> out;
    for (const auto& j : arr) out.push_back(strategy_from_json(j));
    return out;
}

std::vector<MutationStrategy> gen_strategies(LlmGateway& gw, const SemanticRule& rule, std::size_t cap,
                                             std::vector<std::string>* warnings) {
    Json sr{{"protocol", to_string(rule.protocol)},
            {"message_type", rule.message_type},
            {"field", rule.field},
            {"construction", {{"role", rule.construction.role}, {"content", rule.construction.content}}},
            {"processing", {{"role", rule.processing.role}, {"content", rule.processing.content}}}};
    auto arr = gw.ask(ChatRequest{"strategy_gen", Json{{"semantic_rule", sr}}, {}}, "mutation_strategies");

    std::string field_name;
    try {
        field_name = last_name(rule.field);
    } catch (const Error&) {
    }
    std::vector<MutationStrategy> out;
    for (const auto& item : arr) {
        if (out.size() == cap) {
            if (warnings)
                warnings->push_back(rule.id + ": " + std::to_string(arr.size()) +
                                    " strategies proposed, kept the first " + std::to_string(cap));
            break;
        }
        MutationStrategy s;
        s.id = rule.id + ".M" + std::to_string(out.size() + 1);
        s.rule_id = rule.id;
        s.protocol = rule.protocol;
        s.message_type = rule.message_type;
        s.field = rule.field;
        s.description = std::string(detail::trim(item["description"].get<std::string>()));
        s.expected = feedback_from_text(item["expected_feedback"].get<std::string>());
        s.sender_role = rule.construction.role;
        if (warnings && !field_name.empty() && !detail::icontains(s.description, field_name))
            warnings->push_back(s.id + ": description does not mention '" + field_name + "'");
        out.push_back(std::move(s));
    }
    return out;
}

StrategyBuildReport build_strategies(LlmGateway& gw, const std::vector<SemanticRule>& rules,
                                     const StrategyOptions& opts) {
    struct Unit {
        std::vector<MutationStrategy> out;
        std::vector<std::string> warnings;
        std::optional<SkippedUnit> skipped;
    };
    std::vector<Unit> units(rules.size());
    detail::parallel_for(rules.size(), opts.workers, [&](std::size_t i) {
        try {
            units[i].out = gen_strategies(gw, rules[i], opts.cap, &units[i].warnings);
        } catch (const Error& e) {
            units[i].skipped = SkippedUnit{rules[i].id, "gen_strategies", e.kind(), e.what()};
        }
    });
    StrategyBuildReport report;
    for (auto& u : units) {
        for (auto& s : u.out) report.strategies.push_back(std::move(s));
        for (auto& w : u.warnings) report.warnings.push_back(std::move(w));
        if (u.skipped) report.skipped.push_back(std::move(*u.skipped));
    }
    return report;
}

}  // namespace semfuzz

// SPDX-License-Identifier: Apache-2.0
#include "semfuzz/eval.hpp"

#include <cctype>

#include "semfuzz/errors.hpp"

namespace semfuzz {

namespace {

// Articles, prepositions, auxiliaries and the requirement keywords, which
// every rule shares. "not" stays: it flips the meaning.
const std::set<std::string>& stopwords() {
    static const std::set<std::string> s = {
        "a",    "an",   "the",   "of",   "to",   "in",    "on",   "at",    "by",   "for",  "with",  "from",
        "as",   "and",  "or",    "is",   "are",  "be",    "been", "was",   "were", "it",   "its",   "this",
        "that", "these", "those", "which", "if", "than",  "then", "into",  "per",  "any",  "each",  "must",
        "shall", "should", "may", "required", "recommended", "optional", "can", "will", "has", "have", "do",
        "does",
    };
    return s;
}

}  // namespace

std::vector<BenchmarkRule> benchmark_from_document(const Json& doc) {
    const Json* arr = &doc;
    if (doc.is_object()) {
        if (!doc.contains("rules")) throw SchemaViolation("benchmark lacks a \"rules\" array");
        arr = &doc["rules"];
    }
    if (!arr->is_array()) throw SchemaViolation("benchmark rules must be an array");
    std::vector<BenchmarkRule> out;
    for (const auto& j : *arr) {
        if (!j.is_object() || !j.contains("annotation_id") || !j["annotation_id"].is_string())
            throw SchemaViolation("benchmark rule without annotation_id");
        out.push_back({j["annotation_id"].get<std::string>(), rule_from_json(j)});
    }
    return out;
}

MetricReport metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
    MetricReport m{tp, fp, fn, 0, 0, 0};
    if (tp + fp > 0) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (tp + fn > 0) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (m.precision + m.recall > 0) m.f1 = 2 * m.precision * m.recall / (m.precision + m.recall);
    return m;
}

std::set<std::string> content_words(std::string_view text) {
    std::set<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty() && !stopwords().count(cur)) out.insert(cur);
        cur.clear();
    };
    for (char ch : text) {
        auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) cur.push_back(static_cast<char>(std::tolower(c)));
        else flush();
    }
    flush();
    return out;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 0;
    std::size_t inter = 0;
    for (const auto& w : a) inter += b.count(w);
    return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

std::string fold_name(std::string_view s) {
    std::string out;
    bool space = false;
    for (char ch : s) {
        auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            space = !out.empty();
            continue;
        }
        if (space) out.push_back(' ');
        space = false;
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

bool match_rule(const SemanticRule& extracted, const BenchmarkRule& bench, const MatchOptions& opts) {
    const auto& b = bench.rule;
    if (extracted.protocol != b.protocol) return false;
    if (fold_name(extracted.message_type) != fold_name(b.message_type)) return false;
    if (fold_name(extracted.field) != fold_name(b.field)) return false;
    return jaccard(content_words(extracted.construction.content), content_words(b.construction.content)) >=
           opts.threshold;
}

RuleScore score_rules(const std::vector<SemanticRule>& extracted, const std::vector<BenchmarkRule>& benchmark,
                      const MatchOptions& opts) {
    RuleScore s;
    std::vector<bool> used(benchmark.size(), false);
    for (const auto& r : extracted) {
        for (std::size_t i = 0; i < benchmark.size(); ++i) {
            if (used[i] || !match_rule(r, benchmark[i], opts)) continue;
            used[i] = true;
            s.matches.push_back({r.id, benchmark[i].annotation_id});
            break;
        }
    }
    auto tp = s.matches.size();
    s.metrics = metrics_from_counts(tp, extracted.size() - tp, benchmark.size() - tp);
    return s;
}

double score_cases(const std::vector<TestCase>& cases) {
    if (cases.empty()) throw EmptyBatch("no test cases to score");
    std::size_t valid = 0;
    for (const auto& c : cases) valid += c.valid ? 1 : 0;
    return static_cast<double>(valid) / static_cast<double>(cases.size());
}

double score_cases(const Json& manifest) {
    if (!manifest.is_object() || !manifest.contains("cases") || !manifest["cases"].is_array())
        throw SchemaViolation("manifest lacks a \"cases\" array");
    const auto& list = manifest["cases"];
    if (list.empty()) throw EmptyBatch("manifest lists no test cases");
    std::size_t valid = 0;
    for (const auto& e : list) {
        if (!e.is_object() || !e.contains("valid") || !e["valid"].is_boolean())
            throw SchemaViolation("manifest case entry without a boolean \"valid\"");
        valid += e["valid"].get<bool>() ? 1 : 0;
    }
    return static_cast<double>(valid) / static_cast<double>(list.size());
}

Json to_json(const MetricReport& m) {
    return Json{{"tp", m.tp}, {"fp", m.fp}, {"fn", m.fn},
                {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

Json rule_score_report(const RuleScore& s, const MatchOptions& opts) {
    Json matches = Json::array();
    for (const auto& m : s.matches) matches.push_back({{"rule_id", m.rule_id}, {"annotation_id", m.annotation_id}});
    Json j = to_json(s.metrics);
    j["matcher"] = "exact protocol, folded message_type and field, Jaccard over construction content words";
    j["threshold"] = opts.threshold;
    j["matches"] = std::move(matches);
    return j;
}

}  // namespace semfuzz

// SPDX-License-Identifier: Apache-2.0
#include "semfuzz/rules.hpp"

#include <cstdio>
#include <mutex>
#include <regex>
#include <set>

#include "parallel.hpp"
#include "semfuzz/errors.hpp"
#include "semfuzz/hex.hpp"
#include "strutil.hpp"

namespace semfuzz {

namespace {

const std::regex& heading_re() {
    static const std::regex re(R"(^\d+(\.\d+)*\.?\s+\S.*$)");
    return re;
}

const std::regex& footer_re() {
    static const std::regex re(R"(^.*\[Page \d+\]\s*$)");
    return re;
}

// "RFC 8446                           TLS                        August 2018"
const std::regex& header_re() {
    static const std::regex re(R"(^RFC \d+ {2,}.*\S {2,}\S.*\d{4}\s*$)");
    return re;
}

const std::regex& references_re() {
    static const std::regex re(R"(^(\d+(\.\d+)*\.?\s+)?((Normative|Informative)\s+)?References\s*$)");
    return re;
}

bool blank(std::string_view s) { return detail::trim(s).empty(); }

std::size_t heading_depth(std::string_view line) {
    std::size_t depth = 1;
    for (char c : line) {
        if (c == '.') {
            ++depth;
            continue;
        }
        if (c < '0' || c > '9') break;
    }
    // "4.2." counts its trailing dot once too many.
    auto first_space = line.find_first_of(" \t");
    auto number = line.substr(0, first_space);
    if (!number.empty() && number.back() == '.') --depth;
    return depth;
}

// Drops form feeds, page footers and running headers. A paragraph cut by a
// page break is rejoined; a break between paragraphs leaves one blank line.
std::vector<std::string> strip_pages(std::string_view text) {
    std::vector<std::string> out;
    bool in_break = false;
    for (auto raw : detail::split_lines(text)) {
        std::string line(raw);
        line.erase(std::remove(line.begin(), line.end(), '\f'), line.end());
        if (std::regex_match(line, footer_re())) {
            while (!out.empty() && blank(out.back())) out.pop_back();
            in_break = true;
            continue;
        }
        if (in_break) {
            if (blank(line) || std::regex_match(line, header_re())) continue;
            in_break = false;
            auto prev = out.empty() ? std::string_view{} : detail::trim(out.back());
            bool sentence_end = prev.empty() || prev.back() == '.' || prev.back() == ':';
            if (sentence_end || is_heading_line(line)) out.emplace_back();
        }
        out.push_back(std::move(line));
    }
    return out;
}

std::string join_lines(const std::vector<std::string>& lines, std::size_t from, std::size_t to) {
    std::string s;
    for (std::size_t i = from; i < to; ++i) {
        s += lines[i];
        s.push_back('\n');
    }
    return s;
}

std::string fold(std::string_view s) { return detail::to_lower(detail::collapse_ws(s)); }

std::string indices_to_wildcard(std::string_view path) {
    std::string out;
    for (std::size_t i = 0; i < path.size(); ++i) {
        if (path[i] == '[') {
            auto close = path.find(']', i);
            if (close == std::string_view::npos) {
                out.append(path.substr(i));
                break;
            }
            out += "[*]";
            i = close;
            continue;
        }
        out.push_back(path[i]);
    }
    return out;
}

std::string describe_value(const FieldNode& n) {
    const auto& v = n.value;
    std::string s;
    switch (v.kind()) {
        case FieldValue::Kind::UInt:
            s = std::to_string(v.as_uint().value) + " (uint" + std::to_string(v.as_uint().bits) + ")";
            break;
        case FieldValue::Kind::Text: s = Json(v.as_text()).dump(); break;
        case FieldValue::Kind::Bytes: {
            const auto& b = v.as_bytes();
            if (b.size() <= 512) s = "bytes " + (b.empty() ? std::string("(empty)") : to_hex(b));
            else
                s = "bytes " + to_hex(std::span(b.data(), 64)) + "... (" + std::to_string(b.size()) +
                    " bytes)";
            break;
        }
        case FieldValue::Kind::Composite: {
            const auto& c = v.as_composite();
            s = std::string(c.sequence ? "sequence" : "composite") + " of " +
                std::to_string(c.children.size());
            break;
        }
    }
    if (n.derived) s += ", derived";
    return s;
}

RoleRule role_rule_from_json(const Json& j) {
    RoleRule r;
    r.role = j.at("role").get<std::string>();
    r.content = j.at("content").get<std::string>();
    r.inferred = j.value("inferred", false);
    return r;
}

Json role_rule_json(const RoleRule& r) {
    return Json{{"role", r.role}, {"content", r.content}, {"inferred", r.inferred}};
}

Json provenance_json(const Provenance& p) {
    return Json{{"rfc", p.rfc}, {"chapter_path", p.chapter_path}, {"paragraph", p.paragraph}};
}

Provenance provenance_from_json(const Json& j) {
    Provenance p;
    if (!j.is_object()) return p;
    p.rfc = j.value("rfc", "");
    if (j.contains("chapter_path")) p.chapter_path = j["chapter_path"].get<std::vector<std::string>>();
    p.paragraph = j.value("paragraph", std::size_t{0});
    return p;
}

}  // namespace

bool is_heading_line(std::string_view line) {
    return !line.empty() && line.front() >= '0' && line.front() <= '9' &&
           std::regex_match(line.begin(), line.end(), heading_re());
}

CleanedDocument clean_document(std::string_view rfc_text) {
    CleanedDocument out;
    auto lines = strip_pages(rfc_text);

    std::optional<std::size_t> toc;
    for (std::size_t i = 0; i < lines.size() && !toc; ++i)
        if (detail::iequals(detail::trim(lines[i]), "Table of Contents")) toc = i;

    std::optional<std::size_t> start, end;
    if (toc) {
        for (std::size_t i = *toc + 1; i < lines.size() && !start; ++i)
            if (is_heading_line(lines[i])) start = i;
    }
    if (start) {
        for (std::size_t i = *start; i < lines.size() && !end; ++i)
            if (std::regex_match(lines[i], references_re())) end = i;
    }

    if (!toc || !start || !end) {
        out.structure_found = false;
        out.warnings.push_back(std::string("StructureNotFound: ") +
                               (!toc || !start ? "no table of contents" : "no References heading") +
                               "; using the full text");
        out.body = join_lines(lines, 0, lines.size());
        return out;
    }
    out.body = join_lines(lines, *start, *end);
    return out;
}

std::vector<RfcParagraph> split_paragraphs(std::string_view body) {
    std::vector<RfcParagraph> out;
    std::vector<std::pair<std::size_t, std::string>> stack;
    std::vector<std::string_view> block;

    auto flush = [&] {
        std::size_t i = 0;
        for (; i < block.size() && is_heading_line(block[i]); ++i) {
            auto depth = heading_depth(block[i]);
            while (!stack.empty() && stack.back().first >= depth) stack.pop_back();
            stack.emplace_back(depth, detail::collapse_ws(block[i]));
        }
        if (i < block.size()) {
            std::size_t indent = std::string_view::npos;
            for (std::size_t k = i; k < block.size(); ++k) {
                auto pos = block[k].find_first_not_of(" \t");
                if (pos != std::string_view::npos) indent = std::min(indent, pos);
            }
            RfcParagraph p;
            for (const auto& [d, h] : stack) p.chapter_path.push_back(h);
            for (std::size_t k = i; k < block.size(); ++k) {
                auto line = block[k].size() > indent ? block[k].substr(indent) : std::string_view{};
                while (!line.empty() && detail::is_space(line.back())) line.remove_suffix(1);
                if (!p.text.empty()) p.text.push_back('\n');
                p.text.append(line);
            }
            out.push_back(std::move(p));
        }
        block.clear();
    };

    for (auto line : detail::split_lines(body)) {
        if (blank(line)) {
            if (!block.empty()) flush();
            continue;
        }
        block.push_back(line);
    }
    if (!block.empty()) flush();
    return out;
}

std::string paragraph_prompt_text(const RfcParagraph& p) {
    std::string s;
    for (std::size_t i = 0; i < p.chapter_path.size(); ++i) {
        if (i) s += " > ";
        s += p.chapter_path[i];
    }
    if (!s.empty()) s += ":\n";
    return s + p.text;
}

std::string describe_fields(const Message& msg) {
    std::string s;
    visit(msg, [&](const FieldPath& path, const FieldNode& node) {
        s += path.str() + " = " + describe_value(node) + "\n";
    });
    return s;
}

bool field_matches_paths(std::string_view field, const std::vector<FieldPath>& paths) {
    auto f = indices_to_wildcard(detail::trim(field));
    if (f.empty()) return false;
    auto below = [](const std::string& longer, const std::string& base) {
        return longer.size() > base.size() && longer.starts_with(base) &&
               (longer[base.size()] == '.' || longer[base.size()] == '[');
    };
    std::set<std::string> all;
    for (const auto& p : paths) all.insert(indices_to_wildcard(p.str()));
    for (const auto& s : all) {
        if (s == f || below(s, f)) return true;
        // A dotted extension names something inside a sequence element or a
        // leaf value; named composites list all their children already.
        if (below(f, s) && (s.back() == ']' || std::none_of(all.begin(), all.end(), [&](const std::string& o) {
                                return below(o, s);
                            })))
            return true;
    }
    return false;
}

std::vector<SpecificationRequirement> identify_specs(LlmGateway& gw, const RfcParagraph& para,
                                                     const MessageTypeList& types,
                                                     const Provenance& where,
                                                     std::vector<std::string>* warnings) {
    ChatRequest req{"spec_identify",
                    Json{{"text", paragraph_prompt_text(para)}, {"message_type_list", types.names()}},
                    {}};
    auto arr = gw.ask(req, "spec_requirements");
    std::vector<SpecificationRequirement> out;
    for (const auto& item : arr) {
        auto wanted = fold(item["message_type"].get<std::string>());
        const MessageTypeEntry* hit = nullptr;
        for (const auto& e : types.entries)
            if (fold(e.name) == wanted) hit = &e;
        if (!hit) {
            if (warnings)
                warnings->push_back("message type '" + item["message_type"].get<std::string>() +
                                    "' is not in the configured list; requirement dropped");
            continue;
        }
        SpecificationRequirement r;
        r.protocol = hit->protocol;
        r.message_type = hit->name;
        r.content = std::string(detail::trim(item["content"].get<std::string>()));
        r.provenance = where;
        out.push_back(std::move(r));
    }
    return out;
}

SemanticRule complete_rule(LlmGateway& gw, const SpecificationRequirement& req, const Message* seed,
                           std::vector<std::string>* warnings) {
    Json requirement{{"protocol", to_string(req.protocol)},
                     {"message_type", req.message_type},
                     {"content", req.content}};
    std::string structure = seed ? describe_fields(*seed) : std::string("(no seed message available)\n");
    auto obj = gw.ask(ChatRequest{"rule_complete",
                                  Json{{"specification_requirement", requirement},
                                       {"message_structure", structure}},
                                  {}},
                      "semantic_rule");
    SemanticRule r;
    r.protocol = req.protocol;
    r.message_type = req.message_type;
    r.field = std::string(detail::trim(obj["field"].get<std::string>()));
    r.construction = role_rule_from_json(obj["construction"]);
    r.processing = role_rule_from_json(obj["processing"]);
    r.requirement = req.content;
    r.provenance = req.provenance;
    r.testable = seed != nullptr;
    if (seed) {
        r.field_in_seed = field_matches_paths(r.field, field_paths(*seed));
        if (!r.field_in_seed && warnings)
            warnings->push_back("FieldNotInSeed: '" + r.field + "' matches no path of the " +
                                req.message_type + " seed");
    } else {
        r.field_in_seed = false;
    }
    return r;
}

Json to_json(const SpecificationRequirement& r) {
    return Json{{"protocol", to_string(r.protocol)},
                {"message_type", r.message_type},
                {"content", r.content},
                {"provenance", provenance_json(r.provenance)}};
}

Json to_json(const SemanticRule& r) {
    return Json{{"id", r.id},
                {"protocol", to_string(r.protocol)},
                {"message_type", r.message_type},
                {"field", r.field},
                {"construction", role_rule_json(r.construction)},
                {"processing", role_rule_json(r.processing)},
                {"testable", r.testable},
                {"field_in_seed", r.field_in_seed},
                {"requirement", r.requirement},
                {"provenance", provenance_json(r.provenance)}};
}

SemanticRule rule_from_json(const Json& j) {
    try {
        SemanticRule r;
        r.id = j.value("id", "");
        r.protocol = protocol_from_string(j.at("protocol").get<std::string>());
        r.message_type = j.at("message_type").get<std::string>();
        r.field = j.at("field").get<std::string>();
        r.construction = role_rule_from_json(j.at("construction"));
        r.processing = role_rule_from_json(j.at("processing"));
        r.testable = j.value("testable", true);
        r.field_in_seed = j.value("field_in_seed", true);
        r.requirement = j.value("requirement", "");
        if (j.contains("provenance")) r.provenance = provenance_from_json(j["provenance"]);
        return r;
    } catch (const Json::exception& e) {
        throw SchemaViolation(std::string("malformed rule: ") + e.what());
    }
}

Json rules_document(const std::vector<SemanticRule>& rules, const std::string& config_hash) {
    Json arr = Json::array();
    for (const auto& r : rules) arr.push_back(to_json(r));
    return Json{{"schema_version", 1}, {"config_hash", config_hash}, {"rules", std::move(arr)}};
}

std::vector<SemanticRule> rules_from_document(const Json& doc) {
    const Json& arr = doc.is_object() && doc.contains("rules") ? doc["rules"] : doc;
    if (!arr.is_array()) throw SchemaViolation("rules file must hold an array of rules");
    std::vector<SemanticRule> out;
    for (const auto& j : arr) out.push_back(rule_from_json(j));
    return out;
}

Json to_json(const SkippedUnit& s) {
    return Json{{"unit", s.unit}, {"stage", s.stage}, {"error", s.error_kind}, {"reason", s.reason}};
}

RuleBuildReport build_rules(LlmGateway& gw, std::string_view rfc_text, const MessageTypeList& types,
                            const SeedCorpus& corpus, const RuleBuildOptions& opts) {
    if (types.entries.empty()) throw ConfigError("the message-type list is empty");
    RuleBuildReport report;
    auto cleaned = clean_document(rfc_text);
    report.warnings = cleaned.warnings;
    auto paras = split_paragraphs(cleaned.body);
    report.paragraphs_total = paras.size();

    struct Unit {
        std::vector<SpecificationRequirement> reqs;
        std::vector<std::optional<SemanticRule>> rules;
        std::vector<SkippedUnit> skipped;
        std::vector<std::string> warnings;
        bool processed = false;
    };
    std::vector<Unit> units(paras.size());

    auto seed_of = [&](const std::string& type) -> const Message* {
        for (const auto& e : corpus.entries)
            if (e.message_type == type) return &e.seed;
        return nullptr;
    };

    detail::parallel_for(paras.size(), opts.workers, [&](std::size_t i) {
        auto& u = units[i];
        Provenance where{opts.rfc_id, paras[i].chapter_path, i};
        auto unit_name = opts.rfc_id + " paragraph " + std::to_string(i);
        try {
            u.reqs = identify_specs(gw, paras[i], types, where, &u.warnings);
        } catch (const Error& e) {
            u.skipped.push_back({unit_name, "identify_specs", e.kind(), e.what()});
            u.processed = true;
            return;
        }
        u.processed = true;
        u.rules.resize(u.reqs.size());
        for (std::size_t k = 0; k < u.reqs.size(); ++k) {
            try {
                u.rules[k] = complete_rule(gw, u.reqs[k], seed_of(u.reqs[k].message_type), &u.warnings);
            } catch (const Error& e) {
                u.skipped.push_back({unit_name + " requirement " + std::to_string(k), "complete_rule",
                                     e.kind(), e.what()});
            }
        }
    });

    std::size_t n = 0;
    for (auto& u : units) {
        if (u.processed) ++report.paragraphs_processed;
        for (auto& r : u.reqs) report.requirements.push_back(r);
        for (auto& r : u.rules) {
            if (!r) continue;
            char id[16];
            std::snprintf(id, sizeof id, ".R%03zu", ++n);
            r->id = opts.rfc_id + id;
            report.rules.push_back(std::move(*r));
        }
        for (auto& s : u.skipped) report.skipped.push_back(std::move(s));
        for (auto& w : u.warnings) report.warnings.push_back(std::move(w));
    }
    return report;
}

}  // namespace semfuzz

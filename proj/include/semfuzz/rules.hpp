// SPDX-License-Identifier: Apache-2.0
//
// RFC text to semantic rules: clean the document, split it into
// chapter-pathed paragraphs, ask the model for the requirements each
// paragraph states and complete every requirement into a rule.
#pragma once

#include <string>
#include <vector>

#include "semfuzz/llm.hpp"
#include "semfuzz/message.hpp"
#include "semfuzz/seeds.hpp"

namespace semfuzz {

struct CleanedDocument {
    std::string body;
    /// False when the table of contents or the References heading is missing;
    /// the body is then the whole (page-stripped) text.
    bool structure_found = true;
    std::vector<std::string> warnings;
};

CleanedDocument clean_document(std::string_view rfc_text);

struct RfcParagraph {
    std::vector<std::string> chapter_path;
    std::string text;
};

/// Matches "^\d+(\.\d+)*\.?\s+\S" at column 0.
bool is_heading_line(std::string_view line);
std::vector<RfcParagraph> split_paragraphs(std::string_view body);

/// "4. A > 4.1. B: text", the form paragraphs are shown to the model in.
std::string paragraph_prompt_text(const RfcParagraph& p);

struct Provenance {
    std::string rfc;
    std::vector<std::string> chapter_path;
    std::size_t paragraph = 0;
};

struct SpecificationRequirement {
    Protocol protocol = Protocol::Dns;
    std::string message_type;
    std::string content;
    Provenance provenance;
};

struct RoleRule {
    std::string role;  // "client" | "server"
    std::string content;
    bool inferred = false;
};

struct SemanticRule {
    std::string id;
    Protocol protocol = Protocol::Dns;
    std::string message_type;
    std::string field;
    RoleRule construction;
    RoleRule processing;
    /// False when no seed of the message type exists.
    bool testable = true;
    /// False when `field` names no path of the seed (or a descendant of one).
    bool field_in_seed = true;
    std::string requirement;
    Provenance provenance;
};

Json to_json(const SpecificationRequirement& r);
Json to_json(const SemanticRule& r);
SemanticRule rule_from_json(const Json& j);

/// {"schema_version":1, "config_hash":..., "rules":[...]}; a bare array is
/// accepted on load.
Json rules_document(const std::vector<SemanticRule>& rules, const std::string& config_hash);
std::vector<SemanticRule> rules_from_document(const Json& doc);

/// One line per node: `path = value`, the structure shown to the model.
std::string describe_fields(const Message& msg);

/// True when `field` (possibly with [*]) equals a seed path, or extends or
/// contains one.
bool field_matches_paths(std::string_view field, const std::vector<FieldPath>& paths);

/// Message types outside L are dropped with a warning; spelling is
/// normalised to L's entry. Throws what the gateway throws.
std::vector<SpecificationRequirement> identify_specs(LlmGateway& gw, const RfcParagraph& para,
                                                     const MessageTypeList& types,
                                                     const Provenance& where,
                                                     std::vector<std::string>* warnings = nullptr);

/// `seed` may be null (no seed for the type): the rule is then untestable.
SemanticRule complete_rule(LlmGateway& gw, const SpecificationRequirement& req, const Message* seed,
                           std::vector<std::string>* warnings = nullptr);

struct SkippedUnit {
    std::string unit;
    std::string stage;
    std::string error_kind;
    std::string reason;
};

Json to_json(const SkippedUnit& s);

struct RuleBuildOptions {
    std::string rfc_id = "rfc";
    int workers = 4;
};

struct RuleBuildReport {
    std::vector<SemanticRule> rules;
    std::vector<SpecificationRequirement> requirements;
    std::size_t paragraphs_total = 0;
    std::size_t paragraphs_processed = 0;
    std::vector<SkippedUnit> skipped;
    std::vector<std::string> warnings;
};

/// Rule ids are "<rfc_id>.R<nnn>" in (paragraph, requirement) order.
RuleBuildReport build_rules(LlmGateway& gw, std::string_view rfc_text, const MessageTypeList& types,
                            const SeedCorpus& corpus, const RuleBuildOptions& opts = {});

}  // namespace semfuzz

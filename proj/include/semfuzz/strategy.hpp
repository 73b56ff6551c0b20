// SPDX-License-Identifier: Apache-2.0
//
// Mutation strategies: how to violate one construction rule, and which of the
// two response classes a conforming receiver gives.
#pragma once

#include <string>
#include <vector>

#include "semfuzz/llm.hpp"
#include "semfuzz/rules.hpp"

namespace semfuzz {

enum class FeedbackClass { Normal, Error };

std::string_view to_string(FeedbackClass c) noexcept;
/// "Normal", "Error" and the model's free-text phrasings ("Error feedback",
/// "alert", "no response", "200 OK", "handshake proceeds", ...). Throws
/// SchemaViolation for phrases that map to neither or both classes.
FeedbackClass feedback_from_text(std::string_view phrase);

struct MutationStrategy {
    std::string id;
    std::string rule_id;
    Protocol protocol = Protocol::Dns;
    std::string message_type;
    std::string field;
    std::string description;
    FeedbackClass expected = FeedbackClass::Error;
    /// The rule's construction role: who sends the mutated message.
    std::string sender_role = "client";
};

Json to_json(const MutationStrategy& s);
MutationStrategy strategy_from_json(const Json& j);
Json strategies_document(const std::vector<MutationStrategy>& s, const std::string& config_hash);
std::vector<MutationStrategy> strategies_from_document(const Json& doc);

/// Ids are "<rule id>.M<k>"; at most `cap` strategies are kept. Throws
/// SchemaViolation and what the gateway throws.
std::vector<MutationStrategy> gen_strategies(LlmGateway& gw, const SemanticRule& rule,
                                             std::size_t cap = 5,
                                             std::vector<std::string>* warnings = nullptr);

struct StrategyOptions {
    std::size_t cap = 5;
    int workers = 4;
};

struct StrategyBuildReport {
    std::vector<MutationStrategy> strategies;
    std::vector<SkippedUnit> skipped;
    std::vector<std::string> warnings;
};

StrategyBuildReport build_strategies(LlmGateway& gw, const std::vector<SemanticRule>& rules,
                                     const StrategyOptions& opts = {});

}  // namespace semfuzz

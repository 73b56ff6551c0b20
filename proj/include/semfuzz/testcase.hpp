// SPDX-License-Identifier: Apache-2.0
//
// Action sequences and their deterministic application to seed messages.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "semfuzz/codec.hpp"
#include "semfuzz/seeds.hpp"
#include "semfuzz/strategy.hpp"

namespace semfuzz {

struct Action {
    enum class Kind { Add, Remove, Update };
    Kind kind = Kind::Update;
    /// Update/Remove: the field; Add: the parent.
    FieldPath target;
    std::optional<std::size_t> position;  // Add
    std::optional<FieldNode> new_field;   // Add
    /// Update. Absent: recompute (derived fields only). A bare JSON scalar is
    /// converted to the target's kind when applied.
    std::optional<Json> new_value;
    bool freeze_derived = false;
};

std::string_view to_string(Action::Kind k) noexcept;
/// Throws SchemaViolation (including unparsable paths).
Action action_from_json(const Json& j);
Json to_json(const Action& a);

struct ActionSequence {
    std::string strategy_id;
    std::vector<Action> actions;
};

Json to_json(const ActionSequence& s);
ActionSequence action_sequence_from_json(const Json& j, const std::string& strategy_id = "");

struct CaseError {
    std::string kind;
    std::string what;
    std::optional<std::size_t> action;
};

struct TestCase {
    std::string case_id;
    std::string strategy_id;
    std::string rule_id;
    Protocol protocol = Protocol::Dns;
    std::string message_type;
    std::string sender_role = "client";
    FeedbackClass expected = FeedbackClass::Error;
    std::string seed_file;
    ActionSequence actions;
    Message message;
    WireBytes wire;
    /// The unmutated seed; responder runs use it to build the triggering request.
    WireBytes seed_wire;
    bool valid = false;
    std::optional<CaseError> error;
    /// Paths whose derived values were frozen by the sequence.
    std::vector<std::string> frozen;
};

/// Converts a model-supplied value to a FieldValue shaped like `like`:
/// typed objects pass through value_from_json, bare strings become text (or
/// bytes from hex for bytes fields), bare numbers become uints of the same
/// width. Throws TypeMismatch.
FieldValue coerce_value(const Json& v, const FieldNode& like);

/// Applies the sequence in order, then repairs derived fields (frozen ones
/// keep their value) and encodes. Errors leave valid=false with the detail;
/// the seed is never modified.
TestCase apply_actions(const Message& seed, const ActionSequence& seq);

/// Targets must parse; targets naming no seed path (or child of one) are
/// reported through `warnings` (TargetUnknown). Throws SchemaViolation and what
/// the gateway throws.
ActionSequence gen_actions(LlmGateway& gw, const MutationStrategy& strategy, const Message& seed,
                           std::vector<std::string>* warnings = nullptr);

struct CaseOptions {
    int workers = 4;
};

struct CaseBatch {
    std::vector<TestCase> cases;
    std::vector<SkippedUnit> skipped;
    std::vector<std::string> warnings;
    /// |valid| / |cases|; 0 when no case was produced.
    double accuracy = 0.0;
};

/// One case per strategy, on the first seed of the strategy's message type.
CaseBatch gen_cases(LlmGateway& gw, const std::vector<MutationStrategy>& strategies,
                    const SeedCorpus& corpus, const CaseOptions& opts = {});

Json to_json(const TestCase& c);
TestCase case_from_json(const Json& j, const WireBytes& wire);

/// Known-good messages sent as liveness probes, keyed "<PROTOCOL>/<role>".
using ProbeSet = std::map<std::string, WireBytes>;
ProbeSet default_probes(const SeedCorpus& corpus);

/// <dir>/<case_id>.json, <dir>/<case_id>.bin and <dir>/manifest.json.
void write_cases_dir(const std::string& dir, const CaseBatch& batch, const ProbeSet& probes,
                     const std::string& config_hash);

struct CasesDir {
    std::vector<TestCase> cases;
    ProbeSet probes;
    Json manifest;
};

CasesDir load_cases_dir(const std::string& dir);

}  // namespace semfuzz

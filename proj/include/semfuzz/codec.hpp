// SPDX-License-Identifier: Apache-2.0
//
// Wire codecs for DNS, HTTP/1.1 and a TLS 1.3 record/ClientHello/ServerHello/
// Alert subset. Decoded messages flag length and count fields as derived; the
// codec recomputes them before encoding unless told otherwise.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "semfuzz/message.hpp"

namespace semfuzz {

using WireBytes = Bytes;

enum class Recompute {
    /// Sum of the encoded lengths of the source nodes.
    LengthOf,
    /// Number of children of the source node.
    CountOf,
    Fixed,
};

/// How one derived field is recomputed. Sources are paths relative to the
/// target's parent, `/`-prefixed paths are relative to the root, and two
/// tokens name sibling ranges: `~following` (siblings after the target) and
/// `~parent_following` (siblings after the target's parent).
struct DerivedRule {
    FieldPath target;
    Recompute function = Recompute::LengthOf;
    std::vector<std::string> sources;
    std::uint64_t fixed_value = 0;
    bool case_insensitive = false;
};

struct CodecSchema {
    Protocol protocol = Protocol::Dns;
    std::vector<DerivedRule> derived_rules;
    /// Message types this codec decodes; the first entries are the wire
    /// shapes, the rest are configured type-list names that share them.
    std::vector<std::string> message_types;
};

const CodecSchema& schema_for(Protocol p);

/// Throws MalformedWire. `message_type` is recorded on the result; the wire
/// shape (query/response, request/response, record content) is read from the
/// bytes.
Message decode(Protocol protocol, std::string_view message_type,
               std::span<const std::uint8_t> bytes);

struct EncodeOptions {
    /// Recompute derived fields first. Disable to write frozen values as-is.
    bool repair = true;
};

/// Throws Unencodable or NoRuleForDerivedField.
WireBytes encode(const Message& msg, EncodeOptions opts = {});

/// Every derived node is set to its recompute rule's value; other nodes are
/// untouched. Throws NoRuleForDerivedField or Unencodable.
Message repair_derived(const Message& msg);

/// Marks the uint nodes of `subtree` (a node of msg) that a recompute rule
/// covers as derived, so inserted structures get their lengths and counts
/// filled in like the seed's own.
Message infer_derived(const Message& msg, const FieldNode& subtree);

/// Wire extent of every node as laid out by encoding `msg` without repair.
struct EncodedMessage {
    WireBytes wire;
    std::unordered_map<const FieldNode*, WireMeta> extents;
};
EncodedMessage encode_with_extents(const Message& msg);

/// TLS extension labels as used in ClientHello message-type names
/// ("Key Share", "Pre Shared Key", ...). GREASE code points are "Reserved".
std::string tls_extension_label(std::uint16_t code);
std::optional<std::uint16_t> tls_extension_code(std::string_view label);
bool tls_is_grease(std::uint16_t code) noexcept;

/// .hex (hex dump) or .bin (raw) fixture file, chosen by extension.
WireBytes load_wire_file(const std::string& path);

}  // namespace semfuzz

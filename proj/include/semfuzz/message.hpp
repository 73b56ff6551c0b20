// SPDX-License-Identifier: Apache-2.0
//
// Structured protocol messages: ordered field trees addressed by dotted paths.
//
// Path grammar:  segment ( '.' segment )*
//                segment := name? ( '[' (digits | '*') ']' )*
// A name selects the unique child carrying that name; every bracketed index
// then descends into the selected node's children by position (0-based).
// `handshake.extensions[1]` is therefore the second child of `extensions`.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

namespace semfuzz {

using Bytes = std::vector<std::uint8_t>;
using Json = nlohmann::ordered_json;

enum class Protocol { Dns, Http1, Tls13, Ipv6 };

std::string_view to_string(Protocol p) noexcept;
/// Accepts canonical names (DNS, HTTP1, TLS13, IPV6) and common spellings
/// such as "HTTP/1.1" or "TLS 1.3". Throws InvalidMessage otherwise.
Protocol protocol_from_string(std::string_view s);

struct FieldNode;

struct UInt {
    std::uint64_t value = 0;
    unsigned bits = 8;

    friend bool operator==(const UInt&, const UInt&) = default;
};

struct Composite {
    std::vector<FieldNode> children;
    /// Children are homogeneous elements addressed by position.
    bool sequence = false;
};

class FieldValue {
public:
    enum class Kind { Bytes, Text, UInt, Composite };

    FieldValue();
    static FieldValue bytes(Bytes b);
    static FieldValue text(std::string s);
    /// Throws TypeMismatch when `value` does not fit `bits` or bits is not in 1..64.
    static FieldValue uint(std::uint64_t value, unsigned bits);
    static FieldValue composite(std::vector<FieldNode> children, bool sequence = false);

    Kind kind() const noexcept { return static_cast<Kind>(v_.index()); }
    bool is_composite() const noexcept { return kind() == Kind::Composite; }

    const Bytes& as_bytes() const;
    const std::string& as_text() const;
    const UInt& as_uint() const;
    const Composite& as_composite() const;
    Composite& as_composite();

    friend bool operator==(const FieldValue& a, const FieldValue& b);

private:
    std::variant<Bytes, std::string, UInt, Composite> v_;
};

std::string_view to_string(FieldValue::Kind k) noexcept;

struct WireMeta {
    std::size_t offset = 0;
    std::size_t length = 0;
};

struct FieldNode {
    std::string name;
    FieldValue value;
    bool derived = false;
    std::optional<WireMeta> meta;

    FieldNode() = default;
    FieldNode(std::string n, FieldValue v, bool d = false)
        : name(std::move(n)), value(std::move(v)), derived(d) {}

    /// Structural equality; `meta` is ignored.
    friend bool operator==(const FieldNode& a, const FieldNode& b);
};

bool operator==(const Composite& a, const Composite& b);

struct PathIndex {
    std::size_t value = 0;
    bool wildcard = false;

    friend bool operator==(const PathIndex&, const PathIndex&) = default;
};

struct PathSegment {
    std::string name;
    std::vector<PathIndex> indices;

    friend bool operator==(const PathSegment&, const PathSegment&) = default;
};

class FieldPath {
public:
    FieldPath() = default;
    explicit FieldPath(std::vector<PathSegment> segments);

    /// Throws InvalidPath.
    static FieldPath parse(std::string_view text);

    std::string str() const;
    const std::vector<PathSegment>& segments() const noexcept { return segments_; }
    bool empty() const noexcept { return segments_.empty(); }
    bool has_wildcard() const noexcept;

    FieldPath child(std::string name) const;
    FieldPath at(std::size_t position) const;
    /// Path with the final addressing step (last index, else last segment) removed.
    FieldPath parent() const;

    /// Segment-wise match where wildcard indices in *this match any index.
    bool matches(const FieldPath& concrete, bool case_insensitive = false) const;
    /// True when *this addresses `other` or one of its descendants.
    bool is_within(const FieldPath& other) const;

    friend bool operator==(const FieldPath&, const FieldPath&) = default;

private:
    std::vector<PathSegment> segments_;
};

struct Message {
    Protocol protocol = Protocol::Dns;
    std::string message_type;
    FieldNode root;

    friend bool operator==(const Message&, const Message&) = default;
};

/// Checks node names, derived-field kinds and uint widths across the tree.
/// Throws InvalidMessage.
void validate(const Message& msg);

/// Depth-first, document-order enumeration of every node path (root excluded).
std::vector<FieldPath> field_paths(const Message& msg);

/// Visits every node below the root in document order with its canonical path.
void visit(const Message& msg,
           const std::function<void(const FieldPath&, const FieldNode&)>& fn);

const FieldNode& get(const Message& msg, const FieldPath& path);
bool contains(const Message& msg, const FieldPath& path);

Message insert_at(const Message& msg, const FieldPath& parent,
                  std::optional<std::size_t> position, FieldNode node);
Message remove_at(const Message& msg, const FieldPath& path);
Message update_at(const Message& msg, const FieldPath& path, FieldValue value);
/// Flags or unflags a field as derived. Unflagging freezes its current value.
Message set_derived(const Message& msg, const FieldPath& path, bool derived);

void clear_meta(FieldNode& node);

/// One level of the ancestry of a node: its name and position in its parent.
struct ChainStep {
    std::string_view name;
    std::size_t position = 0;
};

/// Matches a pattern path against the ancestry chain of a node (root child
/// first). Names consume one level each, indices consume one further level
/// each. A segment name of "*" matches any name.
bool pattern_matches_chain(const FieldPath& pattern, std::span<const ChainStep> chain,
                           bool case_insensitive = false);

// Canonical JSON interchange.
Json to_json(const FieldValue& v);
Json to_json(const FieldNode& n);
Json to_json(const Message& m);
FieldValue value_from_json(const Json& j);
FieldNode node_from_json(const Json& j);
Message message_from_json(const Json& j);

}  // namespace semfuzz

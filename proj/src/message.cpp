// SPDX-License-Identifier: Apache-2.0
#include "semfuzz/message.hpp"

#include <algorithm>
#include <charconv>

#include "semfuzz/errors.hpp"
#include "semfuzz/hex.hpp"
#include "strutil.hpp"

namespace semfuzz {

std::string_view to_string(Protocol p) noexcept {
    switch (p) {
        case Protocol::Dns: return "DNS";
        case Protocol::Http1: return "HTTP1";
        case Protocol::Tls13: return "TLS13";
        case Protocol::Ipv6: return "IPV6";
    }
    return "?";
}

Protocol protocol_from_string(std::string_view s) {
    std::string key;
    for (char c : s) {
        if (c == ' ' || c == '/' || c == '.' || c == '-' || c == '_') continue;
        key.push_back(detail::ascii_lower(c));
    }
    if (key == "dns") return Protocol::Dns;
    if (key == "http" || key == "http1" || key == "http11") return Protocol::Http1;
    if (key == "tls" || key == "tls13") return Protocol::Tls13;
    if (key == "ipv6" || key == "ipv6meta") return Protocol::Ipv6;
    throw InvalidMessage("unknown protocol '" + std::string(s) + "'");
}

std::string_view to_string(FieldValue::Kind k) noexcept {
    switch (k) {
        case FieldValue::Kind::Bytes: return "bytes";
        case FieldValue::Kind::Text: return "text";
        case FieldValue::Kind::UInt: return "uint";
        case FieldValue::Kind::Composite: return "composite";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// FieldValue

FieldValue::FieldValue() : v_(Bytes{}) {}

FieldValue FieldValue::bytes(Bytes b) {
    FieldValue v;
    v.v_ = std::move(b);
    return v;
}

FieldValue FieldValue::text(std::string s) {
    FieldValue v;
    v.v_ = std::move(s);
    return v;
}

FieldValue FieldValue::uint(std::uint64_t value, unsigned bits) {
    if (bits == 0 || bits > 64)
        throw TypeMismatch("uint width " + std::to_string(bits) + " outside 1..64");
    if (bits < 64 && value >> bits)
        throw TypeMismatch("value " + std::to_string(value) + " does not fit " +
                           std::to_string(bits) + " bits");
    FieldValue v;
    v.v_ = UInt{value, bits};
    return v;
}

FieldValue FieldValue::composite(std::vector<FieldNode> children, bool sequence) {
    FieldValue v;
    v.v_ = Composite{std::move(children), sequence};
    return v;
}

namespace {
[[noreturn]] void wrong_kind(FieldValue::Kind want, FieldValue::Kind have) {
    throw TypeMismatch("expected " + std::string(to_string(want)) + " value, have " +
                       std::string(to_string(have)));
}
}  // namespace

const Bytes& FieldValue::as_bytes() const {
    if (auto* p = std::get_if<Bytes>(&v_)) return *p;
    wrong_kind(Kind::Bytes, kind());
}
const std::string& FieldValue::as_text() const {
    if (auto* p = std::get_if<std::string>(&v_)) return *p;
    wrong_kind(Kind::Text, kind());
}
const UInt& FieldValue::as_uint() const {
    if (auto* p = std::get_if<UInt>(&v_)) return *p;
    wrong_kind(Kind::UInt, kind());
}
const Composite& FieldValue::as_composite() const {
    if (auto* p = std::get_if<Composite>(&v_)) return *p;
    wrong_kind(Kind::Composite, kind());
}
Composite& FieldValue::as_composite() {
    if (auto* p = std::get_if<Composite>(&v_)) return *p;
    wrong_kind(Kind::Composite, kind());
}

bool operator==(const Composite& a, const Composite& b) {
    return a.sequence == b.sequence && a.children == b.children;
}

bool operator==(const FieldValue& a, const FieldValue& b) { return a.v_ == b.v_; }

bool operator==(const FieldNode& a, const FieldNode& b) {
    return a.name == b.name && a.derived == b.derived && a.value == b.value;
}

// ---------------------------------------------------------------------------
// FieldPath

namespace {

bool valid_name_char(char c) { return c != '.' && c != '[' && c != ']'; }

bool names_equal(std::string_view a, std::string_view b, bool ci) {
    return ci ? detail::iequals(a, b) : a == b;
}

// A path flattened into one addressing step per tree level.
struct Step {
    bool is_index = false;
    std::string_view name;
    PathIndex index;
};

std::vector<Step> flatten(const FieldPath& p) {
    std::vector<Step> steps;
    for (const auto& seg : p.segments()) {
        if (!seg.name.empty()) steps.push_back(Step{false, seg.name, {}});
        for (const auto& idx : seg.indices) steps.push_back(Step{true, {}, idx});
    }
    return steps;
}

bool step_matches(const Step& pattern, const Step& concrete, bool ci) {
    if (pattern.is_index != concrete.is_index) return false;
    if (!pattern.is_index) return names_equal(pattern.name, concrete.name, ci);
    return pattern.index.wildcard || pattern.index == concrete.index;
}

}  // namespace

FieldPath::FieldPath(std::vector<PathSegment> segments) : segments_(std::move(segments)) {}

FieldPath FieldPath::parse(std::string_view text) {
    std::vector<PathSegment> segs;
    if (text.empty()) return FieldPath{};
    std::size_t i = 0;
    auto fail = [&](const std::string& why) -> FieldPath {
        throw InvalidPath("bad path '" + std::string(text) + "': " + why);
    };
    while (true) {
        PathSegment seg;
        while (i < text.size() && valid_name_char(text[i])) seg.name.push_back(text[i++]);
        while (i < text.size() && text[i] == '[') {
            auto close = text.find(']', i);
            if (close == std::string_view::npos) return fail("unterminated '['");
            auto inner = text.substr(i + 1, close - i - 1);
            PathIndex idx;
            if (inner == "*") {
                idx.wildcard = true;
            } else {
                if (inner.empty()) return fail("empty index");
                auto [ptr, ec] = std::from_chars(inner.data(), inner.data() + inner.size(), idx.value);
                if (ec != std::errc{} || ptr != inner.data() + inner.size())
                    return fail("index '" + std::string(inner) + "' is not a number");
            }
            seg.indices.push_back(idx);
            i = close + 1;
        }
        if (seg.name.empty() && (seg.indices.empty() || !segs.empty()))
            return fail("empty segment");
        segs.push_back(std::move(seg));
        if (i == text.size()) break;
        if (text[i] != '.') return fail(std::string("unexpected '") + text[i] + "'");
        ++i;
        if (i == text.size()) return fail("trailing '.'");
    }
    return FieldPath{std::move(segs)};
}

std::string FieldPath::str() const {
    std::string out;
    for (std::size_t s = 0; s < segments_.size(); ++s) {
        if (s) out.push_back('.');
        out += segments_[s].name;
        for (const auto& idx : segments_[s].indices) {
            out.push_back('[');
            out += idx.wildcard ? std::string("*") : std::to_string(idx.value);
            out.push_back(']');
        }
    }
    return out;
}

bool FieldPath::has_wildcard() const noexcept {
    for (const auto& seg : segments_)
        for (const auto& idx : seg.indices)
            if (idx.wildcard) return true;
    return false;
}

FieldPath FieldPath::child(std::string name) const {
    auto segs = segments_;
    segs.push_back(PathSegment{std::move(name), {}});
    return FieldPath{std::move(segs)};
}

FieldPath FieldPath::at(std::size_t position) const {
    auto segs = segments_;
    if (segs.empty()) segs.push_back(PathSegment{});
    segs.back().indices.push_back(PathIndex{position, false});
    return FieldPath{std::move(segs)};
}

FieldPath FieldPath::parent() const {
    auto segs = segments_;
    if (segs.empty()) return FieldPath{};
    auto& last = segs.back();
    if (!last.indices.empty()) {
        last.indices.pop_back();
        if (last.indices.empty() && last.name.empty()) segs.pop_back();
    } else {
        segs.pop_back();
    }
    return FieldPath{std::move(segs)};
}

bool FieldPath::matches(const FieldPath& concrete, bool case_insensitive) const {
    auto a = flatten(*this);
    auto b = flatten(concrete);
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!step_matches(a[i], b[i], case_insensitive)) return false;
    return true;
}

bool FieldPath::is_within(const FieldPath& other) const {
    auto self = flatten(*this);
    auto pre = flatten(other);
    if (pre.size() > self.size()) return false;
    for (std::size_t i = 0; i < pre.size(); ++i)
        if (!step_matches(pre[i], self[i], false)) return false;
    return true;
}

bool pattern_matches_chain(const FieldPath& pattern, std::span<const ChainStep> chain,
                           bool case_insensitive) {
    auto steps = flatten(pattern);
    if (steps.size() != chain.size()) return false;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const auto& s = steps[i];
        if (s.is_index) {
            if (!s.index.wildcard && s.index.value != chain[i].position) return false;
        } else if (s.name != "*" && !names_equal(s.name, chain[i].name, case_insensitive)) {
            return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Tree navigation

namespace {

template <class Node>
struct Located {
    Node* node = nullptr;
    Node* parent = nullptr;
    std::size_t position = 0;
};

template <class Node>
auto& children_of(Node& n, const FieldPath& path) {
    if (!n.value.is_composite())
        throw PathNotFound("'" + path.str() + "': '" + n.name + "' has no children");
    return n.value.as_composite().children;
}

template <class Node>
Located<Node> locate(Node& root, const FieldPath& path) {
    Located<Node> loc{&root, nullptr, 0};
    for (const auto& seg : path.segments()) {
        if (!seg.name.empty()) {
            auto& kids = children_of(*loc.node, path);
            std::size_t found = kids.size();
            std::size_t hits = 0;
            for (std::size_t i = 0; i < kids.size(); ++i) {
                if (kids[i].name == seg.name) {
                    if (hits == 0) found = i;
                    ++hits;
                }
            }
            if (hits == 0)
                throw PathNotFound("'" + path.str() + "': no field '" + seg.name + "'");
            if (hits > 1)
                throw AmbiguousPath("'" + path.str() + "': " + std::to_string(hits) +
                                    " siblings named '" + seg.name + "'");
            loc = Located<Node>{&kids[found], loc.node, found};
        }
        for (const auto& idx : seg.indices) {
            if (idx.wildcard)
                throw InvalidPath("'" + path.str() + "': wildcard is not addressable");
            auto& kids = children_of(*loc.node, path);
            if (idx.value >= kids.size())
                throw PathNotFound("'" + path.str() + "': index " + std::to_string(idx.value) +
                                   " beyond " + std::to_string(kids.size()) + " children");
            loc = Located<Node>{&kids[idx.value], loc.node, idx.value};
        }
    }
    return loc;
}

void walk(const FieldNode& node, const FieldPath& path,
          const std::function<void(const FieldPath&, const FieldNode&)>& fn) {
    if (!node.value.is_composite()) return;
    const auto& comp = node.value.as_composite();
    for (std::size_t i = 0; i < comp.children.size(); ++i) {
        const auto& child = comp.children[i];
        bool positional = comp.sequence;
        if (!positional) {
            auto same = std::count_if(comp.children.begin(), comp.children.end(),
                                      [&](const FieldNode& c) { return c.name == child.name; });
            positional = same > 1;
        }
        FieldPath cp = positional ? path.at(i) : path.child(child.name);
        fn(cp, child);
        walk(child, cp, fn);
    }
}

void check_node_name(const std::string& name) {
    if (name.empty()) throw InvalidMessage("field name is empty");
    if (!std::all_of(name.begin(), name.end(), valid_name_char))
        throw InvalidMessage("field name '" + name + "' contains a path separator");
}

void validate_node(const FieldNode& n) {
    check_node_name(n.name);
    auto k = n.value.kind();
    if (n.derived && k != FieldValue::Kind::UInt && k != FieldValue::Kind::Bytes)
        throw InvalidMessage("derived field '" + n.name + "' must be uint or bytes");
    if (k == FieldValue::Kind::UInt) {
        const auto& u = n.value.as_uint();
        if (u.bits == 0 || u.bits > 64 || (u.bits < 64 && (u.value >> u.bits)))
            throw InvalidMessage("field '" + n.name + "' value exceeds its width");
    }
    if (k == FieldValue::Kind::Composite)
        for (const auto& c : n.value.as_composite().children) validate_node(c);
}

}  // namespace

void clear_meta(FieldNode& node) {
    node.meta.reset();
    if (node.value.is_composite())
        for (auto& c : node.value.as_composite().children) clear_meta(c);
}

void validate(const Message& msg) {
    if (!msg.root.value.is_composite()) throw InvalidMessage("message root must be composite");
    validate_node(msg.root);
}

void visit(const Message& msg,
           const std::function<void(const FieldPath&, const FieldNode&)>& fn) {
    walk(msg.root, FieldPath{}, fn);
}

std::vector<FieldPath> field_paths(const Message& msg) {
    std::vector<FieldPath> out;
    visit(msg, [&](const FieldPath& p, const FieldNode&) { out.push_back(p); });
    return out;
}

const FieldNode& get(const Message& msg, const FieldPath& path) {
    if (path.empty()) throw InvalidPath("empty path does not address a field");
    return *locate(msg.root, path).node;
}

bool contains(const Message& msg, const FieldPath& path) {
    try {
        get(msg, path);
        return true;
    } catch (const Error&) {
        return false;
    }
}

Message insert_at(const Message& msg, const FieldPath& parent,
                  std::optional<std::size_t> position, FieldNode node) {
    validate_node(node);
    Message out = msg;
    auto loc = locate(out.root, parent);
    if (!loc.node->value.is_composite())
        throw TypeMismatch("'" + parent.str() + "' is not a composite field");
    auto& kids = loc.node->value.as_composite().children;
    std::size_t pos = position.value_or(kids.size());
    if (pos > kids.size())
        throw PositionOutOfRange("position " + std::to_string(pos) + " beyond " +
                                 std::to_string(kids.size()) + " children of '" +
                                 parent.str() + "'");
    kids.insert(kids.begin() + static_cast<std::ptrdiff_t>(pos), std::move(node));
    clear_meta(out.root);
    return out;
}

Message remove_at(const Message& msg, const FieldPath& path) {
    if (path.empty()) throw InvalidPath("cannot remove the message root");
    Message out = msg;
    auto loc = locate(out.root, path);
    auto& kids = loc.parent->value.as_composite().children;
    kids.erase(kids.begin() + static_cast<std::ptrdiff_t>(loc.position));
    clear_meta(out.root);
    return out;
}

Message update_at(const Message& msg, const FieldPath& path, FieldValue value) {
    if (path.empty()) throw InvalidPath("cannot replace the message root");
    Message out = msg;
    auto loc = locate(out.root, path);
    auto& target = *loc.node;
    if (target.value.is_composite() != value.is_composite())
        throw TypeMismatch("cannot update " + std::string(to_string(target.value.kind())) +
                           " field '" + path.str() + "' with a " +
                           std::string(to_string(value.kind())) + " value");
    if (target.derived && value.kind() != FieldValue::Kind::UInt &&
        value.kind() != FieldValue::Kind::Bytes)
        throw TypeMismatch("derived field '" + path.str() + "' accepts only uint or bytes");
    if (value.is_composite())
        for (const auto& c : value.as_composite().children) validate_node(c);
    target.value = std::move(value);
    clear_meta(out.root);
    return out;
}

Message set_derived(const Message& msg, const FieldPath& path, bool derived) {
    if (path.empty()) throw InvalidPath("the message root cannot be derived");
    Message out = msg;
    auto& target = *locate(out.root, path).node;
    auto k = target.value.kind();
    if (derived && k != FieldValue::Kind::UInt && k != FieldValue::Kind::Bytes)
        throw TypeMismatch("derived field '" + path.str() + "' must be uint or bytes");
    target.derived = derived;
    return out;
}

// ---------------------------------------------------------------------------
// JSON

Json to_json(const FieldValue& v) {
    Json j;
    switch (v.kind()) {
        case FieldValue::Kind::Bytes:
            j["kind"] = "bytes";
            j["hex"] = to_hex(v.as_bytes());
            break;
        case FieldValue::Kind::Text:
            j["kind"] = "text";
            j["value"] = v.as_text();
            break;
        case FieldValue::Kind::UInt:
            j["kind"] = "uint";
            j["value"] = v.as_uint().value;
            j["bits"] = v.as_uint().bits;
            break;
        case FieldValue::Kind::Composite: {
            const auto& c = v.as_composite();
            j["kind"] = "composite";
            if (c.sequence) j["sequence"] = true;
            Json kids = Json::array();
            for (const auto& child : c.children) kids.push_back(to_json(child));
            j["children"] = std::move(kids);
            break;
        }
    }
    return j;
}

Json to_json(const FieldNode& n) {
    Json j;
    j["name"] = n.name;
    j["derived"] = n.derived;
    j["value"] = to_json(n.value);
    return j;
}

Json to_json(const Message& m) {
    Json j;
    j["protocol"] = std::string(to_string(m.protocol));
    j["message_type"] = m.message_type;
    j["root"] = to_json(m.root);
    return j;
}

namespace {
const Json& require(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key))
        throw InvalidMessage(std::string("missing key '") + key + "'");
    return j.at(key);
}
}  // namespace

FieldValue value_from_json(const Json& j) {
    const auto& kind = require(j, "kind");
    if (!kind.is_string()) throw InvalidMessage("'kind' must be a string");
    auto k = kind.get<std::string>();
    try {
        if (k == "bytes") {
            Bytes b;
            if (!try_from_hex(require(j, "hex").get<std::string>(), b))
                throw InvalidMessage("bad hex in bytes value");
            return FieldValue::bytes(std::move(b));
        }
        if (k == "text") return FieldValue::text(require(j, "value").get<std::string>());
        if (k == "uint")
            return FieldValue::uint(require(j, "value").get<std::uint64_t>(),
                                    require(j, "bits").get<unsigned>());
        if (k == "composite") {
            std::vector<FieldNode> kids;
            for (const auto& c : require(j, "children")) kids.push_back(node_from_json(c));
            bool seq = j.contains("sequence") && j.at("sequence").get<bool>();
            return FieldValue::composite(std::move(kids), seq);
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidMessage(std::string("bad ") + k + " value: " + e.what());
    } catch (const TypeMismatch& e) {
        throw InvalidMessage(e.what());
    }
    throw InvalidMessage("unknown value kind '" + k + "'");
}

FieldNode node_from_json(const Json& j) {
    FieldNode n;
    try {
        n.name = require(j, "name").get<std::string>();
        n.derived = j.contains("derived") && j.at("derived").get<bool>();
    } catch (const nlohmann::json::exception& e) {
        throw InvalidMessage(std::string("bad field node: ") + e.what());
    }
    n.value = value_from_json(require(j, "value"));
    validate_node(n);
    return n;
}

Message message_from_json(const Json& j) {
    Message m;
    try {
        m.protocol = protocol_from_string(require(j, "protocol").get<std::string>());
        m.message_type = require(j, "message_type").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw InvalidMessage(std::string("bad message: ") + e.what());
    }
    m.root = node_from_json(require(j, "root"));
    validate(m);
    return m;
}

}  // namespace semfuzz

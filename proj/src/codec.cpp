// SPDX-License-Identifier: Apache-2.0
#include "semfuzz/codec.hpp"

#include <fstream>
#include <functional>
#include <iterator>

#include "codec_impl.hpp"
#include "semfuzz/hex.hpp"

namespace semfuzz {

namespace detail {

void serialize_plain(const FieldNode& node, WireWriter& w, std::string_view path_hint) {
    w.begin(node);
    switch (node.value.kind()) {
        case FieldValue::Kind::UInt: {
            const auto& u = node.value.as_uint();
            if (u.bits % 8 != 0)
                throw Unencodable(std::string(path_hint) + "." + node.name + ": " +
                                  std::to_string(u.bits) + "-bit field is not byte aligned");
            w.put_uint(u.value, u.bits / 8);
            break;
        }
        case FieldValue::Kind::Bytes: w.put(node.value.as_bytes()); break;
        case FieldValue::Kind::Text: w.put(node.value.as_text()); break;
        case FieldValue::Kind::Composite:
            for (const auto& c : node.value.as_composite().children) serialize_plain(c, w, node.name);
            break;
    }
    w.end();
}

const FieldNode* find_child(const FieldNode& parent, std::string_view name) {
    if (!parent.value.is_composite()) return nullptr;
    for (const auto& c : parent.value.as_composite().children)
        if (c.name == name) return &c;
    return nullptr;
}

}  // namespace detail

namespace {

using detail::WireWriter;

void serialize(const Message& msg, WireWriter& w) {
    switch (msg.protocol) {
        case Protocol::Dns: detail::serialize_dns(msg, w); return;
        case Protocol::Http1: detail::serialize_http(msg, w); return;
        case Protocol::Tls13: detail::serialize_tls(msg, w); return;
        case Protocol::Ipv6: break;
    }
    throw Unencodable("no wire codec for protocol " + std::string(to_string(msg.protocol)));
}

// Ancestry-aware mutable walk over derived nodes.
struct Frame {
    FieldNode* node;
    std::size_t position;
};

template <class Fn>
void walk_derived(FieldNode& node, std::vector<Frame>& stack, Fn&& fn) {
    if (!node.value.is_composite()) return;
    auto& kids = node.value.as_composite().children;
    for (std::size_t i = 0; i < kids.size(); ++i) {
        stack.push_back(Frame{&kids[i], i});
        if (kids[i].derived) fn(stack);
        walk_derived(kids[i], stack, fn);
        stack.pop_back();
    }
}

std::string chain_path(const std::vector<Frame>& stack, const FieldNode& root) {
    // Render a positional-or-named path for diagnostics.
    FieldPath p;
    const FieldNode* parent = &root;
    for (const auto& f : stack) {
        const auto& comp = parent->value.as_composite();
        std::size_t same = 0;
        for (const auto& c : comp.children) same += c.name == f.node->name;
        p = (comp.sequence || same > 1) ? p.at(f.position) : p.child(f.node->name);
        parent = f.node;
    }
    return p.str();
}

std::vector<const FieldNode*> resolve_sources(const std::string& source, FieldNode& root,
                                              const std::vector<Frame>& stack) {
    std::vector<const FieldNode*> out;
    const FieldNode* parent = stack.size() >= 2 ? stack[stack.size() - 2].node : &root;
    if (source == "~following" || source == "~parent_following") {
        std::size_t depth = source == "~following" ? stack.size() : stack.size() - 1;
        if (depth == 0) return out;
        const FieldNode* container = depth >= 2 ? stack[depth - 2].node : &root;
        std::size_t from = stack[depth - 1].position + 1;
        const auto& kids = container->value.as_composite().children;
        for (std::size_t i = from; i < kids.size(); ++i) out.push_back(&kids[i]);
        return out;
    }
    const FieldNode* base = parent;
    std::string_view rel = source;
    if (!rel.empty() && rel.front() == '/') {
        base = &root;
        rel.remove_prefix(1);
    }
    auto path = FieldPath::parse(rel);
    const FieldNode* cur = base;
    for (const auto& seg : path.segments()) {
        if (!seg.name.empty()) {
            cur = detail::find_child(*cur, seg.name);
            if (!cur) return out;
        }
        for (const auto& idx : seg.indices) {
            if (!cur->value.is_composite()) return out;
            const auto& kids = cur->value.as_composite().children;
            if (idx.value >= kids.size()) return out;
            cur = &kids[idx.value];
        }
    }
    out.push_back(cur);
    return out;
}

const DerivedRule& rule_for(const CodecSchema& schema, const std::vector<Frame>& stack,
                            const FieldNode& root) {
    std::vector<ChainStep> chain;
    chain.reserve(stack.size());
    for (const auto& f : stack) chain.push_back(ChainStep{f.node->name, f.position});
    const DerivedRule* found = nullptr;
    for (const auto& r : schema.derived_rules) {
        if (!pattern_matches_chain(r.target, chain, r.case_insensitive)) continue;
        if (found)
            throw NoRuleForDerivedField("'" + chain_path(stack, root) +
                                        "' matches more than one recompute rule");
        found = &r;
    }
    if (!found) throw NoRuleForDerivedField("'" + chain_path(stack, root) + "'");
    return *found;
}

template <class Fn>
void walk_all(FieldNode& node, std::vector<Frame>& stack, Fn&& fn) {
    if (!node.value.is_composite()) return;
    auto& kids = node.value.as_composite().children;
    for (std::size_t i = 0; i < kids.size(); ++i) {
        stack.push_back(Frame{&kids[i], i});
        fn(stack);
        walk_all(kids[i], stack, fn);
        stack.pop_back();
    }
}

}  // namespace

const CodecSchema& schema_for(Protocol p) {
    switch (p) {
        case Protocol::Dns: return detail::dns_schema();
        case Protocol::Http1: return detail::http_schema();
        case Protocol::Tls13: return detail::tls_schema();
        case Protocol::Ipv6: break;
    }
    static const CodecSchema ipv6{Protocol::Ipv6, {}, {}};
    return ipv6;
}

Message infer_derived(const Message& msg, const FieldNode& subtree) {
    Message out = msg;
    const auto& schema = schema_for(out.protocol);
    const FieldNode* in_msg = &subtree;
    // `subtree` points into msg; find its twin in the copy by position.
    std::vector<std::size_t> trail;
    {
        std::vector<Frame> stack;
        bool found = false;
        walk_all(const_cast<FieldNode&>(msg.root), stack, [&](const std::vector<Frame>& st) {
            if (found || st.back().node != in_msg) return;
            found = true;
            for (const auto& f : st) trail.push_back(f.position);
        });
        if (!found) return out;
    }
    std::vector<Frame> stack;
    FieldNode* cur = &out.root;
    for (auto pos : trail) {
        cur = &cur->value.as_composite().children[pos];
        stack.push_back(Frame{cur, pos});
    }
    auto mark = [&](const std::vector<Frame>& st) {
        FieldNode& n = *st.back().node;
        if (n.derived || n.value.kind() != FieldValue::Kind::UInt) return;
        std::vector<ChainStep> chain;
        for (const auto& f : st) chain.push_back(ChainStep{f.node->name, f.position});
        std::size_t hits = 0;
        for (const auto& r : schema.derived_rules) hits += pattern_matches_chain(r.target, chain, r.case_insensitive);
        if (hits == 1) n.derived = true;
    };
    mark(stack);
    walk_all(*cur, stack, mark);
    return out;
}

EncodedMessage encode_with_extents(const Message& msg) {
    validate(msg);
    WireWriter w;
    serialize(msg, w);
    return w.take();
}

Message repair_derived(const Message& msg) {
    Message out = msg;
    const auto& schema = schema_for(out.protocol);
    // Fixed-width lengths converge after one pass; variable-width renderings
    // (HTTP decimal, chunk hex) may need another.
    for (int pass = 0; pass < 8; ++pass) {
        auto enc = encode_with_extents(out);
        bool changed = false;
        std::vector<Frame> stack;
        walk_derived(out.root, stack, [&](const std::vector<Frame>& st) {
            FieldNode& target = *st.back().node;
            const auto& rule = rule_for(schema, st, out.root);
            std::uint64_t value = 0;
            switch (rule.function) {
                case Recompute::Fixed: value = rule.fixed_value; break;
                case Recompute::CountOf:
                    for (const auto& src : rule.sources)
                        for (const auto* n : resolve_sources(src, out.root, st))
                            if (n->value.is_composite()) value += n->value.as_composite().children.size();
                    break;
                case Recompute::LengthOf:
                    for (const auto& src : rule.sources)
                        for (const auto* n : resolve_sources(src, out.root, st))
                            if (auto it = enc.extents.find(n); it != enc.extents.end())
                                value += it->second.length;
                    break;
            }
            if (target.value.kind() != FieldValue::Kind::UInt)
                throw Unencodable("derived field '" + chain_path(st, out.root) + "' is not a uint");
            const auto bits = target.value.as_uint().bits;
            if (bits < 64 && (value >> bits))
                throw Unencodable("'" + chain_path(st, out.root) + "': value " +
                                  std::to_string(value) + " overflows " + std::to_string(bits) +
                                  " bits");
            if (target.value.as_uint().value != value) {
                target.value = FieldValue::uint(value, bits);
                changed = true;
            }
        });
        if (!changed) return out;
    }
    throw Unencodable("derived fields did not converge");
}

WireBytes encode(const Message& msg, EncodeOptions opts) {
    auto wire = opts.repair ? encode_with_extents(repair_derived(msg)).wire
                            : encode_with_extents(msg).wire;
    if (wire.empty()) throw Unencodable("message encodes to zero bytes");
    return wire;
}

Message decode(Protocol protocol, std::string_view message_type,
               std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) throw MalformedWire("empty input");
    Message m;
    switch (protocol) {
        case Protocol::Dns: m = detail::decode_dns(message_type, bytes); break;
        case Protocol::Http1: m = detail::decode_http(message_type, bytes); break;
        case Protocol::Tls13: m = detail::decode_tls(message_type, bytes); break;
        case Protocol::Ipv6:
            throw MalformedWire("IPv6 is message-type metadata only; no wire decoder");
    }
    // Advisory wire extents from a plain re-serialization.
    try {
        auto enc = encode_with_extents(m);
        std::function<void(FieldNode&)> attach = [&](FieldNode& n) {
            if (auto it = enc.extents.find(&n); it != enc.extents.end()) n.meta = it->second;
            if (n.value.is_composite())
                for (auto& c : n.value.as_composite().children) attach(c);
        };
        attach(m.root);
    } catch (const Error&) {
        clear_meta(m.root);
    }
    return m;
}

WireBytes load_wire_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    bool hex = path.size() >= 4 && path.compare(path.size() - 4, 4, ".hex") == 0;
    if (hex) return parse_hex_dump(content);
    return WireBytes(content.begin(), content.end());
}

}  // namespace semfuzz

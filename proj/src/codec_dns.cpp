// SPDX-License-Identifier: Apache-2.0
//
// DNS message layout: header / question / answer / authority / additional.
// Domain names are text fields in dotted form without the trailing dot; the
// encoder compresses any name whose suffix was already written (exact case).
#include <map>

#include "codec_impl.hpp"

namespace semfuzz::detail {

namespace {

constexpr std::size_t kMaxPointerHops = 64;

std::string read_name(WireReader& r) {
    std::string name;
    auto data = r.data();
    std::size_t pos = r.pos();
    std::size_t resume = 0;
    bool jumped = false;
    std::size_t hops = 0;
    while (true) {
        if (pos >= data.size()) throw MalformedWire("truncated domain name");
        std::uint8_t len = data[pos];
        if ((len & 0xC0) == 0xC0) {
            if (pos + 1 >= data.size()) throw MalformedWire("truncated compression pointer");
            if (++hops > kMaxPointerHops) throw MalformedWire("compression pointer loop");
            std::size_t target = static_cast<std::size_t>(len & 0x3F) << 8 | data[pos + 1];
            if (!jumped) resume = pos + 2;
            jumped = true;
            if (target >= pos) throw MalformedWire("forward compression pointer");
            pos = target;
            continue;
        }
        if (len & 0xC0) throw MalformedWire("reserved label type");
        ++pos;
        if (len == 0) break;
        if (pos + len > data.size()) throw MalformedWire("truncated label");
        std::string label(data.begin() + static_cast<std::ptrdiff_t>(pos),
                          data.begin() + static_cast<std::ptrdiff_t>(pos + len));
        if (label.find('.') != std::string::npos)
            throw MalformedWire("label containing '.' is not representable");
        if (!name.empty()) name.push_back('.');
        name += label;
        pos += len;
        if (name.size() > 255) throw MalformedWire("domain name longer than 255 octets");
    }
    r.seek(jumped ? resume : pos);
    return name;
}

class NameWriter {
public:
    void write(std::string_view name, WireWriter& w, std::string_view where) {
        std::vector<std::string_view> labels;
        std::size_t start = 0;
        while (!name.empty() && start <= name.size()) {
            auto dot = name.find('.', start);
            auto label = name.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start);
            if (label.empty()) throw Unencodable(std::string(where) + ": empty label in '" + std::string(name) + "'");
            if (label.size() > 63)
                throw Unencodable(std::string(where) + ": label longer than 63 octets");
            labels.push_back(label);
            if (dot == std::string_view::npos) break;
            start = dot + 1;
        }
        for (std::size_t i = 0; i < labels.size(); ++i) {
            std::string suffix = join(labels, i);
            if (auto it = seen_.find(suffix); it != seen_.end()) {
                w.put_uint(0xC000 | it->second, 2);
                return;
            }
            if (w.size() < 0x4000) seen_.emplace(suffix, w.size());
            w.put_byte(static_cast<std::uint8_t>(labels[i].size()));
            w.put(labels[i]);
        }
        w.put_byte(0);
    }

private:
    static std::string join(const std::vector<std::string_view>& labels, std::size_t from) {
        std::string s;
        for (std::size_t i = from; i < labels.size(); ++i) {
            if (i > from) s.push_back('.');
            s += labels[i];
        }
        return s;
    }

    std::map<std::string, std::size_t> seen_;
};

FieldNode decode_rdata(WireReader& r, std::uint16_t type, std::size_t rdlength) {
    std::size_t start = r.pos();
    if (r.remaining() < rdlength) throw MalformedWire("truncated rdata");
    FieldNode out;
    switch (type) {
        case 2:    // NS
        case 5:    // CNAME
        case 12:   // PTR
            out = text_node("rdata", read_name(r));
            break;
        case 15: {  // MX
            auto pref = r.uint(2, "MX preference");
            out = composite_node("rdata", {uint_node("preference", pref, 16),
                                           text_node("exchange", read_name(r))});
            break;
        }
        case 6: {  // SOA
            std::vector<FieldNode> kids;
            kids.push_back(text_node("mname", read_name(r)));
            kids.push_back(text_node("rname", read_name(r)));
            for (const char* f : {"serial", "refresh", "retry", "expire", "minimum"})
                kids.push_back(uint_node(f, r.uint(4, f), 32));
            out = composite_node("rdata", std::move(kids));
            break;
        }
        default:
            out = bytes_node("rdata", r.bytes(rdlength, "rdata"));
            break;
    }
    if (r.pos() - start != rdlength)
        throw MalformedWire("rdata length " + std::to_string(rdlength) + " disagrees with content");
    return out;
}

FieldNode decode_rr(WireReader& r) {
    std::vector<FieldNode> kids;
    kids.push_back(text_node("name", read_name(r)));
    auto type = static_cast<std::uint16_t>(r.uint(2, "rr type"));
    kids.push_back(uint_node("type", type, 16));
    kids.push_back(uint_node("class", r.uint(2, "rr class"), 16));
    kids.push_back(uint_node("ttl", r.uint(4, "rr ttl"), 32));
    auto rdlength = r.uint(2, "rdlength");
    kids.push_back(uint_node("rdlength", rdlength, 16, true));
    kids.push_back(decode_rdata(r, type, rdlength));
    return composite_node("rr", std::move(kids));
}

void write_node(const FieldNode& n, WireWriter& w, NameWriter& names, std::string_view where) {
    w.begin(n);
    switch (n.value.kind()) {
        case FieldValue::Kind::Text: names.write(n.value.as_text(), w, where); break;
        case FieldValue::Kind::UInt: {
            const auto& u = n.value.as_uint();
            if (u.bits % 8) throw Unencodable(std::string(where) + ": field not byte aligned");
            w.put_uint(u.value, u.bits / 8);
            break;
        }
        case FieldValue::Kind::Bytes: w.put(n.value.as_bytes()); break;
        case FieldValue::Kind::Composite:
            for (const auto& c : n.value.as_composite().children) write_node(c, w, names, c.name);
            break;
    }
    w.end();
}

}  // namespace

const CodecSchema& dns_schema() {
    static const CodecSchema schema = [] {
        CodecSchema s;
        s.protocol = Protocol::Dns;
        auto count = [](const char* target, const char* section) {
            return DerivedRule{FieldPath::parse(target), Recompute::CountOf, {section}, 0, false};
        };
        s.derived_rules = {
            count("header.qdcount", "/question"),
            count("header.ancount", "/answer"),
            count("header.nscount", "/authority"),
            count("header.arcount", "/additional"),
        };
        for (const char* sec : {"answer", "authority", "additional"})
            s.derived_rules.push_back(DerivedRule{FieldPath::parse(std::string(sec) + "[*].rdlength"),
                                                  Recompute::LengthOf, {"rdata"}, 0, false});
        s.message_types = {"DNS Query", "DNS Response"};
        return s;
    }();
    return schema;
}

Message decode_dns(std::string_view type, std::span<const std::uint8_t> bytes) {
    WireReader r(bytes);
    if (bytes.size() < 12) throw MalformedWire("DNS header needs 12 bytes");
    std::vector<FieldNode> header;
    header.push_back(uint_node("id", r.uint(2, "id"), 16));
    header.push_back(uint_node("flags", r.uint(2, "flags"), 16));
    std::uint64_t counts[4];
    const char* names[4] = {"qdcount", "ancount", "nscount", "arcount"};
    for (int i = 0; i < 4; ++i) {
        counts[i] = r.uint(2, names[i]);
        header.push_back(uint_node(names[i], counts[i], 16, true));
    }

    std::vector<FieldNode> root;
    root.push_back(composite_node("header", std::move(header)));

    std::vector<FieldNode> questions;
    for (std::uint64_t i = 0; i < counts[0]; ++i) {
        std::vector<FieldNode> q;
        q.push_back(text_node("qname", read_name(r)));
        q.push_back(uint_node("qtype", r.uint(2, "qtype"), 16));
        q.push_back(uint_node("qclass", r.uint(2, "qclass"), 16));
        questions.push_back(composite_node("question", std::move(q)));
    }
    root.push_back(composite_node("question", std::move(questions), true));

    const char* sections[3] = {"answer", "authority", "additional"};
    for (int s = 0; s < 3; ++s) {
        std::vector<FieldNode> rrs;
        for (std::uint64_t i = 0; i < counts[s + 1]; ++i) rrs.push_back(decode_rr(r));
        root.push_back(composite_node(sections[s], std::move(rrs), true));
    }
    if (!r.at_end())
        throw MalformedWire(std::to_string(r.remaining()) + " trailing bytes after DNS message");

    Message m;
    m.protocol = Protocol::Dns;
    bool response = (bytes[2] & 0x80) != 0;
    m.message_type = type.empty() ? (response ? "DNS Response" : "DNS Query") : std::string(type);
    m.root = composite_node("dns", std::move(root));
    return m;
}

void serialize_dns(const Message& msg, WireWriter& w) {
    NameWriter names;
    w.begin(msg.root);
    for (const auto& c : msg.root.value.as_composite().children) write_node(c, w, names, c.name);
    w.end();
}

}  // namespace semfuzz::detail

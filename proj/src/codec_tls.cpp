// SPDX-License-Identifier: Apache-2.0
//
// One TLS record: the record header sits in "record", the payload follows as
// a sibling ("handshake", "alert" or opaque "fragment"). ClientHello and
// ServerHello bodies are flattened into the handshake node so extension
// paths read handshake.extensions[i].
#include "codec_impl.hpp"
#include "strutil.hpp"

namespace semfuzz {

namespace {

struct ExtName {
    std::uint16_t code;
    std::string_view label;
};

constexpr ExtName kExtensions[] = {
    {0, "Server Name"},
    {5, "Status Request"},
    {10, "Supported Groups"},
    {11, "Ec Point Formats"},
    {13, "Signature Algorithms"},
    {16, "Application Layer Protocol Negotiation"},
    {18, "Signed Certificate Timestamp"},
    {23, "Extended Master Secret"},
    {27, "Compress Certificate"},
    {35, "Session Ticket"},
    {41, "Pre Shared Key"},
    {43, "Supported Versions"},
    {45, "Psk Key Exchange Modes"},
    {51, "Key Share"},
    {17513, "Application Settings"},
    {0xfe0d, "Encrypted Client Hello"},
    {0xff01, "Renegotiation Info"},
};

}  // namespace

bool tls_is_grease(std::uint16_t code) noexcept {
    return (code & 0x0f0f) == 0x0a0a && (code >> 8) == (code & 0xff);
}

std::string tls_extension_label(std::uint16_t code) {
    if (tls_is_grease(code)) return "Reserved";
    for (const auto& e : kExtensions)
        if (e.code == code) return std::string(e.label);
    return "Unknown " + std::to_string(code);
}

std::optional<std::uint16_t> tls_extension_code(std::string_view label) {
    for (const auto& e : kExtensions)
        if (detail::iequals(e.label, label)) return e.code;
    if (detail::iequals(label, "Reserved")) return 0x0a0a;
    return std::nullopt;
}

namespace detail {

namespace {

FieldNode read_extensions(WireReader& r, std::vector<FieldNode>& into) {
    auto total = r.uint(2, "extensions length");
    into.push_back(uint_node("extensions_length", total, 16, true));
    if (r.remaining() < total) throw MalformedWire("truncated extensions block");
    std::size_t end = r.pos() + total;
    std::vector<FieldNode> exts;
    while (r.pos() < end) {
        std::vector<FieldNode> kids;
        kids.push_back(uint_node("type", r.uint(2, "extension type"), 16));
        auto len = r.uint(2, "extension length");
        kids.push_back(uint_node("length", len, 16, true));
        if (r.pos() + len > end) throw MalformedWire("extension overruns extensions block");
        kids.push_back(bytes_node("data", r.bytes(len, "extension data")));
        exts.push_back(composite_node("extension", std::move(kids)));
    }
    return composite_node("extensions", std::move(exts), true);
}

void read_hello_prefix(WireReader& r, std::vector<FieldNode>& hs) {
    hs.push_back(uint_node("legacy_version", r.uint(2, "legacy_version"), 16));
    hs.push_back(bytes_node("random", r.bytes(32, "random")));
    auto sid = r.uint(1, "session id length");
    hs.push_back(uint_node("session_id_length", sid, 8, true));
    hs.push_back(bytes_node("session_id", r.bytes(sid, "session id")));
}

void decode_client_hello(WireReader& r, std::vector<FieldNode>& hs) {
    read_hello_prefix(r, hs);
    auto cs_len = r.uint(2, "cipher suites length");
    if (cs_len % 2) throw MalformedWire("odd cipher suites length");
    hs.push_back(uint_node("cipher_suites_length", cs_len, 16, true));
    std::vector<FieldNode> suites;
    for (std::uint64_t i = 0; i < cs_len / 2; ++i)
        suites.push_back(uint_node("cipher_suite", r.uint(2, "cipher suite"), 16));
    hs.push_back(composite_node("cipher_suites", std::move(suites), true));
    auto cm_len = r.uint(1, "compression methods length");
    hs.push_back(uint_node("compression_methods_length", cm_len, 8, true));
    hs.push_back(bytes_node("compression_methods", r.bytes(cm_len, "compression methods")));
    if (!r.at_end()) hs.push_back(read_extensions(r, hs));
}

void decode_server_hello(WireReader& r, std::vector<FieldNode>& hs) {
    read_hello_prefix(r, hs);
    hs.push_back(uint_node("cipher_suite", r.uint(2, "cipher suite"), 16));
    hs.push_back(uint_node("compression_method", r.uint(1, "compression method"), 8));
    if (!r.at_end()) hs.push_back(read_extensions(r, hs));
}

}  // namespace

const CodecSchema& tls_schema() {
    static const CodecSchema schema = [] {
        CodecSchema s;
        s.protocol = Protocol::Tls13;
        auto len = [](const char* target, const char* source) {
            return DerivedRule{FieldPath::parse(target), Recompute::LengthOf, {source}, 0, false};
        };
        s.derived_rules = {
            len("record.length", "~parent_following"),
            len("handshake.length", "~following"),
            len("handshake.session_id_length", "session_id"),
            len("handshake.cipher_suites_length", "cipher_suites"),
            len("handshake.compression_methods_length", "compression_methods"),
            len("handshake.extensions_length", "extensions"),
            len("handshake.extensions[*].length", "data"),
        };
        s.message_types = {"ClientHello", "ServerHello", "Alert", "TLS record"};
        for (const auto& e : kExtensions)
            s.message_types.push_back("ClientHello with " + std::string(e.label) + " Extension");
        s.message_types.push_back("ClientHello with Reserved Extension");
        s.message_types.push_back("ClientHello with No Extension");
        return s;
    }();
    return schema;
}

Message decode_tls(std::string_view type, std::span<const std::uint8_t> bytes) {
    WireReader r(bytes);
    auto content_type = r.uint(1, "record content type");
    auto version = r.uint(2, "record version");
    auto length = r.uint(2, "record length");
    if (r.remaining() != length)
        throw MalformedWire("record length " + std::to_string(length) + " but " +
                            std::to_string(r.remaining()) + " payload bytes");
    std::vector<FieldNode> root;
    root.push_back(composite_node("record", {uint_node("content_type", content_type, 8),
                                             uint_node("legacy_version", version, 16),
                                             uint_node("length", length, 16, true)}));
    std::string default_type = "TLS record";
    if (content_type == 22) {
        auto msg_type = r.uint(1, "handshake type");
        auto hs_len = r.uint(3, "handshake length");
        if (r.remaining() != hs_len)
            throw MalformedWire("handshake length " + std::to_string(hs_len) +
                                " disagrees with record payload");
        std::vector<FieldNode> hs;
        hs.push_back(uint_node("msg_type", msg_type, 8));
        hs.push_back(uint_node("length", hs_len, 24, true));
        WireReader body(r.data().subspan(r.pos()));
        if (msg_type == 1) {
            decode_client_hello(body, hs);
            default_type = "ClientHello";
        } else if (msg_type == 2) {
            decode_server_hello(body, hs);
            default_type = "ServerHello";
        } else {
            hs.push_back(bytes_node("body", body.bytes(body.remaining(), "handshake body")));
        }
        if (!body.at_end()) throw MalformedWire("trailing bytes in handshake body");
        root.push_back(composite_node("handshake", std::move(hs)));
    } else if (content_type == 21) {
        if (length != 2) throw MalformedWire("alert record must carry 2 bytes");
        root.push_back(composite_node("alert", {uint_node("level", r.uint(1, "alert level"), 8),
                                                uint_node("description", r.uint(1, "alert description"), 8)}));
        default_type = "Alert";
    } else {
        root.push_back(bytes_node("fragment", r.bytes(r.remaining(), "fragment")));
    }
    Message m;
    m.protocol = Protocol::Tls13;
    m.message_type = type.empty() ? default_type : std::string(type);
    m.root = composite_node("tls", std::move(root));
    return m;
}

void serialize_tls(const Message& msg, WireWriter& w) { serialize_plain(msg.root, w, ""); }

}  // namespace detail

}  // namespace semfuzz

// SPDX-License-Identifier: Apache-2.0
//
// HTTP/1.1 messages keep the exact spelling of every header line: the field
// name, the separator (colon plus any whitespace) and the raw value are
// stored separately so malformed variants stay expressible. Bodies are raw
// bytes, or a chunk list when Transfer-Encoding ends in "chunked".
#include <charconv>

#include "codec_impl.hpp"
#include "strutil.hpp"

namespace semfuzz::detail {

namespace {

constexpr std::string_view kCrlf = "\r\n";

std::string node_name_for(std::string_view header_name) {
    std::string out;
    for (char c : trim(header_name)) {
        bool bad = c == '.' || c == '[' || c == ']' || is_space(c) ||
                   static_cast<unsigned char>(c) < 0x20;
        out.push_back(bad ? '_' : c);
    }
    return out.empty() ? std::string("_") : out;
}

bool is_canonical_decimal(std::string_view s) {
    if (s.empty() || s.size() > 18) return false;
    if (s.size() > 1 && s[0] == '0') return false;
    for (char c : s)
        if (c < '0' || c > '9') return false;
    return true;
}

bool is_canonical_hex(std::string_view s) {
    if (s.empty() || s.size() > 15) return false;
    if (s.size() > 1 && s[0] == '0') return false;
    for (char c : s)
        if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
    return true;
}

std::uint64_t parse_number(std::string_view s, int base, std::string_view what) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
    if (ec != std::errc{} || p != s.data() + s.size() || s.empty())
        throw MalformedWire("invalid " + std::string(what) + " '" + std::string(s) + "'");
    return v;
}

struct RawHeader {
    std::string name;
    std::string separator;
    std::string value;
};

RawHeader split_header_line(std::string_view line) {
    if (!line.empty() && (line.front() == ' ' || line.front() == '\t'))
        throw MalformedWire("obsolete line folding is not supported");
    auto colon = line.find(':');
    if (colon == std::string_view::npos)
        throw MalformedWire("header line without ':' : '" + std::string(line) + "'");
    if (colon == 0) throw MalformedWire("empty header field name");
    std::size_t v = colon + 1;
    while (v < line.size() && (line[v] == ' ' || line[v] == '\t')) ++v;
    return RawHeader{std::string(line.substr(0, colon)), std::string(line.substr(colon, v - colon)),
                     std::string(line.substr(v))};
}

// Reads CRLF-terminated lines; rejects bare LF.
class LineReader {
public:
    explicit LineReader(std::span<const std::uint8_t> data) : data_(data) {}

    std::string_view next(std::string_view what) {
        std::string_view all(reinterpret_cast<const char*>(data_.data()), data_.size());
        auto crlf = all.find(kCrlf, pos_);
        auto lf = all.find('\n', pos_);
        if (crlf == std::string_view::npos)
            throw MalformedWire("unterminated " + std::string(what));
        if (lf < crlf + 1) throw MalformedWire("bare LF in " + std::string(what));
        auto line = all.substr(pos_, crlf - pos_);
        pos_ = crlf + 2;
        return line;
    }
    std::size_t pos() const noexcept { return pos_; }
    void advance(std::size_t n) { pos_ += n; }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }
    Bytes take(std::size_t n) {
        if (remaining() < n) throw MalformedWire("body shorter than declared length");
        Bytes b(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
                data_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
        pos_ += n;
        return b;
    }

private:
    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

FieldNode header_node(const RawHeader& h, bool derived_length) {
    std::vector<FieldNode> kids;
    kids.push_back(text_node("name", h.name));
    kids.push_back(text_node("separator", h.separator));
    if (derived_length)
        kids.push_back(uint_node("value", parse_number(h.value, 10, "Content-Length"), 64, true));
    else
        kids.push_back(text_node("value", h.value));
    return composite_node(node_name_for(h.name), std::move(kids));
}

std::vector<RawHeader> read_header_block(LineReader& lr, std::string_view what) {
    std::vector<RawHeader> out;
    while (true) {
        auto line = lr.next(what);
        if (line.empty()) break;
        out.push_back(split_header_line(line));
    }
    return out;
}

FieldNode decode_chunked(LineReader& lr) {
    std::vector<FieldNode> chunks;
    std::vector<FieldNode> body;
    while (true) {
        auto line = lr.next("chunk size line");
        std::size_t n = 0;
        while (n < line.size() && std::isxdigit(static_cast<unsigned char>(line[n]))) ++n;
        if (n == 0) throw MalformedWire("chunk size line without hex size");
        auto size_text = line.substr(0, n);
        auto ext = std::string(line.substr(n));
        auto size = parse_number(size_text, 16, "chunk size");
        if (size == 0) {
            body.push_back(composite_node("chunks", std::move(chunks), true));
            body.push_back(composite_node("last_chunk", {text_node("size", std::string(size_text)),
                                                         text_node("ext", ext)}));
            break;
        }
        std::vector<FieldNode> kids;
        if (is_canonical_hex(size_text))
            kids.push_back(uint_node("size", size, 64, true));
        else
            kids.push_back(text_node("size", std::string(size_text)));
        kids.push_back(text_node("ext", ext));
        kids.push_back(bytes_node("data", lr.take(size)));
        if (!lr.next("chunk data terminator").empty())
            throw MalformedWire("chunk data longer than its size");
        chunks.push_back(composite_node("chunk", std::move(kids)));
    }
    std::vector<FieldNode> trailers;
    for (const auto& h : read_header_block(lr, "trailer section")) trailers.push_back(header_node(h, false));
    body.push_back(composite_node("trailers", std::move(trailers)));
    return composite_node("body", std::move(body));
}

void check_line_text(std::string_view s, std::string_view where) {
    for (char c : s)
        if (c == '\r' || c == '\n')
            throw Unencodable(std::string(where) + ": CR/LF inside a line element");
}

void put_text_part(const FieldNode& n, WireWriter& w, std::string_view where, int base = 10) {
    w.begin(n);
    switch (n.value.kind()) {
        case FieldValue::Kind::Text:
            check_line_text(n.value.as_text(), where);
            w.put(n.value.as_text());
            break;
        case FieldValue::Kind::UInt: {
            char buf[32];
            auto [p, ec] = std::to_chars(buf, buf + sizeof buf, n.value.as_uint().value, base);
            w.put(std::string_view(buf, static_cast<std::size_t>(p - buf)));
            break;
        }
        case FieldValue::Kind::Bytes: {
            const auto& b = n.value.as_bytes();
            check_line_text(std::string_view(reinterpret_cast<const char*>(b.data()), b.size()), where);
            w.put(b);
            break;
        }
        case FieldValue::Kind::Composite:
            throw Unencodable(std::string(where) + ": expected a scalar");
    }
    w.end();
}

const FieldNode& child_or_throw(const FieldNode& parent, std::string_view name) {
    const auto* c = find_child(parent, name);
    if (!c) throw Unencodable("'" + parent.name + "' lacks '" + std::string(name) + "'");
    return *c;
}

void put_header_block(const FieldNode& block, WireWriter& w) {
    w.begin(block);
    if (!block.value.is_composite()) throw Unencodable("header block must be composite");
    for (const auto& h : block.value.as_composite().children) {
        w.begin(h);
        if (!h.value.is_composite()) throw Unencodable("header '" + h.name + "' must be composite");
        for (const auto& part : h.value.as_composite().children) {
            if (part.name == "name") {
                if (part.value.kind() == FieldValue::Kind::Text) {
                    const auto& t = part.value.as_text();
                    if (t.empty()) throw Unencodable("header '" + h.name + "': empty field name");
                    if (t.find('\0') != std::string::npos)
                        throw Unencodable("header '" + h.name + "': NUL in field name");
                }
            }
            put_text_part(part, w, h.name + "." + part.name);
        }
        w.put(kCrlf);
        w.end();
    }
    w.end();
}

void put_body(const FieldNode& body, WireWriter& w) {
    w.begin(body);
    if (!body.value.is_composite()) {
        if (body.value.kind() == FieldValue::Kind::Text) w.put(body.value.as_text());
        else if (body.value.kind() == FieldValue::Kind::Bytes) w.put(body.value.as_bytes());
        else throw Unencodable("body must be bytes, text or a chunk list");
        w.end();
        return;
    }
    for (const auto& part : body.value.as_composite().children) {
        if (part.name == "chunks") {
            w.begin(part);
            for (const auto& chunk : part.value.as_composite().children) {
                w.begin(chunk);
                put_text_part(child_or_throw(chunk, "size"), w, "chunk.size", 16);
                if (const auto* ext = find_child(chunk, "ext")) put_text_part(*ext, w, "chunk.ext");
                w.put(kCrlf);
                const auto& data = child_or_throw(chunk, "data");
                w.begin(data);
                if (data.value.kind() == FieldValue::Kind::Bytes) w.put(data.value.as_bytes());
                else if (data.value.kind() == FieldValue::Kind::Text) w.put(data.value.as_text());
                else throw Unencodable("chunk.data must be bytes");
                w.end();
                w.put(kCrlf);
                w.end();
            }
            w.end();
        } else if (part.name == "last_chunk") {
            w.begin(part);
            put_text_part(child_or_throw(part, "size"), w, "last_chunk.size", 16);
            if (const auto* ext = find_child(part, "ext")) put_text_part(*ext, w, "last_chunk.ext");
            w.put(kCrlf);
            w.end();
        } else if (part.name == "trailers") {
            put_header_block(part, w);
            w.put(kCrlf);
        } else {
            throw Unencodable("unknown chunked body element '" + part.name + "'");
        }
    }
    w.end();
}

}  // namespace

const CodecSchema& http_schema() {
    static const CodecSchema schema = [] {
        CodecSchema s;
        s.protocol = Protocol::Http1;
        s.derived_rules = {
            DerivedRule{FieldPath::parse("headers.Content-Length.value"), Recompute::LengthOf,
                        {"/body"}, 0, true},
            DerivedRule{FieldPath::parse("body.chunks[*].size"), Recompute::LengthOf, {"data"}, 0,
                        false},
        };
        s.message_types = {"http request", "http response"};
        return s;
    }();
    return schema;
}

Message decode_http(std::string_view type, std::span<const std::uint8_t> bytes) {
    LineReader lr(bytes);
    auto first = lr.next("start line");
    bool response = first.rfind("HTTP/", 0) == 0;
    std::vector<FieldNode> root;
    if (response) {
        auto sp1 = first.find(' ');
        if (sp1 == std::string_view::npos) throw MalformedWire("status line without status code");
        auto rest = first.substr(sp1 + 1);
        auto sp2 = rest.find(' ');
        std::vector<FieldNode> kids{text_node("version", std::string(first.substr(0, sp1))),
                                    text_node("status", std::string(rest.substr(0, sp2)))};
        if (sp2 != std::string_view::npos)
            kids.push_back(text_node("reason", std::string(rest.substr(sp2 + 1))));
        root.push_back(composite_node("status_line", std::move(kids)));
    } else {
        auto sp1 = first.find(' ');
        auto sp2 = first.rfind(' ');
        if (sp1 == std::string_view::npos || sp1 == sp2 || sp1 == 0)
            throw MalformedWire("request line is not 'method target version'");
        root.push_back(composite_node(
            "request_line", {text_node("method", std::string(first.substr(0, sp1))),
                             text_node("target", std::string(first.substr(sp1 + 1, sp2 - sp1 - 1))),
                             text_node("version", std::string(first.substr(sp2 + 1)))}));
    }

    auto raw = read_header_block(lr, "header section");

    bool chunked = false;
    std::optional<std::uint64_t> content_length;
    std::size_t cl_headers = 0;
    for (const auto& h : raw) {
        auto name = trim(h.name);
        if (iequals(name, "transfer-encoding")) {
            auto v = std::string_view(h.value);
            auto comma = v.rfind(',');
            auto last = trim(comma == std::string_view::npos ? v : v.substr(comma + 1));
            chunked = iequals(last, "chunked");
        } else if (iequals(name, "content-length")) {
            auto n = parse_number(trim(h.value), 10, "Content-Length");
            if (content_length && *content_length != n)
                throw MalformedWire("conflicting Content-Length values");
            content_length = n;
            ++cl_headers;
        }
    }

    std::vector<FieldNode> headers;
    for (const auto& h : raw) {
        bool derived = !chunked && cl_headers == 1 && iequals(h.name, "Content-Length") &&
                       is_canonical_decimal(h.value);
        headers.push_back(header_node(h, derived));
    }
    root.push_back(composite_node("headers", std::move(headers)));

    if (chunked) {
        root.push_back(decode_chunked(lr));
    } else if (content_length) {
        root.push_back(bytes_node("body", lr.take(*content_length)));
    } else if (response) {
        root.push_back(bytes_node("body", lr.take(lr.remaining())));
    } else {
        root.push_back(bytes_node("body", {}));
    }
    if (lr.remaining() != 0)
        throw MalformedWire(std::to_string(lr.remaining()) + " bytes after the HTTP message");

    Message m;
    m.protocol = Protocol::Http1;
    m.message_type = type.empty() ? (response ? "http response" : "http request") : std::string(type);
    m.root = composite_node("http", std::move(root));
    return m;
}

void serialize_http(const Message& msg, WireWriter& w) {
    w.begin(msg.root);
    const auto& kids = msg.root.value.as_composite().children;
    for (const auto& part : kids) {
        if (part.name == "request_line" || part.name == "status_line") {
            w.begin(part);
            if (!part.value.is_composite()) throw Unencodable(part.name + " must be composite");
            const auto& elems = part.value.as_composite().children;
            for (std::size_t i = 0; i < elems.size(); ++i) {
                if (i) w.put(" ");
                put_text_part(elems[i], w, part.name + "." + elems[i].name);
            }
            w.put(kCrlf);
            w.end();
        } else if (part.name == "headers") {
            put_header_block(part, w);
            w.put(kCrlf);
        } else if (part.name == "body") {
            put_body(part, w);
        } else {
            throw Unencodable("unknown HTTP message element '" + part.name + "'");
        }
    }
    w.end();
}

}  // namespace semfuzz::detail

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "semfuzz/codec.hpp"
#include "semfuzz/errors.hpp"

namespace semfuzz::detail {

class WireWriter {
public:
    void begin(const FieldNode& n) { open_.emplace_back(&n, out_.wire.size()); }
    void end() {
        auto [node, start] = open_.back();
        open_.pop_back();
        out_.extents[node] = WireMeta{start, out_.wire.size() - start};
    }

    void put_uint(std::uint64_t v, unsigned nbytes) {
        for (unsigned i = nbytes; i-- > 0;)
            out_.wire.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void put(std::span<const std::uint8_t> b) { out_.wire.insert(out_.wire.end(), b.begin(), b.end()); }
    void put(std::string_view s) { out_.wire.insert(out_.wire.end(), s.begin(), s.end()); }
    void put_byte(std::uint8_t b) { out_.wire.push_back(b); }

    std::size_t size() const noexcept { return out_.wire.size(); }
    const Bytes& wire() const noexcept { return out_.wire; }
    EncodedMessage take() { return std::move(out_); }

private:
    EncodedMessage out_;
    std::vector<std::pair<const FieldNode*, std::size_t>> open_;
};

class WireReader {
public:
    explicit WireReader(std::span<const std::uint8_t> data) : data_(data) {}

    std::uint64_t uint(unsigned nbytes, std::string_view what) {
        need(nbytes, what);
        std::uint64_t v = 0;
        for (unsigned i = 0; i < nbytes; ++i) v = v << 8 | data_[pos_++];
        return v;
    }
    Bytes bytes(std::size_t n, std::string_view what) {
        need(n, what);
        Bytes out(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  data_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
        pos_ += n;
        return out;
    }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }
    bool at_end() const noexcept { return pos_ == data_.size(); }
    std::size_t pos() const noexcept { return pos_; }
    void seek(std::size_t p) { pos_ = p; }
    std::span<const std::uint8_t> data() const noexcept { return data_; }

private:
    void need(std::size_t n, std::string_view what) const {
        if (remaining() < n)
            throw MalformedWire("truncated " + std::string(what) + ": need " + std::to_string(n) +
                                " bytes, have " + std::to_string(remaining()));
    }

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

inline FieldNode uint_node(std::string name, std::uint64_t v, unsigned bits, bool derived = false) {
    return FieldNode(std::move(name), FieldValue::uint(v, bits), derived);
}
inline FieldNode bytes_node(std::string name, Bytes b) {
    return FieldNode(std::move(name), FieldValue::bytes(std::move(b)));
}
inline FieldNode text_node(std::string name, std::string s) {
    return FieldNode(std::move(name), FieldValue::text(std::move(s)));
}
inline FieldNode composite_node(std::string name, std::vector<FieldNode> kids, bool sequence = false) {
    return FieldNode(std::move(name), FieldValue::composite(std::move(kids), sequence));
}

/// Big-endian fixed-width uints, raw bytes and text, composites concatenated.
void serialize_plain(const FieldNode& node, WireWriter& w, std::string_view path_hint);

/// Child lookup by name on a composite; nullptr when absent.
const FieldNode* find_child(const FieldNode& parent, std::string_view name);

// Per-protocol entry points.
const CodecSchema& dns_schema();
Message decode_dns(std::string_view type, std::span<const std::uint8_t> bytes);
void serialize_dns(const Message& msg, WireWriter& w);

const CodecSchema& http_schema();
Message decode_http(std::string_view type, std::span<const std::uint8_t> bytes);
void serialize_http(const Message& msg, WireWriter& w);

const CodecSchema& tls_schema();
Message decode_tls(std::string_view type, std::span<const std::uint8_t> bytes);
void serialize_tls(const Message& msg, WireWriter& w);

}  // namespace semfuzz::detail

// SPDX-License-Identifier: Apache-2.0
#include "semfuzz/hex.hpp"

#include "semfuzz/errors.hpp"

namespace semfuzz {

namespace {
int nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}
}  // namespace

std::string to_hex(std::span<const std::uint8_t> data) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(data.size() * 2);
    for (auto b : data) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0xf]);
    }
    return out;
}

bool try_from_hex(std::string_view text, std::vector<std::uint8_t>& out) {
    if (text.size() % 2) return false;
    std::vector<std::uint8_t> bytes;
    bytes.reserve(text.size() / 2);
    for (std::size_t i = 0; i < text.size(); i += 2) {
        int hi = nibble(text[i]);
        int lo = nibble(text[i + 1]);
        if (hi < 0 || lo < 0) return false;
        bytes.push_back(static_cast<std::uint8_t>(hi << 4 | lo));
    }
    out = std::move(bytes);
    return true;
}

std::vector<std::uint8_t> parse_hex_dump(std::string_view text) {
    std::string digits;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto eol = text.find('\n', pos);
        auto line = text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() : eol + 1;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        if (auto colon = line.find(':'); colon != std::string_view::npos) line = line.substr(colon + 1);
        for (char c : line) {
            if (c == ' ' || c == '\t' || c == '\r') continue;
            if (nibble(c) < 0)
                throw MalformedWire(std::string("hex dump: unexpected character '") + c + "'");
            digits.push_back(c);
        }
    }
    std::vector<std::uint8_t> out;
    if (!try_from_hex(digits, out)) throw MalformedWire("hex dump: odd number of hex digits");
    return out;
}

}  // namespace semfuzz

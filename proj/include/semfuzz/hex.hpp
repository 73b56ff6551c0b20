// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace semfuzz {

/// Lowercase hex, no separators.
std::string to_hex(std::span<const std::uint8_t> data);

/// Strict: even number of hex digits, nothing else. Returns false on bad input.
bool try_from_hex(std::string_view text, std::vector<std::uint8_t>& out);

/// Hex dump loader: ignores whitespace, `#` comments to end of line and an
/// optional `xxxx:` offset column. Throws MalformedWire on odd digit counts or
/// stray characters.
std::vector<std::uint8_t> parse_hex_dump(std::string_view text);

}  // namespace semfuzz

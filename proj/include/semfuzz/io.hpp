// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "semfuzz/message.hpp"

namespace semfuzz {

/// Throws IoError.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

/// Throws IoError, or ConfigError when the file is not valid JSON.
Json read_json_file(const std::string& path);
/// Two-space indented with a trailing newline; parent directories are created.
void write_json_file(const std::string& path, const Json& j);

}  // namespace semfuzz

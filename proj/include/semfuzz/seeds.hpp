// SPDX-License-Identifier: Apache-2.0
//
// Seed corpus built from offline captures (tshark JSON exports) and raw
// .hex/.bin fixtures.
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "semfuzz/codec.hpp"
#include "semfuzz/message.hpp"

namespace semfuzz {

struct MessageTypeEntry {
    Protocol protocol = Protocol::Dns;
    std::string name;
};

/// The configured message-type list L.
struct MessageTypeList {
    std::vector<MessageTypeEntry> entries;

    bool contains(std::string_view name) const;
    std::optional<Protocol> protocol_of(std::string_view name) const;
    std::vector<std::string> names() const;
};

/// Reads {"types":[{"protocol","message_type"}...]}. Throws IoError/ConfigError.
MessageTypeList load_message_types(const std::string& path);
MessageTypeList message_types_from_json(const Json& j);

struct SeedSource {
    std::string file;
    std::optional<std::size_t> frame;
};

struct SeedEntry {
    std::string message_type;
    Message seed;
    WireBytes wire;
    SeedSource source;
};

struct SkippedFrame {
    std::size_t frame = 0;
    std::string reason;
};

struct SeedCorpus {
    std::vector<SeedEntry> entries;
    /// Configured types without any seed.
    std::vector<std::string> missing_types;
    std::vector<SkippedFrame> skipped;
    std::size_t non_matching_frames = 0;
};

/// Every frame of a tshark `-T json -x` export whose dissection matches a
/// configured type is re-decoded from its raw bytes. One frame may seed
/// several types (a ClientHello carries many extensions). Frames that fail to
/// decode, or whose re-encoding differs from the captured bytes, are skipped
/// with a reason. Throws NotTsharkJson, NoMatchingFrames.
SeedCorpus ingest_tshark_json(const Json& doc, const MessageTypeList& types,
                              const std::string& source_name = "");

/// The configured types a tshark frame matches, judged from its dissection
/// tree only.
std::vector<std::string> tshark_frame_types(const Json& frame, const MessageTypeList& types);

/// Throws IoError or MalformedWire.
SeedEntry ingest_raw(const std::string& path, Protocol protocol, const std::string& message_type);

/// First entry for the type. Throws NoSeedForType.
const SeedEntry& select_seed(const SeedCorpus& corpus, const std::string& message_type);

/// Seed directory: seeds.json listing {"file","protocol","message_type"}
/// entries with paths relative to the directory.
SeedCorpus load_seed_dir(const std::string& dir, const MessageTypeList* types = nullptr);
void write_seed_dir(const SeedCorpus& corpus, const std::string& dir);

}  // namespace semfuzz

// SPDX-License-Identifier: Apache-2.0
#include "semfuzz/seeds.hpp"

#include <filesystem>
#include <map>

#include "semfuzz/errors.hpp"
#include "semfuzz/hex.hpp"
#include "semfuzz/io.hpp"
#include "strutil.hpp"

namespace semfuzz {

namespace fs = std::filesystem;

bool MessageTypeList::contains(std::string_view name) const { return protocol_of(name).has_value(); }

std::optional<Protocol> MessageTypeList::protocol_of(std::string_view name) const {
    for (const auto& e : entries)
        if (e.name == name) return e.protocol;
    return std::nullopt;
}

std::vector<std::string> MessageTypeList::names() const {
    std::vector<std::string> out;
    for (const auto& e : entries) out.push_back(e.name);
    return out;
}

MessageTypeList message_types_from_json(const Json& j) {
    const Json* arr = &j;
    if (j.is_object()) {
        if (!j.contains("types")) throw ConfigError("message type list lacks \"types\"");
        arr = &j["types"];
    }
    if (!arr->is_array()) throw ConfigError("message type list must be an array");
    MessageTypeList out;
    for (const auto& t : *arr) {
        if (!t.is_object() || !t.contains("protocol") || !t.contains("message_type"))
            throw ConfigError("message type entry needs protocol and message_type");
        out.entries.push_back({protocol_from_string(t["protocol"].get<std::string>()),
                               t["message_type"].get<std::string>()});
    }
    if (out.entries.empty()) throw ConfigError("message type list is empty");
    return out;
}

MessageTypeList load_message_types(const std::string& path) {
    return message_types_from_json(read_json_file(path));
}

namespace {

void collect(const Json& j, std::string_view key, std::vector<const Json*>& out) {
    if (j.is_object()) {
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (it.key() == key) {
                if (it->is_array())
                    for (const auto& v : *it) out.push_back(&v);
                else
                    out.push_back(&*it);
            }
            collect(*it, key, out);
        }
    } else if (j.is_array()) {
        for (const auto& v : j) collect(v, key, out);
    }
}

std::vector<std::string> strings_for(const Json& j, std::string_view key) {
    std::vector<const Json*> found;
    collect(j, key, found);
    std::vector<std::string> out;
    for (const auto* v : found) {
        if (v->is_string()) out.push_back(v->get<std::string>());
        else if (v->is_number_integer()) out.push_back(std::to_string(v->get<long long>()));
        else if (v->is_boolean()) out.push_back(v->get<bool>() ? "1" : "0");
        else out.emplace_back();
    }
    return out;
}

bool has_key(const Json& j, std::string_view key) {
    std::vector<const Json*> found;
    collect(j, key, found);
    return !found.empty();
}

const Json* layer(const Json& layers, std::string_view name) {
    auto it = layers.find(std::string(name));
    if (it == layers.end()) return nullptr;
    if (it->is_array()) return it->empty() ? nullptr : &(*it)[0];
    return &*it;
}

std::optional<std::uint64_t> parse_uint_text(const std::string& s) {
    try {
        std::size_t used = 0;
        auto v = std::stoull(s, &used, 0);
        if (used != s.size()) return std::nullopt;
        return v;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

// tshark names the field for a header by its lower-cased, underscored name.
std::string http_header_key(std::string_view header) {
    if (header == "request.line") return "http.request.line";
    if (header.rfind("http.", 0) == 0) return std::string(header);
    if (detail::iequals(header, "Content-Length")) return "http.content_length_header";
    std::string key = "http.";
    for (char c : header) key.push_back(c == '-' ? '_' : detail::ascii_lower(c));
    return key;
}

std::string between(std::string_view s, std::string_view prefix, std::string_view suffix) {
    if (s.size() < prefix.size() + suffix.size()) return {};
    if (s.substr(0, prefix.size()) != prefix) return {};
    if (s.substr(s.size() - suffix.size()) != suffix) return {};
    return std::string(s.substr(prefix.size(), s.size() - prefix.size() - suffix.size()));
}

struct RawField {
    Bytes bytes;
    std::optional<std::size_t> offset;
};

std::optional<RawField> raw_field(const Json& layers, const std::string& key) {
    auto it = layers.find(key);
    if (it == layers.end()) return std::nullopt;
    const Json* v = &*it;
    if (v->is_array() && !v->empty() && v->front().is_array()) v = &v->front();
    RawField out;
    std::string hex;
    if (v->is_string()) {
        hex = v->get<std::string>();
    } else if (v->is_array() && !v->empty() && v->front().is_string()) {
        hex = v->front().get<std::string>();
        if (v->size() > 1 && (*v)[1].is_number_integer()) out.offset = (*v)[1].get<std::size_t>();
    } else {
        return std::nullopt;
    }
    if (!try_from_hex(hex, out.bytes)) return std::nullopt;
    return out;
}

const char* layer_name_for(Protocol p, const Json& layers) {
    switch (p) {
        case Protocol::Dns: return "dns";
        case Protocol::Http1: return "http";
        case Protocol::Tls13: return layers.contains("tls") ? "tls" : "ssl";
        case Protocol::Ipv6: return "ipv6";
    }
    return "";
}

Bytes frame_bytes(const Json& layers, Protocol p) {
    std::string name = layer_name_for(p, layers);
    auto lay = raw_field(layers, name + "_raw");
    auto frame = raw_field(layers, "frame_raw");
    if (!lay) throw MalformedWire("frame has no " + name + "_raw bytes (export with -x)");
    Bytes out = lay->bytes;
    // The layer blob may stop short of the body (HTTP) or cover several
    // records (TLS); the frame bytes from the layer offset are authoritative.
    if (frame && lay->offset && *lay->offset < frame->bytes.size())
        out.assign(frame->bytes.begin() + static_cast<std::ptrdiff_t>(*lay->offset), frame->bytes.end());
    if (p == Protocol::Tls13 && out.size() >= 5) {
        std::size_t rec = 5 + (static_cast<std::size_t>(out[3]) << 8 | out[4]);
        if (rec < out.size()) out.resize(rec);
    }
    if (p == Protocol::Dns && out.size() > lay->bytes.size()) out = lay->bytes;
    return out;
}

std::size_t frame_number(const Json& layers, std::size_t index) {
    if (const auto* f = layer(layers, "frame")) {
        auto nums = strings_for(*f, "frame.number");
        if (!nums.empty())
            if (auto n = parse_uint_text(nums.front())) return *n;
    }
    return index + 1;
}

}  // namespace

std::vector<std::string> tshark_frame_types(const Json& frame, const MessageTypeList& types) {
    if (!frame.is_object() || !frame.contains("_source") || !frame["_source"].contains("layers"))
        throw NotTsharkJson("frame lacks _source.layers");
    const Json& layers = frame["_source"]["layers"];
    std::vector<std::string> out;

    if (const auto* dns = layer(layers, "dns")) {
        bool response = false;
        for (const auto& v : strings_for(*dns, "dns.flags.response"))
            response = response || v == "1" || v == "True" || v == "true";
        std::string t = response ? "DNS Response" : "DNS Query";
        if (types.protocol_of(t) == Protocol::Dns) out.push_back(t);
    }

    const Json* tls = layer(layers, "tls");
    if (!tls) tls = layer(layers, "ssl");
    if (tls) {
        auto hs = strings_for(*tls, "tls.handshake.type");
        bool client_hello = std::find(hs.begin(), hs.end(), "1") != hs.end();
        if (client_hello) {
            std::vector<std::uint16_t> exts;
            for (const auto& s : strings_for(*tls, "tls.handshake.extension.type"))
                if (auto v = parse_uint_text(s)) exts.push_back(static_cast<std::uint16_t>(*v));
            for (const auto& e : types.entries) {
                if (e.protocol != Protocol::Tls13) continue;
                auto label = between(e.name, "ClientHello with ", " Extension");
                if (label.empty()) continue;
                bool match = false;
                if (label == "No") {
                    match = exts.empty();
                } else if (label == "Reserved") {
                    match = std::any_of(exts.begin(), exts.end(), tls_is_grease);
                } else if (auto code = tls_extension_code(label)) {
                    match = std::find(exts.begin(), exts.end(), *code) != exts.end();
                }
                if (match) out.push_back(e.name);
            }
        }
    }

    if (const auto* http = layer(layers, "http")) {
        if (has_key(*http, "http.request.method")) {
            for (const auto& e : types.entries) {
                if (e.protocol != Protocol::Http1) continue;
                auto header = between(e.name, "http request with ", " header");
                if (header.empty()) continue;
                if (has_key(*http, http_header_key(header))) out.push_back(e.name);
            }
        }
    }
    return out;
}

SeedCorpus ingest_tshark_json(const Json& doc, const MessageTypeList& types,
                              const std::string& source_name) {
    if (!doc.is_array()) throw NotTsharkJson("expected a JSON array of frames");
    SeedCorpus corpus;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& frame = doc[i];
        auto matched = tshark_frame_types(frame, types);
        const auto& layers = frame["_source"]["layers"];
        auto number = frame_number(layers, i);
        if (matched.empty()) {
            ++corpus.non_matching_frames;
            continue;
        }
        auto protocol = *types.protocol_of(matched.front());
        try {
            auto bytes = frame_bytes(layers, protocol);
            auto msg = decode(protocol, matched.front(), bytes);
            if (encode(msg, {.repair = false}) != bytes)
                throw MalformedWire("re-encoding differs from captured bytes");
            for (const auto& t : matched) {
                SeedEntry e{t, msg, bytes, {source_name, number}};
                e.seed.message_type = t;
                corpus.entries.push_back(std::move(e));
            }
        } catch (const Error& err) {
            corpus.skipped.push_back({number, err.kind() + ": " + err.what()});
        }
    }
    if (corpus.entries.empty()) throw NoMatchingFrames("no frame matches the configured message types");
    for (const auto& t : types.entries) {
        bool found = std::any_of(corpus.entries.begin(), corpus.entries.end(),
                                 [&](const SeedEntry& e) { return e.message_type == t.name; });
        if (!found) corpus.missing_types.push_back(t.name);
    }
    return corpus;
}

SeedEntry ingest_raw(const std::string& path, Protocol protocol, const std::string& message_type) {
    auto bytes = load_wire_file(path);
    auto msg = decode(protocol, message_type, bytes);
    if (encode(msg, {.repair = false}) != bytes)
        throw MalformedWire("'" + path + "' does not re-encode to its own bytes");
    return SeedEntry{msg.message_type, std::move(msg), std::move(bytes), {path, std::nullopt}};
}

const SeedEntry& select_seed(const SeedCorpus& corpus, const std::string& message_type) {
    for (const auto& e : corpus.entries)
        if (e.message_type == message_type) return e;
    throw NoSeedForType("no seed for message type '" + message_type + "'");
}

SeedCorpus load_seed_dir(const std::string& dir, const MessageTypeList* types) {
    auto manifest = read_json_file((fs::path(dir) / "seeds.json").string());
    const Json& list = manifest.is_object() ? manifest.value("seeds", Json::array()) : manifest;
    if (!list.is_array()) throw ConfigError("seeds.json: \"seeds\" must be an array");
    SeedCorpus corpus;
    std::map<std::string, std::pair<Message, Bytes>> cache;
    for (const auto& s : list) {
        auto file = s.at("file").get<std::string>();
        auto type = s.at("message_type").get<std::string>();
        auto protocol = protocol_from_string(s.at("protocol").get<std::string>());
        if (types && !types->contains(type))
            throw ConfigError("seeds.json: '" + type + "' is not a configured message type");
        auto path = (fs::path(dir) / file).string();
        auto entry = ingest_raw(path, protocol, type);
        entry.source.file = file;
        corpus.entries.push_back(std::move(entry));
    }
    if (types)
        for (const auto& t : types->entries)
            if (std::none_of(corpus.entries.begin(), corpus.entries.end(),
                             [&](const SeedEntry& e) { return e.message_type == t.name; }))
                corpus.missing_types.push_back(t.name);
    return corpus;
}

void write_seed_dir(const SeedCorpus& corpus, const std::string& dir) {
    std::map<Bytes, std::string> files;
    Json seeds = Json::array();
    for (const auto& e : corpus.entries) {
        auto it = files.find(e.wire);
        if (it == files.end()) {
            char name[64];
            std::snprintf(name, sizeof name, "%s_%03zu.hex",
                          detail::to_lower(to_string(e.seed.protocol)).c_str(), files.size());
            it = files.emplace(e.wire, name).first;
            write_text_file((fs::path(dir) / name).string(), to_hex(e.wire) + "\n");
        }
        seeds.push_back({{"file", it->second},
                         {"protocol", std::string(to_string(e.seed.protocol))},
                         {"message_type", e.message_type}});
    }
    write_json_file((fs::path(dir) / "seeds.json").string(), Json{{"schema_version", 1}, {"seeds", seeds}});
}

}  // namespace semfuzz

// SPDX-License-Identifier: Apache-2.0
//
// Shared test helpers. The wire checkers below read raw bytes with their own
// offset arithmetic and never touch the library codecs, so they can serve as
// oracles for derived-field values.
#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "semfuzz/codec.hpp"
#include "semfuzz/errors.hpp"
#include "semfuzz/llm.hpp"

namespace testsupport {

namespace fs = std::filesystem;

inline fs::path source_dir() { return fs::path(SEMFUZZ_SOURCE_DIR); }
inline fs::path data_dir() { return source_dir() / "tests" / "data"; }

struct SeedFile {
    fs::path path;
    semfuzz::Protocol protocol;
};

inline std::vector<SeedFile> seed_files() {
    std::vector<SeedFile> out;
    auto add = [&](const char* sub, semfuzz::Protocol p) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(data_dir() / "seeds" / sub)) files.push_back(e.path());
        std::sort(files.begin(), files.end());
        for (auto& f : files) out.push_back({f, p});
    };
    add("dns", semfuzz::Protocol::Dns);
    add("http", semfuzz::Protocol::Http1);
    add("tls", semfuzz::Protocol::Tls13);
    return out;
}

inline semfuzz::Message load_seed(const std::string& rel, semfuzz::Protocol p) {
    auto bytes = semfuzz::load_wire_file((data_dir() / "seeds" / rel).string());
    return semfuzz::decode(p, "", bytes);
}

/// Which bundled template a rendered prompt came from, judged by its persona line.
inline std::string template_of(const std::string& prompt) {
    if (prompt.find("pick out the requirements") != std::string::npos) return "spec_identify";
    if (prompt.find("into structured semantic rules") != std::string::npos) return "rule_complete";
    if (prompt.find("derive violations") != std::string::npos) return "strategy_gen";
    if (prompt.find("exact edit actions") != std::string::npos) return "action_gen";
    return "";
}

/// Remote-provider transport answering from `answer(prompt)`; throws
/// TransportError when `answer` returns nothing.
inline semfuzz::HttpPost scripted_post(std::function<std::optional<std::string>(const std::string&)> answer) {
    return [answer](const std::string&, const std::string& body, const std::map<std::string, std::string>&,
                    int) {
        auto prompt = semfuzz::Json::parse(body)["messages"][0]["content"].get<std::string>();
        auto text = answer(prompt);
        if (!text) throw semfuzz::TransportError("no scripted answer");
        semfuzz::Json reply{{"choices", semfuzz::Json::array({semfuzz::Json{{"message", {{"content", *text}}}}})}};
        return semfuzz::HttpReply{200, reply.dump()};
    };
}

inline std::unique_ptr<semfuzz::LlmGateway> scripted_gateway(std::function<std::optional<std::string>(const std::string&)> answer) {
    semfuzz::ProviderBinding b;
    b.kind = semfuzz::ProviderBinding::Kind::RemoteHttp;
    b.base_url = "http://scripted";
    b.max_attempts = 1;
    auto g = std::make_unique<semfuzz::LlmGateway>(
        b, semfuzz::TemplateStore::load((source_dir() / "data" / "templates").string()), 4,
        scripted_post(std::move(answer)));
    g->set_log([](const std::string&) {});
    return g;
}

inline std::uint64_t be(const std::vector<std::uint8_t>& b, std::size_t off, unsigned n) {
    std::uint64_t v = 0;
    for (unsigned i = 0; i < n; ++i) v = v << 8 | b.at(off + i);
    return v;
}

/// Walks a single TLS record holding a ClientHello or ServerHello and checks
/// every length prefix against the bytes that follow it. Returns an empty
/// string when consistent, else a description of the first mismatch.
inline std::string tls_length_mismatch(const std::vector<std::uint8_t>& b) {
    if (b.size() < 9) return "short";
    if (be(b, 3, 2) != b.size() - 5) return "record length";
    if (b[5] != 1 && b[5] != 2) return {};
    if (be(b, 6, 3) != b.size() - 9) return "handshake length";
    std::size_t p = 9 + 2 + 32;
    std::size_t sid = b.at(p);
    p += 1 + sid;
    if (b[5] == 1) {
        std::size_t cs = be(b, p, 2);
        p += 2 + cs;
        std::size_t cm = b.at(p);
        p += 1 + cm;
    } else {
        p += 3;
    }
    if (p == b.size()) return {};
    std::size_t ext_total = be(b, p, 2);
    p += 2;
    if (ext_total != b.size() - p) return "extensions length";
    while (p < b.size()) {
        if (p + 4 > b.size()) return "extension header";
        std::size_t len = be(b, p + 2, 2);
        p += 4 + len;
        if (p > b.size()) return "extension length";
    }
    return {};
}

/// Extension type codes of a ClientHello in wire order.
inline std::vector<std::uint16_t> tls_extension_types(const std::vector<std::uint8_t>& b) {
    std::vector<std::uint16_t> out;
    std::size_t p = 9 + 2 + 32;
    p += 1 + b.at(p);
    p += 2 + be(b, p, 2);
    p += 1 + b.at(p);
    if (p >= b.size()) return out;
    p += 2;
    while (p + 4 <= b.size()) {
        out.push_back(static_cast<std::uint16_t>(be(b, p, 2)));
        p += 4 + be(b, p + 2, 2);
    }
    return out;
}

inline std::size_t skip_dns_name(const std::vector<std::uint8_t>& b, std::size_t p) {
    while (true) {
        std::uint8_t l = b.at(p);
        if ((l & 0xC0) == 0xC0) return p + 2;
        if (l == 0) return p + 1;
        p += 1 + l;
    }
}

/// Recounts questions and records by walking the wire; checks header counts
/// and every RDLENGTH.
inline std::string dns_count_mismatch(const std::vector<std::uint8_t>& b) {
    if (b.size() < 12) return "short";
    std::size_t p = 12;
    std::size_t counts[4] = {be(b, 4, 2), be(b, 6, 2), be(b, 8, 2), be(b, 10, 2)};
    for (std::size_t i = 0; i < counts[0]; ++i) p = skip_dns_name(b, p) + 4;
    for (int s = 1; s < 4; ++s) {
        for (std::size_t i = 0; i < counts[s]; ++i) {
            if (p >= b.size()) return "fewer records than header count " + std::to_string(s);
            p = skip_dns_name(b, p) + 8;
            p += 2 + be(b, p, 2);
        }
    }
    if (p != b.size()) return "record data does not end at message end";
    return {};
}

/// Content-Length (first header named exactly that, case-insensitively) and
/// the byte count after the header section.
inline std::optional<std::pair<std::uint64_t, std::uint64_t>> http_cl_and_body(
    const std::vector<std::uint8_t>& b) {
    std::string s(b.begin(), b.end());
    auto end = s.find("\r\n\r\n");
    if (end == std::string::npos) return std::nullopt;
    std::string head = s.substr(0, end + 2);
    std::string lower;
    for (char c : head) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    auto at = lower.find("\r\ncontent-length:");
    if (at == std::string::npos) return std::nullopt;
    auto v = at + 17;
    while (head[v] == ' ' || head[v] == '\t') ++v;
    auto eol = head.find("\r\n", v);
    return std::make_pair(std::stoull(head.substr(v, eol - v)),
                          static_cast<std::uint64_t>(s.size() - end - 4));
}

}  // namespace testsupport

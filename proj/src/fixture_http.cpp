// SPDX-License-Identifier: Apache-2.0
#include <cctype>
#include <charconv>

#include "semfuzz/fixtures.hpp"
#include "strutil.hpp"

namespace semfuzz {

namespace {

constexpr std::size_t kMaxHead = 64 * 1024;
constexpr std::size_t kMaxBody = 1024 * 1024;
constexpr std::size_t kCrashCodings = 8;

std::string status_reply(int code, std::string_view reason, bool head_only = false) {
    std::string body = code == 200 ? "ok\n" : "";
    std::string r = "HTTP/1.1 " + std::to_string(code) + " " + std::string(reason) + "\r\n";
    if (code == 200) r += "Content-Type: text/plain\r\n";
    r += "Content-Length: " + std::to_string(body.size()) + "\r\nConnection: close\r\n\r\n";
    if (!head_only) r += body;
    return r;
}

FixtureStep reply(int code, std::string_view reason, bool head_only = false) {
    return {FixtureStep::Kind::Reply, status_reply(code, reason, head_only)};
}

FixtureStep bad_request() { return reply(400, "Bad Request"); }

bool is_tchar(char c) {
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9')) return true;
    return std::string_view("!#$%&'*+-.^_`|~").find(c) != std::string_view::npos;
}

bool is_token(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!is_tchar(c)) return false;
    return true;
}

bool valid_field_value(std::string_view v) {
    for (unsigned char c : v)
        if ((c < 0x20 && c != '\t') || c == 0x7f) return false;
    return true;
}

bool valid_host(std::string_view v) {
    for (char c : v) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                  std::string_view("-._~!$&'()*+,;=:[]%").find(c) != std::string_view::npos;
        if (!ok) return false;
    }
    return true;
}

std::vector<std::string> list_items(std::string_view v) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= v.size()) {
        auto comma = v.find(',', start);
        auto item = detail::trim(v.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                                 : comma - start));
        if (!item.empty()) out.emplace_back(item);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

bool known_content_coding(std::string_view c) {
    static const char* const known[] = {"gzip", "x-gzip", "deflate", "compress", "x-compress",
                                        "br",   "zstd",   "identity", "*"};
    for (const char* k : known)
        if (c == k) return true;
    return false;
}

bool known_transfer_coding(std::string_view c) {
    return c == "chunked" || c == "gzip" || c == "x-gzip" || c == "deflate" || c == "compress";
}

bool parse_decimal(std::string_view s, std::size_t& out) {
    if (s.empty() || s.size() > 12) return false;
    for (char c : s)
        if (c < '0' || c > '9') return false;
    std::from_chars(s.data(), s.data() + s.size(), out);
    return true;
}

enum class ChunkState { Complete, Incomplete, Malformed };

ChunkState check_chunked(std::string_view body) {
    std::size_t pos = 0;
    for (;;) {
        auto eol = body.find("\r\n", pos);
        if (eol == std::string_view::npos) return body.size() - pos > 1024 ? ChunkState::Malformed
                                                                              : ChunkState::Incomplete;
        auto line = body.substr(pos, eol - pos);
        auto semi = line.find(';');
        auto digits = detail::trim(line.substr(0, semi));
        if (digits.empty() || digits.size() > 8) return ChunkState::Malformed;
        std::size_t size = 0;
        auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), size, 16);
        if (ec != std::errc() || p != digits.data() + digits.size()) return ChunkState::Malformed;
        pos = eol + 2;
        if (size == 0) {
            // Trailer section up to the empty line.
            for (;;) {
                auto t = body.find("\r\n", pos);
                if (t == std::string_view::npos) return ChunkState::Incomplete;
                if (t == pos) return ChunkState::Complete;
                pos = t + 2;
            }
        }
        if (body.size() < pos + size + 2) return ChunkState::Incomplete;
        if (body.substr(pos + size, 2) != "\r\n") return ChunkState::Malformed;
        pos += size + 2;
    }
}

}  // namespace

FixtureStep http_fixture_step(std::string_view buf, bool eof, const std::set<BugId>& bugs) {
    auto head_end = buf.find("\r\n\r\n");
    if (head_end == std::string_view::npos) {
        if (buf.size() > kMaxHead) return reply(431, "Request Header Fields Too Large");
        return {eof ? FixtureStep::Kind::Close : FixtureStep::Kind::NeedMore, {}};
    }
    auto head = buf.substr(0, head_end);
    auto rest = buf.substr(head_end + 4);

    std::vector<std::string_view> lines;
    for (std::size_t pos = 0;;) {
        auto eol = head.find("\r\n", pos);
        lines.push_back(head.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos));
        if (eol == std::string_view::npos) break;
        pos = eol + 2;
    }
    for (auto l : lines)
        if (l.find('\n') != std::string_view::npos || l.find('\r') != std::string_view::npos)
            return bad_request();

    // request-line = method SP request-target SP HTTP-version
    auto rl = lines[0];
    auto sp1 = rl.find(' ');
    auto sp2 = sp1 == std::string_view::npos ? sp1 : rl.find(' ', sp1 + 1);
    if (sp2 == std::string_view::npos || rl.find(' ', sp2 + 1) != std::string_view::npos) return bad_request();
    auto method = rl.substr(0, sp1);
    auto target = rl.substr(sp1 + 1, sp2 - sp1 - 1);
    auto version = rl.substr(sp2 + 1);
    if (!is_token(method) || target.empty() || !valid_field_value(target) ||
        target.find('\t') != std::string_view::npos)
        return bad_request();
    bool http11 = version == "HTTP/1.1";
    if (!http11 && version != "HTTP/1.0") {
        bool shaped = version.size() == 8 && version.substr(0, 5) == "HTTP/" && version[6] == '.' &&
                      std::isdigit(static_cast<unsigned char>(version[5])) &&
                      std::isdigit(static_cast<unsigned char>(version[7]));
        return shaped ? reply(505, "HTTP Version Not Supported") : bad_request();
    }

    int hosts = 0;
    bool host_ok = true;
    std::vector<std::string> content_lengths;
    std::vector<std::string> transfer_codings;
    bool has_te = false;
    std::size_t unknown_codings = 0;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        auto l = lines[i];
        if (l.empty() || l[0] == ' ' || l[0] == '\t') return bad_request();
        auto colon = l.find(':');
        if (colon == std::string_view::npos) return bad_request();
        auto name = l.substr(0, colon);
        if (!name.empty() && detail::is_space(name.back())) {
            if (!bugs.count(BugId::ClWhitespaceAccepted)) return bad_request();
            name = detail::trim(name);
        }
        if (!is_token(name)) return bad_request();
        auto value = detail::trim(l.substr(colon + 1));
        if (!valid_field_value(value)) return bad_request();

        if (detail::iequals(name, "host")) {
            ++hosts;
            host_ok = host_ok && valid_host(value);
        } else if (detail::iequals(name, "content-length")) {
            auto items = list_items(value);
            if (items.empty()) return bad_request();
            for (auto& item : items) content_lengths.push_back(std::move(item));
        } else if (detail::iequals(name, "transfer-encoding")) {
            has_te = true;
            for (auto& c : list_items(value)) {
                auto semi = c.find(';');
                transfer_codings.push_back(detail::to_lower(detail::trim(std::string_view(c).substr(0, semi))));
            }
        } else if (detail::iequals(name, "accept-encoding")) {
            for (auto& c : list_items(value)) {
                auto semi = c.find(';');
                auto coding = detail::to_lower(detail::trim(std::string_view(c).substr(0, semi)));
                if (!known_content_coding(coding)) ++unknown_codings;
            }
        }
    }

    if (hosts > 1 || (http11 && hosts == 0) || !host_ok) return bad_request();

    std::size_t body_len = 0;
    bool chunked = false;
    if (has_te) {
        if (!content_lengths.empty()) return bad_request();
        if (transfer_codings.empty()) return bad_request();
        for (const auto& c : transfer_codings)
            if (!known_transfer_coding(c)) return reply(501, "Not Implemented");
        if (transfer_codings.back() != "chunked") return bad_request();
        chunked = true;
    } else if (!content_lengths.empty()) {
        if (!parse_decimal(content_lengths[0], body_len)) return bad_request();
        for (const auto& cl : content_lengths)
            if (cl != content_lengths[0]) return bad_request();
        if (body_len > kMaxBody) return reply(413, "Content Too Large");
    }

    if (chunked) {
        switch (check_chunked(rest)) {
            case ChunkState::Malformed: return bad_request();
            case ChunkState::Incomplete:
                return {eof ? FixtureStep::Kind::Close : FixtureStep::Kind::NeedMore, {}};
            case ChunkState::Complete: break;
        }
    } else if (rest.size() < body_len) {
        return {eof ? FixtureStep::Kind::Close : FixtureStep::Kind::NeedMore, {}};
    }

    static const char* const methods[] = {"GET", "HEAD", "POST", "PUT", "DELETE", "OPTIONS", "PATCH", "TRACE"};
    bool known = false;
    for (const char* m : methods)
        if (method == m) known = true;
    if (!known) return reply(501, "Not Implemented");

    if (unknown_codings >= kCrashCodings && bugs.count(BugId::AcceptEncodingCrashSim))
        return {FixtureStep::Kind::Crash, {}};
    return reply(200, "OK", method == "HEAD");
}

}  // namespace semfuzz

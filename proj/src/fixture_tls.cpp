// SPDX-License-Identifier: Apache-2.0
//
// ClientHello checks of a TLS 1.3-only server. Parsing is done here by hand
// rather than through the codec so the fixture does not share its bugs.
#include <algorithm>
#include <map>

#include "semfuzz/fixtures.hpp"

namespace semfuzz {

namespace {

enum Alert : std::uint8_t {
    unexpected_message = 10,
    record_overflow = 22,
    handshake_failure = 40,
    illegal_parameter = 47,
    decode_error = 50,
    protocol_version = 70,
    missing_extension = 109,
};

enum Ext : std::uint16_t {
    server_name = 0,
    supported_groups = 10,
    signature_algorithms = 13,
    alpn = 16,
    pre_shared_key = 41,
    supported_versions = 43,
    psk_key_exchange_modes = 45,
    key_share = 51,
};

struct Reader {
    std::string_view d;
    std::size_t pos = 0;
    bool ok = true;

    std::size_t left() const { return d.size() - pos; }
    std::uint32_t uint(int n) {
        if (left() < static_cast<std::size_t>(n)) {
            ok = false;
            pos = d.size();
            return 0;
        }
        std::uint32_t v = 0;
        for (int i = 0; i < n; ++i) v = (v << 8) | static_cast<std::uint8_t>(d[pos++]);
        return v;
    }
    std::string_view bytes(std::size_t n) {
        if (left() < n) {
            ok = false;
            pos = d.size();
            return {};
        }
        auto s = d.substr(pos, n);
        pos += n;
        return s;
    }
    /// Length-prefixed vector.
    std::string_view vec(int len_bytes) { return bytes(uint(len_bytes)); }
};

FixtureStep alert(Alert a) {
    std::string r = {'\x15', '\x03', '\x03', '\x00', '\x02', '\x02', static_cast<char>(a)};
    return {FixtureStep::Kind::Reply, r};
}

struct Extension {
    std::uint16_t type;
    std::string_view data;
};

// Each known extension body must be consumed exactly by its own syntax.
bool well_formed(const Extension& e) {
    Reader r{e.data};
    switch (e.type) {
        case server_name: {
            Reader list{r.vec(2)};
            if (!r.ok || r.left() || list.d.empty()) return false;
            while (list.left()) {
                list.uint(1);
                if (list.vec(2).empty()) return false;
            }
            return list.ok;
        }
        case supported_groups:
        case signature_algorithms: {
            auto v = r.vec(2);
            return r.ok && !r.left() && !v.empty() && v.size() % 2 == 0;
        }
        case alpn: {
            Reader list{r.vec(2)};
            if (!r.ok || r.left() || list.d.empty()) return false;
            while (list.left())
                if (list.vec(1).empty()) return false;
            return list.ok;
        }
        case supported_versions: {
            auto v = r.vec(1);
            return r.ok && !r.left() && !v.empty() && v.size() % 2 == 0;
        }
        case psk_key_exchange_modes: {
            auto v = r.vec(1);
            return r.ok && !r.left() && !v.empty();
        }
        case key_share: {
            Reader list{r.vec(2)};
            if (!r.ok || r.left()) return false;
            while (list.left()) {
                list.uint(2);
                if (list.vec(2).empty()) return false;
            }
            return list.ok;
        }
        case pre_shared_key: {
            Reader ids{r.vec(2)};
            Reader binders{r.vec(2)};
            if (!r.ok || r.left() || ids.d.empty() || binders.d.empty()) return false;
            std::size_t n_ids = 0, n_binders = 0;
            while (ids.left()) {
                if (ids.vec(2).empty()) return false;
                ids.uint(4);
                ++n_ids;
            }
            while (binders.left()) {
                if (binders.vec(1).size() < 32) return false;
                ++n_binders;
            }
            return ids.ok && binders.ok && n_ids == n_binders;
        }
        default: return true;
    }
}

std::vector<std::uint16_t> u16_list(std::string_view v) {
    std::vector<std::uint16_t> out;
    Reader r{v};
    while (r.left() >= 2) out.push_back(static_cast<std::uint16_t>(r.uint(2)));
    return out;
}

std::string u16(std::uint32_t v) { return {static_cast<char>(v >> 8), static_cast<char>(v & 0xff)}; }
std::string u24(std::uint32_t v) { return static_cast<char>(v >> 16) + u16(v & 0xffff); }

std::string server_hello(std::string_view session_id, std::uint16_t suite, std::optional<std::uint16_t> group) {
    std::string exts = u16(supported_versions) + u16(2) + u16(0x0304);
    if (group) {
        std::string key(32, '\0');
        for (std::size_t i = 0; i < key.size(); ++i) key[i] = static_cast<char>(0x40 + i);
        exts += u16(key_share) + u16(4 + key.size()) + u16(*group) + u16(key.size()) + key;
    }
    std::string body = u16(0x0303);
    for (int i = 0; i < 32; ++i) body.push_back(static_cast<char>(0xa0 + i));
    body += static_cast<char>(session_id.size());
    body += session_id;
    body += u16(suite);
    body += '\0';
    body += u16(exts.size()) + exts;
    std::string hs = "\x02" + u24(body.size()) + body;
    return std::string("\x16\x03\x03", 3) + u16(hs.size()) + hs;
}

}  // namespace

FixtureStep tls_fixture_step(std::string_view buf, bool eof, const std::set<BugId>& bugs) {
    if (buf.size() < 5) return {eof ? FixtureStep::Kind::Close : FixtureStep::Kind::NeedMore, {}};
    Reader rec{buf};
    auto content_type = rec.uint(1);
    rec.uint(2);  // legacy_record_version is not checked
    auto len = rec.uint(2);
    if (len > 16384) return alert(record_overflow);
    if (content_type != 22) return alert(unexpected_message);
    if (rec.left() < len) return {eof ? FixtureStep::Kind::Close : FixtureStep::Kind::NeedMore, {}};

    Reader hs{rec.bytes(len)};
    auto msg_type = hs.uint(1);
    auto hs_len = hs.uint(3);
    if (!hs.ok) return alert(decode_error);
    if (msg_type != 1) return alert(unexpected_message);
    if (hs_len != hs.left()) return alert(decode_error);

    Reader ch{hs.bytes(hs_len)};
    ch.uint(2);  // legacy_version: negotiation uses supported_versions only
    ch.bytes(32);
    auto session_id = ch.vec(1);
    auto suites_raw = ch.vec(2);
    auto compression = ch.vec(1);
    if (!ch.ok || session_id.size() > 32 || suites_raw.empty() || suites_raw.size() % 2 || compression.empty())
        return alert(decode_error);

    std::vector<Extension> exts;
    if (ch.left()) {
        Reader block{ch.vec(2)};
        if (!ch.ok || ch.left()) return alert(decode_error);
        while (block.left()) {
            auto type = static_cast<std::uint16_t>(block.uint(2));
            auto data = block.vec(2);
            if (!block.ok) return alert(decode_error);
            exts.push_back({type, data});
        }
    }

    std::map<std::uint16_t, std::size_t> index;
    for (std::size_t i = 0; i < exts.size(); ++i) {
        if (!index.emplace(exts[i].type, i).second) return alert(illegal_parameter);
        if (!well_formed(exts[i])) return alert(decode_error);
    }
    auto find = [&](std::uint16_t t) -> const Extension* {
        auto it = index.find(t);
        return it == index.end() ? nullptr : &exts[it->second];
    };

    auto* sv = find(supported_versions);
    if (!sv) return alert(protocol_version);
    {
        Reader r{sv->data};
        auto versions = u16_list(r.vec(1));
        if (std::find(versions.begin(), versions.end(), 0x0304) == versions.end())
            return alert(protocol_version);
    }
    if (compression != std::string_view("\0", 1)) return alert(illegal_parameter);

    std::uint16_t suite = 0;
    for (auto s : u16_list(suites_raw))
        if (s >= 0x1301 && s <= 0x1305) {
            suite = s;
            break;
        }
    if (!suite) return alert(handshake_failure);

    auto* psk = find(pre_shared_key);
    if (psk && index[pre_shared_key] != exts.size() - 1 && !bugs.count(BugId::PskNotLastAccepted))
        return alert(illegal_parameter);
    if (psk && !find(psk_key_exchange_modes)) return alert(missing_extension);

    auto* ks = find(key_share);
    auto* groups = find(supported_groups);
    if (!ks && !psk) return alert(missing_extension);
    if (!psk && !find(signature_algorithms)) return alert(missing_extension);
    std::optional<std::uint16_t> chosen;
    if (ks) {
        if (!groups) return alert(missing_extension);
        Reader gr{groups->data};
        auto offered = u16_list(gr.vec(2));
        Reader kr{ks->data};
        Reader shares{kr.vec(2)};
        std::vector<std::uint16_t> seen;
        while (shares.left()) {
            auto g = static_cast<std::uint16_t>(shares.uint(2));
            shares.vec(2);
            if (std::find(offered.begin(), offered.end(), g) == offered.end() ||
                std::find(seen.begin(), seen.end(), g) != seen.end())
                return alert(illegal_parameter);
            seen.push_back(g);
        }
        if (!seen.empty()) chosen = seen.front();
    }
    return {FixtureStep::Kind::Reply, server_hello(session_id, suite, chosen)};
}

}  // namespace semfuzz

// SPDX-License-Identifier: Apache-2.0
//
// Random action sequences that stay within what the codecs can re-decode,
// and the wire-level check run on the result. Shared by the unit tests and
// the acceptance binary.
#pragma once

#include <random>
#include <sstream>

#include "semfuzz/testcase.hpp"
#include "support.hpp"

namespace testsupport {

class ActionGen {
public:
    explicit ActionGen(std::uint32_t seed) : rng_(seed) {}

    std::size_t below(std::size_t n) { return n == 0 ? 0 : std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
    bool coin() { return below(2) == 0; }

    semfuzz::Bytes random_bytes(std::size_t max_len) {
        semfuzz::Bytes b(below(max_len + 1));
        for (auto& x : b) x = static_cast<std::uint8_t>(below(256));
        return b;
    }

    /// 1..4 actions, each chosen against the message as the earlier ones left it.
    semfuzz::ActionSequence sequence(const semfuzz::Message& seed) {
        semfuzz::ActionSequence seq{"prop", {}};
        auto cur = seed;
        std::size_t n = 1 + below(4);
        for (std::size_t tries = 0; seq.actions.size() < n && tries < 64; ++tries) {
            auto a = next(cur);
            if (!a) continue;
            auto step = semfuzz::apply_actions(cur, {"prop", {*a}});
            if (!step.valid) continue;
            seq.actions.push_back(*a);
            cur = step.message;
        }
        return seq;
    }

private:
    using Action = semfuzz::Action;
    using FieldPath = semfuzz::FieldPath;
    using FieldNode = semfuzz::FieldNode;
    using FieldValue = semfuzz::FieldValue;

    static Action update(const std::string& path, std::optional<semfuzz::Json> v) {
        Action a;
        a.kind = Action::Kind::Update;
        a.target = FieldPath::parse(path);
        a.new_value = std::move(v);
        return a;
    }
    static Action remove(const std::string& path) {
        Action a;
        a.kind = Action::Kind::Remove;
        a.target = FieldPath::parse(path);
        return a;
    }
    static Action add(const std::string& parent, std::optional<std::size_t> pos, FieldNode n) {
        Action a;
        a.kind = Action::Kind::Add;
        a.target = FieldPath::parse(parent);
        a.position = pos;
        a.new_field = std::move(n);
        return a;
    }

    static std::size_t count(const semfuzz::Message& m, const std::string& path) {
        auto p = FieldPath::parse(path);
        if (!semfuzz::contains(m, p)) return 0;
        return semfuzz::get(m, p).value.as_composite().children.size();
    }

    static std::string hex(const semfuzz::Bytes& b) {
        static const char* d = "0123456789abcdef";
        std::string s;
        for (auto x : b) {
            s.push_back(d[x >> 4]);
            s.push_back(d[x & 15]);
        }
        return s;
    }

    std::string token(const char* prefix) {
        std::ostringstream o;
        o << prefix << below(100000);
        return o.str();
    }

    std::optional<Action> next(const semfuzz::Message& m) {
        switch (m.protocol) {
            case semfuzz::Protocol::Tls13: return next_tls(m);
            case semfuzz::Protocol::Dns: return next_dns(m);
            case semfuzz::Protocol::Http1: return next_http(m);
            default: return std::nullopt;
        }
    }

    std::optional<Action> next_tls(const semfuzz::Message& m) {
        std::size_t exts = count(m, "handshake.extensions");
        std::size_t suites = count(m, "handshake.cipher_suites");
        switch (below(7)) {
            case 0: {
                // Private-use extension codes so the receiver-side parse stays opaque.
                auto type = static_cast<std::uint64_t>(0xfe00 + below(256));
                FieldNode ext("extension", FieldValue::composite({
                    FieldNode("type", FieldValue::uint(type, 16)),
                    FieldNode("length", FieldValue::uint(below(65536), 16)),
                    FieldNode("data", FieldValue::bytes(random_bytes(40))),
                }));
                std::optional<std::size_t> pos;
                if (coin()) pos = below(exts + 1);
                return add("handshake.extensions", pos, std::move(ext));
            }
            case 1:
                if (exts == 0) return std::nullopt;
                return remove("handshake.extensions[" + std::to_string(below(exts)) + "]");
            case 2:
                if (exts == 0) return std::nullopt;
                return update("handshake.extensions[" + std::to_string(below(exts)) + "].data",
                              semfuzz::Json(hex(random_bytes(48))));
            case 3:
                return add("handshake.cipher_suites", below(suites + 1),
                           FieldNode("cipher_suite", FieldValue::uint(below(65536), 16)));
            case 4:
                if (suites < 2) return std::nullopt;
                return remove("handshake.cipher_suites[" + std::to_string(below(suites)) + "]");
            case 5: return update("handshake.session_id", semfuzz::Json(hex(random_bytes(32))));
            default: return update("handshake.extensions_length", std::nullopt);
        }
    }

    std::optional<Action> next_dns(const semfuzz::Message& m) {
        static const char* sections[] = {"answer", "authority", "additional"};
        std::string sec = sections[below(3)];
        std::size_t n = count(m, sec);
        switch (below(5)) {
            case 0: {
                FieldNode rr("rr", FieldValue::composite({
                    FieldNode("name", FieldValue::text(token("h") + ".example.com")),
                    FieldNode("type", FieldValue::uint(65280 + below(200), 16)),
                    FieldNode("class", FieldValue::uint(1, 16)),
                    FieldNode("ttl", FieldValue::uint(below(86400), 32)),
                    FieldNode("rdlength", FieldValue::uint(0, 16)),
                    FieldNode("rdata", FieldValue::bytes(random_bytes(24))),
                }));
                std::optional<std::size_t> pos;
                if (coin()) pos = below(n + 1);
                return add(sec, pos, std::move(rr));
            }
            case 1:
                if (n == 0) return std::nullopt;
                return remove(sec + "[" + std::to_string(below(n)) + "]");
            case 2:
                if (n == 0) return std::nullopt;
                return update(sec + "[" + std::to_string(below(n)) + "].ttl", semfuzz::Json(below(1u << 31)));
            case 3: return update("header.id", semfuzz::Json(below(65536)));
            default: return update("header.ancount", std::nullopt);
        }
    }

    std::optional<Action> next_http(const semfuzz::Message& m) {
        auto& headers = semfuzz::get(m, FieldPath::parse("headers")).value.as_composite().children;
        bool has_cl = false, chunked = false;
        std::vector<std::size_t> removable;
        for (std::size_t i = 0; i < headers.size(); ++i) {
            const auto& h = headers[i];
            if (h.name == "Content-Length") has_cl = true;
            else if (h.name == "Transfer-Encoding") chunked = true;
            else removable.push_back(i);
        }
        switch (below(4)) {
            case 0: {
                auto name = token("X-Prop-");
                FieldNode h(name, FieldValue::composite({
                    FieldNode("name", FieldValue::text(name)),
                    FieldNode("separator", FieldValue::text(": ")),
                    FieldNode("value", FieldValue::text(token("v"))),
                }));
                return add("headers", below(headers.size() + 1), std::move(h));
            }
            case 1:
                if (removable.empty()) return std::nullopt;
                return remove("headers[" + std::to_string(removable[below(removable.size())]) + "]");
            case 2:
                if (removable.empty()) return std::nullopt;
                return update("headers[" + std::to_string(removable[below(removable.size())]) + "].value",
                              semfuzz::Json(token("w")));
            default:
                if (!has_cl || chunked) return std::nullopt;
                return update("body", semfuzz::Json(hex(random_bytes(64))));
        }
    }

    std::mt19937 rng_;
};

/// Empty when the case re-decodes, re-encodes to the same bytes and every
/// length/count on the wire matches the independent walkers.
inline std::string check_case_wire(const semfuzz::TestCase& tc) {
    semfuzz::Message back;
    try {
        back = semfuzz::decode(tc.protocol, tc.message_type, tc.wire);
    } catch (const std::exception& e) {
        return std::string("re-decode failed: ") + e.what();
    }
    if (semfuzz::encode(back) != tc.wire) return "re-encode differs";
    std::string bad;
    switch (tc.protocol) {
        case semfuzz::Protocol::Tls13: bad = tls_length_mismatch(tc.wire); break;
        case semfuzz::Protocol::Dns: bad = dns_count_mismatch(tc.wire); break;
        case semfuzz::Protocol::Http1:
            if (auto cl = http_cl_and_body(tc.wire); cl && cl->first != cl->second) bad = "content-length";
            break;
        default: break;
    }
    return bad;
}

}  // namespace testsupport

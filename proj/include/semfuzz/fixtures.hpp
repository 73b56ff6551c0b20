// SPDX-License-Identifier: Apache-2.0
//
// Reference protocol servers used as campaign targets. Each one follows the
// relevant RFC requirements except where a planted bug is switched on.
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "semfuzz/codec.hpp"

namespace semfuzz {

enum class BugId {
    /// TLS: a ClientHello whose pre_shared_key is not the last extension is answered normally.
    PskNotLastAccepted,
    /// HTTP: whitespace between a header name and the colon is tolerated.
    ClWhitespaceAccepted,
    /// DNS resolver: every answer record of an upstream response is cached.
    DnsExtraRecordCached,
    /// HTTP: 8 or more unknown Accept-Encoding codings kill the server.
    AcceptEncodingCrashSim,
};

std::string_view to_string(BugId b) noexcept;
/// Throws ConfigError.
BugId bug_from_string(std::string_view s);
std::vector<BugId> all_bugs();
/// The protocol whose fixture hosts the bug.
Protocol bug_protocol(BugId b) noexcept;

/// A query for this name empties a resolver fixture's cache.
inline constexpr std::string_view kDnsFlushName = "flush.semfuzz.invalid";

struct FixtureConfig {
    Protocol protocol = Protocol::Http1;
    std::set<BugId> bugs;
    std::string host = "127.0.0.1";
    /// 0 picks an ephemeral port.
    std::uint16_t port = 0;
    /// DNS only. With an upstream the fixture is a caching forwarder,
    /// otherwise it is authoritative for a small built-in zone.
    std::string upstream_host;
    std::uint16_t upstream_port = 0;
    int upstream_timeout_ms = 500;
    /// Idle limit while reading a request on a TCP connection.
    int read_timeout_ms = 2000;
};

class Fixture {
public:
    virtual ~Fixture() = default;
    virtual std::uint16_t port() const noexcept = 0;
    /// Closes the listener and in-flight connections. Idempotent.
    virtual void shutdown() = 0;
    /// True once a simulated crash has taken the server down.
    virtual bool crashed() const noexcept = 0;
    virtual const FixtureConfig& config() const noexcept = 0;
};

/// Throws PortInUse, IoError or ConfigError (DNS bug on a non-DNS fixture etc.).
std::unique_ptr<Fixture> serve(const FixtureConfig& cfg);

// Request handlers, exposed for direct testing.

struct FixtureStep {
    enum class Kind { NeedMore, Reply, Close, Crash };
    Kind kind = Kind::NeedMore;
    std::string reply;
};

/// `buf` holds everything received so far on the connection.
FixtureStep http_fixture_step(std::string_view buf, bool eof, const std::set<BugId>& bugs);
FixtureStep tls_fixture_step(std::string_view buf, bool eof, const std::set<BugId>& bugs);

/// Authoritative answer for one query datagram; nullopt means drop it.
std::optional<WireBytes> dns_authoritative_reply(std::span<const std::uint8_t> query);

}  // namespace semfuzz

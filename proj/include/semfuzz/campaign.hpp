// SPDX-License-Identifier: Apache-2.0
//
// Sends test cases to a live target, classifies what comes back into the
// Normal/Error feedback classes and compares that with the expectation.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "semfuzz/testcase.hpp"

namespace semfuzz {

enum class Transport { Tcp, Udp };
enum class CampaignMode {
    /// We are the client and send the case as a request.
    Client,
    /// We wait for the target's request and send the case as the response.
    Responder,
};

std::string_view to_string(Transport t) noexcept;
std::string_view to_string(CampaignMode m) noexcept;
/// Accepts "client", "client-sends-case", "responder", "responder-sends-case".
/// Throws ConfigError.
CampaignMode mode_from_string(std::string_view s);

struct Endpoint {
    Protocol protocol = Protocol::Http1;
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;
    Transport transport = Transport::Tcp;
    CampaignMode mode = CampaignMode::Client;
    /// Read responses as TLS records.
    bool tls_like = false;
    /// Responder mode: where the target's requests arrive.
    std::string listen_host = "127.0.0.1";
    std::uint16_t listen_port = 0;
    /// DNS responder mode: query sent before each case to reset the target's
    /// cache; empty disables it.
    std::string dns_flush_name;
};

/// Transport and tls_like defaults for the protocol.
Endpoint default_endpoint(Protocol p, const std::string& host, std::uint16_t port,
                          CampaignMode mode = CampaignMode::Client);

struct RawOutcome {
    enum class Kind { Bytes, Timeout, ConnectionRefused, ConnectionReset };
    Kind kind = Kind::Timeout;
    WireBytes bytes;
    double rtt_ms = 0;
    int deadline_ms = 0;

    static RawOutcome of_bytes(WireBytes b, double rtt) { return {Kind::Bytes, std::move(b), rtt, 0}; }
    static RawOutcome timeout(int deadline) { return {Kind::Timeout, {}, 0, deadline}; }
    static RawOutcome refused() { return {Kind::ConnectionRefused, {}, 0, 0}; }
    static RawOutcome reset() { return {Kind::ConnectionReset, {}, 0, 0}; }
};

std::string_view to_string(RawOutcome::Kind k) noexcept;

struct ClassifyContext {
    /// DNS: the name the observed answer must be about, dotted. Empty means
    /// the question carried in the response.
    std::string qname;
};

/// What execute saw, plus the context classify needs for it.
struct Observation {
    RawOutcome outcome;
    ClassifyContext context;
    std::string note;
};

/// Never throws; failures are RawOutcome variants.
Observation execute(const TestCase& tc, const Endpoint& ep, int timeout_ms);

struct Classification {
    FeedbackClass cls = FeedbackClass::Error;
    std::string detail;
};

Classification classify(Protocol protocol, const RawOutcome& outcome, const ClassifyContext& ctx = {});

enum class VerdictStatus { Consistent, PotentialVulnerability, Indeterminate };
std::string_view to_string(VerdictStatus s) noexcept;

/// PotentialVulnerability iff expected != actual.
VerdictStatus verify(FeedbackClass expected, FeedbackClass actual) noexcept;

struct Verdict {
    std::string case_id;
    std::string strategy_id;
    std::string rule_id;
    Protocol protocol = Protocol::Dns;
    CampaignMode mode = CampaignMode::Client;
    FeedbackClass expected = FeedbackClass::Error;
    /// Absent when the case was not run because the target was down.
    std::optional<FeedbackClass> actual;
    RawOutcome raw;
    VerdictStatus status = VerdictStatus::Consistent;
    std::string detail;
    WireBytes wire;
};

struct CampaignConfig {
    int timeout_ms = 2000;
    int workers = 8;
    /// Send a known-good message before the first case and after each one.
    bool probe = false;
    ProbeSet probes;
};

struct SkippedCase {
    std::string case_id;
    std::string reason;
};

struct CampaignReport {
    std::vector<Verdict> verdicts;
    std::vector<SkippedCase> skipped;
    /// Case after which the probe first failed.
    std::optional<std::string> target_down_after;
    std::size_t count(VerdictStatus s) const;
};

/// Cases that do not match the endpoint (protocol, or sender role vs mode)
/// and invalid cases are skipped. Verdicts keep case order. Runs with
/// probing, and all responder runs, are sequential.
CampaignReport run_campaign(const std::vector<TestCase>& cases, const Endpoint& ep, const CampaignConfig& cfg);

Json to_json(const Verdict& v);
/// One JSON object per line, no timing data, so reruns compare byte for byte.
std::string findings_jsonl(const std::vector<Verdict>& verdicts);
/// Counts, the potential vulnerabilities with their wire bytes and the
/// rule -> strategy -> case -> verdict chain.
Json campaign_summary(const CampaignReport& report, const std::string& config_hash);

}  // namespace semfuzz

// SPDX-License-Identifier: Apache-2.0
#include "semfuzz/campaign.hpp"

#include <algorithm>
#include <charconv>
#include <mutex>
#include <set>

#include "net.hpp"
#include "parallel.hpp"
#include "semfuzz/errors.hpp"
#include "semfuzz/hex.hpp"
#include "strutil.hpp"

namespace semfuzz {

namespace {

using detail::Clock;
using detail::IoStatus;

constexpr std::uint16_t kFollowUpId = 0x5346;
constexpr std::uint16_t kTriggerId = 0x5345;
constexpr std::uint16_t kFlushId = 0x5344;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

RawOutcome from_status(IoStatus s, int timeout_ms) {
    switch (s) {
        case IoStatus::Refused: return RawOutcome::refused();
        case IoStatus::Timeout: return RawOutcome::timeout(timeout_ms);
        default: return RawOutcome::reset();
    }
}

WireBytes to_wire(const std::string& s) { return WireBytes(s.begin(), s.end()); }

// ---- response framing --------------------------------------------------

enum class Unit { Complete, Partial };

Unit http_unit(const std::string& buf) {
    auto end = buf.find("\r\n\r\n");
    if (end == std::string::npos) return Unit::Partial;
    auto head = detail::to_lower(std::string_view(buf).substr(0, end));
    auto body = std::string_view(buf).substr(end + 4);
    auto cl = head.find("\r\ncontent-length:");
    if (cl != std::string::npos) {
        auto v = detail::trim(std::string_view(head).substr(cl + 17, head.find("\r\n", cl + 2) - cl - 17));
        std::size_t n = 0;
        std::from_chars(v.data(), v.data() + v.size(), n);
        return body.size() >= n ? Unit::Complete : Unit::Partial;
    }
    if (head.find("\r\ntransfer-encoding:") != std::string::npos)
        return body.find("0\r\n\r\n") != std::string_view::npos ? Unit::Complete : Unit::Partial;
    // Status codes without a body, otherwise read until close.
    auto code = head.substr(9, 3);
    if (code == "204" || code == "304" || code[0] == '1') return Unit::Complete;
    return Unit::Partial;
}

Unit tls_unit(const std::string& buf) {
    if (buf.size() < 5) return Unit::Partial;
    std::size_t len = (static_cast<std::uint8_t>(buf[3]) << 8) | static_cast<std::uint8_t>(buf[4]);
    return buf.size() >= 5 + len ? Unit::Complete : Unit::Partial;
}

// Reads the first response unit; whatever arrived before close or the
// deadline is returned as bytes.
RawOutcome read_unit(int fd, bool tls_like, Clock::time_point t0, Clock::time_point deadline, int timeout_ms) {
    std::string buf;
    for (;;) {
        auto st = detail::recv_some(fd, buf, deadline);
        if (st == IoStatus::Ok) {
            if ((tls_like ? tls_unit(buf) : http_unit(buf)) == Unit::Complete) break;
            continue;
        }
        if (!buf.empty()) break;
        if (st == IoStatus::Closed) return RawOutcome::reset();
        return from_status(st, timeout_ms);
    }
    if (tls_like && buf.size() >= 5) {
        std::size_t len = (static_cast<std::uint8_t>(buf[3]) << 8) | static_cast<std::uint8_t>(buf[4]);
        buf.resize(std::min(buf.size(), 5 + len));
    }
    return RawOutcome::of_bytes(to_wire(buf), ms_since(t0));
}

// ---- DNS helpers ----------------------------------------------------------

std::string fold_name(std::string_view n) {
    auto s = detail::to_lower(n);
    while (!s.empty() && s.back() == '.') s.pop_back();
    return s;
}

WireBytes dns_query(std::uint16_t id, const std::string& name, std::uint16_t qtype) {
    WireBytes w = {static_cast<std::uint8_t>(id >> 8), static_cast<std::uint8_t>(id), 0x01, 0x00, 0, 1, 0, 0, 0, 0, 0, 0};
    std::string_view rest = name;
    while (!rest.empty()) {
        auto dot = rest.find('.');
        auto label = rest.substr(0, dot);
        w.push_back(static_cast<std::uint8_t>(label.size()));
        w.insert(w.end(), label.begin(), label.end());
        if (dot == std::string_view::npos) break;
        rest.remove_prefix(dot + 1);
    }
    w.push_back(0);
    w.push_back(static_cast<std::uint8_t>(qtype >> 8));
    w.push_back(static_cast<std::uint8_t>(qtype));
    w.push_back(0);
    w.push_back(1);
    return w;
}

struct DnsView {
    std::uint16_t id = 0;
    std::uint16_t flags = 0;
    std::string qname;
    std::uint16_t qtype = 0;
    struct Rr {
        std::string name;
        std::uint16_t type;
        std::string target;  // CNAME data
    };
    std::vector<Rr> answers;
};

DnsView dns_view(const Message& m) {
    DnsView v;
    v.id = static_cast<std::uint16_t>(get(m, FieldPath::parse("header.id")).value.as_uint().value);
    v.flags = static_cast<std::uint16_t>(get(m, FieldPath::parse("header.flags")).value.as_uint().value);
    const auto& qs = get(m, FieldPath::parse("question")).value.as_composite().children;
    if (!qs.empty()) {
        v.qname = get(m, FieldPath::parse("question[0].qname")).value.as_text();
        v.qtype = static_cast<std::uint16_t>(get(m, FieldPath::parse("question[0].qtype")).value.as_uint().value);
    }
    const auto& ans = get(m, FieldPath::parse("answer")).value.as_composite().children;
    for (std::size_t i = 0; i < ans.size(); ++i) {
        auto base = "answer[" + std::to_string(i) + "].";
        DnsView::Rr rr;
        rr.name = get(m, FieldPath::parse(base + "name")).value.as_text();
        rr.type = static_cast<std::uint16_t>(get(m, FieldPath::parse(base + "type")).value.as_uint().value);
        const auto& rd = get(m, FieldPath::parse(base + "rdata")).value;
        if (rr.type == 5 && rd.kind() == FieldValue::Kind::Text) rr.target = rd.as_text();
        v.answers.push_back(std::move(rr));
    }
    return v;
}

RawOutcome udp_exchange(const detail::SockAddr& to, const WireBytes& out, int timeout_ms,
                        std::optional<std::uint16_t> want_id = std::nullopt) {
    auto t0 = Clock::now();
    auto deadline = t0 + std::chrono::milliseconds(timeout_ms);
    detail::Fd fd;
    try {
        fd = detail::udp_socket_for(to);
    } catch (const Error&) {
        return RawOutcome::reset();
    }
    if (::connect(fd.get(), to.get(), to.len) != 0) return RawOutcome::refused();
    if (::send(fd.get(), out.data(), out.size(), 0) < 0)
        return errno == ECONNREFUSED ? RawOutcome::refused() : RawOutcome::reset();
    for (;;) {
        std::string buf;
        auto st = detail::recv_some(fd.get(), buf, deadline);
        if (st != IoStatus::Ok) return from_status(st, timeout_ms);
        if (want_id && (buf.size() < 2 || ((static_cast<std::uint8_t>(buf[0]) << 8) |
                                           static_cast<std::uint8_t>(buf[1])) != *want_id))
            continue;
        return RawOutcome::of_bytes(to_wire(buf), ms_since(t0));
    }
}

// ---- execution ----------------------------------------------------------

Observation execute_tcp_client(const TestCase& tc, const Endpoint& ep, int timeout_ms) {
    auto t0 = Clock::now();
    auto deadline = t0 + std::chrono::milliseconds(timeout_ms);
    detail::Fd fd;
    auto st = detail::tcp_connect(detail::resolve(ep.host, ep.port), deadline, fd);
    if (st != IoStatus::Ok) return {from_status(st, timeout_ms), {}, "connect failed"};
    st = detail::send_all(fd.get(), tc.wire, deadline);
    if (st != IoStatus::Ok && st != IoStatus::Reset) return {from_status(st, timeout_ms), {}, "send failed"};
    return {read_unit(fd.get(), ep.tls_like, t0, deadline, timeout_ms), {}, {}};
}

Observation execute_tcp_responder(const TestCase& tc, const Endpoint& ep, int timeout_ms) {
    auto t0 = Clock::now();
    auto deadline = t0 + std::chrono::milliseconds(timeout_ms);
    auto listener = detail::tcp_listen(ep.listen_host, ep.listen_port, 4);
    if (!detail::wait_readable(listener.get(), detail::remaining_ms(deadline)))
        return {RawOutcome::timeout(timeout_ms), {}, "no peer connected"};
    detail::Fd conn(::accept4(listener.get(), nullptr, nullptr, SOCK_CLOEXEC));
    if (!conn) return {RawOutcome::reset(), {}, "accept failed"};
    std::string request;
    auto st = detail::recv_some(conn.get(), request, deadline);
    if (st != IoStatus::Ok) return {from_status(st, timeout_ms), {}, "no request from peer"};
    st = detail::send_all(conn.get(), tc.wire, deadline);
    if (st != IoStatus::Ok) return {from_status(st, timeout_ms), {}, "send failed"};
    // The peer's next move is the observable reaction.
    return {read_unit(conn.get(), ep.tls_like, t0, deadline, timeout_ms), {}, "peer reaction"};
}

// Responder flow against a caching resolver: reset its cache, make it ask
// us the seed's question, answer with the case, then ask it again.
Observation execute_dns_responder(const TestCase& tc, const Endpoint& ep, int timeout_ms) {
    auto target = detail::resolve(ep.host, ep.port);
    auto listener = detail::udp_bind(ep.listen_host, ep.listen_port);

    DnsView seed_q, case_v;
    try {
        case_v = dns_view(tc.message);
        seed_q = tc.seed_wire.empty() ? case_v : dns_view(decode(Protocol::Dns, "", tc.seed_wire));
    } catch (const Error& e) {
        return {RawOutcome::reset(), {}, std::string("case is not a DNS message: ") + e.what()};
    }

    if (!ep.dns_flush_name.empty()) udp_exchange(target, dns_query(kFlushId, ep.dns_flush_name, 1), timeout_ms);

    detail::Fd client = detail::udp_socket_for(target);
    auto trigger = dns_query(kTriggerId, seed_q.qname, seed_q.qtype);
    if (::sendto(client.get(), trigger.data(), trigger.size(), 0, target.get(), target.len) < 0)
        return {RawOutcome::refused(), {}, "trigger not sent"};

    auto deadline = Clock::now() + std::chrono::milliseconds(timeout_ms);
    bool answered = false;
    std::vector<std::uint8_t> buf(65535);
    while (!answered) {
        int left = detail::remaining_ms(deadline);
        if (left <= 0 || !detail::wait_readable(listener.get(), left)) break;
        detail::SockAddr from;
        from.len = sizeof from.storage;
        ssize_t n = ::recvfrom(listener.get(), buf.data(), buf.size(), 0, from.get(), &from.len);
        if (n < 12) continue;
        Message q;
        try {
            q = decode(Protocol::Dns, "", std::span<const std::uint8_t>(buf.data(), static_cast<std::size_t>(n)));
        } catch (const Error&) {
            continue;
        }
        auto qv = dns_view(q);
        if (fold_name(qv.qname) != fold_name(seed_q.qname) || qv.qtype != seed_q.qtype) continue;
        WireBytes reply = tc.wire;
        // An unmutated transaction id is rewritten to match the resolver's query.
        if (reply.size() >= 2 && case_v.id == seed_q.id) {
            reply[0] = static_cast<std::uint8_t>(qv.id >> 8);
            reply[1] = static_cast<std::uint8_t>(qv.id);
        }
        ::sendto(listener.get(), reply.data(), reply.size(), 0, from.get(), from.len);
        answered = true;
    }
    if (!answered) return {RawOutcome::timeout(timeout_ms), {}, "resolver never asked"};

    std::string ignored;
    detail::recv_some(client.get(), ignored, Clock::now() + std::chrono::milliseconds(timeout_ms));

    // Follow up on a name the case injected, else on the question itself.
    std::string follow = seed_q.qname;
    std::uint16_t follow_type = seed_q.qtype;
    for (const auto& rr : case_v.answers)
        if (fold_name(rr.name) != fold_name(seed_q.qname) && rr.type != 5) {
            follow = rr.name;
            follow_type = rr.type;
            break;
        }
    listener.reset();
    auto out = udp_exchange(target, dns_query(kFollowUpId, fold_name(follow), follow_type), timeout_ms, kFollowUpId);
    return {std::move(out), {fold_name(follow)}, "follow-up " + fold_name(follow)};
}

// ---- classification -----------------------------------------------------

Classification classify_dns(const RawOutcome& o, const ClassifyContext& ctx) {
    Message m;
    try {
        m = decode(Protocol::Dns, "", o.bytes);
    } catch (const Error& e) {
        return {FeedbackClass::Error, std::string("UnparseableResponse: ") + e.what()};
    }
    auto v = dns_view(m);
    if (!(v.flags & 0x8000)) return {FeedbackClass::Error, "not a response"};
    if (int rc = v.flags & 0xf; rc != 0) return {FeedbackClass::Error, "RCODE " + std::to_string(rc)};
    std::set<std::string> chain = {ctx.qname.empty() ? fold_name(v.qname) : fold_name(ctx.qname)};
    for (bool grew = true; grew;) {
        grew = false;
        for (const auto& rr : v.answers)
            if (rr.type == 5 && chain.count(fold_name(rr.name)) && chain.insert(fold_name(rr.target)).second)
                grew = true;
    }
    for (const auto& rr : v.answers)
        if (!chain.count(fold_name(rr.name))) return {FeedbackClass::Error, "unrelated record for " + rr.name};
    return {FeedbackClass::Normal, "answer matches " + *chain.begin() + " (" + std::to_string(v.answers.size()) +
                                       " records)"};
}

Classification classify_tls(const RawOutcome& o) {
    const auto& b = o.bytes;
    if (b.size() < 5) return {FeedbackClass::Error, "UnparseableResponse: short TLS record"};
    switch (b[0]) {
        case 21:
            if (b.size() >= 7) return {FeedbackClass::Error, "Alert " + std::to_string(b[6])};
            return {FeedbackClass::Error, "Alert"};
        case 22:
            if (b.size() >= 6 && b[5] == 2) return {FeedbackClass::Normal, "ServerHello"};
            if (b.size() >= 6) return {FeedbackClass::Error, "handshake type " + std::to_string(b[5])};
            return {FeedbackClass::Error, "UnparseableResponse: empty handshake record"};
        case 20:
        case 23: return {FeedbackClass::Error, "record type " + std::to_string(b[0])};
        default: return {FeedbackClass::Error, "UnparseableResponse: record type " + std::to_string(b[0])};
    }
}

Classification classify_http(const RawOutcome& o) {
    std::string_view s(reinterpret_cast<const char*>(o.bytes.data()), o.bytes.size());
    if (s.size() < 12 || s.substr(0, 7) != "HTTP/1." || s[8] != ' ')
        return {FeedbackClass::Error, "UnparseableResponse: no status line"};
    auto code = s.substr(9, 3);
    if (!std::all_of(code.begin(), code.end(), [](char c) { return c >= '0' && c <= '9'; }))
        return {FeedbackClass::Error, "UnparseableResponse: bad status code"};
    auto eol = s.find("\r\n");
    auto line = std::string(s.substr(0, eol == std::string_view::npos ? 40 : eol));
    return {code[0] == '2' ? FeedbackClass::Normal : FeedbackClass::Error, line};
}

// Echo Reply (ICMPv6 type 129) in an IPv6 packet is the only Normal answer.
Classification classify_ipv6(const RawOutcome& o) {
    const auto& b = o.bytes;
    if (b.size() < 41 || (b[0] >> 4) != 6) return {FeedbackClass::Error, "UnparseableResponse: not IPv6"};
    if (b[6] == 58 && b[40] == 129) return {FeedbackClass::Normal, "Echo Reply"};
    return {FeedbackClass::Error, "next header " + std::to_string(b[6])};
}

bool case_matches(const TestCase& tc, const Endpoint& ep, std::string& why) {
    if (tc.protocol != ep.protocol) {
        why = "protocol " + std::string(to_string(tc.protocol)) + " does not match the endpoint";
        return false;
    }
    auto want = tc.sender_role == "server" ? CampaignMode::Responder : CampaignMode::Client;
    if (want != ep.mode) {
        why = "sender role " + tc.sender_role + " needs " + std::string(to_string(want)) + " mode";
        return false;
    }
    if (!tc.valid) {
        why = "invalid: " + (tc.error ? tc.error->kind : std::string("unknown"));
        return false;
    }
    return true;
}

std::string probe_key(const Endpoint& ep) {
    return std::string(to_string(ep.protocol)) + "/" + (ep.mode == CampaignMode::Responder ? "server" : "client");
}

}  // namespace

std::string_view to_string(Transport t) noexcept { return t == Transport::Tcp ? "tcp" : "udp"; }

std::string_view to_string(CampaignMode m) noexcept {
    return m == CampaignMode::Client ? "client" : "responder";
}

CampaignMode mode_from_string(std::string_view s) {
    if (s == "client" || s == "client-sends-case") return CampaignMode::Client;
    if (s == "responder" || s == "responder-sends-case") return CampaignMode::Responder;
    throw ConfigError("unknown campaign mode '" + std::string(s) + "'");
}

std::string_view to_string(RawOutcome::Kind k) noexcept {
    switch (k) {
        case RawOutcome::Kind::Bytes: return "Bytes";
        case RawOutcome::Kind::Timeout: return "Timeout";
        case RawOutcome::Kind::ConnectionRefused: return "ConnectionRefused";
        case RawOutcome::Kind::ConnectionReset: return "ConnectionReset";
    }
    return "?";
}

std::string_view to_string(VerdictStatus s) noexcept {
    switch (s) {
        case VerdictStatus::Consistent: return "Consistent";
        case VerdictStatus::PotentialVulnerability: return "PotentialVulnerability";
        case VerdictStatus::Indeterminate: return "Indeterminate";
    }
    return "?";
}

Endpoint default_endpoint(Protocol p, const std::string& host, std::uint16_t port, CampaignMode mode) {
    Endpoint ep;
    ep.protocol = p;
    ep.host = host;
    ep.port = port;
    ep.mode = mode;
    ep.transport = p == Protocol::Dns ? Transport::Udp : Transport::Tcp;
    ep.tls_like = p == Protocol::Tls13;
    return ep;
}

Observation execute(const TestCase& tc, const Endpoint& ep, int timeout_ms) {
    try {
        if (ep.transport == Transport::Udp) {
            if (ep.mode == CampaignMode::Responder) return execute_dns_responder(tc, ep, timeout_ms);
            return {udp_exchange(detail::resolve(ep.host, ep.port), tc.wire, timeout_ms), {}, {}};
        }
        if (ep.mode == CampaignMode::Responder) return execute_tcp_responder(tc, ep, timeout_ms);
        return execute_tcp_client(tc, ep, timeout_ms);
    } catch (const Error& e) {
        return {RawOutcome::reset(), {}, e.kind() + ": " + e.what()};
    }
}

Classification classify(Protocol protocol, const RawOutcome& outcome, const ClassifyContext& ctx) {
    switch (outcome.kind) {
        case RawOutcome::Kind::Timeout:
            return {FeedbackClass::Error, "no response within " + std::to_string(outcome.deadline_ms) + " ms"};
        case RawOutcome::Kind::ConnectionRefused: return {FeedbackClass::Error, "connection refused"};
        case RawOutcome::Kind::ConnectionReset: return {FeedbackClass::Error, "connection closed without response"};
        case RawOutcome::Kind::Bytes: break;
    }
    switch (protocol) {
        case Protocol::Dns: return classify_dns(outcome, ctx);
        case Protocol::Tls13: return classify_tls(outcome);
        case Protocol::Http1: return classify_http(outcome);
        case Protocol::Ipv6: return classify_ipv6(outcome);
    }
    return {FeedbackClass::Error, "unknown protocol"};
}

VerdictStatus verify(FeedbackClass expected, FeedbackClass actual) noexcept {
    return expected == actual ? VerdictStatus::Consistent : VerdictStatus::PotentialVulnerability;
}

std::size_t CampaignReport::count(VerdictStatus s) const {
    return static_cast<std::size_t>(
        std::count_if(verdicts.begin(), verdicts.end(), [&](const Verdict& v) { return v.status == s; }));
}

CampaignReport run_campaign(const std::vector<TestCase>& cases, const Endpoint& ep, const CampaignConfig& cfg) {
    CampaignReport report;
    std::vector<const TestCase*> runnable;
    for (const auto& tc : cases) {
        std::string why;
        if (case_matches(tc, ep, why)) runnable.push_back(&tc);
        else report.skipped.push_back({tc.case_id, why});
    }

    auto run_one = [&](const TestCase& tc) {
        Verdict v;
        v.case_id = tc.case_id;
        v.strategy_id = tc.strategy_id;
        v.rule_id = tc.rule_id;
        v.protocol = tc.protocol;
        v.mode = ep.mode;
        v.expected = tc.expected;
        v.wire = tc.wire;
        auto obs = execute(tc, ep, cfg.timeout_ms);
        auto c = classify(tc.protocol, obs.outcome, obs.context);
        v.raw = std::move(obs.outcome);
        v.actual = c.cls;
        v.status = verify(tc.expected, c.cls);
        v.detail = obs.note.empty() ? c.detail : obs.note + ": " + c.detail;
        return v;
    };

    std::optional<TestCase> probe;
    if (cfg.probe) {
        auto it = cfg.probes.find(probe_key(ep));
        if (it == cfg.probes.end()) throw ConfigError("no liveness probe for " + probe_key(ep));
        TestCase p;
        p.case_id = "probe";
        p.protocol = ep.protocol;
        p.sender_role = ep.mode == CampaignMode::Responder ? "server" : "client";
        p.expected = FeedbackClass::Normal;
        p.wire = it->second;
        p.seed_wire = it->second;
        p.valid = true;
        if (ep.protocol == Protocol::Dns) p.message = decode(Protocol::Dns, "", p.wire);
        probe = std::move(p);
    }
    auto alive = [&] {
        auto obs = execute(*probe, ep, cfg.timeout_ms);
        return classify(ep.protocol, obs.outcome, obs.context).cls == FeedbackClass::Normal;
    };

    bool sequential = cfg.probe || ep.mode == CampaignMode::Responder || cfg.workers <= 1;
    if (!sequential) {
        report.verdicts.resize(runnable.size());
        detail::parallel_for(runnable.size(), cfg.workers,
                             [&](std::size_t i) { report.verdicts[i] = run_one(*runnable[i]); });
        return report;
    }

    bool down = probe && !alive();
    if (down) report.target_down_after = "";
    for (const auto* tc : runnable) {
        if (down) {
            Verdict v;
            v.case_id = tc->case_id;
            v.strategy_id = tc->strategy_id;
            v.rule_id = tc->rule_id;
            v.protocol = tc->protocol;
            v.mode = ep.mode;
            v.expected = tc->expected;
            v.wire = tc->wire;
            v.status = VerdictStatus::Indeterminate;
            v.detail = "not run: target failed its liveness probe after " +
                       (report.target_down_after->empty() ? std::string("start-up") : *report.target_down_after);
            report.verdicts.push_back(std::move(v));
            continue;
        }
        report.verdicts.push_back(run_one(*tc));
        if (probe && !alive()) {
            down = true;
            report.target_down_after = tc->case_id;
            report.verdicts.back().detail += "; target down afterwards";
        }
    }
    return report;
}

Json to_json(const Verdict& v) {
    Json raw{{"kind", to_string(v.raw.kind)}};
    if (v.raw.kind == RawOutcome::Kind::Bytes) raw["hex"] = to_hex(v.raw.bytes);
    if (v.raw.kind == RawOutcome::Kind::Timeout) raw["deadline_ms"] = v.raw.deadline_ms;
    Json j{{"case_id", v.case_id},
           {"strategy_id", v.strategy_id},
           {"rule_id", v.rule_id},
           {"protocol", to_string(v.protocol)},
           {"mode", to_string(v.mode)},
           {"expected", to_string(v.expected)},
           {"actual", v.actual ? Json(to_string(*v.actual)) : Json(nullptr)},
           {"status", to_string(v.status)},
           {"detail", v.detail}};
    j["raw"] = v.status == VerdictStatus::Indeterminate && !v.actual ? Json(nullptr) : raw;
    j["wire"] = to_hex(v.wire);
    return j;
}

std::string findings_jsonl(const std::vector<Verdict>& verdicts) {
    std::string out;
    for (const auto& v : verdicts) out += to_json(v).dump() + "\n";
    return out;
}

Json campaign_summary(const CampaignReport& report, const std::string& config_hash) {
    Json pv = Json::array();
    Json chain = Json::array();
    for (const auto& v : report.verdicts) {
        chain.push_back({{"rule", v.rule_id},
                         {"strategy", v.strategy_id},
                         {"case", v.case_id},
                         {"verdict", to_string(v.status)}});
        if (v.status == VerdictStatus::PotentialVulnerability)
            pv.push_back({{"case_id", v.case_id},
                          {"rule_id", v.rule_id},
                          {"strategy_id", v.strategy_id},
                          {"expected", to_string(v.expected)},
                          {"actual", to_string(*v.actual)},
                          {"detail", v.detail},
                          {"wire", to_hex(v.wire)}});
    }
    Json skipped = Json::array();
    for (const auto& s : report.skipped) skipped.push_back({{"case_id", s.case_id}, {"reason", s.reason}});
    return Json{{"schema_version", 1},
                {"config_hash", config_hash},
                {"counts",
                 {{"verdicts", report.verdicts.size()},
                  {"consistent", report.count(VerdictStatus::Consistent)},
                  {"potential_vulnerabilities", report.count(VerdictStatus::PotentialVulnerability)},
                  {"indeterminate", report.count(VerdictStatus::Indeterminate)},
                  {"skipped", report.skipped.size()}}},
                {"target_down_after",
                 report.target_down_after ? Json(*report.target_down_after) : Json(nullptr)},
                {"potential_vulnerabilities", pv},
                {"chain", chain},
                {"skipped", skipped}};
}

}  // namespace semfuzz

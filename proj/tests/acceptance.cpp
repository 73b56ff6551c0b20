// SPDX-License-Identifier: Apache-2.0
//
// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failures.
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "mutation_gen.hpp"
#include "semfuzz/campaign.hpp"
#include "semfuzz/config.hpp"
#include "semfuzz/eval.hpp"
#include "semfuzz/fixtures.hpp"
#include "semfuzz/io.hpp"
#include "semfuzz/pipeline.hpp"
#include "semfuzz/rules.hpp"
#include "support.hpp"

using namespace semfuzz;
namespace fs = std::filesystem;
namespace ts = testsupport;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = true;
    std::ostringstream note;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            if (!pass) note << "; ";
            else note.str("");
            pass = false;
            note << what;
        }
    }
};

int failures = 0;

template <class Fn>
void criterion(int n, const char* title, Fn fn) {
    Outcome o;
    auto t0 = Clock::now();
    try {
        fn(o);
    } catch (const std::exception& e) {
        o.require(false, std::string("threw: ") + e.what());
    }
    auto took = ms_since(t0);
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << n << "] " << title << ": " << o.note.str() << " ("
              << static_cast<long>(took) << " ms)" << std::endl;
}

fs::path golden() { return ts::source_dir() / "tests" / "golden"; }

void codec_round_trip(Outcome& o) {
    auto t0 = Clock::now();
    std::size_t ok = 0, total = 0, dns_q = 0, dns_r = 0, http = 0, ch = 0;
    for (const auto& f : ts::seed_files()) {
        ++total;
        auto wire = load_wire_file(f.path.string());
        auto m = decode(f.protocol, "", wire);
        bool same = encode(m) == wire;
        o.require(same, f.path.filename().string() + " does not round-trip");
        if (!same) continue;
        ++ok;
        if (f.protocol == Protocol::Dns) (wire.at(2) & 0x80 ? dns_r : dns_q)++;
        if (f.protocol == Protocol::Http1) ++http;
        if (f.protocol == Protocol::Tls13 && wire.at(5) == 1) ++ch;
    }
    auto took = ms_since(t0);
    o.require(dns_q + dns_r >= 10 && dns_q > 0 && dns_r > 0, "DNS corpus too small");
    o.require(http >= 5, "fewer than 5 HTTP requests");
    o.require(ch >= 5, "fewer than 5 ClientHellos");
    o.require(took < 1000, "slower than 1s");
    if (o.pass)
        o.note << ok << "/" << total << " seeds identical (DNS " << dns_q << " queries + " << dns_r
               << " responses, HTTP " << http << ", ClientHello " << ch << ")";
}

void mutation_property(Outcome& o) {
    auto t0 = Clock::now();
    std::map<Protocol, std::vector<Message>> seeds;
    for (const auto& f : ts::seed_files())
        seeds[f.protocol].push_back(decode(f.protocol, "", load_wire_file(f.path.string())));
    std::ostringstream per;
    for (auto& [p, list] : seeds) {
        ts::ActionGen gen(static_cast<std::uint32_t>(p) * 104729 + 3);
        std::size_t valid = 0, consistent = 0;
        for (int i = 0; i < 1000; ++i) {
            const auto& seed = list[gen.below(list.size())];
            auto tc = apply_actions(seed, gen.sequence(seed));
            if (!tc.valid) continue;
            ++valid;
            auto bad = ts::check_case_wire(tc);
            if (bad.empty()) ++consistent;
            else o.require(false, std::string(to_string(p)) + " sequence " + std::to_string(i) + ": " + bad);
        }
        o.require(valid == 1000, std::string(to_string(p)) + ": only " + std::to_string(valid) + "/1000 valid");
        per << " " << to_string(p) << " " << consistent << "/" << valid;
    }
    o.require(ms_since(t0) < 30000, "slower than 30s");
    if (o.pass) o.note << "re-decoded and matched the wire oracle:" << per.str();
}

const std::map<std::string, BugId> kBugCase = {
    {"rfc2181.R002.M1.T1", BugId::DnsExtraRecordCached},
    {"rfc9112.R003.M1.T1", BugId::ClWhitespaceAccepted},
    {"rfc9110.R002.M1.T1", BugId::AcceptEncodingCrashSim},
    {"rfc8446.R006.M1.T1", BugId::PskNotLastAccepted},
};

CampaignConfig golden_campaign(const CasesDir& dir) {
    CampaignConfig cc;
    cc.timeout_ms = 2000;
    cc.probe = true;
    cc.probes = dir.probes;
    return cc;
}

std::vector<std::string> pv_cases(const CampaignReport& r) {
    std::vector<std::string> out;
    for (const auto& v : r.verdicts)
        if (v.status == VerdictStatus::PotentialVulnerability) out.push_back(v.case_id);
    return out;
}

void planted_bugs(Outcome& o) {
    auto t0 = Clock::now();
    auto dir = load_cases_dir((golden() / "expected" / "cases").string());
    auto cc = golden_campaign(dir);
    std::set<BugId> all;
    for (auto& [c, b] : kBugCase) all.insert(b);

    auto buggy = run_against_fixtures(dir.cases, all, cc);
    auto pvs = pv_cases(buggy);
    std::set<BugId> hit;
    for (const auto& c : pvs) {
        auto it = kBugCase.find(c);
        o.require(it != kBugCase.end(), "unexpected PotentialVulnerability " + c);
        if (it != kBugCase.end()) hit.insert(it->second);
    }
    o.require(pvs.size() == 4 && hit.size() == 4,
              "buggy fixtures: " + std::to_string(pvs.size()) + " PVs covering " + std::to_string(hit.size()) + " bugs");
    auto control = run_against_fixtures(dir.cases, {}, cc);
    o.require(control.count(VerdictStatus::PotentialVulnerability) == 0,
              "control fixtures: " + std::to_string(control.count(VerdictStatus::PotentialVulnerability)) + " PVs");
    auto e2e = ms_since(t0);
    o.require(e2e < 60000, "slower than 60s");

    // Each bug on its own is found by its own case only.
    std::size_t isolated = 0;
    for (auto& [c, b] : kBugCase) {
        auto one = pv_cases(run_against_fixtures(dir.cases, {b}, cc));
        bool ok = one == std::vector<std::string>{c};
        o.require(ok, std::string(to_string(b)) + " alone gave " + std::to_string(one.size()) + " PVs");
        isolated += ok;
    }
    if (o.pass)
        o.note << buggy.verdicts.size() << " cases: 4 PVs (one per bug) vs 0 on control in " << static_cast<long>(e2e)
               << " ms; " << isolated << "/4 bugs isolated";
}

WireBytes bytes_of(std::string_view s) { return WireBytes(s.begin(), s.end()); }

void classify_table(Outcome& o) {
    std::size_t cells = 0;
    auto expect = [&](Protocol p, const RawOutcome& raw, FeedbackClass want, const std::string& what,
                      const ClassifyContext& ctx = {}) {
        ++cells;
        auto got = classify(p, raw, ctx);
        o.require(got.cls == want, std::string(to_string(p)) + " " + what + " -> " + std::string(to_string(got.cls)));
    };
    for (auto p : {Protocol::Dns, Protocol::Http1, Protocol::Tls13}) {
        expect(p, RawOutcome::timeout(100), FeedbackClass::Error, "timeout");
        expect(p, RawOutcome::refused(), FeedbackClass::Error, "refused");
        expect(p, RawOutcome::reset(), FeedbackClass::Error, "reset");
        expect(p, RawOutcome::of_bytes(bytes_of("\x01garbage"), 1), FeedbackClass::Error, "garbage");
        auto unp = classify(p, RawOutcome::of_bytes(bytes_of("\x01garbage"), 1));
        o.require(unp.detail.find("UnparseableResponse") != std::string::npos,
                  std::string(to_string(p)) + " garbage detail '" + unp.detail + "'");
    }

    auto seed = [](const char* rel) { return load_wire_file((ts::data_dir() / "seeds" / rel).string()); };
    ClassifyContext www{"www.example.com"};
    expect(Protocol::Dns, RawOutcome::of_bytes(seed("dns/resp_a_www.hex"), 1), FeedbackClass::Normal, "answer", www);
    expect(Protocol::Dns, RawOutcome::of_bytes(seed("dns/resp_cname.hex"), 1), FeedbackClass::Normal,
           "CNAME chain");
    expect(Protocol::Dns, RawOutcome::of_bytes(seed("dns/resp_nxdomain.hex"), 1), FeedbackClass::Error, "NXDOMAIN");
    expect(Protocol::Dns, RawOutcome::of_bytes(seed("dns/query_a_www.hex"), 1), FeedbackClass::Error,
           "query instead of response");
    auto base = decode(Protocol::Dns, "DNS Response", seed("dns/resp_a_www.hex"));
    Action add;
    add.kind = Action::Kind::Add;
    add.target = FieldPath::parse("answer");
    add.new_field = FieldNode("rr", FieldValue::composite({
                                        FieldNode("name", FieldValue::text("evil.example")),
                                        FieldNode("type", FieldValue::uint(1, 16)),
                                        FieldNode("class", FieldValue::uint(1, 16)),
                                        FieldNode("ttl", FieldValue::uint(300, 32)),
                                        FieldNode("rdlength", FieldValue::uint(0, 16)),
                                        FieldNode("rdata", FieldValue::bytes({10, 6, 6, 6})),
                                    }));
    auto unrelated = apply_actions(base, {"acc", {add}});
    o.require(unrelated.valid, "could not build the unrelated-record response");
    expect(Protocol::Dns, RawOutcome::of_bytes(unrelated.wire, 1), FeedbackClass::Error, "unrelated record", www);

    expect(Protocol::Http1, RawOutcome::of_bytes(bytes_of("HTTP/1.1 200 OK\r\nContent-Length: 2\r\n\r\nok"), 1),
           FeedbackClass::Normal, "200");
    for (const char* status : {"400 Bad Request", "404 Not Found", "500 Internal Server Error", "501 Not Implemented"})
        expect(Protocol::Http1,
               RawOutcome::of_bytes(bytes_of(std::string("HTTP/1.1 ") + status + "\r\nContent-Length: 0\r\n\r\n"), 1),
               FeedbackClass::Error, status);

    auto ch = seed("tls/ch_default.hex");
    auto sh = tls_fixture_step(std::string_view(reinterpret_cast<const char*>(ch.data()), ch.size()), false, {});
    o.require(sh.kind == FixtureStep::Kind::Reply, "TLS fixture gave no ServerHello");
    expect(Protocol::Tls13, RawOutcome::of_bytes(bytes_of(sh.reply), 1), FeedbackClass::Normal, "ServerHello");
    for (std::uint8_t alert : {47, 50, 70, 109, 40}) {
        WireBytes a = {21, 3, 3, 0, 2, 2, alert};
        expect(Protocol::Tls13, RawOutcome::of_bytes(a, 1), FeedbackClass::Error,
               "alert " + std::to_string(alert));
    }
    if (o.pass) o.note << cells << " cells exact, including DNS unrelated record and TLS alerts";
}

void verify_table(Outcome& o) {
    using F = FeedbackClass;
    using V = VerdictStatus;
    struct Row {
        F expected, actual;
        V want;
    };
    for (auto r : {Row{F::Normal, F::Normal, V::Consistent}, Row{F::Error, F::Error, V::Consistent},
                   Row{F::Normal, F::Error, V::PotentialVulnerability},
                   Row{F::Error, F::Normal, V::PotentialVulnerability}}) {
        auto got = verify(r.expected, r.actual);
        o.require(got == r.want, std::string(to_string(r.expected)) + "/" + std::string(to_string(r.actual)) + " -> " +
                                     std::string(to_string(got)));
    }
    if (o.pass) o.note << "4/4 pairs";
}

bool same_file(const fs::path& a, const fs::path& b) {
    if (!fs::exists(a) || !fs::exists(b)) return false;
    return read_text_file(a.string()) == read_text_file(b.string());
}

void replay_pipeline(Outcome& o) {
    auto cfg = load_config((golden() / "replay.json").string());
    auto expected = golden() / "expected";
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(expected))
        if (e.is_regular_file()) files.push_back(fs::relative(e.path(), expected));
    std::sort(files.begin(), files.end());
    std::size_t compared = 0;
    for (int run = 1; run <= 2; ++run) {
        auto out = fs::temp_directory_path() / ("semfuzz_acceptance_run" + std::to_string(run));
        fs::remove_all(out);
        ConfigOverrides over;
        over.out = out.string();
        auto c = cfg;
        apply_overrides(c, over);
        run_pipeline(c, [](const std::string&) {});
        std::size_t produced = 0;
        for (const auto& e : fs::recursive_directory_iterator(out))
            if (e.is_regular_file() && e.path().filename() != "run.json") ++produced;
        o.require(produced == files.size(), "run " + std::to_string(run) + " produced " + std::to_string(produced) +
                                                " files, golden has " + std::to_string(files.size()));
        for (const auto& f : files) {
            bool same = same_file(expected / f, out / f);
            o.require(same, "run " + std::to_string(run) + ": " + f.string() + " differs");
            compared += same;
        }
    }
    if (o.pass) o.note << compared / 2 << " golden files byte-identical on 2 runs";
}

void metrics(Outcome& o) {
    auto extracted = rules_from_document(read_json_file((golden() / "expected" / "rules.json").string()));
    auto bench = benchmark_from_document(read_json_file((golden() / "bench.json").string()));
    auto s = score_rules(extracted, bench);
    // Hand count over bench.json: 9 pairs match, 6 extracted rules and 3 annotations are left over.
    o.require(s.metrics.tp == 9 && s.metrics.fp == 6 && s.metrics.fn == 3,
              "counts " + to_json(s.metrics).dump());
    o.require(std::abs(s.metrics.precision - 0.6) < 1e-9, "precision");
    o.require(std::abs(s.metrics.recall - 0.75) < 1e-9, "recall");
    o.require(std::abs(s.metrics.f1 - 2.0 / 3.0) < 1e-9, "f1");

    std::mt19937 rng(11);
    for (int i = 0; i < 2000; ++i) {
        std::size_t tp = rng() % 50, fp = rng() % 50, fn = rng() % 50;
        auto m = metrics_from_counts(tp, fp, fn);
        double hm = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
        if (std::abs(m.f1 - hm) > 1e-12) {
            o.require(false, "F1 is not the harmonic mean for " + to_json(m).dump());
            break;
        }
    }
    if (o.pass) o.note << "P 0.6 R 0.75 F1 2/3 on the bundled benchmark; F1 = harmonic mean over 2000 random counts";
}

void sampling_defaults(Outcome& o) {
    std::vector<Json> bodies;
    ProviderBinding b;
    b.kind = ProviderBinding::Kind::RemoteHttp;
    b.base_url = "http://captured/v1";
    b.model = "m";
    b.max_attempts = 1;
    TemplateStore t;
    t.set("spec_identify", "find: ${text}$");
    LlmGateway g(b, t, 1, [&](const std::string&, const std::string& body, const auto&, int) {
        bodies.push_back(Json::parse(body));
        return HttpReply{200, R"({"choices":[{"message":{"content":"[]"}}]})"};
    });
    g.set_log([](const std::string&) {});
    g.complete(ChatRequest{"spec_identify", Json{{"text", "x"}}, {}});
    g.complete(ChatRequest{"spec_identify", Json{{"text", "y"}}, Sampling{0.9, 0.7}});
    g.set_sampling({0.2, 0.3});
    g.complete(ChatRequest{"spec_identify", Json{{"text", "z"}}, {}});
    if (bodies.size() != 3) {
        o.require(false, "captured " + std::to_string(bodies.size()) + " requests");
        return;
    }
    o.require(bodies[0]["temperature"] == 0.5 && bodies[0]["top_p"] == 0.1, "default request " + bodies[0].dump());
    o.require(bodies[1]["temperature"] == 0.9 && bodies[1]["top_p"] == 0.7, "per-request override ignored");
    o.require(bodies[2]["temperature"] == 0.2 && bodies[2]["top_p"] == 0.3, "gateway override ignored");
    RunConfig rc;
    o.require(rc.sampling.temperature == 0.5 && rc.sampling.top_p == 0.1, "RunConfig default");
    if (o.pass) o.note << "temperature 0.5 / top_p 0.1 by default, overrides honoured";
}

void liveness(Outcome& o) {
    auto dir = load_cases_dir((golden() / "expected" / "cases").string());
    std::vector<TestCase> http;
    const TestCase* crash = nullptr;
    for (const auto& c : dir.cases) {
        if (c.protocol != Protocol::Http1 || !c.valid) continue;
        if (c.case_id == "rfc9110.R002.M1.T1") crash = &c;
        else http.push_back(c);
    }
    if (!crash || http.empty()) {
        o.require(false, "golden HTTP cases missing");
        return;
    }
    http.insert(http.begin(), *crash);
    auto cc = golden_campaign(dir);
    auto report = run_against_fixtures(http, {BugId::AcceptEncodingCrashSim}, cc);
    o.require(report.target_down_after == crash->case_id, "target_down_after not the crash case");
    std::size_t after = 0;
    for (std::size_t i = 1; i < report.verdicts.size(); ++i) {
        const auto& v = report.verdicts[i];
        ++after;
        o.require(v.status == VerdictStatus::Indeterminate,
                  v.case_id + " after the crash is " + std::string(to_string(v.status)));
    }
    o.require(after + 1 == http.size(), "verdict count");
    if (o.pass) o.note << "crash case first, then " << after << " cases all Indeterminate, 0 PVs after the crash";
}

}  // namespace

int main() {
    criterion(1, "codec round-trip", codec_round_trip);
    criterion(2, "mutation engine properties", mutation_property);
    criterion(3, "planted bugs end to end", planted_bugs);
    criterion(4, "classify oracle table", classify_table);
    criterion(5, "verify truth table", verify_table);
    criterion(6, "replay-deterministic pipeline", replay_pipeline);
    criterion(7, "metrics arithmetic", metrics);
    criterion(8, "sampling defaults", sampling_defaults);
    criterion(9, "liveness confound", liveness);
    return failures;
}

// SPDX-License-Identifier: Apache-2.0
#include "semfuzz/pipeline.hpp"

#include <filesystem>

#include "net.hpp"
#include "semfuzz/errors.hpp"
#include "semfuzz/io.hpp"
#include "semfuzz/rules.hpp"
#include "semfuzz/seeds.hpp"
#include "semfuzz/strategy.hpp"

namespace semfuzz {

namespace fs = std::filesystem;

namespace {

struct Group {
    Protocol protocol;
    CampaignMode mode;
    std::vector<TestCase> cases;
};

std::uint16_t free_udp_port() {
    auto s = detail::udp_bind("127.0.0.1", 0);
    return detail::local_port(s.get());
}

std::set<BugId> bugs_for(const std::set<BugId>& bugs, Protocol p) {
    std::set<BugId> out;
    for (auto b : bugs)
        if (bug_protocol(b) == p) out.insert(b);
    return out;
}

void merge(CampaignReport& into, CampaignReport&& part) {
    for (auto& v : part.verdicts) into.verdicts.push_back(std::move(v));
    for (auto& s : part.skipped) into.skipped.push_back(std::move(s));
    if (!into.target_down_after && part.target_down_after) into.target_down_after = part.target_down_after;
}

CampaignReport run_group(const Group& g, const std::set<BugId>& bugs, const CampaignConfig& cc) {
    FixtureConfig fc;
    fc.protocol = g.protocol;
    fc.bugs = bugs_for(bugs, g.protocol);
    fc.read_timeout_ms = cc.timeout_ms;
    if (g.mode == CampaignMode::Client) {
        auto f = serve(fc);
        auto report = run_campaign(g.cases, default_endpoint(g.protocol, "127.0.0.1", f->port()), cc);
        f->shutdown();
        return report;
    }
    // The resolver's upstream is where the campaign listens for its queries.
    auto listen = free_udp_port();
    fc.upstream_host = "127.0.0.1";
    fc.upstream_port = listen;
    auto f = serve(fc);
    auto ep = default_endpoint(g.protocol, "127.0.0.1", f->port(), CampaignMode::Responder);
    ep.listen_port = listen;
    ep.dns_flush_name = std::string(kDnsFlushName);
    auto report = run_campaign(g.cases, ep, cc);
    f->shutdown();
    return report;
}

}  // namespace

CampaignReport run_against_fixtures(const std::vector<TestCase>& cases, const std::set<BugId>& bugs,
                                    const CampaignConfig& cfg) {
    std::vector<Group> groups = {
        {Protocol::Dns, CampaignMode::Client, {}},
        {Protocol::Dns, CampaignMode::Responder, {}},
        {Protocol::Http1, CampaignMode::Client, {}},
        {Protocol::Tls13, CampaignMode::Client, {}},
    };
    CampaignReport report;
    for (const auto& tc : cases) {
        auto mode = tc.sender_role == "server" ? CampaignMode::Responder : CampaignMode::Client;
        bool placed = false;
        for (auto& g : groups) {
            if (g.protocol == tc.protocol && g.mode == mode) {
                g.cases.push_back(tc);
                placed = true;
                break;
            }
        }
        if (!placed)
            report.skipped.push_back({tc.case_id, "no fixture takes " + std::string(to_string(tc.protocol)) +
                                                      " messages sent by the " + tc.sender_role});
    }
    for (const auto& g : groups)
        if (!g.cases.empty()) merge(report, run_group(g, bugs, cfg));
    return report;
}

void write_findings(const std::string& dir, const CampaignReport& report, const std::string& config_hash) {
    fs::create_directories(dir);
    write_text_file((fs::path(dir) / "findings.jsonl").string(), findings_jsonl(report.verdicts));
    write_json_file((fs::path(dir) / "summary.json").string(), campaign_summary(report, config_hash));
}

std::unique_ptr<LlmGateway> make_gateway(const RunConfig& cfg) {
    auto binding = cfg.provider;
    binding.store_dir = cfg.resolve(binding.store_dir);
    auto templates = cfg.templates.empty() ? TemplateStore::load_default()
                                           : TemplateStore::load(cfg.resolve(cfg.templates));
    auto gw = std::make_unique<LlmGateway>(binding, std::move(templates), cfg.llm_in_flight);
    gw->set_sampling(cfg.sampling);
    return gw;
}

PipelineResult run_pipeline(const RunConfig& cfg, const LogSink& log) {
    auto say = [&](const std::string& s) {
        if (log) log(s);
    };
    if (cfg.rfcs.empty()) throw ConfigError("paths.rfcs lists no RFC files");
    if (cfg.seeds.empty()) throw ConfigError("paths.seeds is not set");
    auto hash = config_hash(cfg);
    auto out = cfg.resolve(cfg.out);
    fs::create_directories(out);

    auto types = load_message_types(cfg.message_types.empty()
                                        ? (fs::path(default_data_dir()) / "message_types.json").string()
                                        : cfg.resolve(cfg.message_types));
    auto corpus = load_seed_dir(cfg.resolve(cfg.seeds), &types);
    auto gw = make_gateway(cfg);
    if (log) gw->set_log(log);
    else gw->set_log([](const std::string&) {});

    PipelineResult res;
    std::vector<SemanticRule> rules;
    Json rule_skips = Json::array();
    for (const auto& rfc : cfg.rfcs) {
        RuleBuildOptions opts;
        opts.rfc_id = rfc.id;
        opts.workers = cfg.workers;
        auto built = build_rules(*gw, read_text_file(cfg.resolve(rfc.file)), types, corpus, opts);
        say("rules: " + rfc.id + ": " + std::to_string(built.rules.size()) + " rules from " +
            std::to_string(built.paragraphs_processed) + "/" + std::to_string(built.paragraphs_total) +
            " paragraphs");
        for (const auto& w : built.warnings) say("warning: " + w);
        for (const auto& s : built.skipped) rule_skips.push_back(to_json(s));
        for (auto& r : built.rules) rules.push_back(std::move(r));
    }
    auto rules_doc = rules_document(rules, hash);
    rules_doc["skipped"] = rule_skips;
    write_json_file((fs::path(out) / "rules.json").string(), rules_doc);
    res.rules = rules.size();

    std::vector<SemanticRule> testable;
    for (const auto& r : rules)
        if (r.testable) testable.push_back(r);
    StrategyOptions sopts;
    sopts.cap = cfg.strategy_cap;
    sopts.workers = cfg.workers;
    auto strategies = build_strategies(*gw, testable, sopts);
    for (const auto& w : strategies.warnings) say("warning: " + w);
    auto strat_doc = strategies_document(strategies.strategies, hash);
    Json strat_skips = Json::array();
    for (const auto& s : strategies.skipped) strat_skips.push_back(to_json(s));
    strat_doc["skipped"] = strat_skips;
    write_json_file((fs::path(out) / "strategies.json").string(), strat_doc);
    res.strategies = strategies.strategies.size();
    say("strategies: " + std::to_string(res.strategies));

    CaseOptions copts;
    copts.workers = cfg.workers;
    auto batch = gen_cases(*gw, strategies.strategies, corpus, copts);
    for (const auto& w : batch.warnings) say("warning: " + w);
    auto probes = default_probes(corpus);
    write_cases_dir((fs::path(out) / "cases").string(), batch, probes, hash);
    res.cases = batch.cases.size();
    for (const auto& c : batch.cases) res.valid_cases += c.valid ? 1 : 0;
    say("cases: " + std::to_string(res.valid_cases) + "/" + std::to_string(res.cases) + " valid");

    CampaignConfig cc;
    cc.timeout_ms = cfg.timeout_ms;
    cc.workers = cfg.campaign_workers;
    cc.probe = cfg.probe;
    cc.probes = probes;
    std::set<BugId> bugs(cfg.bugs.begin(), cfg.bugs.end());
    res.report = run_against_fixtures(batch.cases, bugs, cc);
    write_findings(out, res.report, hash);
    say("campaign: " + std::to_string(res.report.verdicts.size()) + " verdicts, " +
        std::to_string(res.report.count(VerdictStatus::PotentialVulnerability)) + " potential vulnerabilities");

    Json eval{{"schema_version", kSchemaVersion}, {"config_hash", hash}};
    if (!batch.cases.empty()) eval["cases"] = {{"accuracy", score_cases(batch.cases)}};
    if (!cfg.benchmark.empty()) {
        auto bench = benchmark_from_document(read_json_file(cfg.resolve(cfg.benchmark)));
        MatchOptions mo{cfg.match_threshold};
        res.rule_score = score_rules(rules, bench, mo);
        eval["rules"] = rule_score_report(*res.rule_score, mo);
    }
    write_json_file((fs::path(out) / "eval.json").string(), eval);
    write_json_file((fs::path(out) / "run.json").string(),
                    Json{{"schema_version", kSchemaVersion}, {"config_hash", hash}, {"config", to_json(cfg)}});
    return res;
}

}  // namespace semfuzz

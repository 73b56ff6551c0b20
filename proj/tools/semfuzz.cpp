// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "semfuzz/campaign.hpp"
#include "semfuzz/config.hpp"
#include "semfuzz/errors.hpp"
#include "semfuzz/eval.hpp"
#include "semfuzz/fixtures.hpp"
#include "semfuzz/io.hpp"
#include "semfuzz/pipeline.hpp"
#include "semfuzz/rules.hpp"
#include "semfuzz/seeds.hpp"
#include "semfuzz/strategy.hpp"
#include "semfuzz/testcase.hpp"

using namespace semfuzz;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitFindings = 10;

std::atomic<bool> g_stop{false};

void diag(const std::string& line) { std::cerr << "semfuzz: " << line << "\n"; }

std::pair<std::string, std::uint16_t> split_host_port(const std::string& s) {
    auto colon = s.rfind(':');
    if (colon == std::string::npos || colon == 0) throw ConfigError("expected host:port, got '" + s + "'");
    int port = 0;
    try {
        port = std::stoi(s.substr(colon + 1));
    } catch (const std::exception&) {
        throw ConfigError("bad port in '" + s + "'");
    }
    if (port < 0 || port > 65535) throw ConfigError("bad port in '" + s + "'");
    auto host = s.substr(0, colon);
    if (host.size() > 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
    return {host, static_cast<std::uint16_t>(port)};
}

// Flags shared by the LLM-backed stages; each one overrides the config file.
struct LlmFlags {
    std::string config;
    std::string provider;
    std::string base_url;
    std::string model;
    std::string store;
    std::string templates;
    std::optional<double> temperature;
    std::optional<double> top_p;
    std::optional<int> workers;
    std::optional<int> in_flight;

    void add(CLI::App* app) {
        app->add_option("--config", config, "JSON run configuration");
        app->add_option("--provider", provider, "remote-http | replay | record");
        app->add_option("--base-url", base_url, "OpenAI-compatible endpoint");
        app->add_option("--model", model);
        app->add_option("--store", store, "replay/record directory");
        app->add_option("--templates", templates, "prompt template directory");
        app->add_option("--temperature", temperature);
        app->add_option("--top-p", top_p);
        app->add_option("--workers", workers);
        app->add_option("--llm-in-flight", in_flight);
    }

    ConfigOverrides overrides() const {
        ConfigOverrides o;
        if (!provider.empty()) o.provider = provider_kind_from_string(provider);
        if (!base_url.empty()) o.base_url = base_url;
        if (!model.empty()) o.model = model;
        if (!store.empty()) o.store_dir = store;
        if (!templates.empty()) o.templates = templates;
        o.temperature = temperature;
        o.top_p = top_p;
        o.workers = workers;
        o.llm_in_flight = in_flight;
        return o;
    }

    RunConfig load() const {
        RunConfig c = config.empty() ? RunConfig{} : load_config(config);
        if (!config.empty()) {
            // Stage flags are relative to the working directory, not the config file.
            c.provider.store_dir = c.resolve(c.provider.store_dir);
            c.templates = c.resolve(c.templates);
            c.base_dir = ".";
        }
        apply_overrides(c, overrides());
        return c;
    }
};

MessageTypeList types_from(const std::string& path) {
    return load_message_types(path.empty() ? (fs::path(default_data_dir()) / "message_types.json").string() : path);
}

void log_line(const std::string& s) { diag(s); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semantics-aware black-box protocol fuzzer"};
    app.require_subcommand(1);

    // rules extract
    auto* rules = app.add_subcommand("rules", "semantic rules");
    rules->require_subcommand(1);
    auto* extract = rules->add_subcommand("extract", "extract semantic rules from RFC text");
    LlmFlags extract_llm;
    extract_llm.add(extract);
    std::string rfc_file, rfc_id = "rfc", seeds_dir, types_file, rules_out = "rules.json";
    extract->add_option("--rfc", rfc_file, "RFC text file")->required();
    extract->add_option("--rfc-id", rfc_id);
    extract->add_option("--seeds", seeds_dir, "seed directory")->required();
    extract->add_option("--types", types_file, "message-type list");
    extract->add_option("--out", rules_out);

    // strategies gen
    auto* strategies = app.add_subcommand("strategies", "mutation strategies");
    strategies->require_subcommand(1);
    auto* sgen = strategies->add_subcommand("gen", "generate mutation strategies for rules");
    LlmFlags sgen_llm;
    sgen_llm.add(sgen);
    std::string rules_in, strategies_out = "strategies.json";
    std::optional<std::size_t> cap;
    sgen->add_option("--rules", rules_in)->required();
    sgen->add_option("--out", strategies_out);
    sgen->add_option("--cap", cap, "strategies kept per rule");

    // cases gen
    auto* cases = app.add_subcommand("cases", "test cases");
    cases->require_subcommand(1);
    auto* cgen = cases->add_subcommand("gen", "turn strategies into test cases");
    LlmFlags cgen_llm;
    cgen_llm.add(cgen);
    std::string strategies_in, cases_seeds, cases_types, cases_out = "cases";
    cgen->add_option("--strategies", strategies_in)->required();
    cgen->add_option("--seeds", cases_seeds)->required();
    cgen->add_option("--types", cases_types);
    cgen->add_option("--out", cases_out);

    // campaign run
    auto* campaign = app.add_subcommand("campaign", "send test cases to a target");
    campaign->require_subcommand(1);
    auto* crun = campaign->add_subcommand("run", "run a campaign");
    std::string cases_dir, target, protocol_name, mode_name = "client", findings_out = "findings.jsonl", summary_out,
                listen, flush_name;
    int timeout_ms = 2000, campaign_workers = 8;
    bool probe = false;
    crun->add_option("--cases", cases_dir)->required();
    crun->add_option("--target", target, "host:port")->required();
    crun->add_option("--protocol", protocol_name)->required();
    crun->add_option("--mode", mode_name, "client | responder");
    crun->add_flag("--probe", probe, "liveness probe before the first case and after each case");
    crun->add_option("--out", findings_out);
    crun->add_option("--summary", summary_out);
    crun->add_option("--listen", listen, "responder mode: host:port the target's requests arrive on");
    crun->add_option("--dns-flush-name", flush_name);
    crun->add_option("--timeout", timeout_ms, "milliseconds");
    crun->add_option("--workers", campaign_workers);

    // eval
    auto* eval = app.add_subcommand("eval", "metrics");
    eval->require_subcommand(1);
    auto* erules = eval->add_subcommand("rules", "precision/recall/F1 against a benchmark");
    std::string extracted, benchmark;
    double threshold = 0.5;
    erules->add_option("--extracted", extracted)->required();
    erules->add_option("--benchmark", benchmark)->required();
    erules->add_option("--threshold", threshold, "Jaccard threshold");
    auto* ecases = eval->add_subcommand("cases", "test case accuracy");
    std::string manifest;
    ecases->add_option("--manifest", manifest)->required();

    // fixtures serve
    auto* fixtures = app.add_subcommand("fixtures", "reference servers");
    fixtures->require_subcommand(1);
    auto* fserve = fixtures->add_subcommand("serve", "serve a compliant or planted-bug fixture");
    std::string fx_protocol, fx_host = "127.0.0.1", upstream;
    std::vector<std::string> fx_bugs;
    int fx_port = 0;
    fserve->add_option("--protocol", fx_protocol)->required();
    fserve->add_option("--bugs", fx_bugs)->delimiter(',');
    fserve->add_option("--port", fx_port);
    fserve->add_option("--host", fx_host);
    fserve->add_option("--upstream", upstream, "DNS: act as a caching resolver forwarding to host:port");

    // pipeline
    auto* pipeline = app.add_subcommand("pipeline", "rules -> strategies -> cases -> campaign -> eval");
    LlmFlags pipe_llm;
    pipe_llm.add(pipeline);
    std::string pipe_out;
    std::optional<std::vector<std::string>> pipe_bugs;
    pipeline->add_option("--out", pipe_out, "output directory");
    pipeline->add_option("--bugs", pipe_bugs, "fixture bugs, comma separated; 'none' for control fixtures")
        ->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (extract->parsed()) {
            auto cfg = extract_llm.load();
            auto types = types_from(types_file);
            auto corpus = load_seed_dir(seeds_dir, &types);
            auto gw = make_gateway(cfg);
            gw->set_log(log_line);
            RuleBuildOptions opts;
            opts.rfc_id = rfc_id;
            opts.workers = cfg.workers;
            auto built = build_rules(*gw, read_text_file(rfc_file), types, corpus, opts);
            for (const auto& w : built.warnings) diag("warning: " + w);
            auto doc = rules_document(built.rules, config_hash(cfg));
            Json skipped = Json::array();
            for (const auto& s : built.skipped) skipped.push_back(to_json(s));
            doc["skipped"] = skipped;
            write_json_file(rules_out, doc);
            diag("rules: " + std::to_string(built.rules.size()) + " written to " + rules_out);
            return kExitOk;
        }
        if (sgen->parsed()) {
            auto cfg = sgen_llm.load();
            if (cap) cfg.strategy_cap = *cap;
            auto gw = make_gateway(cfg);
            gw->set_log(log_line);
            std::vector<SemanticRule> testable;
            for (auto& r : rules_from_document(read_json_file(rules_in)))
                if (r.testable) testable.push_back(std::move(r));
            auto built = build_strategies(*gw, testable, {cfg.strategy_cap, cfg.workers});
            for (const auto& w : built.warnings) diag("warning: " + w);
            auto doc = strategies_document(built.strategies, config_hash(cfg));
            Json skipped = Json::array();
            for (const auto& s : built.skipped) skipped.push_back(to_json(s));
            doc["skipped"] = skipped;
            write_json_file(strategies_out, doc);
            diag("strategies: " + std::to_string(built.strategies.size()) + " written to " + strategies_out);
            return kExitOk;
        }
        if (cgen->parsed()) {
            auto cfg = cgen_llm.load();
            auto types = types_from(cases_types);
            auto corpus = load_seed_dir(cases_seeds, &types);
            auto gw = make_gateway(cfg);
            gw->set_log(log_line);
            auto batch = gen_cases(*gw, strategies_from_document(read_json_file(strategies_in)), corpus,
                                   {cfg.workers});
            for (const auto& w : batch.warnings) diag("warning: " + w);
            write_cases_dir(cases_out, batch, default_probes(corpus), config_hash(cfg));
            diag("cases: " + std::to_string(batch.cases.size()) + " written to " + cases_out);
            return kExitOk;
        }
        if (crun->parsed()) {
            auto dir = load_cases_dir(cases_dir);
            auto [host, port] = split_host_port(target);
            auto ep = default_endpoint(protocol_from_string(protocol_name), host, port, mode_from_string(mode_name));
            if (!listen.empty()) std::tie(ep.listen_host, ep.listen_port) = split_host_port(listen);
            ep.dns_flush_name = flush_name;
            if (ep.mode == CampaignMode::Responder && ep.listen_port == 0)
                throw ConfigError("responder mode needs --listen host:port");
            CampaignConfig cc;
            cc.timeout_ms = timeout_ms;
            cc.workers = campaign_workers;
            cc.probe = probe;
            cc.probes = dir.probes;
            auto report = run_campaign(dir.cases, ep, cc);
            write_text_file(findings_out, findings_jsonl(report.verdicts));
            std::string hash = dir.manifest.value("config_hash", std::string());
            if (!summary_out.empty()) write_json_file(summary_out, campaign_summary(report, hash));
            auto pv = report.count(VerdictStatus::PotentialVulnerability);
            diag("campaign: " + std::to_string(report.verdicts.size()) + " verdicts, " + std::to_string(pv) +
                 " potential vulnerabilities, " + std::to_string(report.skipped.size()) + " skipped");
            return pv > 0 ? kExitFindings : kExitOk;
        }
        if (erules->parsed()) {
            MatchOptions mo{threshold};
            auto score = score_rules(rules_from_document(read_json_file(extracted)),
                                     benchmark_from_document(read_json_file(benchmark)), mo);
            std::cout << rule_score_report(score, mo).dump() << "\n";
            return kExitOk;
        }
        if (ecases->parsed()) {
            std::cout << Json{{"accuracy", score_cases(read_json_file(manifest))}}.dump() << "\n";
            return kExitOk;
        }
        if (fserve->parsed()) {
            FixtureConfig fc;
            fc.protocol = protocol_from_string(fx_protocol);
            for (const auto& b : fx_bugs) fc.bugs.insert(bug_from_string(b));
            fc.host = fx_host;
            if (fx_port < 0 || fx_port > 65535) throw ConfigError("bad --port");
            fc.port = static_cast<std::uint16_t>(fx_port);
            if (!upstream.empty()) std::tie(fc.upstream_host, fc.upstream_port) = split_host_port(upstream);
            auto f = serve(fc);
            std::signal(SIGINT, [](int) { g_stop = true; });
            std::signal(SIGTERM, [](int) { g_stop = true; });
            std::cout << "listening " << fc.host << ":" << f->port() << std::endl;
            while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
            f->shutdown();
            return kExitOk;
        }
        if (pipeline->parsed()) {
            if (pipe_llm.config.empty()) throw ConfigError("pipeline needs --config");
            auto cfg = load_config(pipe_llm.config);
            auto over = pipe_llm.overrides();
            if (!pipe_out.empty()) over.out = pipe_out;
            if (pipe_bugs) {
                over.bugs.emplace();
                for (const auto& b : *pipe_bugs)
                    if (b != "none") over.bugs->push_back(bug_from_string(b));
            }
            apply_overrides(cfg, over);
            auto res = run_pipeline(cfg, log_line);
            auto pv = res.report.count(VerdictStatus::PotentialVulnerability);
            return pv > 0 ? kExitFindings : kExitOk;
        }
    } catch (const Error& e) {
        diag("error " + e.kind() + ": " + e.what());
        return kExitRuntime;
    } catch (const std::exception& e) {
        diag(std::string("error Unexpected: ") + e.what());
        return kExitRuntime;
    }
    return kExitUsage;
}

// SPDX-License-Identifier: Apache-2.0
//
// End-to-end run: RFC text -> rules -> strategies -> cases -> campaigns
// against the bundled fixtures -> findings and metrics.
#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "semfuzz/campaign.hpp"
#include "semfuzz/config.hpp"
#include "semfuzz/eval.hpp"

namespace semfuzz {

/// Starts one fixture per group (DNS authoritative for DNS queries, DNS
/// caching resolver for DNS responses, HTTP, TLS), runs the matching cases
/// against it and shuts it down. Verdicts come in that group order. Cases no
/// fixture can take are reported as skipped.
CampaignReport run_against_fixtures(const std::vector<TestCase>& cases, const std::set<BugId>& bugs,
                                    const CampaignConfig& cfg);

/// Writes findings.jsonl and summary.json into `dir`.
void write_findings(const std::string& dir, const CampaignReport& report, const std::string& config_hash);

struct PipelineResult {
    std::size_t rules = 0;
    std::size_t strategies = 0;
    std::size_t cases = 0;
    std::size_t valid_cases = 0;
    CampaignReport report;
    std::optional<RuleScore> rule_score;
};

/// Writes rules.json, strategies.json, cases/, findings.jsonl, summary.json,
/// eval.json and run.json under cfg.out.
PipelineResult run_pipeline(const RunConfig& cfg, const LogSink& log);

/// Gateway for the configured provider, templates and sampling.
std::unique_ptr<LlmGateway> make_gateway(const RunConfig& cfg);

}  // namespace semfuzz

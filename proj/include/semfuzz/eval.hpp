// SPDX-License-Identifier: Apache-2.0
//
// Precision/recall/F1 of extracted rules against an annotated benchmark, and
// accuracy of generated test cases.
#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "semfuzz/rules.hpp"
#include "semfuzz/testcase.hpp"

namespace semfuzz {

struct BenchmarkRule {
    std::string annotation_id;
    SemanticRule rule;
};

/// Rules document (or bare array); every entry needs "annotation_id".
/// Throws SchemaViolation.
std::vector<BenchmarkRule> benchmark_from_document(const Json& doc);

struct MetricReport {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    double precision = 0;
    double recall = 0;
    double f1 = 0;
};

MetricReport metrics_from_counts(std::size_t tp, std::size_t fp, std::size_t fn);

/// Lower-cased alphanumeric tokens minus function words.
std::set<std::string> content_words(std::string_view text);
/// 0 when both sets are empty.
double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);
/// Lower case, whitespace runs collapsed to one space, trimmed.
std::string fold_name(std::string_view s);

struct MatchOptions {
    double threshold = 0.5;
};

bool match_rule(const SemanticRule& extracted, const BenchmarkRule& bench, const MatchOptions& opts = {});

struct RuleMatch {
    std::string rule_id;
    std::string annotation_id;
};

struct RuleScore {
    MetricReport metrics;
    std::vector<RuleMatch> matches;
};

/// Greedy one-to-one: each extracted rule, in order, takes the first unused
/// benchmark rule it matches.
RuleScore score_rules(const std::vector<SemanticRule>& extracted, const std::vector<BenchmarkRule>& benchmark,
                      const MatchOptions& opts = {});

/// valid / total. Throws EmptyBatch on no cases.
double score_cases(const std::vector<TestCase>& cases);
/// Same, from the "cases" entries of a cases manifest.
double score_cases(const Json& manifest);

Json to_json(const MetricReport& m);
/// Report with the matcher description, threshold and matched pairs.
Json rule_score_report(const RuleScore& s, const MatchOptions& opts);

}  // namespace semfuzz

// SPDX-License-Identifier: Apache-2.0
#include <string>

#include "doctest.h"
#include "semfuzz/errors.hpp"
#include "semfuzz/hex.hpp"
#include "semfuzz/testcase.hpp"
#include "support.hpp"

using namespace semfuzz;
namespace ts = testsupport;

namespace {

ActionSequence seq(const char* json) { return action_sequence_from_json(Json::parse(json), "S"); }

std::size_t index_of(const std::vector<std::uint16_t>& v, std::uint16_t x) {
    return static_cast<std::size_t>(std::find(v.begin(), v.end(), x) - v.begin());
}

SemanticRule psk_rule() {
    SemanticRule r;
    r.id = "t.R001";
    r.protocol = Protocol::Tls13;
    r.message_type = "ClientHello with Pre Shared Key Extension";
    r.field = "handshake.extensions[*]";
    r.construction = {"client", "pre_shared_key must be the last extension", false};
    r.processing = {"server", "abort with illegal_parameter", false};
    return r;
}

}  // namespace

TEST_CASE("feedback phrases map to exactly two classes") {
    CHECK(feedback_from_text("Error feedback") == FeedbackClass::Error);
    CHECK(feedback_from_text("Normal feedback") == FeedbackClass::Normal);
    CHECK(feedback_from_text("no response") == FeedbackClass::Error);
    CHECK(feedback_from_text("server sends an alert") == FeedbackClass::Error);
    CHECK(feedback_from_text("reject") == FeedbackClass::Error);
    CHECK(feedback_from_text("handshake proceeds") == FeedbackClass::Normal);
    CHECK(feedback_from_text("200 OK") == FeedbackClass::Normal);
    CHECK(feedback_from_text("HTTP 400 Bad Request") == FeedbackClass::Error);
    CHECK_THROWS_AS(feedback_from_text("it depends"), SchemaViolation);
    CHECK_THROWS_AS(feedback_from_text("accepted or rejected"), SchemaViolation);
    CHECK_THROWS_AS(feedback_from_text("not accepted"), SchemaViolation);
}

TEST_CASE("gen_strategies copies the rule identity and caps the list") {
    std::string answer = R"([
      {"description": "Place the pre_shared_key extension before supported_versions in extensions",
       "expected_feedback": "Error feedback"},
      {"description": "Duplicate extensions entry", "expected_feedback": "alert"}])";
    auto gw = ts::scripted_gateway([&](const std::string&) -> std::optional<std::string> { return answer; });
    auto rule = psk_rule();
    auto out = gen_strategies(*gw, rule);
    REQUIRE(out.size() == 2);
    CHECK(out[0].id == "t.R001.M1");
    CHECK(out[1].id == "t.R001.M2");
    for (const auto& s : out) {
        CHECK(s.rule_id == rule.id);
        CHECK(s.protocol == rule.protocol);
        CHECK(s.message_type == rule.message_type);
        CHECK(s.field == rule.field);
        CHECK(s.expected == FeedbackClass::Error);
        CHECK(s.sender_role == "client");
    }

    Json many = Json::array();
    for (int i = 0; i < 9; ++i)
        many.push_back({{"description", "extensions change " + std::to_string(i)}, {"expected_feedback", "Error"}});
    answer = many.dump();
    std::vector<std::string> warnings;
    CHECK(gen_strategies(*gw, rule, 5, &warnings).size() == 5);
    CHECK(warnings.size() == 1);

    answer = R"([{"description": "extensions", "expected_feedback": "maybe"}])";
    CHECK_THROWS_AS(gen_strategies(*gw, rule), SchemaViolation);

    auto doc = strategies_document(out, "h");
    auto back = strategies_from_document(doc);
    CHECK(strategies_document(back, "h") == doc);
}

TEST_CASE("identity update reproduces the seed wire") {
    for (const auto& f : ts::seed_files()) {
        auto wire = load_wire_file(f.path.string());
        auto seed = decode(f.protocol, "", wire);
        auto first = field_paths(seed).back();
        const auto& node = get(seed, first);
        if (node.value.is_composite()) continue;
        ActionSequence s{"S", {Action{Action::Kind::Update, first, {}, {}, to_json(node.value), false}}};
        auto tc = apply_actions(seed, s);
        CHECK_MESSAGE(tc.valid, f.path);
        CHECK_MESSAGE(tc.wire == wire, f.path);
    }
}

TEST_CASE("adding a 13-byte extension grows every enclosing length by 17") {
    auto seed = ts::load_seed("tls/ch_default.hex", Protocol::Tls13);
    auto before = encode(seed);
    auto tc = apply_actions(seed, seq(R"([{"action": "add", "target_parent": "handshake.extensions",
        "new_field": {"name": "extension", "value": {"kind": "composite", "children": [
          {"name": "type", "value": {"kind": "uint", "value": 65000, "bits": 16}},
          {"name": "length", "derived": true, "value": {"kind": "uint", "value": 0, "bits": 16}},
          {"name": "data", "value": {"kind": "bytes", "hex": "00112233445566778899aabbcc"}}]}}}])"));
    REQUIRE(tc.valid);
    CHECK(tc.wire.size() == before.size() + 17);
    CHECK(ts::be(tc.wire, 3, 2) == ts::be(before, 3, 2) + 17);
    CHECK(ts::be(tc.wire, 6, 3) == ts::be(before, 6, 3) + 17);
    CHECK(ts::tls_length_mismatch(tc.wire).empty());
    CHECK(ts::tls_extension_types(tc.wire).back() == 65000);
    CHECK(decode(Protocol::Tls13, "", tc.wire) == tc.message);
}

TEST_CASE("added nodes get their lengths and counts recomputed without derived flags") {
    auto seed = ts::load_seed("tls/ch_default.hex", Protocol::Tls13);
    auto before = encode(seed);
    // As the model writes it: no derived flags, a stale length.
    auto tc = apply_actions(seed, seq(R"([{"action": "add", "target_parent": "handshake.extensions", "position": 0,
        "new_field": {"name": "extension", "value": {"kind": "composite", "children": [
          {"name": "type", "value": {"kind": "uint", "value": 65000, "bits": 16}},
          {"name": "length", "value": {"kind": "uint", "value": 99, "bits": 16}},
          {"name": "data", "value": {"kind": "bytes", "hex": "00112233445566778899aabbcc"}}]}}}])"));
    REQUIRE(tc.valid);
    CHECK(tc.wire.size() == before.size() + 17);
    CHECK(ts::tls_length_mismatch(tc.wire).empty());
    CHECK(ts::tls_extension_types(tc.wire).front() == 65000);
    CHECK(get(tc.message, FieldPath::parse("handshake.extensions[0].length")).derived);
    // The type field has no recompute rule and stays as written.
    CHECK_FALSE(get(tc.message, FieldPath::parse("handshake.extensions[0].type")).derived);

    auto resp = ts::load_seed("dns/resp_a_www.hex", Protocol::Dns);
    auto dns = apply_actions(resp, seq(R"([{"action": "add", "target_parent": "answer", "new_field":
        {"name": "rr", "value": {"kind": "composite", "children": [
          {"name": "name", "value": {"kind": "text", "value": "evil.example"}},
          {"name": "type", "value": {"kind": "uint", "value": 1, "bits": 16}},
          {"name": "class", "value": {"kind": "uint", "value": 1, "bits": 16}},
          {"name": "ttl", "value": {"kind": "uint", "value": 300, "bits": 32}},
          {"name": "rdlength", "value": {"kind": "uint", "value": 0, "bits": 16}},
          {"name": "rdata", "value": {"kind": "bytes", "hex": "06060606"}}]}}}])"));
    REQUIRE(dns.valid);
    // ancount at offset 6; the new record's rdlength sits 6 bytes before its 4-byte rdata.
    CHECK(ts::be(dns.wire, 6, 2) == 2);
    CHECK(ts::be(dns.wire, dns.wire.size() - 6, 2) == 4);
    CHECK_FALSE(get(dns.message, FieldPath::parse("answer[1].ttl")).derived);
}

TEST_CASE("moving pre_shared_key before supported_versions") {
    auto seed = ts::load_seed("tls/ch_psk.hex", Protocol::Tls13);
    auto seed_copy = seed;
    auto wire = encode(seed);
    auto types = ts::tls_extension_types(wire);
    REQUIRE(types.back() == 41);
    auto sv = index_of(types, 43);
    auto psk = get(seed, FieldPath::parse("handshake.extensions[10]"));
    Json add{{"action", "add"}, {"target_parent", "handshake.extensions"}, {"position", sv}, {"new_field", to_json(psk)}};
    Json actions = Json::array({Json{{"action", "remove"}, {"target", "handshake.extensions[10]"}}, add});
    auto tc = apply_actions(seed, action_sequence_from_json(actions, "S"));
    REQUIRE(tc.valid);
    auto after = ts::tls_extension_types(tc.wire);
    CHECK(after.size() == types.size());
    CHECK(after.back() != 41);
    CHECK(index_of(after, 41) == sv);
    CHECK(index_of(after, 43) == sv + 1);
    CHECK(tc.wire.size() == wire.size());
    CHECK(ts::tls_length_mismatch(tc.wire).empty());
    CHECK(seed == seed_copy);
}

TEST_CASE("whitespace before the Content-Length colon") {
    auto seed = ts::load_seed("http/post_form.bin", Protocol::Http1);
    auto tc = apply_actions(seed, seq(R"([{"action": "update", "target": "headers.Content-Length.name",
                                           "new_value": "Content-Length "}])"));
    REQUIRE(tc.valid);
    std::string s(tc.wire.begin(), tc.wire.end());
    CHECK(s.find("\r\nContent-Length : 27\r\n") != std::string::npos);
}

TEST_CASE("freeze_derived keeps a wrong length") {
    auto seed = ts::load_seed("tls/ch_default.hex", Protocol::Tls13);
    auto tc = apply_actions(seed, seq(R"([{"action": "update", "target": "record.length", "new_value": 5,
                                           "freeze_derived": true}])"));
    REQUIRE(tc.valid);
    CHECK(ts::be(tc.wire, 3, 2) == 5);
    CHECK(ts::be(tc.wire, 6, 3) == tc.wire.size() - 9);
    CHECK(tc.frozen == std::vector<std::string>{"record.length"});

    auto thawed = apply_actions(seed, seq(R"([{"action": "update", "target": "record.length", "new_value": 5}])"));
    REQUIRE(thawed.valid);
    CHECK(thawed.wire == encode(seed));
}

TEST_CASE("inference only for derived fields") {
    auto seed = ts::load_seed("dns/resp_cname.hex", Protocol::Dns);
    auto ok = apply_actions(seed, seq(R"([{"action": "remove", "target": "answer[2]"},
                                          {"action": "update", "target": "header.ancount"}])"));
    REQUIRE(ok.valid);
    CHECK(ts::be(ok.wire, 6, 2) == 2);
    CHECK(ts::dns_count_mismatch(ok.wire).empty());

    auto bad = apply_actions(seed, seq(R"([{"action": "update", "target": "question[0].qname"}])"));
    CHECK_FALSE(bad.valid);
    REQUIRE(bad.error);
    CHECK(bad.error->kind == "SchemaViolation");
}

TEST_CASE("failing actions mark the case invalid") {
    auto seed = ts::load_seed("dns/query_a_www.hex", Protocol::Dns);
    auto missing = apply_actions(seed, seq(R"([{"action": "remove", "target": "nonexistent.path"}])"));
    CHECK_FALSE(missing.valid);
    REQUIRE(missing.error);
    CHECK(missing.error->kind == "PathNotFound");
    CHECK(missing.error->action == 0u);
    CHECK(missing.wire.empty());

    auto range = apply_actions(seed, seq(R"([{"action": "update", "target": "header.id", "new_value": 7},
        {"action": "add", "target_parent": "question", "position": 9,
         "new_field": {"name": "question", "value": {"kind": "text", "value": "x"}}}])"));
    CHECK_FALSE(range.valid);
    CHECK(range.error->kind == "PositionOutOfRange");
    CHECK(range.error->action == 1u);

    auto type = apply_actions(seed, seq(R"([{"action": "update", "target": "header.id", "new_value": "abc"}])"));
    CHECK_FALSE(type.valid);
    CHECK(type.error->kind == "TypeMismatch");

    auto http = ts::load_seed("http/get_basic.bin", Protocol::Http1);
    auto cr = apply_actions(http, seq(R"([{"action": "update", "target": "request_line.target", "new_value": "/a\r\nb"}])"));
    CHECK_FALSE(cr.valid);
    CHECK(cr.error->kind == "Unencodable");
    CHECK_FALSE(cr.error->action);

    CHECK_THROWS_AS(seq(R"([{"action": "update", "target": "a[x"}])"), SchemaViolation);
    CHECK_THROWS_AS(seq(R"([])"), SchemaViolation);
}

TEST_CASE("gen_cases batch accuracy and case files") {
    auto types = load_message_types((ts::source_dir() / "data" / "message_types.json").string());
    auto corpus = load_seed_dir((ts::data_dir() / "seeds").string(), &types);
    auto gw = ts::scripted_gateway([](const std::string& prompt) -> std::optional<std::string> {
        if (prompt.find("\"description\": \"bump id\"") != std::string::npos)
            return std::string(R"([{"action": "update", "target": "header.id", "new_value": 4660}])");
        if (prompt.find("\"description\": \"drop answer\"") != std::string::npos)
            return std::string(R"([{"action": "remove", "target": "answer[0]"}])");
        if (prompt.find("\"description\": \"break path\"") != std::string::npos)
            return std::string(R"([{"action": "remove", "target": "answer[7]"}])");
        return std::string(R"([{"action": "update", "target": "headers.Host.value", "new_value": "h"}])");
    });
    auto mk = [](const char* id, const char* type, Protocol p, const char* d) {
        MutationStrategy s;
        s.id = id;
        s.rule_id = "r";
        s.protocol = p;
        s.message_type = type;
        s.description = d;
        return s;
    };
    std::vector<MutationStrategy> strategies = {
        mk("a.M1", "DNS Query", Protocol::Dns, "bump id"),
        mk("a.M2", "DNS Response", Protocol::Dns, "drop answer"),
        mk("a.M3", "DNS Response", Protocol::Dns, "break path"),
        mk("a.M4", "http request with Host header", Protocol::Http1, "host"),
        mk("a.M5", "IPv6 header with TCP", Protocol::Ipv6, "no seed"),
    };
    auto batch = gen_cases(*gw, strategies, corpus);
    REQUIRE(batch.cases.size() == 4);
    CHECK(batch.accuracy == doctest::Approx(0.75));
    REQUIRE(batch.skipped.size() == 1);
    CHECK(batch.skipped[0].error_kind == "NoSeedForType");
    CHECK(batch.cases[0].case_id == "a.M1.T1");
    CHECK(ts::be(batch.cases[0].wire, 0, 2) == 4660);
    CHECK_FALSE(batch.cases[2].valid);
    for (const auto& c : batch.cases)
        if (c.valid) CHECK(encode(decode(c.protocol, c.message_type, c.wire)) == c.wire);

    auto dir = std::filesystem::temp_directory_path() / "semfuzz_cases";
    std::filesystem::remove_all(dir);
    auto probes = default_probes(corpus);
    CHECK(probes.count("DNS/client"));
    CHECK(probes.count("DNS/server"));
    CHECK(probes.count("TLS13/client"));
    CHECK(probes.count("HTTP1/client"));
    write_cases_dir(dir.string(), batch, probes, "h");
    auto loaded = load_cases_dir(dir.string());
    REQUIRE(loaded.cases.size() == 4);
    CHECK(loaded.manifest["accuracy"] == 0.75);
    CHECK(loaded.probes == probes);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(loaded.cases[i].wire == batch.cases[i].wire);
        CHECK(to_json(loaded.cases[i]) == to_json(batch.cases[i]));
    }
    std::filesystem::remove_all(dir);
}

// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <filesystem>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "semfuzz/errors.hpp"
#include "semfuzz/io.hpp"
#include "semfuzz/llm.hpp"
#include "support.hpp"

using namespace semfuzz;
namespace ts = testsupport;
namespace fs = std::filesystem;

namespace {

TemplateStore bundled_templates() {
    return TemplateStore::load((ts::source_dir() / "data" / "templates").string());
}

fs::path fresh_dir(const char* name) {
    auto d = fs::temp_directory_path() / name;
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

Json completion(const std::string& text) {
    return Json{{"choices", Json::array({Json{{"message", {{"role", "assistant"}, {"content", text}}}}})}};
}

}  // namespace

TEST_CASE("bundled templates render every input variable") {
    auto t = bundled_templates();
    Json rule = {{"field", "handshake.extensions[*]"},
                 {"construction", {{"role", "client"}, {"content", "psk MUST be last"}}},
                 {"processing", {{"role", "server"}, {"content", "abort"}}}};
    auto out = t.render("strategy_gen", Json{{"semantic_rule", rule}});
    CHECK(out.find("psk MUST be last") != std::string::npos);
    CHECK(out.find("${") == std::string::npos);
    CHECK(out.find("@Persona") != std::string::npos);
    CHECK(out.find("@Format") != std::string::npos);

    Json vars{{"mutation_strategy", "Swap the psk extension with server_name"},
              {"message_structure", Json{{"handshake", {{"extensions", "..."}}}}}};
    auto a = t.render("action_gen", vars);
    CHECK(a.find("Swap the psk extension with server_name") != std::string::npos);
    CHECK(a.find("\"extensions\": \"...\"") != std::string::npos);
    CHECK(a == t.render("action_gen", vars));

    CHECK_THROWS_AS(t.render("action_gen", Json{{"mutation_strategy", "x"}}), MissingVariable);
    CHECK_THROWS_AS(t.render("nope", Json::object()), UnknownTemplate);
    CHECK_THROWS_AS(t.render("nope", Json::object()), MissingVariable);
    for (const char* id : kTemplateIds) CHECK_FALSE(t.text(id).empty());
}

TEST_CASE("sha256 of known vectors") {
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("replay store hit and miss") {
    auto dir = fresh_dir("semfuzz_replay");
    TemplateStore t;
    t.set("spec_identify", "Q: ${text}$");
    ProviderBinding b;
    b.kind = ProviderBinding::Kind::Replay;
    b.store_dir = dir.string();
    LlmGateway g(b, t);
    ChatRequest req{"spec_identify", Json{{"text", "hello"}}, {}};
    CHECK_THROWS_AS(g.complete(req), FixtureMiss);
    write_json_file((dir / (sha256_hex("Q: hello") + ".json")).string(),
                    Json{{"prompt", "Q: hello"}, {"response", "[]"}, {"model", "m"}});
    CHECK(g.complete(req) == "[]");
    CHECK(g.ask(req, "spec_requirements") == Json::array());
    fs::remove_all(dir);
}

TEST_CASE("remote provider retries 429 and sends the sampling defaults") {
    httplib::Server srv;
    std::atomic<int> hits{0};
    Json seen;
    std::string auth;
    srv.Post("/v1/chat/completions", [&](const httplib::Request& rq, httplib::Response& rs) {
        if (hits++ == 0) {
            rs.status = 429;
            rs.set_content("slow down", "text/plain");
            return;
        }
        seen = Json::parse(rq.body);
        auth = rq.get_header_value("Authorization");
        rs.set_content(completion("[{\"message_type\":\"DNS Query\",\"content\":\"c\"}]").dump(),
                       "application/json");
    });
    int port = srv.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread th([&] { srv.listen_after_bind(); });
    srv.wait_until_ready();

    ::setenv("SEMFUZZ_TEST_KEY", "k123", 1);
    auto dir = fresh_dir("semfuzz_record");
    ProviderBinding b;
    b.kind = ProviderBinding::Kind::Record;
    b.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/";
    b.model = "test-model";
    b.store_dir = dir.string();
    b.api_key_env = "SEMFUZZ_TEST_KEY";
    b.backoff_ms = 1;
    TemplateStore t;
    t.set("spec_identify", "find: ${text}$");
    LlmGateway g(b, t);
    std::vector<std::string> logs;
    g.set_log([&](const std::string& l) { logs.push_back(l); });

    auto out = g.ask(ChatRequest{"spec_identify", Json{{"text", "rfc"}}, {}}, "spec_requirements");
    srv.stop();
    th.join();

    CHECK(out.size() == 1);
    CHECK(hits == 2);
    CHECK(g.retries() == 1);
    CHECK(logs.size() == 1);
    CHECK(seen["temperature"] == 0.5);
    CHECK(seen["top_p"] == 0.1);
    CHECK(seen["model"] == "test-model");
    CHECK(seen["messages"][0]["content"] == "find: rfc");
    CHECK(auth == "Bearer k123");

    auto rec = read_json_file((dir / (sha256_hex("find: rfc") + ".json")).string());
    CHECK(rec["prompt"] == "find: rfc");
    CHECK(rec["model"] == "test-model");
    CHECK(rec["sampling"]["top_p"] == 0.1);

    b.kind = ProviderBinding::Kind::Replay;
    LlmGateway replay(b, t);
    CHECK(replay.ask(ChatRequest{"spec_identify", Json{{"text", "rfc"}}, {}}, "spec_requirements") == out);
    fs::remove_all(dir);
}

TEST_CASE("remote provider gives up after max attempts") {
    int calls = 0;
    HttpPost post = [&](const std::string&, const std::string&, const std::map<std::string, std::string>&,
                        int) -> HttpReply {
        ++calls;
        throw TransportError("connection refused");
    };
    ProviderBinding b;
    b.kind = ProviderBinding::Kind::RemoteHttp;
    b.base_url = "http://x";
    b.backoff_ms = 0;
    TemplateStore t;
    t.set("spec_identify", "p");
    LlmGateway g(b, t, 4, post);
    g.set_log([](const std::string&) {});
    CHECK_THROWS_AS(g.complete(ChatRequest{"spec_identify", Json::object(), {}}), TransportError);
    CHECK(calls == 3);
    CHECK(g.retries() == 2);
}

TEST_CASE("ask re-prompts once on a schema violation") {
    std::vector<std::string> prompts;
    HttpPost post = [&](const std::string&, const std::string& body, const std::map<std::string, std::string>&,
                        int) {
        prompts.push_back(Json::parse(body)["messages"][0]["content"]);
        auto text = prompts.size() == 1 ? std::string("[{\"description\":\"drop it\"}]")
                                        : std::string("[{\"description\":\"drop it\",\"expected_feedback\":\"Error feedback\"}]");
        return HttpReply{200, completion(text).dump()};
    };
    ProviderBinding b;
    b.kind = ProviderBinding::Kind::RemoteHttp;
    b.base_url = "http://x";
    TemplateStore t;
    t.set("strategy_gen", "rule ${semantic_rule}$");
    LlmGateway g(b, t, 1, post);
    g.set_log([](const std::string&) {});
    auto out = g.ask(ChatRequest{"strategy_gen", Json{{"semantic_rule", "r"}}, {}}, "mutation_strategies");
    CHECK(out[0]["expected_feedback"] == "Error feedback");
    REQUIRE(prompts.size() == 2);
    CHECK(prompts[1].find("expected_feedback") != std::string::npos);
}

TEST_CASE("structured output parsing") {
    auto fenced = "Sure:\n```json\n{\"field\": \"a.b\", \"construction\": {\"role\": \"Client\", "
                  "\"content\": \"x}\"}, \"processing\": {\"role\": \"server\", \"content\": \"y\", "
                  "\"inferred\": true}}\n```\nDone.";
    auto r = parse_structured(fenced, "semantic_rule");
    CHECK(r["field"] == "a.b");
    CHECK(r["construction"]["role"] == "client");
    CHECK(r["construction"]["content"] == "x}");

    auto s = parse_structured("The strategies are {\"mutation_strategies\": [{\"description\": \"d\", "
                              "\"expected_feedback\": \"Normal feedback\"}]}", "mutation_strategies");
    CHECK(s.size() == 1);

    CHECK_THROWS_AS(parse_structured("[{\"description\": \"d\"}]", "mutation_strategies"), SchemaViolation);
    CHECK_THROWS_AS(parse_structured("no json at all", "semantic_rule"), SchemaViolation);
    CHECK_THROWS_AS(parse_structured("[]", "action_sequence"), SchemaViolation);
    CHECK_THROWS_AS(parse_structured("[{\"action\": \"swap\", \"target\": \"a\"}]", "action_sequence"),
                    SchemaViolation);
    CHECK_THROWS_AS(parse_structured("[{\"action\": \"add\", \"target_parent\": \"a\", \"position\": -1, "
                                     "\"new_field\": {\"name\": \"n\", \"value\": {}}}]", "action_sequence"),
                    SchemaViolation);
    auto a = parse_structured("[{\"action\": \"Update\", \"target\": \"x\"}]", "action_sequence");
    CHECK(a[0]["action"] == "update");
    CHECK_THROWS_AS(parse_structured("{\"field\": \"f\", \"construction\": {\"role\": \"peer\", "
                                     "\"content\": \"c\"}, \"processing\": {\"role\": \"server\", "
                                     "\"content\": \"p\"}}", "semantic_rule"), SchemaViolation);
}

// SPDX-License-Identifier: Apache-2.0
#include "semfuzz/testcase.hpp"

#include <filesystem>
#include <fstream>

#include "parallel.hpp"
#include "semfuzz/errors.hpp"
#include "semfuzz/hex.hpp"
#include "semfuzz/io.hpp"
#include "strutil.hpp"

namespace semfuzz {

namespace fs = std::filesystem;

namespace {

FieldPath parse_target(const Json& a, const char* key) {
    if (!a.contains(key) || !a[key].is_string())
        throw SchemaViolation(std::string("action lacks a string \"") + key + "\"");
    try {
        return FieldPath::parse(detail::trim(a[key].get<std::string>()));
    } catch (const InvalidPath& e) {
        throw SchemaViolation(std::string("unparsable ") + key + ": " + e.what());
    }
}

std::optional<std::uint64_t> parse_uint(std::string_view s) {
    s = detail::trim(s);
    int base = 10;
    if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
        base = 16;
        s.remove_prefix(2);
    }
    if (s.empty()) return std::nullopt;
    std::uint64_t v = 0;
    for (char c : s) {
        int d;
        if (c >= '0' && c <= '9') d = c - '0';
        else if (base == 16 && c >= 'a' && c <= 'f') d = c - 'a' + 10;
        else if (base == 16 && c >= 'A' && c <= 'F') d = c - 'A' + 10;
        else return std::nullopt;
        if (v > (UINT64_MAX - static_cast<unsigned>(d)) / static_cast<unsigned>(base)) return std::nullopt;
        v = v * static_cast<unsigned>(base) + static_cast<unsigned>(d);
    }
    return v;
}

Json error_json(const CaseError& e) {
    Json j{{"kind", e.kind}, {"what", e.what}};
    j["action"] = e.action ? Json(*e.action) : Json(nullptr);
    return j;
}

std::string probe_type(Protocol p, bool responder) {
    switch (p) {
        case Protocol::Dns: return responder ? "DNS Response" : "DNS Query";
        case Protocol::Tls13: return responder ? "" : "ClientHello with Supported Versions Extension";
        case Protocol::Http1: return responder ? "" : "http request with Host header";
        case Protocol::Ipv6: return "";
    }
    return "";
}

}  // namespace

std::string_view to_string(Action::Kind k) noexcept {
    switch (k) {
        case Action::Kind::Add: return "add";
        case Action::Kind::Remove: return "remove";
        case Action::Kind::Update: return "update";
    }
    return "?";
}

Action action_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("action") || !j["action"].is_string())
        throw SchemaViolation("action must be an object with an \"action\" string");
    auto kind = detail::to_lower(j["action"].get<std::string>());
    Action a;
    if (kind == "update") {
        a.kind = Action::Kind::Update;
        a.target = parse_target(j, "target");
        if (j.contains("new_value") && !j["new_value"].is_null()) a.new_value = j["new_value"];
        if (j.contains("freeze_derived")) {
            if (!j["freeze_derived"].is_boolean()) throw SchemaViolation("freeze_derived must be a boolean");
            a.freeze_derived = j["freeze_derived"].get<bool>();
        }
    } else if (kind == "remove") {
        a.kind = Action::Kind::Remove;
        a.target = parse_target(j, "target");
    } else if (kind == "add") {
        a.kind = Action::Kind::Add;
        a.target = parse_target(j, "target_parent");
        if (j.contains("position") && !j["position"].is_null()) {
            if (!j["position"].is_number_unsigned())
                throw SchemaViolation("position must be a non-negative integer");
            a.position = j["position"].get<std::size_t>();
        }
        if (!j.contains("new_field")) throw SchemaViolation("add lacks \"new_field\"");
        try {
            a.new_field = node_from_json(j["new_field"]);
        } catch (const Error& e) {
            throw SchemaViolation(std::string("bad new_field: ") + e.what());
        } catch (const Json::exception& e) {
            throw SchemaViolation(std::string("bad new_field: ") + e.what());
        }
    } else {
        throw SchemaViolation("unknown action '" + kind + "'");
    }
    return a;
}

Json to_json(const Action& a) {
    Json j{{"action", to_string(a.kind)}};
    switch (a.kind) {
        case Action::Kind::Update:
            j["target"] = a.target.str();
            if (a.new_value) j["new_value"] = *a.new_value;
            if (a.freeze_derived) j["freeze_derived"] = true;
            break;
        case Action::Kind::Remove: j["target"] = a.target.str(); break;
        case Action::Kind::Add:
            j["target_parent"] = a.target.str();
            j["position"] = a.position ? Json(*a.position) : Json(nullptr);
            j["new_field"] = to_json(*a.new_field);
            break;
    }
    return j;
}

Json to_json(const ActionSequence& s) {
    Json arr = Json::array();
    for (const auto& a : s.actions) arr.push_back(to_json(a));
    return Json{{"strategy_id", s.strategy_id}, {"actions", std::move(arr)}};
}

ActionSequence action_sequence_from_json(const Json& j, const std::string& strategy_id) {
    ActionSequence s;
    s.strategy_id = strategy_id;
    const Json* arr = &j;
    if (j.is_object()) {
        s.strategy_id = j.value("strategy_id", strategy_id);
        if (!j.contains("actions")) throw SchemaViolation("action sequence lacks \"actions\"");
        arr = &j["actions"];
    }
    if (!arr->is_array() || arr->empty()) throw SchemaViolation("action sequence must be a non-empty array");
    for (const auto& a : *arr) s.actions.push_back(action_from_json(a));
    return s;
}

FieldValue coerce_value(const Json& v, const FieldNode& like) {
    using K = FieldValue::Kind;
    auto want = like.value.kind();
    if (v.is_object() && v.contains("kind")) {
        try {
            return value_from_json(v);
        } catch (const TypeMismatch&) {
            throw;
        } catch (const Error& e) {
            throw TypeMismatch(std::string("bad value: ") + e.what());
        } catch (const Json::exception& e) {
            throw TypeMismatch(std::string("bad value: ") + e.what());
        }
    }
    if (v.is_string()) {
        auto s = v.get<std::string>();
        switch (want) {
            case K::Text: return FieldValue::text(s);
            case K::Bytes: {
                Bytes b;
                auto h = std::string(detail::trim(s));
                if (h.starts_with("0x")) h = h.substr(2);
                if (try_from_hex(h, b)) return FieldValue::bytes(std::move(b));
                return FieldValue::bytes(Bytes(s.begin(), s.end()));
            }
            case K::UInt:
                if (auto n = parse_uint(s)) return FieldValue::uint(*n, like.value.as_uint().bits);
                break;
            case K::Composite: break;
        }
    } else if (v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        if (want == K::UInt) return FieldValue::uint(v.get<std::uint64_t>(), like.value.as_uint().bits);
        if (want == K::Text) return FieldValue::text(std::to_string(v.get<std::uint64_t>()));
    }
    throw TypeMismatch("cannot use " + v.dump() + " as a " + std::string(to_string(want)) + " value");
}

TestCase apply_actions(const Message& seed, const ActionSequence& seq) {
    TestCase tc;
    tc.strategy_id = seq.strategy_id;
    tc.protocol = seed.protocol;
    tc.message_type = seed.message_type;
    tc.actions = seq;
    tc.message = seed;
    try {
        tc.seed_wire = encode(seed);
    } catch (const Error&) {
    }

    Message msg = seed;
    std::size_t i = 0;
    try {
        if (seq.actions.empty()) throw SchemaViolation("empty action sequence");
        for (; i < seq.actions.size(); ++i) {
            const auto& a = seq.actions[i];
            switch (a.kind) {
                case Action::Kind::Update: {
                    const auto& node = get(msg, a.target);
                    bool derived = node.derived;
                    if (!a.new_value) {
                        if (!derived)
                            throw SchemaViolation("update of non-derived field '" + a.target.str() +
                                                  "' needs a new_value");
                        break;
                    }
                    msg = update_at(msg, a.target, coerce_value(*a.new_value, node));
                    if (a.freeze_derived && derived) {
                        msg = set_derived(msg, a.target, false);
                        tc.frozen.push_back(a.target.str());
                    }
                    break;
                }
                case Action::Kind::Remove: msg = remove_at(msg, a.target); break;
                case Action::Kind::Add: {
                    msg = insert_at(msg, a.target, a.position, *a.new_field);
                    const auto& kids = get(msg, a.target).value.as_composite().children;
                    msg = infer_derived(msg, kids[a.position ? *a.position : kids.size() - 1]);
                    break;
                }
            }
        }
    } catch (const Error& e) {
        tc.message = msg;
        tc.error = CaseError{e.kind(), e.what(), i};
        return tc;
    }
    try {
        msg = repair_derived(msg);
        tc.wire = encode(msg, EncodeOptions{false});
        tc.message = std::move(msg);
        tc.valid = true;
    } catch (const Error& e) {
        tc.message = msg;
        tc.error = CaseError{e.kind(), e.what(), std::nullopt};
    }
    return tc;
}

ActionSequence gen_actions(LlmGateway& gw, const MutationStrategy& strategy, const Message& seed,
                           std::vector<std::string>* warnings) {
    Json ms{{"protocol", to_string(strategy.protocol)},
            {"message_type", strategy.message_type},
            {"field", strategy.field},
            {"description", strategy.description}};
    auto arr = gw.ask(ChatRequest{"action_gen",
                                  Json{{"mutation_strategy", ms}, {"message_structure", describe_fields(seed)}},
                                  {}},
                      "action_sequence");
    auto seq = action_sequence_from_json(arr, strategy.id);
    if (warnings) {
        auto paths = field_paths(seed);
        for (const auto& a : seq.actions)
            if (!field_matches_paths(a.target.str(), paths))
                warnings->push_back("TargetUnknown: " + strategy.id + " targets '" + a.target.str() +
                                    "', which the seed does not have");
    }
    return seq;
}

CaseBatch gen_cases(LlmGateway& gw, const std::vector<MutationStrategy>& strategies,
                    const SeedCorpus& corpus, const CaseOptions& opts) {
    struct Unit {
        std::optional<TestCase> tc;
        std::optional<SkippedUnit> skipped;
        std::vector<std::string> warnings;
    };
    std::vector<Unit> units(strategies.size());
    detail::parallel_for(strategies.size(), opts.workers, [&](std::size_t i) {
        const auto& s = strategies[i];
        auto& u = units[i];
        try {
            const auto& seed = select_seed(corpus, s.message_type);
            auto seq = gen_actions(gw, s, seed.seed, &u.warnings);
            auto tc = apply_actions(seed.seed, seq);
            tc.case_id = s.id + ".T1";
            tc.rule_id = s.rule_id;
            tc.expected = s.expected;
            tc.sender_role = s.sender_role;
            tc.seed_file = seed.source.file;
            u.tc = std::move(tc);
        } catch (const Error& e) {
            u.skipped = SkippedUnit{s.id, "gen_cases", e.kind(), e.what()};
        }
    });
    CaseBatch batch;
    std::size_t valid = 0;
    for (auto& u : units) {
        if (u.tc) {
            valid += u.tc->valid;
            batch.cases.push_back(std::move(*u.tc));
        }
        if (u.skipped) batch.skipped.push_back(std::move(*u.skipped));
        for (auto& w : u.warnings) batch.warnings.push_back(std::move(w));
    }
    batch.accuracy = batch.cases.empty() ? 0.0 : static_cast<double>(valid) / batch.cases.size();
    return batch;
}

Json to_json(const TestCase& c) {
    Json j{{"case_id", c.case_id},
           {"strategy_id", c.strategy_id},
           {"rule_id", c.rule_id},
           {"protocol", to_string(c.protocol)},
           {"message_type", c.message_type},
           {"sender_role", c.sender_role},
           {"expected", to_string(c.expected)},
           {"seed", c.seed_file},
           {"valid", c.valid}};
    j["error"] = c.error ? error_json(*c.error) : Json(nullptr);
    j["frozen"] = c.frozen;
    j["actions"] = to_json(c.actions)["actions"];
    j["wire"] = to_hex(c.wire);
    j["seed_wire"] = to_hex(c.seed_wire);
    j["message"] = to_json(c.message);
    return j;
}

TestCase case_from_json(const Json& j, const WireBytes& wire) {
    try {
        TestCase c;
        c.case_id = j.at("case_id").get<std::string>();
        c.strategy_id = j.value("strategy_id", "");
        c.rule_id = j.value("rule_id", "");
        c.protocol = protocol_from_string(j.at("protocol").get<std::string>());
        c.message_type = j.value("message_type", "");
        c.sender_role = j.value("sender_role", "client");
        c.expected = feedback_from_text(j.at("expected").get<std::string>());
        c.seed_file = j.value("seed", "");
        c.valid = j.at("valid").get<bool>();
        if (j.contains("error") && j["error"].is_object()) {
            const auto& e = j["error"];
            c.error = CaseError{e.value("kind", ""), e.value("what", ""), std::nullopt};
            if (e.contains("action") && e["action"].is_number_unsigned())
                c.error->action = e["action"].get<std::size_t>();
        }
        if (j.contains("frozen")) c.frozen = j["frozen"].get<std::vector<std::string>>();
        c.actions.strategy_id = c.strategy_id;
        if (j.contains("actions"))
            for (const auto& a : j["actions"]) c.actions.actions.push_back(action_from_json(a));
        if (j.contains("message")) c.message = message_from_json(j["message"]);
        c.wire = wire;
        if (j.contains("seed_wire") && !try_from_hex(j["seed_wire"].get<std::string>(), c.seed_wire))
            throw SchemaViolation("bad seed_wire hex in " + c.case_id);
        return c;
    } catch (const Json::exception& e) {
        throw SchemaViolation(std::string("malformed test case: ") + e.what());
    }
}

ProbeSet default_probes(const SeedCorpus& corpus) {
    ProbeSet out;
    for (auto p : {Protocol::Dns, Protocol::Tls13, Protocol::Http1}) {
        for (bool responder : {false, true}) {
            auto type = probe_type(p, responder);
            if (type.empty()) continue;
            for (const auto& e : corpus.entries)
                if (e.message_type == type) {
                    out[std::string(to_string(p)) + (responder ? "/server" : "/client")] = e.wire;
                    break;
                }
        }
    }
    return out;
}

void write_cases_dir(const std::string& dir, const CaseBatch& batch, const ProbeSet& probes,
                     const std::string& config_hash) {
    fs::create_directories(dir);
    Json list = Json::array();
    std::size_t valid = 0;
    for (const auto& c : batch.cases) {
        auto base = fs::path(dir) / c.case_id;
        write_json_file(base.string() + ".json", to_json(c));
        Json entry{{"case_id", c.case_id}, {"file", c.case_id + ".json"}, {"valid", c.valid}};
        if (c.valid) {
            ++valid;
            std::ofstream bin(base.string() + ".bin", std::ios::binary | std::ios::trunc);
            bin.write(reinterpret_cast<const char*>(c.wire.data()), static_cast<std::streamsize>(c.wire.size()));
            if (!bin) throw IoError("cannot write " + base.string() + ".bin");
            entry["wire"] = c.case_id + ".bin";
        }
        list.push_back(std::move(entry));
    }
    Json probe_json = Json::object();
    for (const auto& [k, w] : probes) probe_json[k] = to_hex(w);
    Json skipped = Json::array();
    for (const auto& s : batch.skipped) skipped.push_back(to_json(s));
    Json manifest{{"schema_version", 1},
                  {"config_hash", config_hash},
                  {"total", batch.cases.size()},
                  {"valid", valid},
                  {"accuracy", batch.accuracy},
                  {"cases", std::move(list)},
                  {"skipped", std::move(skipped)},
                  {"probes", std::move(probe_json)}};
    write_json_file((fs::path(dir) / "manifest.json").string(), manifest);
}

CasesDir load_cases_dir(const std::string& dir) {
    CasesDir out;
    out.manifest = read_json_file((fs::path(dir) / "manifest.json").string());
    if (!out.manifest.contains("cases") || !out.manifest["cases"].is_array())
        throw SchemaViolation("manifest lacks a \"cases\" array");
    for (const auto& e : out.manifest["cases"]) {
        auto j = read_json_file((fs::path(dir) / e.at("file").get<std::string>()).string());
        WireBytes wire;
        if (e.contains("wire") && e["wire"].is_string())
            wire = load_wire_file((fs::path(dir) / e["wire"].get<std::string>()).string());
        out.cases.push_back(case_from_json(j, wire));
    }
    if (out.manifest.contains("probes"))
        for (const auto& [k, v] : out.manifest["probes"].items()) {
            Bytes b;
            if (!try_from_hex(v.get<std::string>(), b)) throw SchemaViolation("bad probe hex for " + k);
            out.probes[k] = std::move(b);
        }
    return out;
}

}  // namespace semfuzz

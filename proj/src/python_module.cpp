// SPDX-License-Identifier: Apache-2.0
//
// JSON-in/JSON-out bindings; python/semfuzz wraps them with dicts.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "semfuzz/campaign.hpp"
#include "semfuzz/codec.hpp"
#include "semfuzz/config.hpp"
#include "semfuzz/errors.hpp"
#include "semfuzz/eval.hpp"
#include "semfuzz/fixtures.hpp"
#include "semfuzz/pipeline.hpp"
#include "semfuzz/rules.hpp"
#include "semfuzz/testcase.hpp"

namespace py = pybind11;
using namespace semfuzz;

namespace {

WireBytes to_wire(const py::bytes& b) {
    std::string s = b;
    return WireBytes(s.begin(), s.end());
}

py::bytes to_py(const WireBytes& w) { return py::bytes(reinterpret_cast<const char*>(w.data()), w.size()); }

RawOutcome outcome_of(const std::string& kind, const py::bytes& data, int deadline_ms) {
    if (kind == "bytes") return RawOutcome::of_bytes(to_wire(data), 0);
    if (kind == "timeout") return RawOutcome::timeout(deadline_ms);
    if (kind == "refused") return RawOutcome::refused();
    if (kind == "reset") return RawOutcome::reset();
    throw ConfigError("unknown outcome kind '" + kind + "'");
}

class PyFixture {
public:
    PyFixture(const std::string& protocol, const std::vector<std::string>& bugs, const std::string& upstream_host,
              int upstream_port) {
        FixtureConfig c;
        c.protocol = protocol_from_string(protocol);
        for (const auto& b : bugs) c.bugs.insert(bug_from_string(b));
        c.upstream_host = upstream_host;
        c.upstream_port = static_cast<std::uint16_t>(upstream_port);
        f_ = serve(c);
    }
    int port() const { return f_->port(); }
    bool crashed() const { return f_->crashed(); }
    void shutdown() {
        py::gil_scoped_release nogil;
        f_->shutdown();
    }

private:
    std::unique_ptr<Fixture> f_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    static py::exception<Error> semfuzz_error(m, "SemfuzzError");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::set_error(semfuzz_error, (e.kind() + ": " + e.what()).c_str());
        }
    });

    m.attr("SCHEMA_VERSION") = kSchemaVersion;

    m.def("decode", [](const std::string& protocol, const py::bytes& wire, const std::string& message_type) {
        return to_json(decode(protocol_from_string(protocol), message_type, to_wire(wire))).dump();
    }, py::arg("protocol"), py::arg("wire"), py::arg("message_type") = "");

    m.def("encode", [](const std::string& message_json) {
        return to_py(encode(message_from_json(Json::parse(message_json))));
    });

    m.def("apply_actions", [](const std::string& message_json, const std::string& actions_json) {
        auto seed = message_from_json(Json::parse(message_json));
        auto tc = apply_actions(seed, action_sequence_from_json(Json::parse(actions_json), "py"));
        tc.protocol = seed.protocol;
        tc.message_type = seed.message_type;
        return to_json(tc).dump();
    });

    m.def("classify", [](const std::string& protocol, const std::string& kind, const py::bytes& data,
                         const std::string& qname, int deadline_ms) {
        auto c = classify(protocol_from_string(protocol), outcome_of(kind, data, deadline_ms), {qname});
        return py::make_tuple(std::string(to_string(c.cls)), c.detail);
    }, py::arg("protocol"), py::arg("kind"), py::arg("data") = py::bytes(), py::arg("qname") = "",
       py::arg("deadline_ms") = 0);

    m.def("verify", [](const std::string& expected, const std::string& actual) {
        return std::string(to_string(verify(feedback_from_text(expected), feedback_from_text(actual))));
    });

    m.def("score_rules", [](const std::string& extracted_json, const std::string& benchmark_json, double threshold) {
        auto extracted = rules_from_document(Json::parse(extracted_json));
        auto bench = benchmark_from_document(Json::parse(benchmark_json));
        MatchOptions o;
        o.threshold = threshold;
        return rule_score_report(score_rules(extracted, bench, o), o).dump();
    }, py::arg("extracted_json"), py::arg("benchmark_json"), py::arg("threshold") = 0.5);

    m.def("metrics_from_counts", [](std::size_t tp, std::size_t fp, std::size_t fn) {
        return to_json(metrics_from_counts(tp, fp, fn)).dump();
    });

    m.def("run_pipeline", [](const std::string& config_path, const std::string& out,
                             std::optional<std::vector<std::string>> bugs) {
        auto cfg = load_config(config_path);
        ConfigOverrides o;
        if (!out.empty()) o.out = out;
        if (bugs) {
            o.bugs.emplace();
            for (const auto& b : *bugs) o.bugs->push_back(bug_from_string(b));
        }
        apply_overrides(cfg, o);
        PipelineResult r;
        {
            py::gil_scoped_release nogil;
            r = run_pipeline(cfg, [](const std::string&) {});
        }
        return campaign_summary(r.report, config_hash(cfg)).dump();
    }, py::arg("config_path"), py::arg("out") = "", py::arg("bugs") = py::none());

    py::class_<PyFixture>(m, "Fixture")
        .def(py::init<const std::string&, const std::vector<std::string>&, const std::string&, int>(),
             py::arg("protocol"), py::arg("bugs") = std::vector<std::string>{}, py::arg("upstream_host") = "",
             py::arg("upstream_port") = 0)
        .def_property_readonly("port", &PyFixture::port)
        .def_property_readonly("crashed", &PyFixture::crashed)
        .def("shutdown", &PyFixture::shutdown);
}

// Python module _core. Structured values cross the boundary as JSON text;
// the triplex package decodes them into dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "triplex/app.hpp"
#include "triplex/error.hpp"
#include "triplex/flow.hpp"
#include "triplex/hrv.hpp"
#include "triplex/mqtt/codec.hpp"
#include "triplex/report.hpp"
#include "triplex/store.hpp"

namespace py = pybind11;
using namespace triplex;

namespace {

hrv::AnalysisConfig analysis_config(double min_bpm, double max_bpm, bool outlier_rejection) {
  hrv::AnalysisConfig cfg;
  cfg.min_bpm = min_bpm;
  cfg.max_bpm = max_bpm;
  cfg.outlier_rejection = outlier_rejection;
  cfg.validate();
  return cfg;
}

app::RunConfig run_config(std::size_t threshold, const std::string& flow_file, double sample_rate_hz) {
  app::RunConfig cfg;
  cfg.broker = {"127.0.0.1", 0};
  cfg.speedup = 0;
  cfg.threshold = threshold;
  cfg.flow_file = flow_file;
  cfg.rate_hz = sample_rate_hz;
  cfg.validate();
  return cfg;
}

py::bytes to_py(const mqtt::Bytes& b) { return py::bytes(reinterpret_cast<const char*>(b.data()), b.size()); }

mqtt::Bytes from_py(const py::bytes& b) {
  const std::string s = b;
  return mqtt::Bytes(s.begin(), s.end());
}

std::string packet_json(const mqtt::Packet& p) {
  Json j{{"type", mqtt::packet_name(p)}};
  if (const auto* pub = std::get_if<mqtt::Publish>(&p)) {
    j["topic"] = pub->topic;
    j["payload"] = std::string(pub->payload.begin(), pub->payload.end());
    j["qos"] = pub->qos;
    j["packet_id"] = pub->packet_id ? Json(*pub->packet_id) : Json();
    j["dup"] = pub->dup;
  }
  return j.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Heart-rate pipeline core: HRV analysis, MQTT codec, flows and the three runtimes.";

  static py::exception<Error> base(m, "TriplexError");
  static py::exception<ParseError> parse_error(m, "FlowParseError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ParseError& e) {
      py::set_error(parse_error, e.what());
    } catch (const Error& e) {
      py::set_error(base, e.what());
    }
  });

  m.def(
      "analyze",
      [](const std::vector<double>& samples, double rate, double min_bpm, double max_bpm, bool outlier_rejection) {
        const auto cfg = analysis_config(min_bpm, max_bpm, outlier_rejection);
        return metrics_to_json(hrv::analyze(hrv::Signal{samples, rate, 0}, cfg)).dump();
      },
      py::arg("samples"), py::arg("sample_rate_hz") = 100.0, py::arg("min_bpm") = 40.0, py::arg("max_bpm") = 180.0,
      py::arg("outlier_rejection") = true);

  m.def(
      "compute_metrics",
      [](const std::vector<double>& rr_ms) {
        hrv::RRSeries rr{rr_ms, std::vector<bool>(rr_ms.size(), true)};
        return metrics_to_json(hrv::compute_metrics(rr)).dump();
      },
      py::arg("rr_ms"));

  m.def(
      "detect_peaks",
      [](const std::vector<double>& samples, double rate) {
        return hrv::detect_peaks(hrv::Signal{samples, rate, 0}, hrv::AnalysisConfig{}).indices;
      },
      py::arg("samples"), py::arg("sample_rate_hz") = 100.0);

  m.def("load_signal", &hrv::load_signal_file, py::arg("path"));

  m.def(
      "parse_flow",
      [](const std::string& text) {
        const auto g = flow::parse_flow(text);
        Json j{{"nodes", Json::array()}, {"wires", Json::array()}};
        for (const auto& n : g.nodes) j["nodes"].push_back({{"id", n.id}, {"type", flow::to_string(n.type)}});
        for (const auto& w : g.wires) j["wires"].push_back({w.from, w.to});
        return j.dump();
      },
      py::arg("text"));

  m.def("encode_varint", [](std::uint32_t v) {
    mqtt::Bytes out;
    mqtt::encode_remaining_length(v, out);
    return to_py(out);
  });
  m.def("decode_varint", [](const py::bytes& b) -> std::optional<std::pair<std::uint32_t, std::size_t>> {
    const auto d = mqtt::decode_remaining_length(from_py(b));
    if (!d) return std::nullopt;
    return std::make_pair(d->value, d->length);
  });

  m.def(
      "encode_publish",
      [](const std::string& topic, const py::bytes& payload, std::uint8_t qos, std::optional<std::uint16_t> packet_id) {
        return to_py(mqtt::encode_packet(mqtt::Publish{topic, from_py(payload), qos, packet_id}));
      },
      py::arg("topic"), py::arg("payload"), py::arg("qos") = 0, py::arg("packet_id") = std::nullopt);

  m.def("decode_packet", [](const py::bytes& b) -> std::optional<std::pair<std::string, std::size_t>> {
    const auto d = mqtt::decode_packet(from_py(b));
    if (!d) return std::nullopt;
    return std::make_pair(packet_json(d->packet), d->consumed);
  });

  m.def(
      "run_mode",
      [](const std::string& mode, const std::vector<double>& samples, std::size_t threshold,
         const std::string& flow_file, double rate) {
        const auto cfg = run_config(threshold, flow_file, rate);
        app::RunResult res;
        {
          py::gil_scoped_release release;
          res = app::run_mode(parse_mode(mode), cfg, &samples);
        }
        Json reports = Json::array();
        for (const auto& r : res.reports) reports.push_back(r.to_json());
        return Json{{"final", res.final_report.to_json()},
                    {"reports", reports},
                    {"published", res.published},
                    {"invocations", res.invocations}}
            .dump();
      },
      py::arg("mode"), py::arg("samples"), py::arg("threshold") = 3000,
      py::arg("flow_file") = "flows/health_monitor.json", py::arg("sample_rate_hz") = 100.0);

  m.def(
      "compare",
      [](const std::vector<double>& samples, std::size_t threshold, const std::string& flow_file,
         std::optional<std::string> tamper) {
        const auto cfg = run_config(threshold, flow_file, 100.0);
        app::CompareOptions opts;
        if (tamper) opts.tamper_mode = parse_mode(*tamper);
        py::gil_scoped_release release;
        return app::compare_modes(cfg, samples, opts).to_json().dump();
      },
      py::arg("samples"), py::arg("threshold") = 3000, py::arg("flow_file") = "flows/health_monitor.json",
      py::arg("tamper") = std::nullopt);

  py::class_<store::DocStore>(m, "DocStore")
      .def(py::init<>())
      .def("create_collection", &store::DocStore::create_collection, py::arg("name"),
           py::arg("threshold") = store::kDefaultThreshold)
      .def("insert",
           [](store::DocStore& s, const std::string& coll, const std::string& body) {
             return s.insert(coll, Json::parse(body));
           })
      .def("get_all",
           [](const store::DocStore& s, const std::string& coll) {
             Json out = Json::array();
             for (const auto& d : s.get_all(coll)) out.push_back({{"seq", d.seq}, {"body", d.body}});
             return out.dump();
           })
      .def("delete_all", &store::DocStore::delete_all)
      .def("count", &store::DocStore::count)
      .def("threshold", &store::DocStore::threshold);
}

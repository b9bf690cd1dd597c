#include <fstream>
#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ridepool/engine.hpp"
#include "ridepool/error.hpp"
#include "ridepool/experiment.hpp"
#include "ridepool/lstm.hpp"
#include "ridepool/predictor.hpp"

namespace py = pybind11;
using namespace ridepool;

namespace {

ZoneMap zones_for(const RequestStream& stream, const std::string& zones) {
  if (zones.rfind("grid:", 0) == 0) return desk_zones(std::stoi(zones.substr(5)));
  if (!zones.empty()) {
    std::ifstream in(zones);
    if (!in) throw ConfigError("cannot open zone file " + zones);
    return shortest_travel_times(read_zone_graph(in));
  }
  int side = 1;
  while (side * side < stream.zones) ++side;
  if (side * side != stream.zones) throw ConfigError("stream is not on a square grid; pass zones=");
  return desk_zones(side);
}

py::dict summarize(const RunReport& r) {
  py::dict d;
  d["label"] = r.label;
  d["horizon"] = r.horizon;
  d["first_step"] = r.first;
  d["last_step"] = r.last;
  d["total_reward"] = r.total_reward;
  d["average_pool"] = r.average_pool;
  d["arrivals"] = r.arrivals;
  d["served"] = r.served;
  d["shared"] = r.shared;
  d["expired_unserved"] = r.expired_unserved;
  d["residual"] = r.residual;
  d["cars"] = r.cars;
  d["smape_cell"] = r.smape_cell ? py::cast(*r.smape_cell) : py::none();
  d["smape_total"] = r.smape_total ? py::cast(*r.smape_total) : py::none();
  std::ostringstream csv;
  write_steps_csv(csv, r);
  d["steps_csv"] = csv.str();
  return d;
}

}  // namespace

PYBIND11_MODULE(_ridepool, m) {
  m.doc() = "Online peer-to-peer ridesharing with request forecasts";

  // Registered most-derived last so pybind11 tries them first.
  auto base = py::register_exception<Error>(m, "RidepoolError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());

  py::class_<RequestStream>(m, "Stream")
      .def_readonly("zones", &RequestStream::zones)
      .def_readonly("steps_per_day", &RequestStream::steps_per_day)
      .def_readonly("days", &RequestStream::days)
      .def_readonly("label", &RequestStream::label)
      .def("request_count", &RequestStream::request_count)
      .def("horizon", &RequestStream::horizon)
      .def("counts_at", [](const RequestStream& s, TimeStep t) {
        const auto g = counts_at(s, t);
        std::vector<std::vector<int>> rows(static_cast<std::size_t>(s.zones));
        for (int i = 0; i < s.zones; ++i)
          for (int j = 0; j < s.zones; ++j) rows[i].push_back(g.at(i, j));
        return rows;
      })
      .def("to_text", [](const RequestStream& s) {
        std::ostringstream out;
        write_stream(out, s);
        return out.str();
      })
      .def_static("from_text", [](const std::string& text) {
        std::istringstream in(text);
        return read_stream(in);
      })
      .def_static("load", [](const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open stream file " + path);
        return read_stream(in);
      });

  m.def(
      "synth",
      [](int grid, int days, int steps_per_day, double daily_requests, std::uint64_t seed, bool noise) {
        DeskScenario sc;
        sc.grid = grid;
        sc.days = days;
        sc.steps_per_day = steps_per_day;
        sc.daily_requests = daily_requests;
        sc.seed = seed;
        sc.noise = noise ? Noise::poisson : Noise::none;
        return desk_stream(sc);
      },
      py::arg("grid") = 5, py::arg("days") = 7, py::arg("steps_per_day") = 1440, py::arg("daily_requests") = 200.0,
      py::arg("seed") = 1, py::arg("noise") = true, "Synthetic commuter stream on a grid x grid city.");

  m.def("repeat_day", &repeat_day, py::arg("stream"), py::arg("day"), py::arg("days"));

  m.def(
      "simulate",
      [](const RequestStream& stream, const std::string& predictor, int horizon, std::uint64_t seed,
         long long evaluations, const std::string& zones, const std::string& lstm_path, bool lookahead, int day) {
        SimConfig cfg;
        cfg.horizon = horizon;
        cfg.seed = seed;
        cfg.solver.seed = seed;
        cfg.solver.generation_evaluations = evaluations;
        cfg.lookahead = lookahead;
        PredictorSpec spec;
        spec.kind = parse_predictor_kind(predictor);
        spec.seed = seed;
        if (!lstm_path.empty()) {
          std::ifstream in(lstm_path);
          if (!in) throw ConfigError("cannot open LSTM file " + lstm_path);
          spec.lstm = load_model(in);
        }
        const ZoneMap map = zones_for(stream, zones);
        RunReport report;
        {
          py::gil_scoped_release release;
          auto p = make_predictor(spec, &stream);
          report = day >= 0 ? run_day(stream, day, cfg, map, p.get()) : run(stream, cfg, map, p.get());
        }
        return summarize(report);
      },
      py::arg("stream"), py::arg("predictor") = "none", py::arg("horizon") = 0, py::arg("seed") = 1,
      py::arg("evaluations") = 4000, py::arg("zones") = "", py::arg("lstm") = "", py::arg("lookahead") = true,
      py::arg("day") = -1, "Run the online engine and return a summary dict.");

  m.def(
      "improvement",
      [](const py::dict& baseline, const py::dict& treatment) -> std::optional<double> {
        RunReport a, b;
        a.label = baseline["label"].cast<std::string>();
        b.label = treatment["label"].cast<std::string>();
        a.total_reward = baseline["total_reward"].cast<double>();
        b.total_reward = treatment["total_reward"].cast<double>();
        return compare_runs(a, b);
      },
      py::arg("baseline"), py::arg("treatment"), "Percentage reward improvement; None for a zero baseline.");

  m.def(
      "smape", [](const std::vector<double>& predicted, const std::vector<double>& truth) {
        return smape(predicted, truth);
      },
      py::arg("predicted"), py::arg("truth"));

  m.def(
      "quality_of_service",
      [](const std::vector<int>& ride, const std::vector<int>& solo, const std::vector<int>& arrival,
         const std::vector<int>& max_wait, int commit) { return quality_of_service(ride, solo, arrival, max_wait, commit); },
      py::arg("ride_times"), py::arg("solo_times"), py::arg("arrivals"), py::arg("max_waits"), py::arg("commit_step"));
}

#include "ridepool/experiment.hpp"

#include <atomic>
#include <exception>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <thread>

#include "ridepool/error.hpp"

namespace ridepool {

ZoneMap desk_zones(int grid) {
  return shortest_travel_times(grid_graph(grid, grid));
}

RequestStream desk_stream(const DeskScenario& s) {
  const ZoneMap zones = desk_zones(s.grid);
  SynthConfig cfg;
  cfg.days = s.days;
  cfg.steps_per_day = s.steps_per_day;
  cfg.zones = zones.size();
  cfg.base_rates = commute_rates(zones, s.steps_per_day, s.profile);
  for (auto& grid : cfg.base_rates) {
    for (auto& r : grid) r *= s.daily_requests / s.profile.daily_requests;
  }
  cfg.noise = s.noise;
  cfg.weekend_scale = s.weekend_scale;
  cfg.driver_prob = s.driver_prob;
  cfg.max_wait = s.max_wait;
  cfg.seed = s.seed;
  cfg.label = "desk-" + std::to_string(s.seed);
  return synth_stream(cfg);
}

std::string Treatment::name() const {
  return to_string(kind) + "_f" + std::to_string(horizon);
}

std::string weekday_letter(int weekday) {
  static const char* letters[] = {"M", "T", "W", "T", "F", "S", "S"};
  return letters[((weekday % 7) + 7) % 7];
}

SweepTable run_sweep(const RequestStream& stream, const ZoneMap& zones, const SweepSpec& spec) {
  SweepTable table;
  table.treatments = spec.treatments;
  std::vector<int> days = spec.days;
  if (days.empty()) {
    for (int d = 0; d < stream.days; ++d) days.push_back(d);
  }
  for (const auto& t : spec.treatments) {
    if (t.kind == PredictorKind::lstm && !spec.lstm) throw ConfigError("lstm treatment needs a parameter file");
    if (t.kind == PredictorKind::none) throw ConfigError("treatment predictor must not be 'none'");
    SimConfig probe = spec.base;
    probe.horizon = t.horizon;
    validate(probe);
  }

  // Job k covers (day index k / stride, configuration k % stride); configuration 0 is the baseline.
  const std::size_t stride = spec.treatments.size() + 1;
  const std::size_t total = days.size() * stride;
  std::vector<RunReport> results(total);
  std::vector<std::exception_ptr> errors(total);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t k = next++; k < total; k = next++) {
      try {
        const int day = days[k / stride];
        const std::size_t config = k % stride;
        SimConfig cfg = spec.base;
        PredictorSpec ps;
        ps.seed = spec.base.seed;
        if (config == 0) {
          cfg.horizon = 0;
        } else {
          const auto& t = spec.treatments[config - 1];
          cfg.horizon = t.horizon;
          ps.kind = t.kind;
          ps.lstm = spec.lstm;
        }
        auto predictor = make_predictor(ps, &stream);
        results[k] = run_day(stream, day, cfg, zones, predictor.get());
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(spec.jobs, static_cast<int>(total)));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }

  std::string failures;
  for (std::size_t k = 0; k < total; ++k) {
    if (!errors[k]) continue;
    try {
      std::rethrow_exception(errors[k]);
    } catch (const std::exception& e) {
      const std::size_t config = k % stride;
      failures += "day " + std::to_string(days[k / stride]) + " " +
                  (config == 0 ? std::string("baseline") : spec.treatments[config - 1].name()) + ": " + e.what() + "\n";
    }
  }
  if (!failures.empty()) throw Error("sweep runs failed:\n" + failures);

  for (std::size_t d = 0; d < days.size(); ++d) {
    SweepRow row;
    row.day = days[d];
    const int weekday = (spec.first_weekday + days[d]) % 7;
    row.weekday = weekday_letter(weekday);
    row.weekend = weekday >= 5;
    row.baseline = std::move(results[d * stride]);
    for (std::size_t c = 1; c < stride; ++c) {
      row.treatments.push_back(std::move(results[d * stride + c]));
      row.improvement.push_back(compare_runs(row.baseline, row.treatments.back()));
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

namespace {

void write_optional(std::ostream& out, const std::optional<double>& v) {
  if (v) {
    out << *v;
  } else {
    out << "NA";
  }
}

}  // namespace

void write_improvement_csv(std::ostream& out, const SweepTable& table) {
  out << "day,weekday,weekend,baseline_reward";
  for (const auto& t : table.treatments) out << ',' << t.name();
  out << '\n' << std::setprecision(10);
  for (const auto& row : table.rows) {
    out << row.day + 1 << ',' << row.weekday << ',' << (row.weekend ? 1 : 0) << ',' << row.baseline.total_reward;
    for (const auto& v : row.improvement) {
      out << ',';
      write_optional(out, v);
    }
    out << '\n';
  }
}

void write_pool_csv(std::ostream& out, const SweepTable& table) {
  out << "day,weekday,weekend,baseline";
  for (const auto& t : table.treatments) out << ',' << t.name();
  out << '\n' << std::setprecision(10);
  for (const auto& row : table.rows) {
    out << row.day + 1 << ',' << row.weekday << ',' << (row.weekend ? 1 : 0) << ',' << row.baseline.average_pool;
    for (const auto& r : row.treatments) out << ',' << r.average_pool;
    out << '\n';
  }
}

void write_smape_csv(std::ostream& out, const SweepTable& table) {
  out << "day,weekday";
  for (const auto& t : table.treatments) out << ',' << t.name() << "_smape_cell," << t.name() << "_smape_total";
  out << '\n' << std::setprecision(10);
  for (const auto& row : table.rows) {
    out << row.day + 1 << ',' << row.weekday;
    for (const auto& r : row.treatments) {
      out << ',';
      write_optional(out, r.smape_cell);
      out << ',';
      write_optional(out, r.smape_total);
    }
    out << '\n';
  }
}

}  // namespace ridepool

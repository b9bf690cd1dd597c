#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ridepool/engine.hpp"
#include "ridepool/ingest.hpp"
#include "ridepool/lstm.hpp"
#include "ridepool/predictor.hpp"

namespace ridepool {

// Desk-scale synthetic scenario on a square grid.
struct DeskScenario {
  int grid = 5;  // grid x grid zones
  int days = 7;
  int steps_per_day = 1440;
  double daily_requests = 200.0;
  double weekend_scale = 1.3;
  Noise noise = Noise::poisson;
  double driver_prob = 0.5;
  int max_wait = 5;
  CommuteProfile profile;
  std::uint64_t seed = 1;
};

ZoneMap desk_zones(int grid);
RequestStream desk_stream(const DeskScenario& scenario);

struct Treatment {
  PredictorKind kind = PredictorKind::perfect;
  int horizon = 1;

  std::string name() const;
};

struct SweepSpec {
  SimConfig base;  // horizon is overridden per run
  std::vector<Treatment> treatments;
  std::vector<int> days;         // empty: every day of the stream
  int first_weekday = 5;         // weekday of day 0, Monday = 0 (June 1 2019 was a Saturday)
  int jobs = 1;
  std::optional<LstmModel> lstm;
};

struct SweepRow {
  int day = 0;
  std::string weekday;
  bool weekend = false;
  RunReport baseline;
  std::vector<RunReport> treatments;
  std::vector<std::optional<double>> improvement;
};

struct SweepTable {
  std::vector<Treatment> treatments;
  std::vector<SweepRow> rows;
};

// Baseline (no prediction) plus every treatment for each day. Runs fan out
// over `jobs` threads; results are collected by index so output order never
// depends on scheduling.
SweepTable run_sweep(const RequestStream& stream, const ZoneMap& zones, const SweepSpec& spec);

// "day,weekday,weekend,baseline_reward,<treatment>..." improvement percentages.
void write_improvement_csv(std::ostream& out, const SweepTable& table);
// "day,weekday,weekend,baseline,<treatment>..." average pool sizes.
void write_pool_csv(std::ostream& out, const SweepTable& table);
// "day,weekday,<treatment>_smape_cell,<treatment>_smape_total..." accuracy per treatment.
void write_smape_csv(std::ostream& out, const SweepTable& table);

std::string weekday_letter(int weekday);

}  // namespace ridepool

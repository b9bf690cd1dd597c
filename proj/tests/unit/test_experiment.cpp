#include <doctest.h>

#include <sstream>

#include "ridepool/error.hpp"
#include "ridepool/experiment.hpp"

using namespace ridepool;

namespace {

DeskScenario tiny_week() {
  DeskScenario sc;
  sc.grid = 3;
  sc.days = 7;
  sc.steps_per_day = 96;
  sc.daily_requests = 60;
  sc.seed = 4;
  return sc;
}

SweepSpec tiny_spec() {
  SweepSpec spec;
  spec.base.solver.generation_evaluations = 500;
  spec.treatments = {{PredictorKind::perfect, 1}, {PredictorKind::perfect, 5}};
  return spec;
}

std::string csvs(const SweepTable& table) {
  std::ostringstream out;
  write_improvement_csv(out, table);
  write_pool_csv(out, table);
  write_smape_csv(out, table);
  return out.str();
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("weekday letters") {
  CHECK(weekday_letter(0) == "M");
  CHECK(weekday_letter(3) == "T");
  CHECK(weekday_letter(5) == "S");
  CHECK(weekday_letter(13) == "S");
  CHECK(weekday_letter(-1) == "S");
}

TEST_CASE("treatment names") {
  CHECK(Treatment{PredictorKind::perfect, 1}.name() == "perfect_f1");
  CHECK(Treatment{PredictorKind::yesterday, 5}.name() == "yesterday_f5");
}

TEST_CASE("a week sweep has one row per day with weekend flags") {
  const auto s = desk_stream(tiny_week());
  const auto table = run_sweep(s, desk_zones(3), tiny_spec());
  REQUIRE(table.rows.size() == 7);
  for (int d = 0; d < 7; ++d) {
    const auto& row = table.rows[d];
    CHECK(row.day == d);
    CHECK(row.treatments.size() == 2);
    CHECK(row.improvement.size() == 2);
    CHECK(row.weekend == (d == 0 || d == 1));
    CHECK(row.baseline.horizon == 0);
    CHECK(row.treatments[1].horizon == 5);
    CHECK(row.treatments[0].smape_cell.value() == 0.0);
    CHECK(row.baseline.arrivals == row.treatments[0].arrivals);
  }
  CHECK(table.rows[0].weekday == "S");
  CHECK(table.rows[2].weekday == "M");
  const auto text = csvs(table);
  CHECK(text.rfind("day,weekday,weekend,baseline_reward,perfect_f1,perfect_f5\n", 0) == 0);
}

TEST_CASE("threaded sweeps match serial ones") {
  auto sc = tiny_week();
  sc.days = 3;
  const auto s = desk_stream(sc);
  auto spec = tiny_spec();
  spec.treatments.push_back({PredictorKind::yesterday, 2});
  const auto serial = run_sweep(s, desk_zones(3), spec);
  spec.jobs = 4;
  const auto threaded = run_sweep(s, desk_zones(3), spec);
  CHECK(csvs(serial) == csvs(threaded));
}

TEST_CASE("day subsets and invalid treatments") {
  const auto s = desk_stream(tiny_week());
  auto spec = tiny_spec();
  spec.days = {3, 5};
  const auto table = run_sweep(s, desk_zones(3), spec);
  REQUIRE(table.rows.size() == 2);
  CHECK(table.rows[1].day == 5);

  spec.treatments = {{PredictorKind::lstm, 1}};
  CHECK_THROWS_AS(run_sweep(s, desk_zones(3), spec), ConfigError);
  spec.treatments = {{PredictorKind::none, 1}};
  CHECK_THROWS_AS(run_sweep(s, desk_zones(3), spec), ConfigError);
  spec.treatments = {{PredictorKind::perfect, 9}};
  CHECK_THROWS_AS(run_sweep(s, desk_zones(3), spec), ConfigError);
  spec.treatments = {{PredictorKind::perfect, 1}};
  spec.days = {7};
  CHECK_THROWS_AS(run_sweep(s, desk_zones(3), spec), Error);
}

TEST_CASE("desk streams are reproducible") {
  const auto a = desk_stream(tiny_week());
  const auto b = desk_stream(tiny_week());
  CHECK(a.label == b.label);
  CHECK(a.request_count() == b.request_count());
  CHECK(a.request_count() > 0);
}

}  // TEST_SUITE

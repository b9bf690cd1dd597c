#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ridepool/error.hpp"
#include "ridepool/ingest.hpp"
#include "ridepool/rng.hpp"
#include "ridepool/stream.hpp"

using namespace ridepool;

namespace {

const char* kHeader = "VendorID,tpep_pickup_datetime,tpep_dropoff_datetime,passenger_count,PULocationID,DOLocationID\n";

std::map<int, ZoneId> manhattan_bit() { return {{161, 0}, {237, 1}, {236, 2}, {170, 2}}; }

SynthConfig flat_config(int zones, int steps, double rate) {
  SynthConfig cfg;
  cfg.zones = zones;
  cfg.steps_per_day = steps;
  cfg.base_rates.assign(steps, std::vector<double>(std::size_t(zones) * zones, rate));
  return cfg;
}

}  // namespace

TEST_SUITE("ingest") {

TEST_CASE("mapped row becomes a trip record") {
  std::istringstream in(std::string(kHeader) + "2,2019-06-03 08:15:22,2019-06-03 08:30:00,1,161,237\n");
  const auto parsed = parse_trip_records(in, "2019-06-03", manhattan_bit());
  REQUIRE(parsed.records.size() == 1);
  CHECK(parsed.records[0].seconds == 8 * 3600 + 15 * 60 + 22);
  CHECK(parsed.records[0].pu_location == 161);
  CHECK(parsed.records[0].do_location == 237);
  CHECK(parsed.skipped() == 0);
}

TEST_CASE("unmapped, malformed and other-day rows are counted") {
  std::istringstream in(std::string(kHeader) +
                        "2,2019-06-03 08:15:22,x,1,161,999\n"
                        "2,not a date,x,1,161,237\n"
                        "2,2019-06-03 08:15:22,x,1,abc,237\n"
                        "2,2019-06-03 08:15\n"
                        "2,2019-06-04 00:00:01,x,1,161,237\n"
                        "2,2019-06-03 23:59:59,x,1,236,161\n");
  const auto parsed = parse_trip_records(in, "2019-06-03", manhattan_bit());
  CHECK(parsed.rows == 6);
  CHECK(parsed.unmapped == 1);
  CHECK(parsed.malformed == 3);
  CHECK(parsed.malformed_rows == std::vector<std::size_t>{2, 3, 4});
  CHECK(parsed.other_day == 1);
  CHECK(parsed.records.size() == 1);
}

TEST_CASE("empty file with a header yields nothing") {
  std::istringstream in(kHeader);
  const auto parsed = parse_trip_records(in, "2019-06-03", manhattan_bit());
  CHECK(parsed.records.empty());
  CHECK(parsed.rows == 0);
}

TEST_CASE("missing column is named") {
  std::istringstream in("tpep_pickup_datetime,PULocationID\n");
  try {
    parse_trip_records(in, "2019-06-03", manhattan_bit());
    FAIL("expected a format error");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("DOLocationID") != std::string::npos);
  }
  std::istringstream none("");
  CHECK_THROWS_AS(parse_trip_records(none, "2019-06-03", manhattan_bit()), FormatError);
}

TEST_CASE("binning and driver flags") {
  const auto lookup = manhattan_bit();
  std::vector<TripRecord> recs{{59, 161, 237}, {60, 161, 237}, {86399, 237, 161}, {100, 236, 170}};
  StreamPolicy policy;
  policy.driver_prob = 1.0;
  const auto built = build_stream(recs, lookup, 3, policy, "2019-06-03");
  const auto& s = built.stream;
  CHECK(s.horizon() == 1440);
  CHECK(s.at(1).size() == 1);
  CHECK(s.at(2).size() == 1);
  CHECK(s.at(1440).size() == 1);
  CHECK(built.dropped_same_zone == 1);
  CHECK(s.request_count() == recs.size() - built.dropped_same_zone);
  for (TimeStep t = 1; t <= s.horizon(); ++t) {
    for (const auto& r : s.at(t)) {
      CHECK(r.is_driver);
      CHECK(r.arrival == t);
      CHECK(r.origin != r.dest);
    }
  }
}

TEST_CASE("build_stream is reproducible and ids increase") {
  std::vector<TripRecord> recs;
  for (int k = 0; k < 500; ++k) recs.push_back({(k * 7919) % 86400, k % 2 ? 161 : 237, k % 2 ? 237 : 161});
  StreamPolicy policy;
  policy.seed = 42;
  const auto a = build_stream(recs, manhattan_bit(), 3, policy, "d");
  const auto b = build_stream(recs, manhattan_bit(), 3, policy, "d");
  std::ostringstream sa, sb;
  write_stream(sa, a.stream);
  write_stream(sb, b.stream);
  CHECK(sa.str() == sb.str());
  RequestId last = 0;
  int drivers = 0;
  for (const auto& step : a.stream.per_step) {
    for (const auto& r : step) {
      CHECK(r.id > last);
      last = r.id;
      drivers += r.is_driver;
    }
  }
  CHECK(drivers > 150);
  CHECK(drivers < 350);
}

TEST_CASE("build_stream rejects bad policies") {
  StreamPolicy p;
  p.step_seconds = 7;
  CHECK_THROWS_AS(build_stream({}, manhattan_bit(), 3, p, "d"), ConfigError);
  p.step_seconds = 60;
  p.driver_prob = 1.5;
  CHECK_THROWS_AS(build_stream({}, manhattan_bit(), 3, p, "d"), ConfigError);
}

TEST_CASE("noiseless synthesis reproduces integer rates every day") {
  auto cfg = flat_config(3, 4, 2.0);
  cfg.noise = Noise::none;
  cfg.days = 3;
  const auto s = synth_stream(cfg);
  for (TimeStep t = 1; t <= s.horizon(); ++t) {
    const auto g = counts_at(s, t);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CHECK(g.at(i, j) == (i == j ? 0 : 2));
  }
}

TEST_CASE("noiseless days repeat exactly") {
  auto cfg = flat_config(4, 6, 0.0);
  for (int k = 0; k < 6; ++k)
    for (std::size_t c = 0; c < 16; ++c) cfg.base_rates[k][c] = double((k + c) % 3);
  cfg.noise = Noise::none;
  cfg.days = 2;
  const auto s = synth_stream(cfg);
  for (TimeStep t = 1; t <= 6; ++t) {
    const auto& a = s.at(t);
    const auto& b = s.at(t + 6);
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK(a[k].origin == b[k].origin);
      CHECK(a[k].dest == b[k].dest);
      CHECK(a[k].is_driver == b[k].is_driver);
      CHECK(b[k].arrival == a[k].arrival + 6);
    }
  }
}

TEST_CASE("poisson counts match the rate statistically") {
  const double rate = 1.7;
  auto cfg = flat_config(2, 10000, rate);
  cfg.seed = 99;
  const auto s = synth_stream(cfg);
  // Cell (0,1) over 10^4 steps: mean within three standard errors.
  double sum = 0.0, sum2 = 0.0;
  for (TimeStep t = 1; t <= s.horizon(); ++t) {
    const double c = counts_at(s, t).at(0, 1);
    sum += c;
    sum2 += c * c;
  }
  const double n = s.horizon();
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(std::abs(mean - rate) < 3.0 * std::sqrt(rate / n));
  CHECK(std::abs(var - rate) < 0.1 * rate);
}

TEST_CASE("large poisson rates stay unbiased") {
  Rng rng(5);
  double sum = 0.0;
  const int n = 20000;
  for (int k = 0; k < n; ++k) sum += poisson(rng, 55.0);
  CHECK(std::abs(sum / n - 55.0) < 3.0 * std::sqrt(55.0 / n));
}

TEST_CASE("weekend scaling and dimension checks") {
  auto cfg = flat_config(2, 3, 2.0);
  cfg.noise = Noise::none;
  cfg.days = 7;
  cfg.weekend_scale = 2.0;
  const auto s = synth_stream(cfg);
  CHECK(counts_at(s, s.day_begin(0)).at(0, 1) == 4);
  CHECK(counts_at(s, s.day_begin(1)).at(0, 1) == 4);
  CHECK(counts_at(s, s.day_begin(2)).at(0, 1) == 2);
  CHECK(is_weekend(cfg, 7));

  auto bad = flat_config(2, 3, 1.0);
  bad.base_rates.pop_back();
  CHECK_THROWS_AS(synth_stream(bad), ConfigError);
  bad = flat_config(2, 3, 1.0);
  bad.base_rates[1].push_back(0.0);
  CHECK_THROWS_AS(synth_stream(bad), ConfigError);
}

TEST_CASE("stream file round trip") {
  auto cfg = flat_config(3, 5, 0.8);
  cfg.days = 2;
  cfg.label = "unit";
  const auto s = synth_stream(cfg);
  std::stringstream io;
  write_stream(io, s);
  const auto back = read_stream(io);
  CHECK(back.zones == 3);
  CHECK(back.days == 2);
  CHECK(back.steps_per_day == 5);
  CHECK(back.label == "unit");
  REQUIRE(back.horizon() == s.horizon());
  for (TimeStep t = 1; t <= s.horizon(); ++t) {
    REQUIRE(back.at(t).size() == s.at(t).size());
    for (std::size_t k = 0; k < s.at(t).size(); ++k) {
      CHECK(back.at(t)[k].id == s.at(t)[k].id);
      CHECK(back.at(t)[k].is_driver == s.at(t)[k].is_driver);
    }
  }
}

TEST_CASE("stream files are validated") {
  std::istringstream no_header("1 1 0 1 1 5\n");
  CHECK_THROWS_AS(read_stream(no_header), FormatError);
  std::istringstream same_zone("# ridepool-stream 1\n# zones 2\n# steps_per_day 3\n# days 1\n1 1 0 0 1 5\n");
  CHECK_THROWS_AS(read_stream(same_zone), FormatError);
  std::istringstream ids("# ridepool-stream 1\n# zones 2\n# steps_per_day 3\n# days 1\n1 2 0 1 1 5\n2 2 1 0 0 5\n");
  CHECK_THROWS_AS(read_stream(ids), FormatError);
  std::istringstream late("# ridepool-stream 1\n# zones 2\n# steps_per_day 3\n# days 1\n4 1 0 1 1 5\n");
  CHECK_THROWS_AS(read_stream(late), FormatError);
}

TEST_CASE("repeat_day copies one day over the stream") {
  auto cfg = flat_config(3, 6, 0.9);
  cfg.days = 2;
  cfg.seed = 8;
  const auto s = synth_stream(cfg);
  const auto p = repeat_day(s, 1, 3);
  CHECK(p.days == 3);
  CHECK(p.request_count() == 3 * s.request_count() - 3 * (s.request_count() - [&] {
          std::size_t n = 0;
          for (TimeStep t = s.day_begin(1); t <= s.day_end(1); ++t) n += s.at(t).size();
          return n;
        }()));
  RequestId last = 0;
  for (TimeStep t = 1; t <= p.horizon(); ++t) {
    const auto& src = s.at(s.day_begin(1) + (t - 1) % 6);
    REQUIRE(p.at(t).size() == src.size());
    for (std::size_t k = 0; k < src.size(); ++k) {
      CHECK(p.at(t)[k].origin == src[k].origin);
      CHECK(p.at(t)[k].is_driver == src[k].is_driver);
      CHECK(p.at(t)[k].arrival == t);
      CHECK(p.at(t)[k].id > last);
      last = p.at(t)[k].id;
    }
  }
  CHECK_THROWS_AS(repeat_day(s, 2, 3), ConfigError);
  CHECK_THROWS_AS(repeat_day(s, 0, 0), ConfigError);
}

}  // TEST_SUITE

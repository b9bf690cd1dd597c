#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ridepool/city.hpp"
#include "ridepool/stream.hpp"

namespace ridepool {

struct TripRecord {
  int seconds = 0;  // since midnight of the requested day
  int pu_location = 0;
  int do_location = 0;
};

struct ParseResult {
  std::vector<TripRecord> records;
  std::size_t rows = 0;
  std::size_t malformed = 0;  // unparseable rows
  std::size_t unmapped = 0;   // location id missing from the lookup
  std::size_t other_day = 0;
  std::vector<std::size_t> malformed_rows;  // 1-based data row numbers

  std::size_t skipped() const { return malformed + unmapped; }
};

// Reads a TLC trip CSV addressed by header names (tpep_pickup_datetime,
// PULocationID, DOLocationID). `day` is "YYYY-MM-DD".
ParseResult parse_trip_records(std::istream& source, const std::string& day,
                               const std::map<int, ZoneId>& lookup);

struct StreamPolicy {
  double driver_prob = 0.5;
  int max_wait = 5;
  int step_seconds = 60;
  std::uint64_t seed = 1;
};

struct BuildResult {
  RequestStream stream;
  std::size_t dropped_same_zone = 0;
};

// One request per record, binned at floor(seconds / step_seconds) + 1.
BuildResult build_stream(std::vector<TripRecord> records, const std::map<int, ZoneId>& lookup, int zones,
                         const StreamPolicy& policy, const std::string& day_label);

enum class Noise { none, poisson };

struct SynthConfig {
  int days = 7;
  int steps_per_day = 1440;
  std::vector<std::vector<double>> base_rates;  // per step-of-day, n*n row-major expected counts
  int zones = 0;
  Noise noise = Noise::poisson;
  double weekend_scale = 1.0;
  std::set<int> weekend_days = {0, 1};  // day index mod 7
  double driver_prob = 0.5;
  int max_wait = 5;
  std::uint64_t seed = 1;
  std::string label = "synth";
};

RequestStream synth_stream(const SynthConfig& config);

bool is_weekend(const SynthConfig& config, int day);

struct CommuteProfile {
  double daily_requests = 200.0;
  int hubs = 3;             // attractor zones receiving most morning trips
  double hub_share = 0.6;   // fraction of trips touching a hub
  double peak_width = 0.06; // fraction of the day spanned by one rush-hour peak
  std::uint64_t seed = 7;
};

// Expected counts per step-of-day with a morning and an evening peak and
// demand concentrated on a few hub zones, so matching partners exist.
std::vector<std::vector<double>> commute_rates(const ZoneMap& zones, int steps_per_day, const CommuteProfile& profile);

}  // namespace ridepool

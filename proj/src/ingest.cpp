#include "ridepool/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numeric>

#include "ridepool/error.hpp"
#include "ridepool/rng.hpp"

namespace ridepool {

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '"' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool parse_int(std::string_view s, int& out) {
  s = trim(s);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

// "YYYY-MM-DD HH:MM:SS" -> date part and seconds since midnight.
bool parse_datetime(std::string_view s, std::string_view& date, int& seconds) {
  s = trim(s);
  if (s.size() < 19 || s[10] != ' ' || s[13] != ':' || s[16] != ':') return false;
  int h = 0, m = 0, sec = 0;
  if (!parse_int(s.substr(11, 2), h) || !parse_int(s.substr(14, 2), m) || !parse_int(s.substr(17, 2), sec)) {
    return false;
  }
  if (h > 23 || m > 59 || sec > 60 || h < 0 || m < 0 || sec < 0) return false;
  date = s.substr(0, 10);
  seconds = std::min(h * 3600 + m * 60 + sec, 86399);
  return true;
}

}  // namespace

ParseResult parse_trip_records(std::istream& source, const std::string& day,
                               const std::map<int, ZoneId>& lookup) {
  ParseResult result;
  std::string line;
  if (!std::getline(source, line)) throw FormatError("trip file is empty (no header)");

  const auto header = split_csv(line);
  auto column = [&](std::string_view name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (trim(header[i]) == name) return i;
    }
    throw FormatError("missing required column '" + std::string(name) + "'");
  };
  const std::size_t c_time = column("tpep_pickup_datetime");
  const std::size_t c_pu = column("PULocationID");
  const std::size_t c_do = column("DOLocationID");
  const std::size_t needed = std::max({c_time, c_pu, c_do}) + 1;

  while (std::getline(source, line)) {
    if (trim(line).empty()) continue;
    ++result.rows;
    const auto fields = split_csv(line);
    TripRecord rec;
    std::string_view date;
    if (fields.size() < needed || !parse_datetime(fields[c_time], date, rec.seconds) ||
        !parse_int(fields[c_pu], rec.pu_location) || !parse_int(fields[c_do], rec.do_location)) {
      ++result.malformed;
      result.malformed_rows.push_back(result.rows);
      continue;
    }
    if (date != day) {
      ++result.other_day;
      continue;
    }
    if (!lookup.contains(rec.pu_location) || !lookup.contains(rec.do_location)) {
      ++result.unmapped;
      continue;
    }
    result.records.push_back(rec);
  }
  return result;
}

BuildResult build_stream(std::vector<TripRecord> records, const std::map<int, ZoneId>& lookup, int zones,
                         const StreamPolicy& policy, const std::string& day_label) {
  if (policy.step_seconds < 1 || 86400 % policy.step_seconds != 0) {
    throw ConfigError("step_seconds must divide a day");
  }
  if (policy.driver_prob < 0.0 || policy.driver_prob > 1.0) throw ConfigError("driver_prob outside [0,1]");
  if (policy.max_wait < 1) throw ConfigError("max_wait must be >= 1");

  std::stable_sort(records.begin(), records.end(),
                   [](const TripRecord& a, const TripRecord& b) { return a.seconds < b.seconds; });

  BuildResult out;
  RequestStream& s = out.stream;
  s.zones = zones;
  s.steps_per_day = 86400 / policy.step_seconds;
  s.days = 1;
  s.label = day_label;
  s.per_step.resize(static_cast<std::size_t>(s.steps_per_day));

  Rng rng(policy.seed);
  RequestId next_id = 1;
  for (const auto& rec : records) {
    const ZoneId o = lookup.at(rec.pu_location);
    const ZoneId d = lookup.at(rec.do_location);
    if (o < 0 || o >= zones || d < 0 || d >= zones) throw ConfigError("lookup maps to a zone outside the zone map");
    // Draw the flag before filtering so a record's flag does not depend on
    // whether earlier records were dropped.
    const bool driver = bernoulli(rng, policy.driver_prob);
    if (o == d) {
      ++out.dropped_same_zone;
      continue;
    }
    Request r;
    r.id = next_id++;
    r.origin = o;
    r.dest = d;
    r.is_driver = driver;
    r.max_wait = policy.max_wait;
    r.arrival = rec.seconds / policy.step_seconds + 1;
    s.per_step[static_cast<std::size_t>(r.arrival - 1)].push_back(r);
  }
  return out;
}

bool is_weekend(const SynthConfig& config, int day) {
  return config.weekend_days.contains(day % 7);
}

RequestStream synth_stream(const SynthConfig& config) {
  const int n = config.zones;
  if (n < 2) throw ConfigError("synthetic stream needs at least two zones");
  if (config.days < 1 || config.steps_per_day < 1) throw ConfigError("days and steps_per_day must be >= 1");
  if (static_cast<int>(config.base_rates.size()) != config.steps_per_day) {
    throw ConfigError("base_rates has " + std::to_string(config.base_rates.size()) + " steps, expected " +
                      std::to_string(config.steps_per_day));
  }
  const auto cells = static_cast<std::size_t>(n) * n;
  for (const auto& grid : config.base_rates) {
    if (grid.size() != cells) throw ConfigError("base_rates grid does not match zone count");
  }
  if (config.weekend_scale < 0.0) throw ConfigError("weekend_scale must be >= 0");

  RequestStream s;
  s.zones = n;
  s.steps_per_day = config.steps_per_day;
  s.days = config.days;
  s.label = config.label;
  s.per_step.resize(static_cast<std::size_t>(config.days) * config.steps_per_day);

  Rng rng(config.seed);
  RequestId next_id = 1;
  for (int day = 0; day < config.days; ++day) {
    const double scale = is_weekend(config, day) ? config.weekend_scale : 1.0;
    for (int k = 0; k < config.steps_per_day; ++k) {
      const TimeStep t = day * config.steps_per_day + k + 1;
      auto& bucket = s.per_step[static_cast<std::size_t>(t - 1)];
      // Without noise the flags repeat with the step of day, so the whole
      // stream is day-periodic.
      Rng flags(derive_seed(config.seed, static_cast<std::uint64_t>(config.noise == Noise::none ? k : t - 1)));
      for (ZoneId i = 0; i < n; ++i) {
        for (ZoneId j = 0; j < n; ++j) {
          if (i == j) continue;
          const double rate = config.base_rates[k][static_cast<std::size_t>(i) * n + j] * scale;
          const int count = config.noise == Noise::poisson ? poisson(rng, rate)
                                                           : static_cast<int>(std::floor(rate + 0.5));
          for (int c = 0; c < count; ++c) {
            Request r;
            r.id = next_id++;
            r.origin = i;
            r.dest = j;
            r.is_driver = bernoulli(flags, config.driver_prob);
            r.max_wait = config.max_wait;
            r.arrival = t;
            bucket.push_back(r);
          }
        }
      }
    }
  }
  return s;
}

std::vector<std::vector<double>> commute_rates(const ZoneMap& zones, int steps_per_day, const CommuteProfile& p) {
  const int n = zones.size();
  if (n < 2) throw ConfigError("commute profile needs at least two zones");
  const auto cells = static_cast<std::size_t>(n) * n;

  Rng rng(p.seed);
  std::vector<ZoneId> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (int i = n - 1; i > 0; --i) std::swap(order[i], order[uniform_index(rng, static_cast<std::uint64_t>(i) + 1)]);
  const int hubs = std::clamp(p.hubs, 1, n - 1);
  std::vector<bool> is_hub(n, false);
  for (int h = 0; h < hubs; ++h) is_hub[order[h]] = true;

  // Off-peak: uniform over ordered pairs. Morning: trips into hubs.
  std::vector<double> uniform(cells, 0.0), inbound(cells, 0.0), outbound(cells, 0.0);
  for (ZoneId i = 0; i < n; ++i) {
    for (ZoneId j = 0; j < n; ++j) {
      if (i == j) continue;
      const std::size_t c = static_cast<std::size_t>(i) * n + j;
      uniform[c] = 1.0;
      inbound[c] = is_hub[j] && !is_hub[i] ? p.hub_share / hubs : (1.0 - p.hub_share) / n;
      outbound[static_cast<std::size_t>(j) * n + i] = inbound[c];
    }
  }
  auto normalize = [](std::vector<double>& v) {
    const double sum = std::accumulate(v.begin(), v.end(), 0.0);
    for (auto& x : v) x /= sum;
  };
  normalize(uniform);
  normalize(inbound);
  normalize(outbound);

  const double width = std::max(p.peak_width, 1e-3);
  auto peak = [&](double x, double mu) { return std::exp(-0.5 * std::pow((x - mu) / (width / 2.0), 2.0)); };

  std::vector<std::vector<double>> rates(static_cast<std::size_t>(steps_per_day), std::vector<double>(cells, 0.0));
  double day_total = 0.0;
  for (int k = 0; k < steps_per_day; ++k) {
    const double x = (k + 0.5) / steps_per_day;
    const double base = 0.15;
    const double morning = peak(x, 0.33);
    const double evening = peak(x, 0.72);
    for (std::size_t c = 0; c < cells; ++c) {
      rates[k][c] = base * uniform[c] + morning * inbound[c] + evening * outbound[c];
      day_total += rates[k][c];
    }
  }
  const double factor = p.daily_requests / day_total;
  for (auto& grid : rates) {
    for (auto& r : grid) r *= factor;
  }
  return rates;
}

}  // namespace ridepool

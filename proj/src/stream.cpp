#include "ridepool/stream.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "ridepool/error.hpp"

namespace ridepool {

long CountsGrid::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), 0L);
}

bool CountsGrid::valid() const {
  for (int i = 0; i < n_; ++i) {
    if (at(i, i) != 0) return false;
  }
  return std::all_of(counts_.begin(), counts_.end(), [](int c) { return c >= 0; });
}

std::size_t RequestStream::request_count() const {
  std::size_t total = 0;
  for (const auto& step : per_step) total += step.size();
  return total;
}

std::string RequestStream::day_label(int day) const {
  return (label.empty() ? std::string("day") : label) + "#" + std::to_string(day);
}

CountsGrid counts_at(const RequestStream& stream, TimeStep t) {
  CountsGrid grid(stream.zones);
  if (t < 1 || t > stream.horizon()) return grid;
  for (const auto& r : stream.at(t)) ++grid.at(r.origin, r.dest);
  return grid;
}

void write_stream(std::ostream& out, const RequestStream& stream) {
  out << "# ridepool-stream 1\n";
  out << "# zones " << stream.zones << "\n";
  out << "# steps_per_day " << stream.steps_per_day << "\n";
  out << "# days " << stream.days << "\n";
  out << "# label " << (stream.label.empty() ? "-" : stream.label) << "\n";
  for (int t = 1; t <= stream.horizon(); ++t) {
    for (const auto& r : stream.at(t)) {
      out << t << ' ' << r.id << ' ' << r.origin << ' ' << r.dest << ' ' << (r.is_driver ? 1 : 0) << ' '
          << r.max_wait << '\n';
    }
  }
}

RequestStream read_stream(std::istream& in) {
  RequestStream stream;
  stream.zones = -1;
  std::string line;
  int lineno = 0;
  bool saw_magic = false;
  RequestId last_id = 0;
  bool any = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    if (line[0] == '#') {
      std::string hash, key;
      fields >> hash >> key;
      if (key == "ridepool-stream") {
        saw_magic = true;
      } else if (key == "zones") {
        fields >> stream.zones;
      } else if (key == "steps_per_day") {
        fields >> stream.steps_per_day;
      } else if (key == "days") {
        fields >> stream.days;
      } else if (key == "label") {
        fields >> stream.label;
        if (stream.label == "-") stream.label.clear();
      }
      continue;
    }
    if (!saw_magic || stream.zones < 1 || stream.steps_per_day < 1 || stream.days < 1) {
      throw FormatError("stream line " + std::to_string(lineno) + ": header incomplete");
    }
    if (stream.per_step.empty()) stream.per_step.resize(static_cast<std::size_t>(stream.days) * stream.steps_per_day);
    Request r;
    int driver = 0;
    TimeStep t = 0;
    if (!(fields >> t >> r.id >> r.origin >> r.dest >> driver >> r.max_wait)) {
      throw FormatError("stream line " + std::to_string(lineno) + ": expected 'step id origin dest is_driver max_wait'");
    }
    if (t < 1 || t > stream.horizon() || r.origin < 0 || r.origin >= stream.zones || r.dest < 0 ||
        r.dest >= stream.zones || r.origin == r.dest || r.max_wait < 1) {
      throw FormatError("stream line " + std::to_string(lineno) + ": field out of range");
    }
    if (any && r.id <= last_id) {
      throw FormatError("stream line " + std::to_string(lineno) + ": request ids must increase");
    }
    any = true;
    last_id = r.id;
    r.is_driver = driver != 0;
    r.arrival = t;
    stream.per_step[static_cast<std::size_t>(t - 1)].push_back(r);
  }
  if (!saw_magic) throw FormatError("not a ridepool stream file");
  if (stream.per_step.empty()) stream.per_step.resize(static_cast<std::size_t>(stream.days) * stream.steps_per_day);
  return stream;
}

RequestStream repeat_day(const RequestStream& source, int day, int days) {
  if (day < 0 || day >= source.days) throw ConfigError("day " + std::to_string(day) + " outside the stream");
  if (days < 1) throw ConfigError("days must be >= 1");
  RequestStream out;
  out.zones = source.zones;
  out.steps_per_day = source.steps_per_day;
  out.days = days;
  out.label = source.label + "-day" + std::to_string(day) + "x" + std::to_string(days);
  out.per_step.resize(static_cast<std::size_t>(days) * source.steps_per_day);
  RequestId next_id = 1;
  for (int d = 0; d < days; ++d) {
    for (int k = 0; k < source.steps_per_day; ++k) {
      const TimeStep t = out.day_begin(d) + k;
      for (Request r : source.at(source.day_begin(day) + k)) {
        r.id = next_id++;
        r.arrival = t;
        out.per_step[static_cast<std::size_t>(t - 1)].push_back(r);
      }
    }
  }
  return out;
}

}  // namespace ridepool

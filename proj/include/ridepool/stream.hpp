#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ridepool/model.hpp"

namespace ridepool {

// Per origin-destination request counts for one step. Row-major n x n.
class CountsGrid {
public:
  CountsGrid() = default;
  explicit CountsGrid(int n) : n_(n), counts_(static_cast<std::size_t>(n) * n, 0) {}

  int zones() const { return n_; }
  int& at(ZoneId i, ZoneId j) { return counts_[static_cast<std::size_t>(i) * n_ + j]; }
  int at(ZoneId i, ZoneId j) const { return counts_[static_cast<std::size_t>(i) * n_ + j]; }
  const std::vector<int>& cells() const { return counts_; }
  std::vector<int>& cells() { return counts_; }
  long total() const;
  // Diagonal zero and nonnegative entries.
  bool valid() const;

  friend bool operator==(const CountsGrid&, const CountsGrid&) = default;

private:
  int n_ = 0;
  std::vector<int> counts_;
};

// Requests R_1..R_h binned by arrival step. Multi-day streams are laid out
// contiguously: day d covers steps d*steps_per_day+1 .. (d+1)*steps_per_day.
struct RequestStream {
  int zones = 0;
  int steps_per_day = 1440;
  int days = 1;
  std::string label;
  std::vector<std::vector<Request>> per_step;  // index 0 holds step 1

  int horizon() const { return static_cast<int>(per_step.size()); }
  const std::vector<Request>& at(TimeStep t) const { return per_step[static_cast<std::size_t>(t - 1)]; }
  std::size_t request_count() const;
  int day_of(TimeStep t) const { return (t - 1) / steps_per_day; }
  TimeStep day_begin(int day) const { return day * steps_per_day + 1; }
  TimeStep day_end(int day) const { return (day + 1) * steps_per_day; }
  std::string day_label(int day) const;
};

// Realized counts at step t; steps outside the stream give an empty grid.
CountsGrid counts_at(const RequestStream& stream, TimeStep t);

// `days` copies of one day of `source`, ids renumbered from 1, so every day
// equals the one before it.
RequestStream repeat_day(const RequestStream& source, int day, int days);

// Canonical text form: '#' header lines carrying zones, steps_per_day, days
// and label, then one "step id origin dest is_driver max_wait" line per request.
void write_stream(std::ostream& out, const RequestStream& stream);
RequestStream read_stream(std::istream& in);

}  // namespace ridepool

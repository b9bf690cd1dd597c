#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include "ridepool/model.hpp"

namespace ridepool {

struct ZoneEdge {
  ZoneId a = 0;
  ZoneId b = 0;
  double steps = 1.0;
  double km = 1.0;
};

// Undirected weighted zone graph.
struct ZoneGraph {
  int n = 0;
  std::vector<ZoneEdge> edges;
};

// All-pairs travel times (whole steps) and distances (km) between zones.
class ZoneMap {
public:
  ZoneMap() = default;
  ZoneMap(int n, std::vector<int> travel, std::vector<double> km);

  int size() const { return n_; }
  int travel(ZoneId from, ZoneId to) const { return travel_[index(from, to)]; }
  double km(ZoneId from, ZoneId to) const { return km_[index(from, to)]; }

private:
  std::size_t index(ZoneId from, ZoneId to) const {
    return static_cast<std::size_t>(from) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(to);
  }

  int n_ = 0;
  std::vector<int> travel_;
  std::vector<double> km_;
};

enum class StopEvent { pickup, dropoff };

struct Stop {
  ZoneId zone = 0;
  StopEvent event = StopEvent::pickup;
  RequestId request = 0;
};

struct RoutePlan {
  std::vector<Stop> stops;
  double total_km = 0.0;
  int total_time = 0;
  std::map<RequestId, int> member_time;  // pickup-to-dropoff steps per member
};

ZoneGraph grid_graph(int rows, int cols, double step_per_edge = 1.0, double km_per_edge = 1.0);

// Dijkstra from every zone, separately on time and distance. Times are rounded
// up to whole steps with a minimum of one between distinct zones.
ZoneMap shortest_travel_times(const ZoneGraph& graph);

// Cheapest stop order (by km) that starts at the driver's origin, ends at the
// driver's destination and picks up every rider before dropping them off.
// Ties resolve to the lexicographically smallest (request id, event) sequence.
RoutePlan plan_shared_route(std::span<const Request> members, RequestId driver, const ZoneMap& zones,
                            int capacity = kDefaultCapacity);

// Surrogate environmental benefits: kilometers saved against every member
// driving alone (for CO2 and noise) and the number of cars removed.
EnvBenefits env_benefits(const RoutePlan& plan, std::span<const Request> members, const ZoneMap& zones);

// Edge file: one "zone_a zone_b steps km" line per edge; '#' starts a comment.
ZoneGraph read_zone_graph(std::istream& in);

// Lookup file: one "tlc_location_id zone_index" line per mapped location.
std::map<int, ZoneId> read_zone_lookup(std::istream& in);

// Lookup that maps TLC location ids 1..rows*cols onto grid zones row-major.
std::map<int, ZoneId> default_grid_lookup(int zones);

}  // namespace ridepool

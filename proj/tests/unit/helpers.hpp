#pragma once

#include <vector>

#include "ridepool/city.hpp"
#include "ridepool/model.hpp"

namespace testing {

inline ridepool::Request req(ridepool::RequestId id, ridepool::ZoneId o, ridepool::ZoneId d, bool driver,
                             ridepool::TimeStep arrival = 1, int max_wait = 5, bool provisional = false) {
  ridepool::Request r;
  r.id = id;
  r.origin = o;
  r.dest = d;
  r.is_driver = driver;
  r.arrival = arrival;
  r.max_wait = max_wait;
  r.provisional = provisional;
  return r;
}

// Zones 0..n-1 on a line, one step and one km apart.
inline ridepool::ZoneMap line_zones(int n) {
  ridepool::ZoneGraph g;
  g.n = n;
  for (int z = 0; z + 1 < n; ++z) g.edges.push_back({z, z + 1, 1.0, 1.0});
  return ridepool::shortest_travel_times(g);
}

}  // namespace testing

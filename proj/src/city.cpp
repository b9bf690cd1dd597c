#include "ridepool/city.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <queue>
#include <sstream>
#include <string>

#include "ridepool/error.hpp"

namespace ridepool {

ZoneMap::ZoneMap(int n, std::vector<int> travel, std::vector<double> km)
    : n_(n), travel_(std::move(travel)), km_(std::move(km)) {
  const auto cells = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
  if (n < 1 || travel_.size() != cells || km_.size() != cells) {
    throw InvalidInputError("zone map matrices do not match zone count");
  }
}

ZoneGraph grid_graph(int rows, int cols, double step_per_edge, double km_per_edge) {
  if (rows < 1 || cols < 1) throw InvalidInputError("grid needs at least one row and column");
  ZoneGraph g;
  g.n = rows * cols;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int z = r * cols + c;
      if (c + 1 < cols) g.edges.push_back({z, z + 1, step_per_edge, km_per_edge});
      if (r + 1 < rows) g.edges.push_back({z, z + cols, step_per_edge, km_per_edge});
    }
  }
  return g;
}

namespace {

std::vector<double> dijkstra(const std::vector<std::vector<std::pair<int, double>>>& adj, int source) {
  std::vector<double> dist(adj.size(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist[source] = 0.0;
  queue.emplace(0.0, source);
  while (!queue.empty()) {
    auto [d, u] = queue.top();
    queue.pop();
    if (d > dist[u]) continue;
    for (auto [v, w] : adj[u]) {
      if (d + w < dist[v]) {
        dist[v] = d + w;
        queue.emplace(dist[v], v);
      }
    }
  }
  return dist;
}

}  // namespace

ZoneMap shortest_travel_times(const ZoneGraph& graph) {
  const int n = graph.n;
  if (n < 1) throw InvalidInputError("zone graph has no zones");
  std::vector<std::vector<std::pair<int, double>>> by_time(n), by_km(n);
  for (const auto& e : graph.edges) {
    if (e.a < 0 || e.a >= n || e.b < 0 || e.b >= n) throw InvalidInputError("edge references unknown zone");
    if (!(e.steps >= 0.0) || !(e.km >= 0.0)) throw InvalidInputError("negative edge weight");
    by_time[e.a].emplace_back(e.b, e.steps);
    by_time[e.b].emplace_back(e.a, e.steps);
    by_km[e.a].emplace_back(e.b, e.km);
    by_km[e.b].emplace_back(e.a, e.km);
  }

  const auto cells = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
  std::vector<int> travel(cells, 0);
  std::vector<double> km(cells, 0.0);
  for (int s = 0; s < n; ++s) {
    const auto t = dijkstra(by_time, s);
    const auto d = dijkstra(by_km, s);
    for (int j = 0; j < n; ++j) {
      if (!std::isfinite(t[j])) {
        throw InvalidInputError("zone graph is disconnected: no path from zone " + std::to_string(s) +
                                " to zone " + std::to_string(j));
      }
      const std::size_t k = static_cast<std::size_t>(s) * n + j;
      // Tolerate accumulated rounding just above an integer.
      travel[k] = s == j ? 0 : std::max(1, static_cast<int>(std::ceil(t[j] - 1e-9)));
      km[k] = d[j];
    }
  }
  return ZoneMap(n, std::move(travel), std::move(km));
}

namespace {

struct RouteSearch {
  const std::vector<Request>& members;  // sorted by id, driver excluded
  const Request& driver;
  const ZoneMap& zones;

  std::vector<int> state;  // 0 waiting, 1 on board, 2 delivered
  std::vector<Stop> path;
  std::vector<Stop> best_path;
  double best_km = std::numeric_limits<double>::infinity();

  void search(ZoneId at, double km, std::size_t done) {
    if (km >= best_km) return;
    if (done == members.size()) {
      const double total = km + zones.km(at, driver.dest);
      if (total < best_km) {
        best_km = total;
        best_path = path;
      }
      return;
    }
    // Candidate stops in (request id, pickup < dropoff) order so the first
    // optimum found is the lexicographically smallest one.
    for (std::size_t i = 0; i < members.size(); ++i) {
      if (state[i] == 2) continue;
      const Request& r = members[i];
      const bool pickup = state[i] == 0;
      const ZoneId next = pickup ? r.origin : r.dest;
      state[i] = pickup ? 1 : 2;
      path.push_back({next, pickup ? StopEvent::pickup : StopEvent::dropoff, r.id});
      search(next, km + zones.km(at, next), done + (pickup ? 0 : 1));
      path.pop_back();
      state[i] = pickup ? 0 : 1;
    }
  }
};

}  // namespace

RoutePlan plan_shared_route(std::span<const Request> members, RequestId driver, const ZoneMap& zones,
                            int capacity) {
  if (static_cast<int>(members.size()) > capacity) {
    throw InvalidCarError("car of " + std::to_string(members.size()) + " exceeds capacity " +
                          std::to_string(capacity));
  }
  const auto it = std::find_if(members.begin(), members.end(), [&](const Request& r) { return r.id == driver; });
  if (it == members.end()) throw InvalidCarError("designated driver is not a member");
  const Request& drv = *it;

  std::vector<Request> riders;
  for (const auto& r : members) {
    if (r.id != driver) riders.push_back(r);
  }
  std::sort(riders.begin(), riders.end(), [](const Request& a, const Request& b) { return a.id < b.id; });

  RouteSearch search{riders, drv, zones, std::vector<int>(riders.size(), 0), {}, {}};
  search.search(drv.origin, 0.0, 0);

  RoutePlan plan;
  plan.stops.push_back({drv.origin, StopEvent::pickup, drv.id});
  plan.stops.insert(plan.stops.end(), search.best_path.begin(), search.best_path.end());
  plan.stops.push_back({drv.dest, StopEvent::dropoff, drv.id});
  plan.total_km = search.best_km;

  std::map<RequestId, int> boarded_at;
  int clock = 0;
  ZoneId at = drv.origin;
  for (const auto& stop : plan.stops) {
    clock += zones.travel(at, stop.zone);
    at = stop.zone;
    if (stop.event == StopEvent::pickup) {
      boarded_at[stop.request] = clock;
    } else {
      plan.member_time[stop.request] = clock - boarded_at[stop.request];
    }
  }
  plan.total_time = clock;
  return plan;
}

EnvBenefits env_benefits(const RoutePlan& plan, std::span<const Request> members, const ZoneMap& zones) {
  double solo_km = 0.0;
  for (const auto& r : members) solo_km += zones.km(r.origin, r.dest);
  const double saved = std::max(0.0, solo_km - plan.total_km);
  EnvBenefits env;
  env.co2 = saved;
  env.noise = saved;
  env.traffic = members.empty() ? 0.0 : static_cast<double>(members.size() - 1);
  return env;
}

namespace {

bool skip_line(const std::string& line) {
  const auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string::npos || line[pos] == '#';
}

}  // namespace

ZoneGraph read_zone_graph(std::istream& in) {
  ZoneGraph g;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skip_line(line)) continue;
    std::istringstream fields(line);
    ZoneEdge e;
    if (!(fields >> e.a >> e.b >> e.steps >> e.km) || e.a < 0 || e.b < 0) {
      throw FormatError("zone file line " + std::to_string(lineno) + ": expected 'zone_a zone_b steps km'");
    }
    g.n = std::max({g.n, e.a + 1, e.b + 1});
    g.edges.push_back(e);
  }
  return g;
}

std::map<int, ZoneId> read_zone_lookup(std::istream& in) {
  std::map<int, ZoneId> lookup;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skip_line(line)) continue;
    std::istringstream fields(line);
    int location = 0;
    ZoneId zone = 0;
    if (!(fields >> location >> zone) || zone < 0) {
      throw FormatError("lookup line " + std::to_string(lineno) + ": expected 'tlc_location_id zone_index'");
    }
    lookup[location] = zone;
  }
  return lookup;
}

std::map<int, ZoneId> default_grid_lookup(int zones) {
  std::map<int, ZoneId> lookup;
  for (int z = 0; z < zones; ++z) lookup[z + 1] = z;
  return lookup;
}

}  // namespace ridepool

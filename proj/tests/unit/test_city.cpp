#include <doctest.h>

#include <algorithm>
#include <limits>
#include <random>
#include <sstream>
#include <vector>

#include "helpers.hpp"
#include "ridepool/city.hpp"
#include "ridepool/error.hpp"

using namespace ridepool;
using testing::req;

namespace {

// Floyd-Warshall over the raw edge list.
std::vector<double> all_pairs(const ZoneGraph& g, bool by_steps) {
  const double inf = std::numeric_limits<double>::infinity();
  const int n = g.n;
  std::vector<double> d(std::size_t(n) * n, inf);
  for (int i = 0; i < n; ++i) d[i * n + i] = 0.0;
  for (const auto& e : g.edges) {
    const double w = by_steps ? e.steps : e.km;
    d[e.a * n + e.b] = std::min(d[e.a * n + e.b], w);
    d[e.b * n + e.a] = std::min(d[e.b * n + e.a], w);
  }
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) d[i * n + j] = std::min(d[i * n + j], d[i * n + k] + d[k * n + j]);
  return d;
}

ZoneGraph random_connected(std::mt19937& gen, int n, bool integral) {
  ZoneGraph g;
  g.n = n;
  std::uniform_real_distribution<double> w(0.2, 4.0);
  auto weight = [&] { return integral ? double(1 + gen() % 4) : w(gen); };
  for (int z = 1; z < n; ++z) g.edges.push_back({int(gen() % z), z, weight(), weight()});
  for (int extra = 0; extra < n; ++extra) {
    const int a = int(gen() % n), b = int(gen() % n);
    if (a != b) g.edges.push_back({a, b, weight(), weight()});
  }
  return g;
}

struct OracleRoute {
  double km = std::numeric_limits<double>::infinity();
  std::vector<std::pair<RequestId, int>> stops;  // (request, 0 pickup / 1 dropoff), riders only
};

// Every ordering of rider stops, keeping the valid ones.
OracleRoute route_oracle(const std::vector<Request>& members, RequestId driver, const ZoneMap& zones) {
  const Request* drv = nullptr;
  std::vector<const Request*> riders;
  for (const auto& r : members) {
    if (r.id == driver) {
      drv = &r;
    } else {
      riders.push_back(&r);
    }
  }
  std::sort(riders.begin(), riders.end(), [](auto a, auto b) { return a->id < b->id; });
  std::vector<std::pair<RequestId, int>> stops;
  for (auto r : riders) {
    stops.push_back({r->id, 0});
    stops.push_back({r->id, 1});
  }
  std::sort(stops.begin(), stops.end());
  OracleRoute best;
  do {
    bool ok = true;
    for (std::size_t k = 0; k < stops.size() && ok; ++k) {
      if (stops[k].second == 1) {
        ok = std::find(stops.begin(), stops.begin() + k, std::make_pair(stops[k].first, 0)) != stops.begin() + k;
      }
    }
    if (!ok) continue;
    double km = 0.0;
    ZoneId at = drv->origin;
    for (auto [id, ev] : stops) {
      const auto& r = *std::find_if(riders.begin(), riders.end(), [&](auto p) { return p->id == id; });
      const ZoneId next = ev == 0 ? r->origin : r->dest;
      km += zones.km(at, next);
      at = next;
    }
    km += zones.km(at, drv->dest);
    if (km < best.km) {
      best.km = km;
      best.stops = stops;
    }
  } while (std::next_permutation(stops.begin(), stops.end()));
  return best;
}

}  // namespace

TEST_SUITE("city") {

TEST_CASE("grid corner to corner") {
  const auto zones = shortest_travel_times(grid_graph(3, 3));
  CHECK(zones.travel(0, 8) == 4);
  CHECK(zones.km(0, 8) == 4.0);
  CHECK(zones.travel(4, 4) == 0);
}

TEST_CASE("single zone") {
  ZoneGraph g;
  g.n = 1;
  const auto zones = shortest_travel_times(g);
  CHECK(zones.size() == 1);
  CHECK(zones.travel(0, 0) == 0);
  CHECK(zones.km(0, 0) == 0.0);
}

TEST_CASE("all pairs agree with Floyd-Warshall") {
  std::mt19937 gen(17);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + int(gen() % 7);
    const auto g = random_connected(gen, n, false);
    const auto zones = shortest_travel_times(g);
    const auto steps = all_pairs(g, true);
    const auto km = all_pairs(g, false);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const int expected = i == j ? 0 : std::max(1, int(std::ceil(steps[i * n + j] - 1e-9)));
        CHECK(zones.travel(i, j) == expected);
        CHECK(zones.km(i, j) == doctest::Approx(km[i * n + j]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("travel times satisfy the triangle inequality") {
  std::mt19937 gen(23);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3 + int(gen() % 5);
    const auto zones = shortest_travel_times(random_connected(gen, n, true));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
          CHECK(zones.travel(i, j) <= zones.travel(i, k) + zones.travel(k, j));
          CHECK(zones.km(i, j) <= zones.km(i, k) + zones.km(k, j) + 1e-12);
        }
  }
}

TEST_CASE("disconnected graph names the unreachable pair") {
  ZoneGraph g;
  g.n = 3;
  g.edges.push_back({0, 1, 1.0, 1.0});
  try {
    shortest_travel_times(g);
    FAIL("expected an error");
  } catch (const InvalidInputError& e) {
    CHECK(std::string(e.what()).find("zone 0 to zone 2") != std::string::npos);
  }
}

TEST_CASE("driver alone") {
  const auto zones = testing::line_zones(5);
  const std::vector<Request> car{req(1, 0, 3, true)};
  const auto plan = plan_shared_route(car, 1, zones);
  REQUIRE(plan.stops.size() == 2);
  CHECK(plan.stops[0].zone == 0);
  CHECK(plan.stops[0].event == StopEvent::pickup);
  CHECK(plan.stops[1].zone == 3);
  CHECK(plan.stops[1].event == StopEvent::dropoff);
  CHECK(plan.member_time.at(1) == zones.travel(0, 3));
  CHECK(plan.total_km == 3.0);
}

TEST_CASE("identical trips share without detour") {
  const auto zones = testing::line_zones(6);
  const std::vector<Request> car{req(1, 0, 5, true), req(2, 0, 5, false)};
  const auto plan = plan_shared_route(car, 1, zones);
  CHECK(plan.total_km == 5.0);
  CHECK(plan.member_time.at(1) == 5);
  CHECK(plan.member_time.at(2) == 5);
  const auto env = env_benefits(plan, car, zones);
  CHECK(env.co2 == 5.0);
  CHECK(env.noise == 5.0);
  CHECK(env.traffic == 1.0);
}

TEST_CASE("singleton and detour-heavy cars") {
  const auto zones = testing::line_zones(5);
  const std::vector<Request> alone{req(1, 1, 3, true)};
  const auto e0 = env_benefits(plan_shared_route(alone, 1, zones), alone, zones);
  CHECK(e0.co2 == 0.0);
  CHECK(e0.noise == 0.0);
  CHECK(e0.traffic == 0.0);

  const std::vector<Request> far{req(1, 0, 1, true), req(2, 4, 3, false)};
  const auto plan = plan_shared_route(far, 1, zones);
  CHECK(plan.total_km == 7.0);
  const auto e1 = env_benefits(plan, far, zones);
  CHECK(e1.co2 == 0.0);
  CHECK(e1.noise == 0.0);
  CHECK(e1.traffic == 1.0);
}

TEST_CASE("three member car on a line matches the permutation oracle") {
  const auto zones = testing::line_zones(4);
  const std::vector<Request> car{req(1, 0, 3, true), req(2, 2, 1, false), req(3, 1, 3, false)};
  const auto plan = plan_shared_route(car, 1, zones);
  const auto oracle = route_oracle(car, 1, zones);
  CHECK(plan.total_km == oracle.km);
  REQUIRE(plan.stops.size() == oracle.stops.size() + 2);
  for (std::size_t k = 0; k < oracle.stops.size(); ++k) {
    CHECK(plan.stops[k + 1].request == oracle.stops[k].first);
    CHECK(int(plan.stops[k + 1].event) == oracle.stops[k].second);
  }
}

TEST_CASE("random cars are permutation optimal with lexicographic ties") {
  std::mt19937 gen(29);
  for (int trial = 0; trial < 300; ++trial) {
    const auto zones = shortest_travel_times(random_connected(gen, 6, true));
    const int n = 1 + int(gen() % 4);
    std::vector<Request> car;
    for (int k = 0; k < n; ++k) {
      const ZoneId o = ZoneId(gen() % 6);
      ZoneId d = ZoneId(gen() % 6);
      if (d == o) d = (o + 1) % 6;
      car.push_back(req(10 + k * 3, o, d, k == 0 || gen() % 3 == 0));
    }
    for (const auto& drv : car) {
      if (!drv.is_driver) continue;
      const auto plan = plan_shared_route(car, drv.id, zones);
      const auto oracle = route_oracle(car, drv.id, zones);
      CHECK(plan.total_km == oracle.km);
      REQUIRE(plan.stops.size() == oracle.stops.size() + 2);
      for (std::size_t k = 0; k < oracle.stops.size(); ++k) {
        CHECK(plan.stops[k + 1].request == oracle.stops[k].first);
        CHECK(int(plan.stops[k + 1].event) == oracle.stops[k].second);
      }
      CHECK(plan.stops.front().zone == drv.origin);
      CHECK(plan.stops.back().zone == drv.dest);
      for (const auto& r : car) CHECK(plan.member_time.at(r.id) >= zones.travel(r.origin, r.dest));
      const auto env = env_benefits(plan, car, zones);
      CHECK(env.co2 >= 0.0);
      CHECK(env.traffic == double(n - 1));
    }
  }
}

TEST_CASE("route planning rejects invalid cars") {
  const auto zones = testing::line_zones(3);
  std::vector<Request> car{req(1, 0, 2, true)};
  for (int k = 2; k <= 6; ++k) car.push_back(req(k, 0, 2, false));
  CHECK_THROWS_AS(plan_shared_route(car, 1, zones, 5), InvalidCarError);
  const std::vector<Request> pair{req(1, 0, 2, true), req(2, 0, 2, false)};
  CHECK_THROWS_AS(plan_shared_route(pair, 7, zones), InvalidCarError);
}

TEST_CASE("zone and lookup files") {
  std::istringstream edges("# two zones\n0 1 2 1.5\n1 2 1 0.5\n");
  const auto g = read_zone_graph(edges);
  CHECK(g.n == 3);
  const auto zones = shortest_travel_times(g);
  CHECK(zones.travel(0, 2) == 3);
  CHECK(zones.km(0, 2) == 2.0);

  std::istringstream bad("0 1 x\n");
  CHECK_THROWS_AS(read_zone_graph(bad), FormatError);

  std::istringstream lookup("161 3\n237 7\n");
  const auto map = read_zone_lookup(lookup);
  CHECK(map.at(161) == 3);
  CHECK(map.at(237) == 7);
  CHECK(default_grid_lookup(4).at(4) == 3);
}

}  // TEST_SUITE

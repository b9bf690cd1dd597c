#include "ridepool/engine.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <tuple>

#include <nlohmann/json.hpp>

#include "ridepool/error.hpp"
#include "ridepool/rng.hpp"

namespace ridepool {

void validate(const SimConfig& cfg) {
  if (cfg.horizon < 0) throw ConfigError("forecast horizon must be >= 0");
  if (cfg.max_wait < 1) throw ConfigError("max_wait must be >= 1");
  if (cfg.horizon > cfg.max_wait) {
    throw ConfigError("forecast horizon " + std::to_string(cfg.horizon) + " exceeds the wait budget " +
                      std::to_string(cfg.max_wait));
  }
  if (cfg.capacity < 1) throw ConfigError("capacity must be >= 1");
  if (cfg.driver_prob < 0.0 || cfg.driver_prob > 1.0) throw ConfigError("driver_prob must lie in [0,1]");
  if (std::isnan(cfg.margin)) throw ConfigError("margin must be a number");
  validate(cfg.weights);
  validate(cfg.solver);
}

std::size_t PoolState::reserved_real() const {
  std::size_t n = 0;
  for (const auto& r : reservations) n += r.held.size() + r.matched.size();
  return n;
}

std::size_t PoolState::awaited() const {
  std::size_t n = 0;
  for (const auto& r : reservations) n += r.awaited.size();
  return n;
}

namespace {

constexpr std::uint64_t kSolverTag = 0x736f6c76;
constexpr std::uint64_t kMaterializeTag = 0x6d617465;

void check_car(const Car& car, int capacity, TimeStep t) {
  if (car.members.empty()) throw InvariantError("empty car committed", t);
  if (static_cast<int>(car.members.size()) > capacity) throw InvariantError("car exceeds capacity", t);
  if (!std::binary_search(car.members.begin(), car.members.end(), car.driver)) {
    throw InvariantError("designated driver is not a member", t);
  }
  if (car.commit_step != t) throw InvariantError("car committed at the wrong step", t);
  try {
    const auto terms = qos_terms(car.ride_times, car.solo_times, car.arrivals, car.max_waits, car.commit_step);
    for (std::size_t r = 0; r < terms.detour.size(); ++r) {
      if (terms.detour[r] < 0.0 || terms.detour[r] > 1.0 || terms.wait[r] < 0.0 || terms.wait[r] > 1.0) {
        throw InvariantError("QoS summand outside [0,1]", t);
      }
    }
  } catch (const InvalidCarError& e) {
    throw InvariantError(e.what(), t);
  }
}

void erase_ids(std::vector<Request>& pool, const std::vector<RequestId>& ids) {
  std::erase_if(pool, [&](const Request& r) { return std::binary_search(ids.begin(), ids.end(), r.id); });
}

void commit(StepReport& report, Car car, const SimConfig& cfg, TimeStep t) {
  check_car(car, cfg.capacity, t);
  report.reward_total += car.reward.total;
  report.reward_qos += cfg.weights.rho_qos * car.reward.qos;
  report.reward_env += car.reward.total - cfg.weights.rho_qos * car.reward.qos;
  report.committed.push_back(std::move(car));
}

bool same_trip(const Request& a, const Request& b) { return a.origin == b.origin && a.dest == b.dest; }

// Finds arrivals for every awaited member due at t. Same-flag arrivals are
// preferred; each arrival is used at most once. Returns false when any
// awaited member has no counterpart.
bool match_reservation(const Reservation& res, TimeStep t, const std::vector<Request>& arrivals,
                       const std::vector<bool>& taken, std::vector<std::pair<std::size_t, std::size_t>>& picks) {
  std::vector<bool> used = taken;
  picks.clear();
  for (std::size_t a = 0; a < res.awaited.size(); ++a) {
    const Request& want = res.awaited[a];
    if (want.arrival != t) continue;
    std::optional<std::size_t> hit;
    for (int pass = 0; pass < 2 && !hit; ++pass) {
      for (std::size_t k = 0; k < arrivals.size(); ++k) {
        if (used[k] || !same_trip(arrivals[k], want)) continue;
        if (pass == 0 && arrivals[k].is_driver != want.is_driver) continue;
        hit = k;
        break;
      }
    }
    if (!hit) return false;
    used[*hit] = true;
    picks.emplace_back(a, *hit);
  }
  return true;
}

}  // namespace

StepReport step(PoolState& state, TimeStep t, std::span<const Request> arrivals_in, const SimConfig& cfg,
                Predictor* predictor, const ZoneMap& zones, TimeStep forecast_limit) {
  if (state.now != 0 && t != state.now + 1) throw InvariantError("steps must advance one at a time", t);
  state.now = t;
  StepReport report;
  report.t = t;
  report.arrivals = static_cast<int>(arrivals_in.size());

  std::vector<Request> arrivals(arrivals_in.begin(), arrivals_in.end());
  for (const auto& r : arrivals) {
    if (r.arrival != t || r.provisional) throw InvariantError("arrival does not belong to this step", t);
  }

  // Reservations due now: commit when every awaited member realized.
  std::vector<bool> taken(arrivals.size(), false);
  std::vector<Reservation> keep;
  for (auto& res : state.reservations) {
    std::vector<std::pair<std::size_t, std::size_t>> picks;
    const bool due = std::any_of(res.awaited.begin(), res.awaited.end(), [&](const Request& r) { return r.arrival == t; });
    if (!due) {
      keep.push_back(std::move(res));
      continue;
    }
    if (match_reservation(res, t, arrivals, taken, picks)) {
      std::vector<std::size_t> done;
      for (auto [a, k] : picks) {
        taken[k] = true;
        res.matched.push_back(arrivals[k]);
        done.push_back(a);
      }
      std::sort(done.rbegin(), done.rend());
      for (auto a : done) res.awaited.erase(res.awaited.begin() + static_cast<std::ptrdiff_t>(a));
      if (!res.awaited.empty()) {
        keep.push_back(std::move(res));
        continue;
      }
      std::vector<Request> members = res.held;
      members.insert(members.end(), res.matched.begin(), res.matched.end());
      if (auto real = evaluate_car(members, zones, cfg.weights, cfg.capacity, t)) {
        commit(report, std::move(real->car), cfg, t);
        ++report.reservations_committed;
        continue;
      }
    }
    // Dissolve: every real member goes back to the pool.
    ++report.reservations_dissolved;
    state.active_real.insert(state.active_real.end(), res.held.begin(), res.held.end());
    state.active_real.insert(state.active_real.end(), res.matched.begin(), res.matched.end());
  }
  state.reservations = std::move(keep);

  for (std::size_t k = 0; k < arrivals.size(); ++k) {
    if (!taken[k]) state.active_real.push_back(arrivals[k]);
  }
  std::sort(state.active_real.begin(), state.active_real.end(),
            [](const Request& a, const Request& b) { return a.id < b.id; });
  state.provisional.clear();

  if (predictor != nullptr) {
    CountsGrid realized(zones.size());
    for (const auto& r : arrivals) ++realized.at(r.origin, r.dest);
    predictor->observe(t, realized);
    if (cfg.horizon > 0) {
      auto forecasts = predictor->predict(t, cfg.horizon);
      if (!forecasts.empty()) report.next_forecast = forecasts.front().grid;

      // Requests already awaited by a reservation are not materialized twice.
      std::map<std::tuple<TimeStep, ZoneId, ZoneId>, std::pair<int, int>> awaited;  // (all, drivers)
      for (const auto& res : state.reservations) {
        for (const auto& r : res.awaited) {
          auto& slot = awaited[{r.arrival, r.origin, r.dest}];
          ++slot.first;
          slot.second += r.is_driver ? 1 : 0;
        }
      }
      Rng rng(derive_seed(cfg.seed ^ kMaterializeTag, static_cast<std::uint64_t>(t)));
      const MaterializePolicy policy{cfg.max_wait, cfg.driver_prob};
      for (auto& fc : forecasts) {
        if (fc.for_step > forecast_limit) continue;
        for (const auto& [key, count] : awaited) {
          const auto [s, i, j] = key;
          if (s != fc.for_step) continue;
          fc.grid.at(i, j) = std::max(0, fc.grid.at(i, j) - count.first);
          if (fc.drivers) fc.drivers->at(i, j) = std::max(0, fc.drivers->at(i, j) - count.second);
        }
        auto made = materialize(fc, state.ids, policy, rng);
        state.provisional.insert(state.provisional.end(), made.begin(), made.end());
      }
    }
  }

  report.pool_real = static_cast<int>(state.active_real.size() + state.reserved_real());
  report.pool_provisional = static_cast<int>(state.provisional.size() + state.awaited());

  std::vector<Request> pool = state.active_real;
  pool.insert(pool.end(), state.provisional.begin(), state.provisional.end());
  SolverParams sp = cfg.solver;
  sp.capacity = cfg.capacity;
  sp.seed = derive_seed(cfg.seed ^ kSolverTag, static_cast<std::uint64_t>(t));
  const auto candidates = generate_candidates(pool, zones, cfg.weights, sp, t);
  report.candidates = static_cast<int>(candidates.size());

  PackingBudget budget{sp.deterministic, sp.packing_nodes, sp.budget_ms * (1.0 - sp.generation_share)};
  const auto packing = solve_packing(candidates, budget);
  report.packing_approximate = packing.approximate;
  std::vector<Candidate> solution;
  for (auto k : packing.chosen) solution.push_back(candidates[k]);

  std::vector<Candidate> with_provisional;
  if (cfg.lookahead) {
    std::copy_if(candidates.begin(), candidates.end(), std::back_inserter(with_provisional),
                 [](const Candidate& c) { return c.contains_provisional; });
  }
  auto split = lookahead_filter(solution, t, with_provisional, cfg.lookahead ? cfg.margin : kLookaheadDisabled,
                                cfg.capacity);

  for (auto& cand : split.commit) {
    erase_ids(state.active_real, cand.members);
    commit(report, std::move(cand.car), cfg, t);
  }
  for (auto& cand : split.defer) {
    if (!cand.contains_provisional) continue;  // real-only cars just stay in the pool
    Reservation res;
    for (RequestId id : cand.members) {
      auto real = std::find_if(state.active_real.begin(), state.active_real.end(), [&](const Request& r) { return r.id == id; });
      if (real != state.active_real.end()) {
        res.held.push_back(*real);
        continue;
      }
      auto prov = std::find_if(state.provisional.begin(), state.provisional.end(), [&](const Request& r) { return r.id == id; });
      if (prov == state.provisional.end()) throw InvariantError("reserved member missing from the pool", t);
      res.awaited.push_back(*prov);
    }
    erase_ids(state.active_real, cand.members);
    erase_ids(state.provisional, cand.members);
    res.plan = std::move(cand);
    state.reservations.push_back(std::move(res));
    ++report.reservations_made;
  }

  // Expiry at zero slack.
  std::vector<Request> still;
  for (const auto& r : state.active_real) {
    if (r.max_wait - (t - r.arrival) > 0) {
      still.push_back(r);
      continue;
    }
    if (r.is_driver) {
      const Request alone[] = {r};
      auto single = evaluate_car(alone, zones, cfg.weights, cfg.capacity, t);
      if (!single) throw InvariantError("expiring driver cannot ride alone", t);
      commit(report, std::move(single->car), cfg, t);
      ++report.expired_singleton;
    } else {
      ++report.expired_unserved;
    }
  }
  state.active_real = std::move(still);
  return report;
}

RunReport run(const RequestStream& stream, const SimConfig& cfg, const ZoneMap& zones, Predictor* predictor,
              RunWindow window) {
  validate(cfg);
  if (stream.zones != zones.size()) throw ConfigError("stream and zone map disagree on the zone count");
  if (cfg.horizon > 0 && predictor == nullptr) throw ConfigError("forecast horizon set but no predictor given");
  const TimeStep first = std::max(1, window.first);
  const TimeStep last = window.last == 0 ? stream.horizon() : std::min(window.last, stream.horizon());

  RunReport report;
  report.first = first;
  report.last = last;
  report.horizon = cfg.horizon;
  report.label = stream.label + "[" + std::to_string(first) + "," + std::to_string(last) + "]";

  if (predictor != nullptr) {
    for (TimeStep t = std::max(1, first - stream.steps_per_day); t < first; ++t) {
      predictor->observe(t, counts_at(stream, t));
    }
  }

  PoolState state;
  state.now = first - 1;
  std::set<RequestId> committed_ids;
  SmapeAccumulator accuracy;
  std::optional<CountsGrid> pending_forecast;
  int longest_wait = cfg.max_wait;
  for (TimeStep t = first; t <= last; ++t) {
    for (const auto& r : stream.at(t)) longest_wait = std::max(longest_wait, r.max_wait);
  }
  const int drain = cfg.drain_steps >= 0 ? cfg.drain_steps : longest_wait;

  for (TimeStep t = first; t <= last + drain; ++t) {
    const bool live = t <= last;
    static const std::vector<Request> kNone;
    const auto& arrivals = live ? stream.at(t) : kNone;
    if (live && pending_forecast) accuracy.add(t, *pending_forecast, counts_at(stream, t));

    auto sr = step(state, t, arrivals, cfg, live ? predictor : nullptr, zones, last);
    pending_forecast = sr.next_forecast;
    for (const auto& car : sr.committed) {
      for (RequestId id : car.members) {
        if (!committed_ids.insert(id).second) throw InvariantError("request committed twice", t);
      }
      report.served += static_cast<long>(car.members.size());
      if (car.members.size() >= 2) report.shared += static_cast<long>(car.members.size());
      ++report.cars;
    }
    report.arrivals += sr.arrivals;
    report.expired_unserved += sr.expired_unserved;
    report.total_reward += sr.reward_total;
    report.steps.push_back(std::move(sr));
  }
  report.residual = static_cast<long>(state.active_real.size() + state.reserved_real());
  if (report.arrivals != report.served + report.expired_unserved + report.residual) {
    throw InvariantError("request conservation broken", last + drain);
  }

  double pool = 0.0;
  int counted = 0;
  for (const auto& s : report.steps) {
    if (s.t > last) break;
    pool += s.pool_size();
    ++counted;
  }
  report.average_pool = counted == 0 ? 0.0 : pool / counted;
  if (!accuracy.empty()) {
    report.smape_cell = accuracy.cell_smape();
    report.smape_total = accuracy.total_smape();
  }
  return report;
}

RunReport run_day(const RequestStream& stream, int day, const SimConfig& cfg, const ZoneMap& zones,
                  Predictor* predictor) {
  if (day < 0 || day >= stream.days) throw ConfigError("day " + std::to_string(day) + " outside the stream");
  auto report = run(stream, cfg, zones, predictor, {stream.day_begin(day), stream.day_end(day)});
  report.label = stream.day_label(day);
  return report;
}

std::optional<double> compare_runs(const RunReport& baseline, const RunReport& treatment) {
  if (baseline.label != treatment.label) {
    throw InvalidComparisonError("cannot compare runs over different streams: '" + baseline.label + "' vs '" +
                                 treatment.label + "'");
  }
  if (baseline.total_reward == 0.0) return std::nullopt;
  return 100.0 * (treatment.total_reward - baseline.total_reward) / std::abs(baseline.total_reward);
}

void write_steps_csv(std::ostream& out, const RunReport& report) {
  out << "t,committed,reward_total,reward_qos,reward_env,pool_real,pool_provisional,expired\n";
  out << std::setprecision(10);
  for (const auto& s : report.steps) {
    out << s.t << ',' << s.committed.size() << ',' << s.reward_total << ',' << s.reward_qos << ',' << s.reward_env
        << ',' << s.pool_real << ',' << s.pool_provisional << ',' << s.expired_unserved << '\n';
  }
}

void write_summary_json(std::ostream& out, const RunReport& report) {
  nlohmann::ordered_json j;
  j["label"] = report.label;
  j["horizon"] = report.horizon;
  j["first_step"] = report.first;
  j["last_step"] = report.last;
  j["total_reward"] = report.total_reward;
  j["cars"] = report.cars;
  j["arrivals"] = report.arrivals;
  j["served"] = report.served;
  j["shared"] = report.shared;
  j["expired_unserved"] = report.expired_unserved;
  j["residual"] = report.residual;
  j["served_fraction"] = report.served_fraction();
  j["average_pool"] = report.average_pool;
  j["smape_cell"] = report.smape_cell ? nlohmann::ordered_json(*report.smape_cell) : nlohmann::ordered_json(nullptr);
  j["smape_total"] = report.smape_total ? nlohmann::ordered_json(*report.smape_total) : nlohmann::ordered_json(nullptr);
  out << j.dump(2) << '\n';
}

}  // namespace ridepool

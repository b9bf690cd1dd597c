#include "ridepool/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <thread>
#include <unordered_map>

#include "ridepool/error.hpp"
#include "ridepool/rng.hpp"

namespace ridepool {

void validate(const SolverParams& p) {
  if (!(p.budget_ms > 0.0)) throw ConfigError("budget_ms must be > 0");
  if (p.d_rate < 0.0 || p.d_rate > 1.0) throw ConfigError("d_rate must lie in [0,1]");
  if (p.l_size < 1) throw ConfigError("l_size must be >= 1");
  if (p.capacity < 1) throw ConfigError("capacity must be >= 1");
  if (p.generation_share <= 0.0 || p.generation_share >= 1.0) throw ConfigError("generation_share must lie in (0,1)");
  if (p.workers < 1) throw ConfigError("workers must be >= 1");
  if (p.generation_evaluations < 1 || p.packing_nodes < 1) throw ConfigError("deterministic budgets must be >= 1");
}

std::optional<Candidate> evaluate_car(std::span<const Request> members, const ZoneMap& zones,
                                      const RewardWeights& weights, int capacity, TimeStep now) {
  if (members.empty()) return std::nullopt;
  TimeStep commit = now;
  for (const auto& r : members) commit = std::max(commit, r.arrival);
  if (!is_feasible_car(members, capacity, commit)) return std::nullopt;

  std::vector<Request> sorted(members.begin(), members.end());
  std::sort(sorted.begin(), sorted.end(), [](const Request& a, const Request& b) { return a.id < b.id; });

  std::optional<Candidate> best;
  for (const auto& drv : sorted) {
    if (!drv.is_driver) continue;
    RoutePlan plan = plan_shared_route(sorted, drv.id, zones, capacity);
    Car car;
    car.driver = drv.id;
    car.commit_step = commit;
    for (const auto& r : sorted) {
      car.members.push_back(r.id);
      car.ride_times.push_back(plan.member_time.at(r.id));
      car.solo_times.push_back(zones.travel(r.origin, r.dest));
      car.arrivals.push_back(r.arrival);
      car.max_waits.push_back(r.max_wait);
    }
    const double qos = quality_of_service(car.ride_times, car.solo_times, car.arrivals, car.max_waits, commit);
    car.reward = car_reward(env_benefits(plan, sorted, zones), qos, weights);
    if (!best || car.reward.total > best->value) {
      Candidate c;
      c.members = car.members;
      c.value = car.reward.total;
      c.contains_provisional = std::any_of(sorted.begin(), sorted.end(), [](const Request& r) { return r.provisional; });
      c.route = std::move(plan);
      c.car = std::move(car);
      best = std::move(c);
    }
  }
  return best;
}

namespace {

struct MemberHash {
  std::size_t operator()(const std::vector<RequestId>& key) const noexcept {
    std::uint64_t h = 0x84222325cbf29ce4ULL;
    for (RequestId id : key) h = splitmix64(h ^ static_cast<std::uint64_t>(id));
    return static_cast<std::size_t>(h);
  }
};

using Clock = std::chrono::steady_clock;

class Generator {
public:
  Generator(std::span<const Request> pool, const ZoneMap& zones, const RewardWeights& weights,
            const SolverParams& params, TimeStep now)
      : pool_(pool), zones_(zones), weights_(weights), params_(params), now_(now) {}

  // Runs constructions from the seeds at positions worker, worker+stride, ...
  void run(int worker, int stride, long long eval_budget, Clock::time_point deadline, std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t n = pool_.size();
    std::size_t seeds = 0;
    for (std::size_t s = static_cast<std::size_t>(worker); s < n; s += static_cast<std::size_t>(stride)) ++seeds;
    if (seeds == 0) return;
    long long stall = 0;
    const long long stall_limit = 2 * static_cast<long long>(seeds) + 2;
    for (std::size_t k = 0;; ++k) {
      if (out_of_budget(eval_budget, deadline)) return;
      const std::size_t seed_pos = static_cast<std::size_t>(worker) + (k % seeds) * static_cast<std::size_t>(stride);
      const std::size_t before = found_.size();
      construct(seed_pos, rng, eval_budget, deadline);
      ++stats_.constructions;
      stall = found_.size() > before ? 0 : stall + 1;
      if (stall >= stall_limit) return;
    }
  }

  std::map<std::vector<RequestId>, Candidate>& found() { return found_; }
  const GenerationStats& stats() const { return stats_; }

private:
  bool out_of_budget(long long eval_budget, Clock::time_point deadline) const {
    if (params_.deterministic) return stats_.evaluations >= eval_budget;
    return Clock::now() >= deadline;
  }

  const std::optional<Candidate>& evaluate(const std::vector<std::size_t>& positions) {
    std::vector<RequestId> key;
    key.reserve(positions.size());
    for (auto p : positions) key.push_back(pool_[p].id);
    std::sort(key.begin(), key.end());
    ++stats_.evaluations;
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    std::vector<Request> members;
    for (auto p : positions) members.push_back(pool_[p]);
    auto result = evaluate_car(members, zones_, weights_, params_.capacity, now_);
    return cache_.emplace(std::move(key), std::move(result)).first->second;
  }

  void construct(std::size_t seed_pos, Rng& rng, long long eval_budget, Clock::time_point deadline) {
    std::vector<std::size_t> car{seed_pos};
    std::vector<bool> in_car(pool_.size(), false);
    in_car[seed_pos] = true;
    double current = 0.0;  // a set that is not yet a feasible car is worth nothing
    if (const auto& ev = evaluate(car)) current = ev->value;

    struct Option {
      double delta;
      std::size_t pos;
    };
    while (static_cast<int>(car.size()) < params_.capacity) {
      std::vector<Option> options;
      for (std::size_t p = 0; p < pool_.size(); ++p) {
        if (in_car[p]) continue;
        if (out_of_budget(eval_budget, deadline)) return;
        car.push_back(p);
        const auto& ev = evaluate(car);
        car.pop_back();
        if (ev && ev->value - current > 0.0) options.push_back({ev->value - current, p});
      }
      if (options.empty()) return;
      std::stable_sort(options.begin(), options.end(), [&](const Option& a, const Option& b) {
        if (a.delta != b.delta) return a.delta > b.delta;
        return pool_[a.pos].id < pool_[b.pos].id;
      });
      if (static_cast<int>(options.size()) > params_.l_size) options.resize(static_cast<std::size_t>(params_.l_size));
      const std::size_t pick = bernoulli(rng, params_.d_rate) ? 0 : uniform_index(rng, options.size());
      car.push_back(options[pick].pos);
      in_car[options[pick].pos] = true;
      const auto& chosen = evaluate(car);
      current = chosen->value;
      if (current > 0.0) found_.try_emplace(chosen->members, *chosen);
    }
  }

  std::span<const Request> pool_;
  const ZoneMap& zones_;
  const RewardWeights& weights_;
  const SolverParams& params_;
  TimeStep now_;
  std::unordered_map<std::vector<RequestId>, std::optional<Candidate>, MemberHash> cache_;
  std::map<std::vector<RequestId>, Candidate> found_;
  GenerationStats stats_;
};

}  // namespace

std::vector<Candidate> generate_candidates(std::span<const Request> pool, const ZoneMap& zones,
                                           const RewardWeights& weights, const SolverParams& params, TimeStep now,
                                           GenerationStats* stats) {
  validate(params);
  if (pool.empty()) return {};
  std::vector<Request> sorted(pool.begin(), pool.end());
  std::sort(sorted.begin(), sorted.end(), [](const Request& a, const Request& b) { return a.id < b.id; });

  const auto deadline =
      Clock::now() + std::chrono::microseconds(static_cast<long long>(params.budget_ms * params.generation_share * 1000.0));
  const int workers = std::min<int>(params.workers, static_cast<int>(sorted.size()));
  const long long share = std::max(1LL, params.generation_evaluations / workers);

  std::vector<Generator> gens;
  gens.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) gens.emplace_back(sorted, zones, weights, params, now);
  auto job = [&](int w) {
    gens[static_cast<std::size_t>(w)].run(w, workers, share, deadline,
                                          derive_seed(params.seed, static_cast<std::uint64_t>(w)));
  };
  if (workers == 1) {
    job(0);
  } else {
    std::vector<std::jthread> threads;
    for (int w = 0; w < workers; ++w) threads.emplace_back(job, w);
  }

  // Merge in member-set order; identical sets evaluate identically.
  std::map<std::vector<RequestId>, Candidate> merged;
  GenerationStats total;
  for (auto& g : gens) {
    for (auto& [key, cand] : g.found()) merged.try_emplace(key, std::move(cand));
    total.constructions += g.stats().constructions;
    total.evaluations += g.stats().evaluations;
  }
  if (stats != nullptr) *stats = total;
  std::vector<Candidate> out;
  out.reserve(merged.size());
  for (auto& [key, cand] : merged) out.push_back(std::move(cand));
  return out;
}

namespace {

using Bits = std::vector<std::uint64_t>;

bool intersects(const Bits& a, const Bits& b) {
  for (std::size_t w = 0; w < a.size(); ++w) {
    if (a[w] & b[w]) return true;
  }
  return false;
}

std::vector<Bits> member_bits(std::span<const Candidate> candidates) {
  std::map<RequestId, std::size_t> index;
  for (const auto& c : candidates) {
    for (RequestId id : c.members) index.try_emplace(id, index.size());
  }
  const std::size_t words = (index.size() + 63) / 64;
  std::vector<Bits> bits(candidates.size(), Bits(std::max<std::size_t>(words, 1), 0));
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    for (RequestId id : candidates[k].members) {
      const std::size_t b = index[id];
      bits[k][b / 64] |= std::uint64_t{1} << (b % 64);
    }
  }
  return bits;
}

double canonical_total(std::span<const Candidate> candidates, const std::vector<std::size_t>& chosen) {
  double total = 0.0;
  for (auto k : chosen) total += candidates[k].value;
  return total;
}

class BranchAndBound {
public:
  BranchAndBound(std::span<const Candidate> candidates, const PackingBudget& budget)
      : candidates_(candidates), budget_(budget), bits_(member_bits(candidates)) {
    order_.resize(candidates.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
      const double da = candidates[a].value / static_cast<double>(std::max<std::size_t>(1, candidates[a].members.size()));
      const double db = candidates[b].value / static_cast<double>(std::max<std::size_t>(1, candidates[b].members.size()));
      return da > db;
    });
    deadline_ = Clock::now() + std::chrono::microseconds(static_cast<long long>(budget.time_ms * 1000.0));
  }

  PackingResult solve() {
    const std::size_t words = bits_.empty() ? 1 : bits_.front().size();
    // Greedy pass seeds the incumbent so an early stop still returns something useful.
    Bits used(words, 0);
    double value = 0.0;
    std::vector<std::size_t> greedy;
    for (auto k : order_) {
      if (!intersects(used, bits_[k])) {
        for (std::size_t w = 0; w < words; ++w) used[w] |= bits_[k][w];
        value += candidates_[k].value;
        greedy.push_back(k);
      }
    }
    improve(greedy, value);

    std::fill(used.begin(), used.end(), 0);
    selected_.clear();
    search(0, used, 0.0);

    result_.chosen = best_;
    std::sort(result_.chosen.begin(), result_.chosen.end());
    result_.total = canonical_total(candidates_, result_.chosen);
    return result_;
  }

private:
  void improve(const std::vector<std::size_t>& chosen, double value) {
    if (!has_best_ || value > best_value_) {
      has_best_ = true;
      best_value_ = value;
      best_ = chosen;
      result_.incumbent_trace.push_back(value);
    }
  }

  bool exhausted() {
    if (result_.approximate) return true;
    const bool over = budget_.deterministic ? result_.nodes >= budget_.node_limit
                                            : (result_.nodes % 256 == 0 && Clock::now() >= deadline_);
    if (over) result_.approximate = true;
    return over;
  }

  void search(std::size_t depth, Bits& used, double value) {
    if (exhausted()) return;
    ++result_.nodes;
    if (depth == order_.size()) {
      improve(selected_, value);
      return;
    }
    double bound = value;
    for (std::size_t d = depth; d < order_.size(); ++d) {
      if (!intersects(used, bits_[order_[d]])) bound += candidates_[order_[d]].value;
    }
    if (bound <= best_value_) return;

    const std::size_t k = order_[depth];
    if (!intersects(used, bits_[k])) {
      const Bits saved = used;
      for (std::size_t w = 0; w < used.size(); ++w) used[w] |= bits_[k][w];
      selected_.push_back(k);
      search(depth + 1, used, value + candidates_[k].value);
      selected_.pop_back();
      used = saved;
    }
    search(depth + 1, used, value);
  }

  std::span<const Candidate> candidates_;
  PackingBudget budget_;
  std::vector<Bits> bits_;
  std::vector<std::size_t> order_;
  Clock::time_point deadline_;
  std::vector<std::size_t> selected_;
  std::vector<std::size_t> best_;
  double best_value_ = 0.0;
  bool has_best_ = false;
  PackingResult result_;
};

}  // namespace

PackingResult solve_packing(std::span<const Candidate> candidates, const PackingBudget& budget) {
  if (candidates.empty()) return {};
  return BranchAndBound(candidates, budget).solve();
}

PackingResult brute_force_packing(std::span<const Candidate> candidates) {
  const std::size_t m = candidates.size();
  if (m > 20) throw InvalidInputError("brute_force_packing refuses more than 20 candidates");
  const auto bits = member_bits(candidates);
  std::vector<std::uint32_t> conflicts(m, 0);
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = 0; b < m; ++b) {
      if (a != b && intersects(bits[a], bits[b])) conflicts[a] |= std::uint32_t{1} << b;
    }
  }

  PackingResult result;
  bool have = false;
  const std::uint32_t limit = std::uint32_t{1} << m;
  for (std::uint32_t mask = 0; mask < limit; ++mask) {
    ++result.nodes;
    bool disjoint = true;
    std::vector<std::size_t> chosen;
    for (std::size_t k = 0; k < m && disjoint; ++k) {
      if (mask & (std::uint32_t{1} << k)) {
        disjoint = (conflicts[k] & mask) == 0;
        chosen.push_back(k);
      }
    }
    if (!disjoint) continue;
    const double total = canonical_total(candidates, chosen);
    if (!have || total > result.total || (total == result.total && chosen < result.chosen)) {
      have = true;
      result.total = total;
      result.chosen = std::move(chosen);
    }
  }
  return result;
}

LookaheadResult lookahead_filter(std::span<const Candidate> solution, TimeStep now,
                                 std::span<const Candidate> provisional_candidates, double margin, int capacity) {
  LookaheadResult out;
  for (const auto& cand : solution) {
    if (cand.contains_provisional) {
      out.defer.push_back(cand);
      continue;
    }
    bool expiring = false;
    for (std::size_t r = 0; r < cand.car.members.size(); ++r) {
      const int slack = cand.car.max_waits[r] - (now - cand.car.arrivals[r]);
      if (slack <= 0) expiring = true;
    }
    bool hold = false;
    if (!expiring && static_cast<int>(cand.members.size()) < capacity && margin != kLookaheadDisabled) {
      for (const auto& better : provisional_candidates) {
        if (!better.contains_provisional || better.value <= cand.value + margin) continue;
        if (std::includes(better.members.begin(), better.members.end(), cand.members.begin(), cand.members.end())) {
          hold = true;
          break;
        }
      }
    }
    (hold ? out.defer : out.commit).push_back(cand);
  }
  return out;
}

}  // namespace ridepool

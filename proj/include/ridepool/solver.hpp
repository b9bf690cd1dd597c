#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "ridepool/city.hpp"
#include "ridepool/model.hpp"

namespace ridepool {

struct Candidate {
  std::vector<RequestId> members;  // sorted ascending
  double value = 0.0;
  RoutePlan route;
  bool contains_provisional = false;
  Car car;  // designated driver, per-member times and reward at car.commit_step
};

struct SolverParams {
  double budget_ms = 60000.0;      // wall-clock budget per step (gamma)
  double generation_share = 0.5;   // fraction of the budget spent generating candidates
  double d_rate = 0.8;             // probability of taking the greedy-best addition
  int l_size = 3;                  // restricted candidate list size
  std::uint64_t seed = 1;
  int capacity = kDefaultCapacity;
  int workers = 1;

  // Deterministic budgets replace wall-clock time when `deterministic` is set.
  bool deterministic = true;
  long long generation_evaluations = 4000;  // car evaluations per step
  long long packing_nodes = 200000;         // branch-and-bound nodes per step
};

void validate(const SolverParams& params);

// Best car over every admissible driver designation for `members`, committed
// at max(now, latest member arrival). nullopt when the set is not a feasible car.
std::optional<Candidate> evaluate_car(std::span<const Request> members, const ZoneMap& zones,
                                      const RewardWeights& weights, int capacity, TimeStep now);

struct GenerationStats {
  long long constructions = 0;
  long long evaluations = 0;
};

// Randomized greedy construction from round-robin seed requests. Returns
// deduplicated positive-value candidates sorted by member set.
std::vector<Candidate> generate_candidates(std::span<const Request> pool, const ZoneMap& zones,
                                           const RewardWeights& weights, const SolverParams& params, TimeStep now,
                                           GenerationStats* stats = nullptr);

struct PackingBudget {
  bool deterministic = true;
  long long node_limit = 200000;
  double time_ms = 30000.0;
};

struct PackingResult {
  std::vector<std::size_t> chosen;  // indices into the candidate list, ascending
  double total = 0.0;               // summed in ascending index order
  bool approximate = false;         // budget ran out before the search closed
  long long nodes = 0;
  std::vector<double> incumbent_trace;  // every improvement, in order
};

// Branch and bound over include/exclude decisions, candidates visited by value
// per member. The bound adds every remaining candidate compatible with the
// current selection.
PackingResult solve_packing(std::span<const Candidate> candidates, const PackingBudget& budget);

// Exhaustive enumeration; refuses more than 20 candidates. Ties go to the
// lexicographically smallest index set.
PackingResult brute_force_packing(std::span<const Candidate> candidates);

struct LookaheadResult {
  std::vector<Candidate> commit;
  std::vector<Candidate> defer;
};

inline constexpr double kLookaheadDisabled = std::numeric_limits<double>::infinity();

// Splits a packing solution into cars to form now and cars to hold back.
// Cars with provisional members are always deferred; cars with a member at
// zero slack are always committed; a real-only car is deferred when a
// provisional candidate containing all its members is worth more than its
// value plus `margin` and the car still has room.
LookaheadResult lookahead_filter(std::span<const Candidate> solution, TimeStep now,
                                 std::span<const Candidate> provisional_candidates, double margin, int capacity);

}  // namespace ridepool

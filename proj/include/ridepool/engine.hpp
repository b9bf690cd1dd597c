#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ridepool/city.hpp"
#include "ridepool/model.hpp"
#include "ridepool/predictor.hpp"
#include "ridepool/solver.hpp"
#include "ridepool/stream.hpp"

namespace ridepool {

struct SimConfig {
  int horizon = 0;  // forecast horizon f; 0 disables prediction
  SolverParams solver;
  RewardWeights weights;
  int capacity = kDefaultCapacity;
  int max_wait = 5;          // wait budget given to provisional requests
  double driver_prob = 0.5;  // driver share used when sampling provisional flags
  bool lookahead = true;
  double margin = 0.0;
  std::uint64_t seed = 1;
  int drain_steps = -1;  // -1 drains for max_wait steps
};

void validate(const SimConfig& cfg);

// A car formed around provisional requests, waiting for them to show up.
struct Reservation {
  Candidate plan;
  std::vector<Request> held;     // real members taken out of the pool
  std::vector<Request> awaited;  // provisional members still to realize
  std::vector<Request> matched;  // arrivals that stood in for provisional members
};

struct PoolState {
  TimeStep now = 0;
  std::vector<Request> active_real;
  std::vector<Request> provisional;
  std::vector<Reservation> reservations;
  IdSource ids;

  std::size_t reserved_real() const;
  std::size_t awaited() const;
};

struct StepReport {
  TimeStep t = 0;
  int arrivals = 0;
  std::vector<Car> committed;
  double reward_total = 0.0;
  double reward_qos = 0.0;  // weighted QoS share of reward_total
  double reward_env = 0.0;  // weighted environmental share
  int pool_real = 0;        // active plus reserved real requests
  int pool_provisional = 0; // free plus awaited provisional requests
  int expired_unserved = 0;
  int expired_singleton = 0;
  int reservations_made = 0;
  int reservations_committed = 0;
  int reservations_dissolved = 0;
  int candidates = 0;
  bool packing_approximate = false;
  std::optional<CountsGrid> next_forecast;  // one-step-ahead forecast for t+1

  int pool_size() const { return pool_real + pool_provisional; }
};

// Advances the pool by one step:
//  1. match arrivals against reservations awaiting this step, committing the
//     fully realized ones and dissolving the rest back into the pool
//  2. add unmatched arrivals to the pool and drop last step's provisional requests
//  3. forecast t+1..t+f (never past `forecast_limit`) and materialize them
//  4. generate candidates, pack, split with the look-ahead filter
//  5. commit real-only winners, reserve provisional ones
//  6. expire requests at zero slack: drivers ride alone, riders go unserved
// Throws InvariantError when a committed car breaks a model invariant.
StepReport step(PoolState& state, TimeStep t, std::span<const Request> arrivals, const SimConfig& cfg,
                Predictor* predictor, const ZoneMap& zones, TimeStep forecast_limit);

struct RunReport {
  std::string label;
  int horizon = 0;  // forecast horizon of the run
  TimeStep first = 1;
  TimeStep last = 0;
  std::vector<StepReport> steps;
  double total_reward = 0.0;
  double average_pool = 0.0;
  long arrivals = 0;
  long served = 0;         // real requests in committed cars, singletons included
  long shared = 0;         // real requests in cars of two or more
  long expired_unserved = 0;
  long residual = 0;       // still waiting or reserved at drain end
  long cars = 0;
  std::optional<double> smape_cell;
  std::optional<double> smape_total;

  double served_fraction() const { return arrivals == 0 ? 0.0 : static_cast<double>(served) / arrivals; }
};

struct RunWindow {
  TimeStep first = 1;
  TimeStep last = 0;  // 0 runs to the end of the stream
};

// Folds step() over [first, last] and a drain phase without arrivals. The
// predictor observes the stream from one day before `first` as warm-up.
RunReport run(const RequestStream& stream, const SimConfig& cfg, const ZoneMap& zones, Predictor* predictor,
              RunWindow window = {});

RunReport run_day(const RequestStream& stream, int day, const SimConfig& cfg, const ZoneMap& zones,
                  Predictor* predictor);

// Percentage improvement of treatment over baseline; nullopt when the
// baseline total is zero. Throws InvalidComparisonError for different streams.
std::optional<double> compare_runs(const RunReport& baseline, const RunReport& treatment);

// "t,committed,reward_total,reward_qos,reward_env,pool_real,pool_provisional,expired"
void write_steps_csv(std::ostream& out, const RunReport& report);
void write_summary_json(std::ostream& out, const RunReport& report);

}  // namespace ridepool

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ridepool {

using ZoneId = int;     // 0-based zone index
using TimeStep = int;   // 1-based simulation step
using RequestId = std::int64_t;

struct Request {
  RequestId id = 0;
  ZoneId origin = 0;
  ZoneId dest = 0;
  bool is_driver = false;
  int max_wait = 5;          // steps the commuter accepts before assignment
  TimeStep arrival = 1;
  bool provisional = false;  // materialized from a forecast, not yet observed
};

struct RewardWeights {
  double rho_co2 = 1.0;
  double rho_noise = 0.5;
  double rho_traffic = 1.0;
  double rho_qos = 1.0;
};

struct EnvBenefits {
  double co2 = 0.0;
  double noise = 0.0;
  double traffic = 0.0;
};

struct RewardBreakdown {
  double e_co2 = 0.0;
  double e_noise = 0.0;
  double e_traffic = 0.0;
  double qos = 0.0;
  double total = 0.0;
};

// The two normalized penalty terms of every member, in member order.
struct QosTerms {
  std::vector<double> detour;  // (t_r - t*_r) / t_r
  std::vector<double> wait;    // (commit - arrival_r) / max_wait_r
  double value() const;        // minus the sum of both
};

// A committed (or candidate) shared ride. Per-member vectors are aligned with
// `members`, which is sorted by request id.
struct Car {
  std::vector<RequestId> members;
  RequestId driver = 0;
  std::vector<int> ride_times;
  std::vector<int> solo_times;
  std::vector<TimeStep> arrivals;
  std::vector<int> max_waits;
  TimeStep commit_step = 1;
  RewardBreakdown reward;

  std::size_t size() const { return members.size(); }
};

inline constexpr int kDefaultCapacity = 5;

QosTerms qos_terms(std::span<const int> ride_times, std::span<const int> solo_times,
                   std::span<const TimeStep> arrivals, std::span<const int> max_waits,
                   TimeStep commit_step);

// Negative quality of service: detour ratios plus normalized to-be-assigned
// delays. The assignment time is the commit step. Throws InvalidCarError on
// any violated precondition instead of clamping.
double quality_of_service(std::span<const int> ride_times, std::span<const int> solo_times,
                          std::span<const TimeStep> arrivals, std::span<const int> max_waits,
                          TimeStep commit_step);

RewardBreakdown car_reward(const EnvBenefits& env, double qos, const RewardWeights& weights);

bool is_feasible_car(std::span<const Request> members, int capacity, TimeStep now);

void validate(const RewardWeights& weights);

}  // namespace ridepool

#include "ridepool/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_set>

#include "ridepool/error.hpp"

namespace ridepool {

double QosTerms::value() const {
  const double d = std::accumulate(detour.begin(), detour.end(), 0.0);
  const double w = std::accumulate(wait.begin(), wait.end(), 0.0);
  return -d - w;
}

QosTerms qos_terms(std::span<const int> ride_times, std::span<const int> solo_times,
                   std::span<const TimeStep> arrivals, std::span<const int> max_waits,
                   TimeStep commit_step) {
  const std::size_t n = ride_times.size();
  if (n == 0) throw InvalidCarError("car has no members");
  if (solo_times.size() != n || arrivals.size() != n || max_waits.size() != n) {
    throw InvalidCarError("per-member vectors differ in length");
  }
  QosTerms terms;
  terms.detour.reserve(n);
  terms.wait.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    if (solo_times[r] < 1) throw InvalidCarError("solo travel time below one step");
    if (ride_times[r] < solo_times[r]) throw InvalidCarError("shared ride faster than shortest path");
    if (max_waits[r] < 1) throw InvalidCarError("max wait below one step");
    const int waited = commit_step - arrivals[r];
    if (waited < 0) throw InvalidCarError("commit step precedes member arrival");
    if (waited > max_waits[r]) {
      throw InvalidCarError("member waited " + std::to_string(waited) + " steps, max " +
                            std::to_string(max_waits[r]));
    }
    terms.detour.push_back(static_cast<double>(ride_times[r] - solo_times[r]) / ride_times[r]);
    terms.wait.push_back(static_cast<double>(waited) / max_waits[r]);
  }
  return terms;
}

double quality_of_service(std::span<const int> ride_times, std::span<const int> solo_times,
                          std::span<const TimeStep> arrivals, std::span<const int> max_waits,
                          TimeStep commit_step) {
  return qos_terms(ride_times, solo_times, arrivals, max_waits, commit_step).value();
}

void validate(const RewardWeights& w) {
  for (double v : {w.rho_co2, w.rho_noise, w.rho_traffic, w.rho_qos}) {
    if (!std::isfinite(v) || v < 0.0) throw InvalidInputError("reward weights must be finite and >= 0");
  }
}

RewardBreakdown car_reward(const EnvBenefits& env, double qos, const RewardWeights& weights) {
  for (double v : {env.co2, env.noise, env.traffic, qos}) {
    if (!std::isfinite(v)) throw InvalidInputError("non-finite reward component");
  }
  if (env.co2 < 0.0 || env.noise < 0.0 || env.traffic < 0.0) {
    throw InvalidInputError("environmental benefits must be >= 0");
  }
  if (qos > 0.0) throw InvalidInputError("quality of service must be <= 0");
  validate(weights);

  RewardBreakdown out;
  out.e_co2 = env.co2;
  out.e_noise = env.noise;
  out.e_traffic = env.traffic;
  out.qos = qos;
  out.total = weights.rho_co2 * env.co2 + weights.rho_noise * env.noise +
              weights.rho_traffic * env.traffic + weights.rho_qos * qos;
  return out;
}

bool is_feasible_car(std::span<const Request> members, int capacity, TimeStep now) {
  if (members.empty()) return false;
  if (static_cast<int>(members.size()) > capacity) return false;
  bool has_driver = false;
  std::unordered_set<RequestId> seen;
  for (const auto& r : members) {
    if (!seen.insert(r.id).second) return false;
    if (now - r.arrival > r.max_wait) return false;
    has_driver = has_driver || r.is_driver;
  }
  return has_driver;
}

}  // namespace ridepool

#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ridepool/lstm.hpp"
#include "ridepool/rng.hpp"
#include "ridepool/stream.hpp"

namespace ridepool {

struct Forecast {
  TimeStep for_step = 0;
  int horizon_used = 1;  // for_step minus the step the forecast was made at
  CountsGrid grid;
  // Driver counts per cell when the predictor knows them; otherwise flags
  // are sampled at materialization.
  std::optional<CountsGrid> drivers;
};

enum class PredictorKind { none, perfect, yesterday, lstm, scrambled };

PredictorKind parse_predictor_kind(const std::string& name);
std::string to_string(PredictorKind kind);

// A predictor sees realized counts one step at a time through observe() and
// forecasts the following steps. One instance belongs to one simulation run.
class Predictor {
public:
  virtual ~Predictor() = default;
  virtual PredictorKind kind() const = 0;
  virtual void observe(TimeStep t, const CountsGrid& realized) = 0;
  // Forecasts for t+1 .. t+f made after observing step t.
  virtual std::vector<Forecast> predict(TimeStep t, int f) = 0;
};

// Reads the future straight from the stream.
class PerfectPredictor final : public Predictor {
public:
  explicit PerfectPredictor(const RequestStream& oracle) : oracle_(&oracle) {}
  PredictorKind kind() const override { return PredictorKind::perfect; }
  void observe(TimeStep, const CountsGrid&) override {}
  std::vector<Forecast> predict(TimeStep t, int f) override;

private:
  const RequestStream* oracle_;
};

// Replays the counts observed exactly one day earlier; zero when that step
// was never observed.
class YesterdayPredictor final : public Predictor {
public:
  YesterdayPredictor(int zones, int steps_per_day) : zones_(zones), steps_per_day_(steps_per_day) {}
  PredictorKind kind() const override { return PredictorKind::yesterday; }
  void observe(TimeStep t, const CountsGrid& realized) override;
  std::vector<Forecast> predict(TimeStep t, int f) override;

private:
  int zones_;
  int steps_per_day_;
  std::deque<std::pair<TimeStep, CountsGrid>> seen_;  // last day plus a few steps
};

// Recurrent forecaster. The state advances once per observed step; multi-step
// forecasts roll out on a copy of the state feeding back the raw output.
class LstmPredictor final : public Predictor {
public:
  LstmPredictor(LstmModel model, int zones);
  PredictorKind kind() const override { return PredictorKind::lstm; }
  void observe(TimeStep t, const CountsGrid& realized) override;
  std::vector<Forecast> predict(TimeStep t, int f) override;

private:
  LstmModel model_;
  int zones_;
  LstmState state_;
  std::vector<double> last_output_;
};

// Perfect per-step totals placed on a shuffled set of origin-destination
// cells: exact request volume, wrong trips. Used to show that count accuracy
// and matching value can disagree.
class ScrambledPredictor final : public Predictor {
public:
  ScrambledPredictor(const RequestStream& oracle, std::uint64_t seed) : oracle_(&oracle), seed_(seed) {}
  PredictorKind kind() const override { return PredictorKind::scrambled; }
  void observe(TimeStep, const CountsGrid&) override {}
  std::vector<Forecast> predict(TimeStep t, int f) override;

private:
  const RequestStream* oracle_;
  std::uint64_t seed_;
};

struct PredictorSpec {
  PredictorKind kind = PredictorKind::none;
  std::optional<LstmModel> lstm;
  std::uint64_t seed = 1;
};

// Returns nullptr for PredictorKind::none. Throws ConfigError when the kind
// needs an input that is missing (oracle stream, trained parameters).
std::unique_ptr<Predictor> make_predictor(const PredictorSpec& spec, const RequestStream* oracle);

// Hands out ids for provisional requests, disjoint from stream ids.
class IdSource {
public:
  explicit IdSource(RequestId first = RequestId{1} << 40) : next_(first) {}
  RequestId next() { return next_++; }

private:
  RequestId next_;
};

struct MaterializePolicy {
  int max_wait = 5;
  double driver_prob = 0.5;
};

std::vector<Request> materialize(const Forecast& forecast, IdSource& ids, const MaterializePolicy& policy, Rng& rng);

// Symmetric mean absolute percentage error in percent. Zero-zero terms add 0.
double smape(std::span<const double> predicted, std::span<const double> truth);

// Collects (predicted, actual) pairs for every off-diagonal cell of every
// scored step and reports cell-level and step-total SMAPE.
class SmapeAccumulator {
public:
  void add(TimeStep t, const CountsGrid& predicted, const CountsGrid& actual);
  std::size_t steps() const { return step_pred_.size(); }
  double cell_smape() const;
  double total_smape() const;
  bool empty() const { return step_pred_.empty(); }
  // CSV "step,i,j,predicted,actual", nonzero rows only.
  void write_csv(std::ostream& out) const;

private:
  std::vector<double> cell_pred_, cell_true_;
  std::vector<double> step_pred_, step_true_;
  struct Row {
    TimeStep t;
    ZoneId i, j;
    int predicted, actual;
  };
  std::vector<Row> rows_;
};

// One-step-ahead accuracy of a predictor over [first, last] of a stream,
// warmed up on every earlier step.
SmapeAccumulator score_predictor(Predictor& predictor, const RequestStream& stream, TimeStep first, TimeStep last);

}  // namespace ridepool

#include "ridepool/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "ridepool/error.hpp"

namespace ridepool {

PredictorKind parse_predictor_kind(const std::string& name) {
  if (name == "none") return PredictorKind::none;
  if (name == "perfect") return PredictorKind::perfect;
  if (name == "yesterday") return PredictorKind::yesterday;
  if (name == "lstm") return PredictorKind::lstm;
  if (name == "scrambled") return PredictorKind::scrambled;
  throw ConfigError("unknown predictor '" + name + "'");
}

std::string to_string(PredictorKind kind) {
  switch (kind) {
    case PredictorKind::none: return "none";
    case PredictorKind::perfect: return "perfect";
    case PredictorKind::yesterday: return "yesterday";
    case PredictorKind::lstm: return "lstm";
    case PredictorKind::scrambled: return "scrambled";
  }
  return "?";
}

std::vector<Forecast> PerfectPredictor::predict(TimeStep t, int f) {
  std::vector<Forecast> out;
  for (int k = 1; k <= f; ++k) {
    Forecast fc;
    fc.for_step = t + k;
    fc.horizon_used = k;
    fc.grid = counts_at(*oracle_, t + k);
    CountsGrid drivers(oracle_->zones);
    if (t + k >= 1 && t + k <= oracle_->horizon()) {
      for (const auto& r : oracle_->at(t + k)) {
        if (r.is_driver) ++drivers.at(r.origin, r.dest);
      }
    }
    fc.drivers = std::move(drivers);
    out.push_back(std::move(fc));
  }
  return out;
}

void YesterdayPredictor::observe(TimeStep t, const CountsGrid& realized) {
  seen_.emplace_back(t, realized);
  while (!seen_.empty() && seen_.front().first <= t - steps_per_day_ - 8) seen_.pop_front();
}

std::vector<Forecast> YesterdayPredictor::predict(TimeStep t, int f) {
  std::vector<Forecast> out;
  for (int k = 1; k <= f; ++k) {
    Forecast fc;
    fc.for_step = t + k;
    fc.horizon_used = k;
    fc.grid = CountsGrid(zones_);
    const TimeStep source = t + k - steps_per_day_;
    for (const auto& [step, grid] : seen_) {
      if (step == source) {
        fc.grid = grid;
        break;
      }
    }
    out.push_back(std::move(fc));
  }
  return out;
}

LstmPredictor::LstmPredictor(LstmModel model, int zones)
    : model_(std::move(model)), zones_(zones), state_(LstmState::zeros(model_.params.hidden_dim())) {
  const int cells = zones * zones;
  if (model_.params.input_dim() != cells || model_.params.output_dim() != cells) {
    throw ConfigError("LSTM parameters were trained for a different zone count");
  }
}

void LstmPredictor::observe(TimeStep, const CountsGrid& realized) {
  auto step = lstm_forward(model_.params, state_, encode_grid(realized, model_.scale));
  state_ = std::move(step.state);
  last_output_ = std::move(step.y);
}

std::vector<Forecast> LstmPredictor::predict(TimeStep t, int f) {
  std::vector<Forecast> out;
  if (last_output_.empty()) {
    for (int k = 1; k <= f; ++k) out.push_back({t + k, k, CountsGrid(zones_), std::nullopt});
    return out;
  }
  LstmState rollout = state_;
  std::vector<double> y = last_output_;
  for (int k = 1; k <= f; ++k) {
    out.push_back({t + k, k, decode_grid(y, zones_, model_.scale), std::nullopt});
    if (k < f) {
      auto step = lstm_forward(model_.params, rollout, y);
      rollout = std::move(step.state);
      y = std::move(step.y);
    }
  }
  return out;
}

std::vector<Forecast> ScrambledPredictor::predict(TimeStep t, int f) {
  const int n = oracle_->zones;
  std::vector<std::size_t> cells;
  for (ZoneId i = 0; i < n; ++i) {
    for (ZoneId j = 0; j < n; ++j) {
      if (i != j) cells.push_back(static_cast<std::size_t>(i) * n + j);
    }
  }
  std::vector<Forecast> out;
  for (int k = 1; k <= f; ++k) {
    const TimeStep s = t + k;
    Rng rng(derive_seed(seed_, static_cast<std::uint64_t>(s)));
    std::vector<std::size_t> target = cells;
    for (std::size_t i = target.size(); i > 1; --i) std::swap(target[i - 1], target[uniform_index(rng, i)]);
    const CountsGrid real = counts_at(*oracle_, s);
    CountsGrid moved(n);
    for (std::size_t c = 0; c < cells.size(); ++c) moved.cells()[target[c]] = real.cells()[cells[c]];
    out.push_back({s, k, std::move(moved), std::nullopt});
  }
  return out;
}

std::unique_ptr<Predictor> make_predictor(const PredictorSpec& spec, const RequestStream* oracle) {
  switch (spec.kind) {
    case PredictorKind::none:
      return nullptr;
    case PredictorKind::perfect:
      if (oracle == nullptr) throw ConfigError("perfect predictor needs the oracle stream");
      return std::make_unique<PerfectPredictor>(*oracle);
    case PredictorKind::scrambled:
      if (oracle == nullptr) throw ConfigError("scrambled predictor needs the oracle stream");
      return std::make_unique<ScrambledPredictor>(*oracle, spec.seed);
    case PredictorKind::yesterday:
      if (oracle == nullptr) throw ConfigError("yesterday predictor needs the stream geometry");
      return std::make_unique<YesterdayPredictor>(oracle->zones, oracle->steps_per_day);
    case PredictorKind::lstm:
      if (!spec.lstm) throw ConfigError("lstm predictor needs a trained parameter file");
      if (oracle == nullptr) throw ConfigError("lstm predictor needs the stream geometry");
      return std::make_unique<LstmPredictor>(*spec.lstm, oracle->zones);
  }
  return nullptr;
}

std::vector<Request> materialize(const Forecast& forecast, IdSource& ids, const MaterializePolicy& policy, Rng& rng) {
  std::vector<Request> out;
  const CountsGrid& grid = forecast.grid;
  const int n = grid.zones();
  for (ZoneId i = 0; i < n; ++i) {
    for (ZoneId j = 0; j < n; ++j) {
      const int count = i == j ? 0 : grid.at(i, j);
      const int known_drivers = forecast.drivers ? std::min(count, forecast.drivers->at(i, j)) : 0;
      for (int c = 0; c < count; ++c) {
        Request r;
        r.id = ids.next();
        r.origin = i;
        r.dest = j;
        r.is_driver = forecast.drivers ? c < known_drivers : bernoulli(rng, policy.driver_prob);
        r.max_wait = policy.max_wait;
        r.arrival = forecast.for_step;
        r.provisional = true;
        out.push_back(r);
      }
    }
  }
  return out;
}

double smape(std::span<const double> predicted, std::span<const double> truth) {
  if (predicted.size() != truth.size()) throw InvalidInputError("smape: sequences differ in length");
  if (predicted.empty()) throw InvalidInputError("smape: empty sequences");
  double sum = 0.0;
  for (std::size_t t = 0; t < predicted.size(); ++t) {
    const double p = predicted[t], g = truth[t];
    if (p < 0.0 || g < 0.0) throw InvalidInputError("smape: negative entry");
    if (p == 0.0 && g == 0.0) continue;
    sum += std::abs(p - g) / ((p + g) / 2.0);
  }
  return 100.0 * sum / static_cast<double>(predicted.size());
}

void SmapeAccumulator::add(TimeStep t, const CountsGrid& predicted, const CountsGrid& actual) {
  const int n = actual.zones();
  if (predicted.zones() != n) throw InvalidInputError("smape: grid sizes differ");
  for (ZoneId i = 0; i < n; ++i) {
    for (ZoneId j = 0; j < n; ++j) {
      if (i == j) continue;
      const int p = predicted.at(i, j), a = actual.at(i, j);
      cell_pred_.push_back(p);
      cell_true_.push_back(a);
      if (p != 0 || a != 0) rows_.push_back({t, i, j, p, a});
    }
  }
  step_pred_.push_back(static_cast<double>(predicted.total()));
  step_true_.push_back(static_cast<double>(actual.total()));
}

double SmapeAccumulator::cell_smape() const {
  return cell_pred_.empty() ? 0.0 : smape(cell_pred_, cell_true_);
}

double SmapeAccumulator::total_smape() const {
  return step_pred_.empty() ? 0.0 : smape(step_pred_, step_true_);
}

void SmapeAccumulator::write_csv(std::ostream& out) const {
  out << "step,i,j,predicted,actual\n";
  for (const auto& r : rows_) out << r.t << ',' << r.i << ',' << r.j << ',' << r.predicted << ',' << r.actual << '\n';
}

SmapeAccumulator score_predictor(Predictor& predictor, const RequestStream& stream, TimeStep first, TimeStep last) {
  SmapeAccumulator acc;
  last = std::min(last, stream.horizon());
  for (TimeStep t = 1; t < last; ++t) {
    predictor.observe(t, counts_at(stream, t));
    if (t + 1 < first) continue;
    const auto forecasts = predictor.predict(t, 1);
    acc.add(t + 1, forecasts.front().grid, counts_at(stream, t + 1));
  }
  return acc;
}

}  // namespace ridepool

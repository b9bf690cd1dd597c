#include "ridepool/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

#include "ridepool/error.hpp"
#include "ridepool/rng.hpp"

namespace ridepool {

LstmParams::LstmParams(int input_dim, int hidden_dim, int output_dim)
    : input_(input_dim), hidden_(hidden_dim), output_(output_dim) {
  if (input_dim < 1 || hidden_dim < 1 || output_dim < 1) throw InvalidInputError("LSTM dimensions must be >= 1");
  const auto in = static_cast<std::size_t>(input_dim);
  const auto hid = static_cast<std::size_t>(hidden_dim);
  const auto out = static_cast<std::size_t>(output_dim);
  u_off_ = 4 * hid * in;
  b_off_ = u_off_ + 4 * hid * hid;
  f_off_ = b_off_ + 4 * hid;
  c_off_ = f_off_ + out * hid;
  values_.assign(c_off_ + out, 0.0);
}

LstmParams init_lstm(int input_dim, int hidden_dim, int output_dim, std::uint64_t seed) {
  LstmParams p(input_dim, hidden_dim, output_dim);
  Rng rng(seed);
  const double k = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  for (auto& v : p.values()) v = (2.0 * uniform01(rng) - 1.0) * k;
  for (int r = 0; r < hidden_dim; ++r) p.b(LstmParams::forget_gate, r) = 1.0;
  // A negative start would leave an output unit dead under the ReLU from the first step.
  for (int r = 0; r < output_dim; ++r) p.fc_bias(r) = k;
  return p;
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct StepCache {
  std::vector<double> x, h_prev, c_prev;
  std::vector<double> i, f, o, g;
  std::vector<double> c, tanh_c, h;
  std::vector<double> z_out, y;
};

void check_dims(const LstmParams& p, const LstmState& s, std::span<const double> x) {
  if (static_cast<int>(x.size()) != p.input_dim()) {
    throw InvalidInputError("LSTM input has " + std::to_string(x.size()) + " entries, expected " +
                            std::to_string(p.input_dim()));
  }
  if (static_cast<int>(s.h.size()) != p.hidden_dim() || static_cast<int>(s.cell.size()) != p.hidden_dim()) {
    throw InvalidInputError("LSTM state does not match hidden dimension");
  }
}

StepCache forward_cached(const LstmParams& p, const LstmState& s, std::span<const double> x) {
  check_dims(p, s, x);
  const int in = p.input_dim(), hid = p.hidden_dim(), out = p.output_dim();
  StepCache k;
  k.x.assign(x.begin(), x.end());
  k.h_prev = s.h;
  k.c_prev = s.cell;
  std::vector<double> pre[4];
  for (int gate = 0; gate < 4; ++gate) {
    pre[gate].assign(static_cast<std::size_t>(hid), 0.0);
    for (int r = 0; r < hid; ++r) {
      double z = p.b(gate, r);
      for (int col = 0; col < in; ++col) z += p.w(gate, r, col) * x[col];
      for (int col = 0; col < hid; ++col) z += p.u(gate, r, col) * s.h[col];
      pre[gate][r] = z;
    }
  }
  k.i.resize(hid);
  k.f.resize(hid);
  k.o.resize(hid);
  k.g.resize(hid);
  k.c.resize(hid);
  k.tanh_c.resize(hid);
  k.h.resize(hid);
  for (int r = 0; r < hid; ++r) {
    k.i[r] = sigmoid(pre[LstmParams::input_gate][r]);
    k.f[r] = sigmoid(pre[LstmParams::forget_gate][r]);
    k.o[r] = sigmoid(pre[LstmParams::output_gate][r]);
    k.g[r] = std::tanh(pre[LstmParams::cell_gate][r]);
    k.c[r] = k.f[r] * s.cell[r] + k.i[r] * k.g[r];
    k.tanh_c[r] = std::tanh(k.c[r]);
    k.h[r] = k.o[r] * k.tanh_c[r];
  }
  k.z_out.resize(out);
  k.y.resize(out);
  for (int r = 0; r < out; ++r) {
    double z = p.fc_bias(r);
    for (int col = 0; col < hid; ++col) z += p.fc(r, col) * k.h[col];
    k.z_out[r] = z;
    k.y[r] = z > 0.0 ? z : 0.0;
  }
  return k;
}

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

LstmStep lstm_forward(const LstmParams& params, const LstmState& state, std::span<const double> x) {
  auto k = forward_cached(params, state, x);
  return {{std::move(k.h), std::move(k.c)}, std::move(k.y)};
}

LossGrad lstm_loss_grad(const LstmParams& p, const std::vector<std::vector<double>>& inputs,
                        const std::vector<std::vector<double>>& targets) {
  if (inputs.size() != targets.size() || inputs.empty()) {
    throw InvalidInputError("inputs and targets must be nonempty sequences of equal length");
  }
  const int hid = p.hidden_dim(), in = p.input_dim(), out = p.output_dim();
  const std::size_t steps = inputs.size();
  const double norm = 1.0 / (static_cast<double>(steps) * out);

  std::vector<StepCache> caches;
  caches.reserve(steps);
  LstmState state = LstmState::zeros(hid);
  double loss = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    if (static_cast<int>(targets[t].size()) != out) throw InvalidInputError("target dimension mismatch");
    caches.push_back(forward_cached(p, state, inputs[t]));
    const auto& k = caches.back();
    if (!all_finite(k.c) || !all_finite(k.h) || !all_finite(k.y)) {
      throw NumericOverflowError("non-finite LSTM activation", static_cast<int>(t));
    }
    for (int r = 0; r < out; ++r) {
      const double e = k.y[r] - targets[t][r];
      loss += e * e;
    }
    state = {k.h, k.c};
  }
  loss *= norm;

  LossGrad result{loss, LstmParams(in, hid, out)};
  LstmParams& g = result.grads;
  std::vector<double> dh_next(hid, 0.0), dc_next(hid, 0.0);
  std::vector<double> da[4];
  for (auto& v : da) v.assign(static_cast<std::size_t>(hid), 0.0);

  for (std::size_t t = steps; t-- > 0;) {
    const StepCache& k = caches[t];
    std::vector<double> dh = dh_next;
    for (int r = 0; r < out; ++r) {
      const double dy = 2.0 * (k.y[r] - targets[t][r]) * norm;
      const double dz = k.z_out[r] > 0.0 ? dy : 0.0;
      if (dz == 0.0) continue;
      g.fc_bias(r) += dz;
      for (int col = 0; col < hid; ++col) {
        g.fc(r, col) += dz * k.h[col];
        dh[col] += p.fc(r, col) * dz;
      }
    }
    for (int r = 0; r < hid; ++r) {
      const double d_o = dh[r] * k.tanh_c[r];
      const double dc = dh[r] * k.o[r] * (1.0 - k.tanh_c[r] * k.tanh_c[r]) + dc_next[r];
      const double d_i = dc * k.g[r];
      const double d_g = dc * k.i[r];
      const double d_f = dc * k.c_prev[r];
      dc_next[r] = dc * k.f[r];
      da[LstmParams::input_gate][r] = d_i * k.i[r] * (1.0 - k.i[r]);
      da[LstmParams::forget_gate][r] = d_f * k.f[r] * (1.0 - k.f[r]);
      da[LstmParams::output_gate][r] = d_o * k.o[r] * (1.0 - k.o[r]);
      da[LstmParams::cell_gate][r] = d_g * (1.0 - k.g[r] * k.g[r]);
    }
    std::fill(dh_next.begin(), dh_next.end(), 0.0);
    for (int gate = 0; gate < 4; ++gate) {
      for (int r = 0; r < hid; ++r) {
        const double a = da[gate][r];
        if (a == 0.0) continue;
        g.b(gate, r) += a;
        for (int col = 0; col < in; ++col) g.w(gate, r, col) += a * k.x[col];
        for (int col = 0; col < hid; ++col) {
          g.u(gate, r, col) += a * k.h_prev[col];
          dh_next[col] += p.u(gate, r, col) * a;
        }
      }
    }
  }
  return result;
}

double lstm_loss(const LstmParams& p, const std::vector<std::vector<double>>& inputs,
                 const std::vector<std::vector<double>>& targets) {
  if (inputs.size() != targets.size() || inputs.empty()) {
    throw InvalidInputError("inputs and targets must be nonempty sequences of equal length");
  }
  LstmState state = LstmState::zeros(p.hidden_dim());
  double loss = 0.0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto step = lstm_forward(p, state, inputs[t]);
    for (int r = 0; r < p.output_dim(); ++r) {
      const double e = step.y[r] - targets[t][r];
      loss += e * e;
    }
    state = std::move(step.state);
  }
  return loss / (static_cast<double>(inputs.size()) * p.output_dim());
}

namespace {

// Loss with parameter `k` shifted by `delta`, evaluated in extended precision so
// the finite differences are not swamped by rounding on tiny gradients.
long double shifted_loss(const LstmParams& p, const std::vector<std::vector<double>>& inputs,
                         const std::vector<std::vector<double>>& targets, std::size_t k, long double delta) {
  using T = long double;
  const int in = p.input_dim(), hid = p.hidden_dim(), out = p.output_dim();
  std::vector<T> v(p.values().begin(), p.values().end());
  v[k] += delta;
  auto at = [&](std::size_t index) { return v[index]; };
  auto sig = [](T z) { return 1.0L / (1.0L + std::exp(-z)); };
  std::vector<T> h(hid, 0.0L), c(hid, 0.0L), hn(hid), cn(hid);
  T loss = 0.0L;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    for (int r = 0; r < hid; ++r) {
      T a[4];
      for (int gate = 0; gate < 4; ++gate) {
        a[gate] = at(p.b_index(gate, r));
        for (int col = 0; col < in; ++col) a[gate] += at(p.w_index(gate, r, col)) * inputs[t][col];
        for (int col = 0; col < hid; ++col) a[gate] += at(p.u_index(gate, r, col)) * h[col];
      }
      cn[r] = sig(a[LstmParams::forget_gate]) * c[r] + sig(a[LstmParams::input_gate]) * std::tanh(a[LstmParams::cell_gate]);
      hn[r] = sig(a[LstmParams::output_gate]) * std::tanh(cn[r]);
    }
    std::swap(h, hn);
    std::swap(c, cn);
    for (int r = 0; r < out; ++r) {
      T z = at(p.fc_bias_index(r));
      for (int col = 0; col < hid; ++col) z += at(p.fc_index(r, col)) * h[col];
      const T e = std::max(z, 0.0L) - targets[t][r];
      loss += e * e;
    }
  }
  return loss / (static_cast<T>(inputs.size()) * out);
}

}  // namespace

GradientCheck gradient_check(const LstmParams& params, const std::vector<std::vector<double>>& inputs,
                             const std::vector<std::vector<double>>& targets, double epsilon) {
  const auto analytic = lstm_loss_grad(params, inputs, targets).grads;
  GradientCheck check;
  check.relative_errors.resize(params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    const long double up = shifted_loss(params, inputs, targets, k, epsilon);
    const long double down = shifted_loss(params, inputs, targets, k, -static_cast<long double>(epsilon));
    const double numeric = static_cast<double>((up - down) / (2.0L * epsilon));
    const double a = analytic.values()[k];
    const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-12});
    check.relative_errors[k] = err;
    check.max_relative_error = std::max(check.max_relative_error, err);
  }
  return check;
}

std::vector<double> encode_grid(const CountsGrid& grid, double scale) {
  std::vector<double> x(grid.cells().size());
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = grid.cells()[k] / scale;
  return x;
}

CountsGrid decode_grid(std::span<const double> y, int zones, double scale) {
  CountsGrid grid(zones);
  if (y.size() != grid.cells().size()) throw InvalidInputError("network output does not match zone count");
  for (ZoneId i = 0; i < zones; ++i) {
    for (ZoneId j = 0; j < zones; ++j) {
      if (i == j) continue;
      const double v = std::floor(y[static_cast<std::size_t>(i) * zones + j] * scale + 0.5);
      grid.at(i, j) = v > 0.0 ? static_cast<int>(v) : 0;
    }
  }
  return grid;
}

TrainResult train(LstmParams params, std::span<const CountsGrid> history, const TrainConfig& cfg) {
  if (cfg.window < 1) throw ConfigError("window must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (cfg.batch_size < 1 || cfg.stride < 1 || cfg.epochs < 0) throw ConfigError("batch_size, stride must be >= 1");
  if (history.size() < static_cast<std::size_t>(cfg.window) + 1) {
    throw ConfigError("history shorter than one training window");
  }
  const int cells = static_cast<int>(history.front().cells().size());
  if (params.input_dim() != cells || params.output_dim() != cells) {
    throw ConfigError("network dimensions do not match the count grids");
  }

  int max_count = 0;
  for (const auto& g : history) max_count = std::max(max_count, *std::max_element(g.cells().begin(), g.cells().end()));
  TrainResult result;
  result.model.scale = max_count > 0 ? static_cast<double>(max_count) : 1.0;

  std::vector<std::vector<double>> encoded;
  encoded.reserve(history.size());
  for (const auto& g : history) encoded.push_back(encode_grid(g, result.model.scale));

  std::vector<std::size_t> starts;  // first input index of each window
  for (std::size_t s = 0; s + cfg.window < encoded.size(); s += static_cast<std::size_t>(cfg.stride)) {
    starts.push_back(s);
  }

  Rng rng(cfg.seed);
  std::vector<double> m(params.size(), 0.0), v(params.size(), 0.0);
  long long updates = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = starts.size(); i > 1; --i) std::swap(starts[i - 1], starts[uniform_index(rng, i)]);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < starts.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(starts.size(), b + static_cast<std::size_t>(cfg.batch_size));
      std::vector<double> grad(params.size(), 0.0);
      for (std::size_t w = b; w < end; ++w) {
        const auto first = encoded.begin() + static_cast<std::ptrdiff_t>(starts[w]);
        std::vector<std::vector<double>> inputs(first, first + cfg.window);
        std::vector<std::vector<double>> targets(first + 1, first + cfg.window + 1);
        auto lg = lstm_loss_grad(params, inputs, targets);
        epoch_loss += lg.loss;
        for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += lg.grads.values()[k];
      }
      const double inv = 1.0 / static_cast<double>(end - b);
      ++updates;
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(updates));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(updates));
      auto& theta = params.values();
      for (std::size_t k = 0; k < theta.size(); ++k) {
        const double gk = grad[k] * inv;
        m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gk;
        v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gk * gk;
        theta[k] -= cfg.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.epsilon);
      }
    }
    result.loss_curve.push_back(starts.empty() ? 0.0 : epoch_loss / static_cast<double>(starts.size()));
  }
  result.model.params = std::move(params);
  return result;
}

TrainResult train(const RequestStream& stream, const TrainConfig& cfg) {
  if (stream.days < 2 || stream.horizon() < 2 * stream.steps_per_day) {
    throw ConfigError("training needs at least two days of history, stream has " + std::to_string(stream.days));
  }
  std::vector<CountsGrid> history;
  history.reserve(static_cast<std::size_t>(stream.horizon()));
  for (TimeStep t = 1; t <= stream.horizon(); ++t) history.push_back(counts_at(stream, t));
  const int cells = stream.zones * stream.zones;
  const int hidden = cfg.hidden_dim > 0 ? cfg.hidden_dim : cells;
  return train(init_lstm(cells, hidden, cells, cfg.seed), history, cfg);
}

void save_model(std::ostream& out, const LstmModel& model) {
  const auto& p = model.params;
  out << "ridepool-lstm 1\n";
  out << "dims " << p.input_dim() << ' ' << p.hidden_dim() << ' ' << p.output_dim() << '\n';
  out << "scale " << std::setprecision(17) << model.scale << '\n';
  out << "values " << p.size() << '\n';
  for (double v : p.values()) out << std::setprecision(17) << v << '\n';
}

LstmModel load_model(std::istream& in) {
  std::string magic, key;
  int version = 0;
  if (!(in >> magic >> version) || magic != "ridepool-lstm" || version != 1) {
    throw FormatError("not a ridepool-lstm v1 parameter file");
  }
  int input = 0, hidden = 0, output = 0;
  LstmModel model;
  std::size_t count = 0;
  if (!(in >> key >> input >> hidden >> output) || key != "dims") throw FormatError("missing dims line");
  if (!(in >> key >> model.scale) || key != "scale") throw FormatError("missing scale line");
  if (!(in >> key >> count) || key != "values") throw FormatError("missing values line");
  model.params = LstmParams(input, hidden, output);
  if (count != model.params.size()) throw FormatError("parameter count does not match dims");
  for (auto& v : model.params.values()) {
    if (!(in >> v) || !std::isfinite(v)) throw FormatError("truncated or non-finite parameter value");
  }
  return model;
}

}  // namespace ridepool

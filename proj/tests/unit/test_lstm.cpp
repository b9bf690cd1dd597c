#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "ridepool/error.hpp"
#include "ridepool/lstm.hpp"

using namespace ridepool;

namespace {

using Seq = std::vector<std::vector<double>>;

// Scalar re-implementation of one recurrence step, reading the flat
// parameter vector through its documented layout.
struct ScalarLstm {
  int in, hid, out;
  const std::vector<double>& v;

  double W(int gate, int r, int c) const { return v[std::size_t((gate * hid + r) * in + c)]; }
  double U(int gate, int r, int c) const { return v[std::size_t(4 * hid * in + (gate * hid + r) * hid + c)]; }
  double B(int gate, int r) const { return v[std::size_t(4 * hid * in + 4 * hid * hid + gate * hid + r)]; }
  double F(int r, int c) const { return v[std::size_t(4 * hid * in + 4 * hid * hid + 4 * hid + r * hid + c)]; }
  double C(int r) const { return v[std::size_t(4 * hid * in + 4 * hid * hid + 4 * hid + out * hid + r)]; }

  void step(std::vector<double>& h, std::vector<double>& c, const std::vector<double>& x, std::vector<double>& y) const {
    std::vector<double> hn(hid), cn(hid);
    for (int r = 0; r < hid; ++r) {
      double a[4];
      for (int gate = 0; gate < 4; ++gate) {
        a[gate] = B(gate, r);
        for (int k = 0; k < in; ++k) a[gate] += W(gate, r, k) * x[k];
        for (int k = 0; k < hid; ++k) a[gate] += U(gate, r, k) * h[k];
      }
      const double i = 1.0 / (1.0 + std::exp(-a[0]));
      const double f = 1.0 / (1.0 + std::exp(-a[1]));
      const double o = 1.0 / (1.0 + std::exp(-a[2]));
      const double g = std::tanh(a[3]);
      cn[r] = f * c[r] + i * g;
      hn[r] = o * std::tanh(cn[r]);
    }
    h = hn;
    c = cn;
    y.assign(out, 0.0);
    for (int r = 0; r < out; ++r) {
      double z = C(r);
      for (int k = 0; k < hid; ++k) z += F(r, k) * h[k];
      y[r] = std::max(0.0, z);
    }
  }
};

LstmParams random_params(std::mt19937& gen, int in, int hid, int out, double spread = 0.6) {
  LstmParams p(in, hid, out);
  std::uniform_real_distribution<double> u(-spread, spread);
  for (auto& v : p.values()) v = u(gen);
  // Keep the output units in their linear region so the loss is smooth
  // around the evaluation point.
  for (int r = 0; r < out; ++r) p.fc_bias(r) = 1.0 + std::abs(u(gen));
  return p;
}

Seq random_seq(std::mt19937& gen, int steps, int dim) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Seq s(steps, std::vector<double>(dim));
  for (auto& v : s)
    for (auto& x : v) x = u(gen);
  return s;
}

RequestStream constant_stream(int zones, int steps_per_day, int days, int count) {
  RequestStream s;
  s.zones = zones;
  s.steps_per_day = steps_per_day;
  s.days = days;
  s.per_step.resize(std::size_t(steps_per_day) * days);
  RequestId id = 1;
  for (TimeStep t = 1; t <= s.horizon(); ++t) {
    for (int c = 0; c < count; ++c) {
      Request r;
      r.id = id++;
      r.origin = 0;
      r.dest = 1;
      r.arrival = t;
      s.per_step[std::size_t(t - 1)].push_back(r);
    }
  }
  return s;
}

}  // namespace

TEST_SUITE("lstm") {

TEST_CASE("zero parameters give zero state and output") {
  LstmParams p(4, 3, 4);
  const std::vector<double> x{1, 2, 3, 4};
  const auto s = lstm_forward(p, LstmState::zeros(3), x);
  for (double h : s.state.h) CHECK(h == 0.0);
  for (double c : s.state.cell) CHECK(c == 0.0);
  for (double y : s.y) CHECK(y == 0.0);
}

TEST_CASE("relu clamps a negative output") {
  LstmParams p(1, 1, 1);
  p.fc(0, 0) = 1.0;
  p.fc_bias(0) = -1.0;
  const std::vector<double> x{0.7};
  CHECK(lstm_forward(p, LstmState::zeros(1), x).y[0] == 0.0);
}

TEST_CASE("forward matches the scalar implementation") {
  std::mt19937 gen(1);
  for (int trial = 0; trial < 20; ++trial) {
    const int in = 1 + int(gen() % 4), hid = 1 + int(gen() % 4), out = 1 + int(gen() % 4);
    const auto p = random_params(gen, in, hid, out, 1.0);
    const auto xs = random_seq(gen, 2, in);
    ScalarLstm oracle{in, hid, out, p.values()};
    std::vector<double> h(hid, 0.0), c(hid, 0.0), y;
    LstmState state = LstmState::zeros(hid);
    for (const auto& x : xs) {
      oracle.step(h, c, x, y);
      auto s = lstm_forward(p, state, x);
      for (int r = 0; r < hid; ++r) {
        CHECK(std::abs(s.state.h[r] - h[r]) < 1e-12);
        CHECK(std::abs(s.state.cell[r] - c[r]) < 1e-12);
      }
      for (int r = 0; r < out; ++r) CHECK(std::abs(s.y[r] - y[r]) < 1e-12);
      state = s.state;
    }
  }
}

TEST_CASE("forward rejects wrong dimensions") {
  LstmParams p(2, 2, 2);
  const std::vector<double> x{1.0};
  CHECK_THROWS_AS(lstm_forward(p, LstmState::zeros(2), x), InvalidInputError);
  const std::vector<double> x2{1.0, 2.0};
  CHECK_THROWS_AS(lstm_forward(p, LstmState::zeros(3), x2), InvalidInputError);
}

TEST_CASE("perfect targets give zero loss and gradient") {
  std::mt19937 gen(2);
  const auto p = random_params(gen, 3, 2, 3);
  const auto xs = random_seq(gen, 4, 3);
  Seq targets;
  LstmState s = LstmState::zeros(2);
  for (const auto& x : xs) {
    auto step = lstm_forward(p, s, x);
    targets.push_back(step.y);
    s = step.state;
  }
  const auto lg = lstm_loss_grad(p, xs, targets);
  CHECK(lg.loss == 0.0);
  for (double g : lg.grads.values()) CHECK(g == 0.0);
}

TEST_CASE("scalar output layer gradient in closed form") {
  std::mt19937 gen(3);
  auto p = random_params(gen, 1, 1, 1);
  const Seq xs{{0.4}};
  const Seq targets{{0.1}};
  const auto step = lstm_forward(p, LstmState::zeros(1), xs[0]);
  REQUIRE(step.y[0] > 0.0);
  const auto lg = lstm_loss_grad(p, xs, targets);
  const double h = step.state.h[0];
  CHECK(lg.grads.fc(0, 0) == doctest::Approx(2.0 * (step.y[0] - 0.1) * h).epsilon(1e-13));
  CHECK(lg.grads.fc_bias(0) == doctest::Approx(2.0 * (step.y[0] - 0.1)).epsilon(1e-13));
}

TEST_CASE("analytic gradient agrees with central differences") {
  std::mt19937 gen(4);
  for (int trial = 0; trial < 5; ++trial) {
    const auto p = random_params(gen, 3, 3, 3);
    const auto xs = random_seq(gen, 4, 3);
    const auto ts = random_seq(gen, 4, 3);
    CHECK(gradient_check(p, xs, ts, 1e-5).max_relative_error < 1e-6);
  }
}

TEST_CASE("zero parameters give exact zero output layer gradients") {
  LstmParams p(2, 2, 2);
  const Seq xs{{1, 0}, {0, 1}};
  const Seq ts{{1, 1}, {0, 2}};
  const auto check = gradient_check(p, xs, ts, 1e-5);
  for (std::size_t k = p.output_layer_begin(); k < p.fc_bias_index(0); ++k) CHECK(check.relative_errors[k] == 0.0);
}

TEST_CASE("a coarse epsilon is visibly wrong") {
  std::mt19937 gen(5);
  const auto p = random_params(gen, 3, 3, 3, 1.5);
  const auto xs = random_seq(gen, 4, 3);
  const auto ts = random_seq(gen, 4, 3);
  CHECK(gradient_check(p, xs, ts, 1e-1).max_relative_error > 1e-3);
}

TEST_CASE("non-finite activations report the step") {
  LstmParams p(1, 1, 1);
  p.w(LstmParams::cell_gate, 0, 0) = 1.0;
  p.w(LstmParams::input_gate, 0, 0) = 1.0;
  const Seq xs{{0.5}, {std::numeric_limits<double>::quiet_NaN()}};
  const Seq ts{{0.0}, {0.0}};
  try {
    lstm_loss_grad(p, xs, ts);
    FAIL("expected overflow");
  } catch (const NumericOverflowError& e) {
    CHECK(e.step() == 1);
  }
}

TEST_CASE("decode rounds half up, clamps and clears the diagonal") {
  const std::vector<double> y{0.9, 0.5, -0.3, 0.24, 0.9, 0.26, 1.1, 0.0, 0.7};
  const auto g = decode_grid(y, 3, 2.0);
  CHECK(g.at(0, 0) == 0);
  CHECK(g.at(0, 1) == 1);
  CHECK(g.at(0, 2) == 0);
  CHECK(g.at(1, 0) == 0);
  CHECK(g.at(1, 1) == 0);
  CHECK(g.at(1, 2) == 1);
  CHECK(g.at(2, 0) == 2);
  CHECK(g.at(2, 1) == 0);
  CHECK(g.valid());
}

TEST_CASE("zero stream has zero loss with a zero output layer") {
  const auto s = constant_stream(2, 16, 2, 0);
  std::vector<CountsGrid> history;
  for (TimeStep t = 1; t <= s.horizon(); ++t) history.push_back(counts_at(s, t));
  auto p = init_lstm(4, 3, 4, 1);
  for (std::size_t k = p.output_layer_begin(); k < p.size(); ++k) p.values()[k] = 0.0;
  TrainConfig cfg;
  cfg.epochs = 1;
  const auto result = train(p, history, cfg);
  REQUIRE(result.loss_curve.size() == 1);
  CHECK(result.loss_curve[0] == 0.0);
}

TEST_CASE("training is reproducible") {
  const auto s = constant_stream(2, 24, 2, 2);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.hidden_dim = 3;
  cfg.seed = 11;
  const auto a = train(s, cfg);
  const auto b = train(s, cfg);
  CHECK(a.model.params == b.model.params);
  CHECK(a.loss_curve == b.loss_curve);
  std::ostringstream sa, sb;
  save_model(sa, a.model);
  save_model(sb, b.model);
  CHECK(sa.str() == sb.str());
}

TEST_CASE("constant stream is learned") {
  const auto s = constant_stream(2, 48, 3, 3);
  std::vector<CountsGrid> history;
  for (TimeStep t = 1; t <= s.day_end(1); ++t) history.push_back(counts_at(s, t));
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.hidden_dim = 4;
  cfg.learning_rate = 0.02;
  const auto result = train(init_lstm(4, 4, 4, 1), history, cfg);
  CHECK(result.loss_curve.back() < result.loss_curve.front());
  LstmState state = LstmState::zeros(4);
  for (TimeStep t = 1; t <= s.horizon(); ++t) {
    auto step = lstm_forward(result.model.params, state, encode_grid(counts_at(s, t), result.model.scale));
    state = step.state;
    if (t > s.day_end(1) && t < s.horizon()) CHECK(decode_grid(step.y, 2, result.model.scale) == counts_at(s, t + 1));
  }
}

TEST_CASE("training needs two days") {
  const auto s = constant_stream(2, 10, 1, 1);
  CHECK_THROWS_AS(train(s, TrainConfig{}), ConfigError);
  TrainConfig bad;
  bad.learning_rate = 0.0;
  const auto two = constant_stream(2, 10, 2, 1);
  CHECK_THROWS_AS(train(two, bad), ConfigError);
}

TEST_CASE("parameter files round trip") {
  std::mt19937 gen(6);
  LstmModel m{random_params(gen, 4, 2, 4), 3.5};
  std::stringstream io;
  save_model(io, m);
  const auto back = load_model(io);
  CHECK(back.params == m.params);
  CHECK(back.scale == m.scale);
  std::istringstream bad("ridepool-lstm 2\n");
  CHECK_THROWS_AS(load_model(bad), FormatError);
  std::istringstream cut("ridepool-lstm 1\ndims 1 1 1\nscale 1\nvalues 14\n0.5\n");
  CHECK_THROWS_AS(load_model(cut), FormatError);
}

}  // TEST_SUITE

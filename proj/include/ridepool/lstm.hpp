#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "ridepool/stream.hpp"

namespace ridepool {

// Single-layer LSTM followed by a fully connected layer and a ReLU.
//
// All parameters live in one flat vector so optimizers and gradient checks can
// treat them uniformly. Layout, gates ordered (input, forget, output, cell):
//   W  4*hidden x input     input weights
//   U  4*hidden x hidden    recurrent weights
//   b  4*hidden             gate biases
//   F  output x hidden      fully connected weights
//   c  output               fully connected bias
class LstmParams {
public:
  enum Gate { input_gate = 0, forget_gate = 1, output_gate = 2, cell_gate = 3 };

  LstmParams() = default;
  LstmParams(int input_dim, int hidden_dim, int output_dim);

  int input_dim() const { return input_; }
  int hidden_dim() const { return hidden_; }
  int output_dim() const { return output_; }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  double& w(int gate, int row, int col) { return values_[w_index(gate, row, col)]; }
  double w(int gate, int row, int col) const { return values_[w_index(gate, row, col)]; }
  double& u(int gate, int row, int col) { return values_[u_index(gate, row, col)]; }
  double u(int gate, int row, int col) const { return values_[u_index(gate, row, col)]; }
  double& b(int gate, int row) { return values_[b_index(gate, row)]; }
  double b(int gate, int row) const { return values_[b_index(gate, row)]; }
  double& fc(int row, int col) { return values_[fc_index(row, col)]; }
  double fc(int row, int col) const { return values_[fc_index(row, col)]; }
  double& fc_bias(int row) { return values_[fc_bias_index(row)]; }
  double fc_bias(int row) const { return values_[fc_bias_index(row)]; }

  std::size_t w_index(int gate, int row, int col) const {
    return (static_cast<std::size_t>(gate) * hidden_ + row) * input_ + col;
  }
  std::size_t u_index(int gate, int row, int col) const {
    return u_off_ + (static_cast<std::size_t>(gate) * hidden_ + row) * hidden_ + col;
  }
  std::size_t b_index(int gate, int row) const { return b_off_ + static_cast<std::size_t>(gate) * hidden_ + row; }
  std::size_t fc_index(int row, int col) const { return f_off_ + static_cast<std::size_t>(row) * hidden_ + col; }
  std::size_t fc_bias_index(int row) const { return c_off_ + static_cast<std::size_t>(row); }
  // First index of the output layer block (F then c).
  std::size_t output_layer_begin() const { return f_off_; }

  bool same_shape(const LstmParams& other) const {
    return input_ == other.input_ && hidden_ == other.hidden_ && output_ == other.output_;
  }

  friend bool operator==(const LstmParams&, const LstmParams&) = default;

private:
  int input_ = 0;
  int hidden_ = 0;
  int output_ = 0;
  std::size_t u_off_ = 0, b_off_ = 0, f_off_ = 0, c_off_ = 0;
  std::vector<double> values_;
};

struct LstmState {
  std::vector<double> h;
  std::vector<double> cell;

  static LstmState zeros(int hidden_dim) {
    return {std::vector<double>(static_cast<std::size_t>(hidden_dim), 0.0),
            std::vector<double>(static_cast<std::size_t>(hidden_dim), 0.0)};
  }
};

struct LstmStep {
  LstmState state;
  std::vector<double> y;  // ReLU output, every entry >= 0
};

// Uniform(-k, k), k = 1/sqrt(hidden), forget-gate bias 1, output bias k.
LstmParams init_lstm(int input_dim, int hidden_dim, int output_dim, std::uint64_t seed);

LstmStep lstm_forward(const LstmParams& params, const LstmState& state, std::span<const double> x);

struct LossGrad {
  double loss = 0.0;
  LstmParams grads;
};

// Mean squared error over every step and component, starting from a zero
// state, with full backpropagation through time.
LossGrad lstm_loss_grad(const LstmParams& params, const std::vector<std::vector<double>>& inputs,
                        const std::vector<std::vector<double>>& targets);

double lstm_loss(const LstmParams& params, const std::vector<std::vector<double>>& inputs,
                 const std::vector<std::vector<double>>& targets);

struct GradientCheck {
  double max_relative_error = 0.0;
  std::vector<double> relative_errors;  // one per parameter
};

// Central differences, evaluated in extended precision, against the analytic gradient.
GradientCheck gradient_check(const LstmParams& params, const std::vector<std::vector<double>>& inputs,
                             const std::vector<std::vector<double>>& targets, double epsilon = 1e-5);

struct TrainConfig {
  int window = 8;
  double learning_rate = 0.01;
  int epochs = 5;
  int batch_size = 16;
  int stride = 1;
  int hidden_dim = 0;  // 0 selects zones^2
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 1;
};

// Trained network plus the count normalization it expects.
struct LstmModel {
  LstmParams params;
  double scale = 1.0;
};

struct TrainResult {
  LstmModel model;
  std::vector<double> loss_curve;  // mean loss per epoch
};

// Adam over sliding windows of the count history. Each window feeds counts
// t-window+1..t and targets the following step at every position.
TrainResult train(LstmParams params, std::span<const CountsGrid> history, const TrainConfig& cfg);

// Trains on every step of a stream; refuses streams shorter than two days.
TrainResult train(const RequestStream& stream, const TrainConfig& cfg);

std::vector<double> encode_grid(const CountsGrid& grid, double scale);
// Round half up, clamp at zero, zero diagonal.
CountsGrid decode_grid(std::span<const double> y, int zones, double scale);

void save_model(std::ostream& out, const LstmModel& model);
LstmModel load_model(std::istream& in);

}  // namespace ridepool

#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mcvqa/graph.hpp"
#include "mcvqa/tensor.hpp"

namespace mcvqa {

using Rng = std::mt19937_64;

/// Floor applied to the target probability before taking its logarithm.
inline constexpr double kLogFloor = 1e-12;

/// Uniform in ±sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// Fully connected layer: activation(weight·x + bias).
struct DenseParams {
  Parameter weight;  // [out × in]
  Parameter bias;    // [out]
  Activation activation = Activation::identity;

  static DenseParams init(std::size_t in, std::size_t out, Activation act, Rng& rng);
  std::size_t in_dim() const { return weight.value.cols(); }
  std::size_t out_dim() const { return bias.value.size(); }
};

/// LSTM weights. The 4h rows are the (input, forget, candidate, output)
/// gate blocks, in that order.
struct LstmParams {
  Parameter input_weights;      // W [4h × in]
  Parameter recurrent_weights;  // U [4h × h]
  Parameter bias;               // [4h]
  std::size_t hidden_size = 0;

  static LstmParams init(std::size_t in, std::size_t hidden, Rng& rng);
  std::size_t in_dim() const { return input_weights.value.cols(); }
};

// Graph-building forms used by the encoders and models.
Var dense(Graph& g, const DenseParams& p, Var x);

struct LstmState {
  Var h;
  Var c;
};
LstmState lstm_step(Graph& g, const LstmParams& p, Var x, LstmState prev);

// Plain-value forms.
Vector dense_forward(const DenseParams& p, std::span<const double> x);

struct LstmOutput {
  Vector h;
  Vector c;
};
/// One LSTM step. A masked step returns the previous state unchanged.
LstmOutput lstm_step(const LstmParams& p, std::span<const double> x, std::span<const double> h_prev,
                     std::span<const double> c_prev, bool masked = false);

Vector softmax(std::span<const double> x);

/// −ln(probs[label]) with the probability floored at kLogFloor.
double categorical_cross_entropy(std::span<const double> probs, std::size_t label);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment estimates for one parameter tensor.
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  Tensor first_moment;
  Tensor second_moment;

  AdamState() = default;
  AdamState(AdamConfig cfg, const Shape& shape) : config(cfg), first_moment(shape), second_moment(shape) {}
};

/// Bias-corrected Adam step; increments `state.step` by one.
void adam_update(AdamState& state, Tensor& params, const Tensor& grads);

struct NamedParameter {
  std::string name;
  Parameter* param;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

/// |a − n| / max(|a|, |n|, 1e-8).
double relative_error(double analytic, double numeric);

/// Compares analytic gradients against central differences of step `step`.
/// `loss(true)` must return the loss and accumulate gradients into the
/// parameters; `loss(false)` must only evaluate. Throws NumericError on a
/// non-finite loss.
GradCheckReport grad_check(std::span<const NamedParameter> params, const std::function<double(bool)>& loss,
                           double step = 1e-5);
/// As above, but the central differences come from `reference`, an independent
/// long-double evaluation of the same loss. Round-off in the differences then
/// sits far below the analytic gradient's own error.
GradCheckReport grad_check(std::span<const NamedParameter> params, const std::function<double(bool)>& loss,
                           const std::function<long double()>& reference, double step = 1e-5);

/// Inverted-dropout mask: entries are 0 with probability `rate`, otherwise 1/(1−rate).
std::vector<double> dropout_mask(std::size_t n, double rate, Rng& rng);

}  // namespace mcvqa

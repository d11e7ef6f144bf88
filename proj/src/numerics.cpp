#include "mcvqa/numerics.hpp"

#include <algorithm>
#include <cmath>

#include "mcvqa/errors.hpp"

namespace mcvqa {

Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor t(std::move(shape));
  for (auto& x : t.data()) x = dist(rng);
  return t;
}

DenseParams DenseParams::init(std::size_t in, std::size_t out, Activation act, Rng& rng) {
  DenseParams p;
  p.weight = Parameter(glorot_uniform({out, in}, in, out, rng));
  p.bias = Parameter(Shape{out});
  p.activation = act;
  return p;
}

LstmParams LstmParams::init(std::size_t in, std::size_t hidden, Rng& rng) {
  LstmParams p;
  p.input_weights = Parameter(glorot_uniform({4 * hidden, in}, in, 4 * hidden, rng));
  p.recurrent_weights = Parameter(glorot_uniform({4 * hidden, hidden}, hidden, 4 * hidden, rng));
  p.bias = Parameter(Shape{4 * hidden});
  p.hidden_size = hidden;
  return p;
}

Var dense(Graph& g, const DenseParams& p, Var x) {
  if (p.weight.value.rank() != 2 || p.weight.value.extent(0) != p.bias.value.size()) {
    throw DimensionError("dense: weight " + shape_string(p.weight.value.shape()) + " inconsistent with bias " +
                         shape_string(p.bias.value.shape()));
  }
  require_size(x.size(), p.in_dim(), "dense input");
  Var z = add(matvec(g.parameter(p.weight), x), g.parameter(p.bias));
  return activate(z, p.activation);
}

LstmState lstm_step(Graph& g, const LstmParams& p, Var x, LstmState prev) {
  require_size(x.size(), p.in_dim(), "lstm input");
  require_size(prev.h.size(), p.hidden_size, "lstm hidden state");
  Var hc = lstm_cell(g.parameter(p.input_weights), g.parameter(p.recurrent_weights), g.parameter(p.bias), x, prev.h,
                     prev.c);
  return {slice(hc, 0, p.hidden_size), slice(hc, p.hidden_size, p.hidden_size)};
}

Vector dense_forward(const DenseParams& p, std::span<const double> x) {
  Graph g(false);
  return dense(g, p, g.constant(x)).value().values();
}

LstmOutput lstm_step(const LstmParams& p, std::span<const double> x, std::span<const double> h_prev,
                     std::span<const double> c_prev, bool masked) {
  require_size(h_prev.size(), p.hidden_size, "lstm hidden state");
  require_size(c_prev.size(), p.hidden_size, "lstm cell state");
  if (masked) return {Vector(h_prev.begin(), h_prev.end()), Vector(c_prev.begin(), c_prev.end())};
  Graph g(false);
  auto s = lstm_step(g, p, g.constant(x), {g.constant(h_prev), g.constant(c_prev)});
  return {s.h.value().values(), s.c.value().values()};
}

Vector softmax(std::span<const double> x) {
  if (x.empty()) throw DimensionError("softmax of an empty vector");
  Graph g(false);
  return softmax(g.constant(x)).value().values();
}

double categorical_cross_entropy(std::span<const double> probs, std::size_t label) {
  if (label >= probs.size()) throw DimensionError("cross-entropy label out of range");
  return -std::log(std::max(probs[label], kLogFloor));
}

void adam_update(AdamState& state, Tensor& params, const Tensor& grads) {
  if (params.shape() != grads.shape() || params.shape() != state.first_moment.shape()) {
    throw DimensionError("adam_update: parameter " + shape_string(params.shape()) + ", gradient " +
                         shape_string(grads.shape()) + ", moment " + shape_string(state.first_moment.shape()));
  }
  const AdamConfig& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double gi = grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * gi;
    v = c.beta2 * v + (1.0 - c.beta2) * gi * gi;
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    params[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

namespace {

// Finite differences come from `perturbed`, evaluated at θ±h; the divisor is
// the step actually realised in double.
template <class Perturbed>
GradCheckReport check_against(std::span<const NamedParameter> params, const std::function<double(bool)>& loss,
                              Perturbed perturbed, double step) {
  for (const auto& np : params) np.param->zero_grad();
  const double base = loss(true);
  if (!std::isfinite(base)) throw NumericError("gradient check: non-finite loss");
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const auto& np : params) analytic.push_back(np.param->grad);

  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& value = params[k].param->value;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      const double up = saved + step, down = saved - step;
      value[i] = up;
      const auto plus = perturbed();
      value[i] = down;
      const auto minus = perturbed();
      value[i] = saved;
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        throw NumericError("gradient check: non-finite loss perturbing " + params[k].name);
      }
      const double numeric = static_cast<double>((plus - minus) / (static_cast<decltype(plus)>(up) - down));
      const double err = relative_error(analytic[k][i], numeric);
      ++report.checked;
      if (err > report.max_relative_error || report.worst_parameter.empty()) {
        report.max_relative_error = err;
        report.worst_parameter = params[k].name;
        report.worst_index = i;
        report.analytic = analytic[k][i];
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace

GradCheckReport grad_check(std::span<const NamedParameter> params, const std::function<double(bool)>& loss,
                           double step) {
  return check_against(params, loss, [&loss] { return loss(false); }, step);
}

GradCheckReport grad_check(std::span<const NamedParameter> params, const std::function<double(bool)>& loss,
                           const std::function<long double()>& reference, double step) {
  return check_against(params, loss, reference, step);
}

std::vector<double> dropout_mask(std::size_t n, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout rate must lie in [0, 1)");
  std::vector<double> mask(n, 1.0);
  if (rate == 0.0) return mask;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep = 1.0 / (1.0 - rate);
  for (auto& m : mask) m = u(rng) < rate ? 0.0 : keep;
  return mask;
}

}  // namespace mcvqa

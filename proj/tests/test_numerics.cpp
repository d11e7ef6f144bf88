#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "mcvqa/errors.hpp"
#include "mcvqa/numerics.hpp"
#include "mcvqa/scoring.hpp"

using namespace mcvqa;

namespace {

DenseParams make_dense(std::size_t rows, std::size_t cols, std::vector<double> w, std::vector<double> b,
                       Activation act) {
  DenseParams p;
  p.weight = Parameter(Tensor::matrix(rows, cols, std::move(w)));
  p.bias = Parameter(Tensor::vector(std::move(b)));
  p.activation = act;
  return p;
}

LstmParams zero_lstm(std::size_t in, std::size_t h) {
  LstmParams p;
  p.input_weights = Parameter(Shape{4 * h, in});
  p.recurrent_weights = Parameter(Shape{4 * h, h});
  p.bias = Parameter(Shape{4 * h});
  p.hidden_size = h;
  return p;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST(Tensor, VolumeMatchesData) {
  Tensor t(Shape{2, 3, 4});
  EXPECT_EQ(t.size(), 24u);
  EXPECT_THROW(Tensor(Shape{2, 0}), DimensionError);
  EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<double>(3)), DimensionError);
}

TEST(Dense, IdentityMap) {
  auto p = make_dense(2, 2, {1, 0, 0, 1}, {0, 0}, Activation::identity);
  auto y = dense_forward(p, std::vector<double>{3, -1});
  EXPECT_EQ(y, (Vector{3, -1}));
}

TEST(Dense, ZeroSigmoidIsHalf) {
  auto p = make_dense(3, 2, std::vector<double>(6, 0.0), {0, 0, 0}, Activation::sigmoid);
  EXPECT_EQ(dense_forward(p, std::vector<double>{7, -2}), (Vector{0.5, 0.5, 0.5}));
}

TEST(Dense, ReluHandEvaluation) {
  auto p = make_dense(1, 2, {1, 1}, {1}, Activation::relu);
  EXPECT_EQ(dense_forward(p, std::vector<double>{-2, 0.5}), (Vector{0.0}));
}

TEST(Dense, ShapeMismatch) {
  auto p = make_dense(1, 2, {1, 1}, {1}, Activation::relu);
  EXPECT_THROW(dense_forward(p, std::vector<double>{1, 2, 3}), DimensionError);
}

TEST(Lstm, ZeroParamsZeroState) {
  auto p = zero_lstm(3, 2);
  auto out = lstm_step(p, std::vector<double>{1, -4, 9}, std::vector<double>{0, 0}, std::vector<double>{0, 0});
  EXPECT_EQ(out.h, (Vector{0, 0}));
  EXPECT_EQ(out.c, (Vector{0, 0}));
}

TEST(Lstm, ZeroParamsCarryCell) {
  auto p = zero_lstm(1, 1);
  auto out = lstm_step(p, std::vector<double>{0.3}, std::vector<double>{0}, std::vector<double>{1});
  EXPECT_DOUBLE_EQ(out.c[0], 0.5);
  EXPECT_NEAR(out.h[0], 0.5 * std::tanh(0.5), 1e-15);
  EXPECT_NEAR(out.h[0], 0.2311, 1e-4);
}

TEST(Lstm, GateOrderInputForgetCandidateOutput) {
  // One unit; each gate block gets a distinct bias so the order is observable.
  auto p = zero_lstm(1, 1);
  p.bias.value = Tensor::vector({0.1, 0.2, 0.3, 0.4});
  auto out = lstm_step(p, std::vector<double>{0}, std::vector<double>{0}, std::vector<double>{2.0});
  const double c = sigmoid(0.2) * 2.0 + sigmoid(0.1) * std::tanh(0.3);
  EXPECT_NEAR(out.c[0], c, 1e-15);
  EXPECT_NEAR(out.h[0], sigmoid(0.4) * std::tanh(c), 1e-15);
}

TEST(Lstm, MaskedStepIsPassthrough) {
  Rng rng(4);
  auto p = LstmParams::init(3, 2, rng);
  auto out = lstm_step(p, std::vector<double>{1, 2, 3}, std::vector<double>{0.1, -0.2}, std::vector<double>{0.3, 0.4},
                       true);
  EXPECT_EQ(out.h, (Vector{0.1, -0.2}));
  EXPECT_EQ(out.c, (Vector{0.3, 0.4}));
}

TEST(Lstm, ShapeMismatch) {
  auto p = zero_lstm(3, 2);
  EXPECT_THROW(lstm_step(p, std::vector<double>{1, 2}, std::vector<double>{0, 0}, std::vector<double>{0, 0}),
               DimensionError);
  EXPECT_THROW(lstm_step(p, std::vector<double>{1, 2, 3}, std::vector<double>{0}, std::vector<double>{0, 0}),
               DimensionError);
}

TEST(Softmax, Uniform) {
  EXPECT_EQ(softmax(std::vector<double>{0, 0, 0, 0}), (Vector{0.25, 0.25, 0.25, 0.25}));
}

TEST(Softmax, ClosedForm) {
  auto p = softmax(std::vector<double>{std::log(1.0), std::log(3.0)});
  EXPECT_NEAR(p[0], 0.25, 1e-15);
  EXPECT_NEAR(p[1], 0.75, 1e-15);
}

TEST(Softmax, ConstantVectorsAllUniform) {
  EXPECT_EQ(softmax(std::vector<double>{5, 5, 5, 5}), softmax(std::vector<double>{0, 0, 0, 0}));
  EXPECT_EQ(softmax(std::vector<double>{-300, -300, -300, -300}), softmax(std::vector<double>{0, 0, 0, 0}));
}

TEST(Softmax, RandomVectorsSumToOneAndShiftInvariant) {
  Rng rng(11);
  std::normal_distribution<double> normal(0.0, 3.0);
  std::uniform_int_distribution<std::size_t> len(1, 16);
  for (int trial = 0; trial < 500; ++trial) {
    Vector x(len(rng));
    for (auto& v : x) v = normal(rng);
    const double shift = normal(rng) * 10.0;
    Vector y = x;
    for (auto& v : y) v += shift;
    auto p = softmax(x);
    auto q = softmax(y);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
    for (std::size_t i = 0; i < p.size(); ++i) {
      EXPECT_GT(p[i], 0.0);
      EXPECT_NEAR(p[i], q[i], 1e-12);
    }
  }
}

TEST(CrossEntropy, UniformIsLogFour) {
  for (std::size_t label = 0; label < 4; ++label) {
    EXPECT_NEAR(categorical_cross_entropy(std::vector<double>{0.25, 0.25, 0.25, 0.25}, label), std::log(4.0), 1e-15);
  }
  EXPECT_NEAR(std::log(4.0), 1.3863, 1e-4);
}

TEST(CrossEntropy, Certainty) {
  EXPECT_EQ(categorical_cross_entropy(std::vector<double>{1, 0, 0, 0}, 0), 0.0);
}

TEST(CrossEntropy, DirectEvaluation) {
  EXPECT_NEAR(categorical_cross_entropy(std::vector<double>{0.7, 0.1, 0.1, 0.1}, 1), 2.3026, 1e-4);
}

TEST(CrossEntropy, ZeroProbabilityClampedAtFloor) {
  EXPECT_NEAR(categorical_cross_entropy(std::vector<double>{1, 0, 0, 0}, 2), -std::log(kLogFloor), 1e-12);
}

TEST(CrossEntropy, ClampedGradientIsZero) {
  Graph g;
  Parameter p(Tensor::vector({1.0, 0.0}));
  Var l = neg_log_at(g.parameter(p), 1, kLogFloor);
  g.backward(l);
  EXPECT_EQ(p.grad[0], 0.0);
  EXPECT_EQ(p.grad[1], 0.0);
}

TEST(Adam, HandComputedFirstStep) {
  AdamState state(AdamConfig{}, Shape{1});
  Tensor theta = Tensor::vector({1.0});
  adam_update(state, theta, Tensor::vector({0.1}));
  // m̂ = 0.1, v̂ = 0.01 → step = 1e-3 · 0.1 / (0.1 + 1e-8).
  const double expected = 1.0 - 1e-3 * 0.1 / (std::sqrt(0.01) + 1e-8);
  EXPECT_NEAR(theta[0], expected, 1e-15);
  EXPECT_NEAR(theta[0], 0.9990000001, 1e-12);
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, ZeroGradientIsIdentity) {
  Rng rng(2);
  Tensor theta = glorot_uniform({3, 4}, 4, 3, rng);
  const Tensor original = theta;
  AdamState state(AdamConfig{}, theta.shape());
  Tensor zero(theta.shape());
  for (int t = 0; t < 5; ++t) adam_update(state, theta, zero);
  EXPECT_EQ(theta, original);
  EXPECT_EQ(state.step, 5u);
  for (std::uint64_t t : {0ULL, 1ULL, 17ULL, 100000ULL}) {
    AdamState at_t(AdamConfig{}, theta.shape());
    at_t.step = t;
    adam_update(at_t, theta, zero);
    EXPECT_EQ(theta, original);
  }
}

TEST(Adam, ElementwiseRule) {
  AdamState state(AdamConfig{}, Shape{2});
  Tensor theta = Tensor::vector({0.5, 0.5});
  for (int t = 0; t < 3; ++t) adam_update(state, theta, Tensor::vector({0.2, 0.2}));
  EXPECT_EQ(theta[0], theta[1]);
}

TEST(Adam, ShapeMismatch) {
  AdamState state(AdamConfig{}, Shape{2});
  Tensor theta = Tensor::vector({0.5, 0.5});
  EXPECT_THROW(adam_update(state, theta, Tensor::vector({1.0})), DimensionError);
}

TEST(Init, GlorotBoundsAndDeterminism) {
  Rng a(9), b(9);
  Tensor x = glorot_uniform({20, 30}, 30, 20, a);
  Tensor y = glorot_uniform({20, 30}, 30, 20, b);
  EXPECT_EQ(x, y);
  const double bound = std::sqrt(6.0 / 50.0);
  for (double v : x.values()) EXPECT_LE(std::abs(v), bound);
}

TEST(Dropout, InvertedScaling) {
  Rng rng(1);
  auto mask = dropout_mask(10000, 0.25, rng);
  std::size_t zeros = 0;
  for (double m : mask) {
    if (m == 0.0) ++zeros;
    else EXPECT_DOUBLE_EQ(m, 1.0 / 0.75);
  }
  EXPECT_NEAR(static_cast<double>(zeros) / 10000.0, 0.25, 0.02);
  EXPECT_THROW(dropout_mask(3, 1.0, rng), ConfigError);
}

TEST(GradCheck, LinearHeadHandSet) {
  // Loss = −ln softmax(W·x)[1] for a hand-set 3×2 W.
  Parameter w(Tensor::matrix(3, 2, {0.5, -0.2, 0.1, 0.3, -0.4, 0.25}));
  const Tensor x = Tensor::vector({1.5, -0.5});
  auto loss = [&](bool with_grad) {
    Graph g(with_grad);
    Var l = neg_log_at(softmax(matvec(g.parameter(w), g.view(x))), 1, kLogFloor);
    if (with_grad) g.backward(l);
    return l[0];
  };
  std::vector<NamedParameter> params{{"w", &w}};
  auto r = grad_check(params, loss);
  EXPECT_LT(r.max_relative_error, 1e-7);
  EXPECT_EQ(r.checked, 6u);

  // Independent closed form: dL/dW = (p − e_1) xᵀ.
  auto z = std::vector<double>{0.5 * 1.5 + 0.2 * 0.5, 0.1 * 1.5 - 0.3 * 0.5, -0.4 * 1.5 - 0.25 * 0.5};
  auto p = softmax(z);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      EXPECT_NEAR(w.grad.at(i, j), (p[i] - (i == 1 ? 1.0 : 0.0)) * x[j], 1e-14);
}

TEST(GradCheck, ZeroGradientsGiveZeroError) {
  Parameter w(Tensor::vector({0.3, -0.7}));
  auto loss = [&](bool with_grad) {
    Graph g(with_grad);
    Var l = scale(sum_squares(g.parameter(w)), 0.0);
    if (with_grad) g.backward(l);
    return l[0];
  };
  std::vector<NamedParameter> params{{"w", &w}};
  EXPECT_EQ(grad_check(params, loss).max_relative_error, 0.0);
  EXPECT_EQ(relative_error(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(1e-9, 0.0), 1e-9 / 1e-8);
}

TEST(GradCheck, NonFiniteLossThrows) {
  Parameter w(Tensor::vector({0.3}));
  auto loss = [&](bool) { return std::nan(""); };
  std::vector<NamedParameter> params{{"w", &w}};
  EXPECT_THROW(grad_check(params, loss), NumericError);
}

TEST(L2, AddsLambdaSquaredNormAndTwoLambdaTheta) {
  Rng rng(3);
  auto head = HeadParams::init(5, 4, 0.0, 0.0, rng);
  std::array<Vector, 4> feats;
  for (auto& f : feats) {
    f.resize(5);
    for (auto& v : f) v = std::uniform_real_distribution<double>(-1, 1)(rng);
  }
  auto forward = [&](double lambda) {
    head.l2 = lambda;
    head.hidden.weight.zero_grad();
    head.output.weight.zero_grad();
    Graph g;
    std::array<Var, 4> vars;
    for (std::size_t k = 0; k < 4; ++k) vars[k] = g.constant(feats[k]);
    auto s = score_candidates(g, vars, head, Mode::eval, nullptr);
    Var l = question_loss(g, s, 2, head);
    g.backward(l);
    return std::make_pair(l[0], head.output.weight.grad);
  };
  auto [l0, g0] = forward(0.0);
  auto [l1, g1] = forward(0.05);
  double sq = 0.0;
  for (double w : head.output.weight.value.values()) sq += w * w;
  EXPECT_NEAR(l1 - l0, 0.05 * sq, 1e-15);
  for (std::size_t i = 0; i < g0.size(); ++i) {
    EXPECT_NEAR(g1[i] - g0[i], 2 * 0.05 * head.output.weight.value[i], 1e-15);
  }
}

TEST(Graph, ValuesStayFiniteOnFiniteInputs) {
  Rng rng(8);
  auto lstm = LstmParams::init(4, 3, rng);
  Graph g;
  LstmState st{g.constant(Tensor(Shape{3})), g.constant(Tensor(Shape{3}))};
  for (int t = 0; t < 50; ++t) {
    st = lstm_step(g, lstm, g.constant(std::vector<double>{100.0 * t, -1e3, 5, 0}), st);
  }
  Var l = sum_squares(st.h);
  g.backward(l);
  EXPECT_TRUE(l.value().all_finite());
  EXPECT_TRUE(lstm.input_weights.grad.all_finite());
  EXPECT_TRUE(lstm.recurrent_weights.grad.all_finite());
}

#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>

#include "mcvqa/errors.hpp"
#include "mcvqa/scoring.hpp"

using namespace mcvqa;

namespace {

std::array<Vector, 4> random_features(std::size_t f, Rng& rng) {
  std::normal_distribution<double> normal;
  std::array<Vector, 4> out;
  for (auto& v : out) {
    v.resize(f);
    for (auto& x : v) x = normal(rng);
  }
  return out;
}

HeadParams zero_head(std::size_t f, std::size_t hidden, double l2) {
  Rng rng(0);
  auto head = HeadParams::init(f, hidden, 0.0, l2, rng);
  head.hidden.weight.value.fill(0.0);
  head.hidden.bias.value.fill(0.0);
  head.output.weight.value.fill(0.0);
  head.output.bias.value.fill(0.0);
  return head;
}

}  // namespace

TEST(ScoreCandidates, IdenticalFeaturesUniform) {
  Rng rng(1);
  auto head = HeadParams::init(6, 9, 0.2, 1e-4, rng);
  Vector v{0.1, -0.4, 2.0, 0.0, 0.3, -1.1};
  std::array<Vector, 4> feats{v, v, v, v};
  auto s = score_candidates(feats, head, Mode::eval, 7);
  for (double p : s.probs) EXPECT_EQ(p, 0.25);
}

TEST(ScoreCandidates, ZeroHeadHalfScores) {
  auto head = zero_head(5, 4, 0.0);
  Rng rng(2);
  auto s = score_candidates(random_features(5, rng), head, Mode::eval, 0);
  for (double r : s.raw) EXPECT_EQ(r, 0.5);
  for (double p : s.probs) EXPECT_EQ(p, 0.25);
}

TEST(ScoreCandidates, ProbsSumToOneAndRawInUnitInterval) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    auto head = HeadParams::init(7, 11, 0.3, 0.0, rng);
    auto s = score_candidates(random_features(7, rng), head, trial % 2 ? Mode::train : Mode::eval, trial);
    EXPECT_NEAR(std::accumulate(s.probs.begin(), s.probs.end(), 0.0), 1.0, 1e-12);
    for (double r : s.raw) {
      EXPECT_GT(r, 0.0);
      EXPECT_LT(r, 1.0);
    }
  }
}

TEST(ScoreCandidates, PermutationEquivariant) {
  Rng rng(4);
  auto head = HeadParams::init(5, 8, 0.2, 0.0, rng);
  for (int trial = 0; trial < 100; ++trial) {
    auto feats = random_features(5, rng);
    auto base = score_candidates(feats, head, Mode::eval, 0);
    std::array<std::size_t, 4> perm{0, 1, 2, 3};
    do {
      std::array<Vector, 4> permuted;
      for (std::size_t k = 0; k < 4; ++k) permuted[k] = feats[perm[k]];
      auto s = score_candidates(permuted, head, Mode::eval, 0);
      for (std::size_t k = 0; k < 4; ++k) {
        ASSERT_EQ(s.raw[k], base.raw[perm[k]]);
        ASSERT_EQ(s.probs[k], base.probs[perm[k]]) << "trial " << trial;
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
}

TEST(ScoreCandidates, TrainModeIsSeeded) {
  Rng rng(5);
  auto head = HeadParams::init(6, 8, 0.5, 0.0, rng);
  auto feats = random_features(6, rng);
  auto a = score_candidates(feats, head, Mode::train, 11);
  auto b = score_candidates(feats, head, Mode::train, 11);
  EXPECT_EQ(a.probs, b.probs);
  auto c = score_candidates(feats, head, Mode::train, 12);
  EXPECT_NE(a.probs, c.probs);
}

TEST(ScoreCandidates, IndependentMasksPerCandidate) {
  // Identical inputs only separate if each candidate gets its own mask.
  Rng rng(6);
  auto head = HeadParams::init(6, 8, 0.5, 0.0, rng);
  Vector v{1, 2, 3, 4, 5, 6};
  std::array<Vector, 4> feats{v, v, v, v};
  bool differs = false;
  for (std::uint64_t seed = 0; seed < 5 && !differs; ++seed) {
    auto s = score_candidates(feats, head, Mode::train, seed);
    differs = s.raw[0] != s.raw[1] || s.raw[1] != s.raw[2] || s.raw[2] != s.raw[3];
  }
  EXPECT_TRUE(differs);
}

TEST(ScoreCandidates, LengthMismatch) {
  Rng rng(7);
  auto head = HeadParams::init(4, 3, 0.0, 0.0, rng);
  std::array<Vector, 4> feats{Vector(4), Vector(4), Vector(3), Vector(4)};
  EXPECT_THROW(score_candidates(feats, head, Mode::eval, 0), DimensionError);
  std::array<Vector, 4> wrong{Vector(5), Vector(5), Vector(5), Vector(5)};
  EXPECT_THROW(score_candidates(wrong, head, Mode::eval, 0), DimensionError);
}

TEST(QuestionLoss, UniformIsLnFour) {
  auto head = zero_head(3, 2, 0.0);
  CandidateScores s;
  s.probs = {0.25, 0.25, 0.25, 0.25};
  EXPECT_NEAR(question_loss(s, 2, head), std::log(4.0), 1e-15);
}

TEST(QuestionLoss, ConfidentCorrect) {
  auto head = zero_head(3, 2, 0.0);
  CandidateScores s;
  s.probs = {0.97, 0.01, 0.01, 0.01};
  EXPECT_NEAR(question_loss(s, 0, head), 0.0305, 5e-5);
  EXPECT_DOUBLE_EQ(question_loss(s, 0, head), -std::log(0.97));
}

TEST(QuestionLoss, ZeroWeightsContributeNoPenalty) {
  auto head = zero_head(3, 2, 0.5);
  CandidateScores s;
  s.probs = {0.25, 0.25, 0.25, 0.25};
  EXPECT_EQ(question_loss(s, 1, head), std::log(4.0));
}

TEST(QuestionLoss, PenaltyIsOutputWeightNorm) {
  auto head = zero_head(3, 2, 0.5);
  head.output.weight.value[0] = 2.0;
  head.output.weight.value[1] = -1.0;
  head.hidden.weight.value.fill(10.0);
  CandidateScores s;
  s.probs = {0.25, 0.25, 0.25, 0.25};
  EXPECT_DOUBLE_EQ(question_loss(s, 1, head), std::log(4.0) + 0.5 * 5.0);
  EXPECT_DOUBLE_EQ(question_loss(s, 1, head, 0.75), std::log(4.0) + 0.5 * 5.0 + 0.75);
}

TEST(Predict, Examples) {
  EXPECT_EQ(predict(std::array<double, 4>{0.1, 0.6, 0.2, 0.1}), 1);
  EXPECT_EQ(predict(std::array<double, 4>{0.25, 0.25, 0.25, 0.25}), 0);
  EXPECT_EQ(predict(std::array<double, 4>{0.3, 0.3, 0.2, 0.2}), 0);
  EXPECT_EQ(predict(std::array<double, 4>{0.1, 0.2, 0.35, 0.35}), 2);
}

TEST(Softmax, MonotoneInOneScore) {
  Rng rng(8);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int trial = 0; trial < 200; ++trial) {
    Vector raw(4);
    for (auto& r : raw) r = u(rng);
    const std::size_t k = trial % 4;
    Vector bumped = raw;
    bumped[k] += 0.01;
    auto p = softmax(raw);
    auto q = softmax(bumped);
    EXPECT_GT(q[k], p[k]);
    for (std::size_t j = 0; j < 4; ++j)
      if (j != k) EXPECT_LE(q[j], p[j]);
  }
}

TEST(ScoreCandidates, ArgmaxOfProbsIsArgmaxOfRaw) {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    auto head = HeadParams::init(5, 6, 0.0, 0.0, rng);
    auto s = score_candidates(random_features(5, rng), head, Mode::eval, 0);
    EXPECT_EQ(predict(s.probs), predict(s.raw));
  }
}

TEST(ScoreCandidates, GraphFormMatchesValueForm) {
  Rng rng(10);
  auto head = HeadParams::init(5, 6, 0.0, 0.3, rng);
  auto feats = random_features(5, rng);
  auto s = score_candidates(feats, head, Mode::eval, 0);
  Graph g(false);
  std::array<Var, 4> vars;
  for (std::size_t k = 0; k < 4; ++k) vars[k] = g.constant(feats[k]);
  auto sv = score_candidates(g, vars, head, Mode::eval, nullptr);
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(sv.probs[k], s.probs[k]);
    EXPECT_EQ(sv.raw[k], s.raw[k]);
  }
  Var loss = question_loss(g, sv, 3, head);
  EXPECT_DOUBLE_EQ(loss[0], question_loss(s, 3, head));
}

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "mcvqa/data.hpp"
#include "mcvqa/encoders.hpp"
#include "mcvqa/errors.hpp"

using namespace mcvqa;

namespace {

EmbeddingTable two_word_table() {
  return EmbeddingTable(2, {"a", "b"}, {{1.0, 0.0}, {0.0, 1.0}});
}

EmbeddingTable random_table(std::size_t n, std::size_t d, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::string> tokens;
  std::vector<Vector> rows;
  for (std::size_t i = 0; i < n; ++i) {
    tokens.push_back("t" + std::to_string(i));
    Vector v(d);
    for (auto& x : v) x = normal(rng);
    rows.push_back(v);
  }
  return EmbeddingTable(d, tokens, rows);
}

ImageGrid random_image(std::size_t g, std::size_t c, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(g * g * c);
  for (auto& x : v) x = u(rng);
  return ImageGrid(g, c, v);
}

LstmParams zero_lstm(std::size_t in, std::size_t h) {
  LstmParams p;
  p.input_weights = Parameter(Shape{4 * h, in});
  p.recurrent_weights = Parameter(Shape{4 * h, h});
  p.bias = Parameter(Shape{4 * h});
  p.hidden_size = h;
  return p;
}

TokenSequence seq(std::vector<TokenId> ids) { return TokenSequence{std::move(ids)}; }

std::vector<Vector> rows_of(const TokenSequence& s, const EmbeddingTable& t) {
  std::vector<Vector> out;
  for (TokenId id : s.tokens()) out.push_back(t.row(id).values());
  return out;
}

}  // namespace

TEST(EmbeddingTable, Layout) {
  auto t = EmbeddingTable(3, {"x", "y"}, {{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(t.vocab_size(), 4u);
  EXPECT_EQ(t.row(kPadId).values(), (Vector{0, 0, 0}));
  EXPECT_EQ(t.lookup("x"), 1);
  EXPECT_EQ(t.lookup("y"), 2);
  EXPECT_EQ(t.lookup("zebra"), t.oov_id());
  EXPECT_NE(t.oov_id(), kPadId);
  EXPECT_THROW(t.row(9), VocabularyError);
  EXPECT_THROW(EmbeddingTable(2, {"a", "a"}, {{1, 2}, {3, 4}}), DuplicateTokenError);
}

TEST(BowText, TwoVectorMean) {
  auto t = two_word_table();
  EXPECT_EQ(bow_text(seq({1, 2}), t), (Vector{0.5, 0.5}));
}

TEST(BowText, SingleTokenIsItsEmbedding) {
  auto t = two_word_table();
  EXPECT_EQ(bow_text(seq({2}), t), (Vector{0.0, 1.0}));
}

TEST(BowText, PadsExcluded) {
  auto t = two_word_table();
  EXPECT_EQ(bow_text(seq({0, 0, 1, 2}), t), bow_text(seq({1, 2}), t));
  EXPECT_EQ(bow_text(seq({0, 0}), t), (Vector{0.0, 0.0}));
}

TEST(BowText, UnknownIdIsVocabularyError) {
  auto t = two_word_table();
  EXPECT_THROW(bow_text(seq({1, 17}), t), VocabularyError);
  EXPECT_THROW(bow_text(seq({1, -3}), t), VocabularyError);
}

TEST(BowText, PadAfterTokenIsLengthError) {
  auto t = two_word_table();
  EXPECT_THROW(bow_text(seq({1, 0, 2}), t), LengthError);
}

TEST(BowText, PermutationInvariant) {
  Rng rng(5);
  auto t = random_table(20, 6, rng);
  std::uniform_int_distribution<TokenId> tok(1, 20);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<TokenId> ids(5);
    for (auto& id : ids) id = tok(rng);
    auto base = bow_text(seq(ids), t);
    std::sort(ids.begin(), ids.end());
    do {
      EXPECT_EQ(bow_text(seq(ids), t), base);
    } while (std::next_permutation(ids.begin(), ids.end()) && trial < 3);
    std::shuffle(ids.begin(), ids.end(), rng);
    EXPECT_EQ(bow_text(seq(ids), t), base);
  }
}

TEST(BagOfImages, ConstantGrid) {
  ImageGrid img(3, 2, std::vector<double>(18, 0.7));
  for (double v : bag_of_images(img)) EXPECT_DOUBLE_EQ(v, 0.7);
}

TEST(BagOfImages, TwoByTwoMean) {
  ImageGrid img(2, 1, {1, 2, 3, 4});
  EXPECT_EQ(bag_of_images(img), (Vector{2.5}));
}

TEST(BagOfImages, SingleHotCellNormalised) {
  std::vector<double> v(3 * 3 * 4, 0.0);
  v[5 * 4 + 2] = 9.0;
  auto bag = bag_of_images(ImageGrid(3, 4, v));
  EXPECT_EQ(bag, (Vector{0, 0, 1, 0}));
}

TEST(Bilstm, LengthOneIsForwardAndBackwardStep) {
  Rng rng(2);
  auto fwd = LstmParams::init(3, 4, rng);
  auto bwd = LstmParams::init(3, 4, rng);
  Vector x{0.3, -0.1, 0.8};
  Vector zero(4, 0.0);
  auto f = lstm_step(fwd, x, zero, zero);
  auto b = lstm_step(bwd, x, zero, zero);
  std::vector<Vector> steps{x};
  bool mask[1] = {true};
  auto out = bilstm_encode(steps, mask, fwd, bwd);
  Vector expected = f.h;
  expected.insert(expected.end(), b.h.begin(), b.h.end());
  EXPECT_EQ(out, expected);
}

TEST(Bilstm, MaskedStepsLeaveOutputBitIdentical) {
  Rng rng(3);
  auto fwd = LstmParams::init(2, 3, rng);
  auto bwd = LstmParams::init(2, 3, rng);
  std::vector<Vector> steps{{9, 9}, {9, 9}, {0.1, 0.2}, {-0.5, 0.4}};
  bool mask[4] = {false, false, true, true};
  std::vector<Vector> real{{0.1, 0.2}, {-0.5, 0.4}};
  bool all[2] = {true, true};
  EXPECT_EQ(bilstm_encode(steps, mask, fwd, bwd), bilstm_encode(real, all, fwd, bwd));
}

TEST(Bilstm, ZeroParamsZeroOutput) {
  auto p = zero_lstm(3, 2);
  std::vector<Vector> steps{{1, 2, 3}, {4, 5, 6}};
  bool mask[2] = {true, true};
  EXPECT_EQ(bilstm_encode(steps, mask, p, p), (Vector{0, 0, 0, 0}));
}

TEST(Bilstm, AllPadIsEmptySequenceError) {
  Rng rng(3);
  auto p = LstmParams::init(2, 3, rng);
  std::vector<Vector> steps{{1, 2}};
  bool mask[1] = {false};
  EXPECT_THROW(bilstm_encode(steps, mask, p, p), EmptySequenceError);
}

TEST(Bilstm, ReversalSymmetry) {
  Rng rng(13);
  auto fwd = LstmParams::init(3, 4, rng);
  auto bwd = LstmParams::init(3, 4, rng);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vector> steps(1 + trial % 6, Vector(3));
    for (auto& s : steps)
      for (auto& x : s) x = normal(rng);
    std::vector<Vector> reversed(steps.rbegin(), steps.rend());
    std::unique_ptr<bool[]> mask(new bool[steps.size()]);
    std::fill(mask.get(), mask.get() + steps.size(), true);
    std::span<const bool> ms(mask.get(), steps.size());
    auto a = bilstm_encode(steps, ms, fwd, bwd);
    auto b = bilstm_encode(reversed, ms, bwd, fwd);
    Vector swapped(b.begin() + 4, b.end());
    swapped.insert(swapped.end(), b.begin(), b.begin() + 4);
    EXPECT_EQ(a, swapped);
  }
}

TEST(Context, ZeroImageEqualsZeroExtendedQuestion) {
  Rng rng(21);
  auto table = random_table(8, 4, rng);
  const std::size_t c = 3;
  auto fwd = LstmParams::init(4 + c, 5, rng);
  auto bwd = LstmParams::init(4 + c, 5, rng);
  auto q = seq({0, 3, 1, 7});
  ImageGrid zero_img(2, c, std::vector<double>(12, 0.0));
  std::vector<Vector> steps;
  for (auto v : rows_of(q, table)) {
    v.resize(4 + c, 0.0);
    steps.push_back(v);
  }
  bool mask[3] = {true, true, true};
  EXPECT_EQ(context_encode(q, table, zero_img, fwd, bwd), bilstm_encode(steps, mask, fwd, bwd));
}

TEST(Context, ZeroParamsZeroContext) {
  Rng rng(21);
  auto table = random_table(8, 4, rng);
  auto p = zero_lstm(4 + 3, 5);
  auto img = random_image(2, 3, rng);
  EXPECT_EQ(context_encode(seq({2, 5}), table, img, p, p), Vector(10, 0.0));
}

TEST(Context, DifferentImagesGiveDifferentContext) {
  Rng rng(22);
  auto table = random_table(8, 4, rng);
  auto fwd = LstmParams::init(4 + 3, 5, rng);
  auto bwd = LstmParams::init(4 + 3, 5, rng);
  auto q = seq({2, 5, 1});
  auto a = context_encode(q, table, random_image(2, 3, rng), fwd, bwd);
  auto b = context_encode(q, table, random_image(2, 3, rng), fwd, bwd);
  EXPECT_EQ(a.size(), 10u);
  EXPECT_NE(a, b);
}

TEST(Attend, ZeroScorerIsBagOfImages) {
  Rng rng(4);
  auto img = random_image(3, 5, rng);
  auto scorer = AttentionScorer::init(5, 4, 6, rng);
  for (auto* p : {&scorer.first.weight, &scorer.first.bias, &scorer.second.weight, &scorer.second.bias})
    p->value.fill(0.0);
  EXPECT_EQ(attend(img, std::vector<double>{1, 2, 3, 4}, scorer), bag_of_images(img));
}

TEST(Attend, ConstantScorerOutputIsBagOfImages) {
  Rng rng(4);
  auto img = random_image(3, 5, rng);
  auto scorer = AttentionScorer::init(5, 4, 6, rng);
  scorer.second.weight.value.fill(0.0);
  scorer.second.bias.value.fill(0.37);
  EXPECT_EQ(attend(img, std::vector<double>{1, 2, 3, 4}, scorer), bag_of_images(img));
}

TEST(Attend, IdenticalPositionsGiveThatVector) {
  Rng rng(4);
  Vector cell{0.25, -0.5, 0.125};
  std::vector<double> v;
  for (int j = 0; j < 4; ++j) v.insert(v.end(), cell.begin(), cell.end());
  auto scorer = AttentionScorer::init(3, 2, 5, rng);
  EXPECT_EQ(attend(ImageGrid(2, 3, v), std::vector<double>{0.3, 0.9}, scorer), cell);
}

TEST(Attend, TwoPositionsHandSetScores) {
  // Positions I1=(1,0), I2=(0,1). The scorer's hidden unit is relu(I_j[0]),
  // so the scores are (tanh(a), 0). tanh caps scores below 1, so ln 3 is out
  // of reach; a = atanh(ln 2) gives weights (2/3, 1/3).
  AttentionScorer scorer;
  scorer.first.weight = Parameter(Tensor::matrix(1, 3, {1, 0, 0}));
  scorer.first.bias = Parameter(Tensor::vector({0}));
  scorer.first.activation = Activation::relu;
  scorer.second.weight = Parameter(Tensor::matrix(1, 1, {std::atanh(std::log(2.0))}));
  scorer.second.bias = Parameter(Tensor::vector({0}));
  scorer.second.activation = Activation::tanh;
  Graph g(false);
  Var grid = g.constant(Tensor::matrix(2, 2, {1, 0, 0, 1}));
  Var out = attend(g, grid, g.constant(std::vector<double>{0.0}), scorer);
  EXPECT_NEAR(out[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(out[1], 1.0 / 3.0, 1e-15);

  // Scores (ln 3, 0) through the same pooling give (0.75, 0.25).
  Var w = softmax(g.constant(std::vector<double>{std::log(3.0), 0.0}));
  Var pooled = matvec_t(grid, w);
  EXPECT_NEAR(pooled[0], 0.75, 1e-15);
  EXPECT_NEAR(pooled[1], 0.25, 1e-15);
}

TEST(Attend, ConvexHullPerChannel) {
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    auto img = random_image(3, 4, rng);
    auto scorer = AttentionScorer::init(4, 3, 6, rng);
    Vector word{std::normal_distribution<double>()(rng), 0.5, -2.0};
    auto out = attend(img, word, scorer);
    for (std::size_t k = 0; k < 4; ++k) {
      double lo = 1e9, hi = -1e9;
      for (std::size_t j = 0; j < img.positions(); ++j) {
        lo = std::min(lo, img.position(j)[k]);
        hi = std::max(hi, img.position(j)[k]);
      }
      EXPECT_GE(out[k], lo);
      EXPECT_LE(out[k], hi);
    }
  }
}

TEST(Attend, ShapeMismatch) {
  Rng rng(4);
  auto img = random_image(2, 5, rng);
  auto scorer = AttentionScorer::init(4, 3, 6, rng);
  EXPECT_THROW(attend(img, std::vector<double>{1, 2, 3}, scorer), DimensionError);
}

TEST(AttendedSequence, ZeroScorerMatchesContextInput) {
  Rng rng(6);
  auto table = random_table(6, 3, rng);
  auto img = random_image(2, 4, rng);
  auto scorer = AttentionScorer::init(4, 3, 5, rng);
  for (auto* p : {&scorer.first.weight, &scorer.first.bias, &scorer.second.weight, &scorer.second.bias})
    p->value.fill(0.0);
  auto q = seq({0, 0, 4, 2, 6});
  auto out = attended_question_sequence(q, table, img, scorer);
  ASSERT_EQ(out.size(), 3u);
  auto bag = bag_of_images(img);
  auto rows = rows_of(q, table);
  for (std::size_t t = 0; t < 3; ++t) {
    Vector expected = rows[t];
    expected.insert(expected.end(), bag.begin(), bag.end());
    EXPECT_EQ(out[t], expected);
  }
}

TEST(AttendedSequence, OneWordOnePair) {
  Rng rng(6);
  auto table = random_table(6, 3, rng);
  auto img = random_image(2, 4, rng);
  auto scorer = AttentionScorer::init(4, 3, 5, rng);
  auto out = attended_question_sequence(seq({0, 0, 5}), table, img, scorer);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].size(), 7u);
}

TEST(AttendedSequence, PadLengthIrrelevant) {
  Rng rng(6);
  auto table = random_table(6, 3, rng);
  auto img = random_image(2, 4, rng);
  auto scorer = AttentionScorer::init(4, 3, 5, rng);
  auto a = attended_question_sequence(seq({4, 2}), table, img, scorer);
  auto b = attended_question_sequence(seq({0, 0, 0, 0, 0, 4, 2}), table, img, scorer);
  EXPECT_EQ(a, b);
}

TEST(PadAndMask, PrefixPadding) {
  std::vector<std::vector<TokenId>> batch{{5, 6}, {1, 2, 3, 4}};
  auto p = pad_and_mask(batch, 4);
  EXPECT_EQ(p.sequences[0].ids, (std::vector<TokenId>{0, 0, 5, 6}));
  EXPECT_EQ(p.mask[0], (std::vector<bool>{false, false, true, true}));
  EXPECT_EQ(p.sequences[1].ids, (std::vector<TokenId>{1, 2, 3, 4}));
  EXPECT_EQ(p.mask[1], (std::vector<bool>{true, true, true, true}));
  std::vector<std::vector<TokenId>> too_long{{1, 2, 3, 4, 5}};
  EXPECT_THROW(pad_and_mask(too_long, 4), LengthError);
}

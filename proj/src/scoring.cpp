#include "mcvqa/scoring.hpp"

#include <vector>

#include "mcvqa/errors.hpp"

namespace mcvqa {

HeadParams HeadParams::init(std::size_t features, std::size_t hidden_units, double dropout, double l2, Rng& rng) {
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("head dropout must lie in [0, 1)");
  if (l2 < 0.0) throw ConfigError("l2 coefficient must be non-negative");
  HeadParams h;
  h.dropout = dropout;
  h.hidden = DenseParams::init(features, hidden_units, Activation::relu, rng);
  h.output = DenseParams::init(hidden_units, 1, Activation::sigmoid, rng);
  h.l2 = l2;
  return h;
}

ScoreVars score_candidates(Graph& g, std::span<const Var, kNumCandidates> features, const HeadParams& head, Mode mode,
                           Rng* rng) {
  if (head.output.out_dim() != 1) throw DimensionError("head output layer must have exactly one unit");
  const std::size_t f = features[0].size();
  std::array<Var, kNumCandidates> raw;
  for (std::size_t k = 0; k < kNumCandidates; ++k) {
    if (features[k].size() != f) throw DimensionError("candidate feature vectors differ in length");
    Var x = features[k];
    if (mode == Mode::train && head.dropout > 0.0) {
      if (rng == nullptr) throw ConfigError("train-mode scoring needs a random stream for dropout");
      x = mul_const(x, dropout_mask(f, head.dropout, *rng));
    }
    raw[k] = dense(g, head.output, dense(g, head.hidden, x));
  }
  Var r = concat(raw);
  return {r, softmax(r)};
}

Var question_loss(Graph& g, const ScoreVars& scores, OptionIndex label, const HeadParams& head,
                  std::span<const Var> extra_penalties) {
  if (label >= kNumCandidates) throw DimensionError("label must be one of 0..3");
  std::vector<Var> terms{neg_log_at(scores.probs, label, kLogFloor)};
  if (head.l2 > 0.0) terms.push_back(scale(sum_squares(g.parameter(head.output.weight)), head.l2));
  terms.insert(terms.end(), extra_penalties.begin(), extra_penalties.end());
  return terms.size() == 1 ? terms[0] : sum(terms);
}

CandidateScores score_candidates(std::span<const Vector, kNumCandidates> features, const HeadParams& head, Mode mode,
                                 std::uint64_t seed) {
  Graph g(false);
  Rng rng(seed);
  std::array<Var, kNumCandidates> vars;
  for (std::size_t k = 0; k < kNumCandidates; ++k) vars[k] = g.constant(features[k]);
  auto s = score_candidates(g, vars, head, mode, &rng);
  CandidateScores out;
  for (std::size_t k = 0; k < kNumCandidates; ++k) {
    out.raw[k] = s.raw[k];
    out.probs[k] = s.probs[k];
  }
  return out;
}

double question_loss(const CandidateScores& scores, OptionIndex label, const HeadParams& head, double extra_penalty) {
  if (label >= kNumCandidates) throw DimensionError("label must be one of 0..3");
  double l2 = 0.0;
  for (double w : head.output.weight.value.values()) l2 += w * w;
  return categorical_cross_entropy(scores.probs, label) + head.l2 * l2 + extra_penalty;
}

OptionIndex predict(std::span<const double> probs) {
  if (probs.empty()) throw DimensionError("predict on empty scores");
  std::size_t best = 0;
  for (std::size_t k = 1; k < probs.size(); ++k)
    if (probs[k] > probs[best]) best = k;
  return static_cast<OptionIndex>(best);
}

}  // namespace mcvqa

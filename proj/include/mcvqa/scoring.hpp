#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "mcvqa/graph.hpp"
#include "mcvqa/numerics.hpp"

namespace mcvqa {

inline constexpr std::size_t kNumCandidates = 4;
using OptionIndex = std::uint8_t;

enum class Mode { train, eval };

/// Shared answer-scoring head: dropout → dense(relu) → dense(1, sigmoid).
struct HeadParams {
  double dropout = 0.0;
  DenseParams hidden;
  DenseParams output;
  /// Coefficient of the squared norm of the output weights.
  double l2 = 0.0;

  static HeadParams init(std::size_t features, std::size_t hidden_units, double dropout, double l2, Rng& rng);
  std::size_t feature_dim() const { return hidden.in_dim(); }
};

struct CandidateScores {
  std::array<double, kNumCandidates> raw{};
  std::array<double, kNumCandidates> probs{};
};

struct ScoreVars {
  Var raw;    // [4] sigmoid scores
  Var probs;  // [4] softmax of raw
};

/// Applies the same head to each candidate's features. In train mode one
/// dropout mask per candidate is drawn from `rng` (which must then be non-null).
ScoreVars score_candidates(Graph& g, std::span<const Var, kNumCandidates> features, const HeadParams& head, Mode mode,
                           Rng* rng);

/// Cross-entropy of the probabilities against `label` plus the head's L2 term
/// and any `extra_penalties` (one-element vars).
Var question_loss(Graph& g, const ScoreVars& scores, OptionIndex label, const HeadParams& head,
                  std::span<const Var> extra_penalties = {});

CandidateScores score_candidates(std::span<const Vector, kNumCandidates> features, const HeadParams& head, Mode mode,
                                 std::uint64_t seed);
double question_loss(const CandidateScores& scores, OptionIndex label, const HeadParams& head,
                     double extra_penalty = 0.0);

/// Index of the largest probability, ties resolved to the lowest index.
OptionIndex predict(std::span<const double> probs);
inline OptionIndex predict(const CandidateScores& s) { return predict(s.probs); }

}  // namespace mcvqa

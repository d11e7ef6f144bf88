#pragma once

#include <cstdint>

#include "mcvqa/model.hpp"

namespace mcvqa {

/// Small random vocabulary, image and sample for gradient checks and
/// invariance tests: d=8, c=6, g=3.
struct ToyProblem {
  ModelDims dims{8, 6, 3};
  EmbeddingTable table;
  ImagePtr image;
};

ToyProblem make_toy_problem(std::uint64_t seed);

/// Random sample over the toy vocabulary. Question and answers are 1..max_len
/// real tokens, occasionally including an out-of-vocabulary id, padded to
/// `pad_to` (0 leaves them unpadded).
QaSample make_toy_sample(const ToyProblem& toy, Rng& rng, std::size_t max_len = 4, std::size_t pad_to = 0);

/// `kind` at the toy sizes: h=5, hidden=7, with small non-zero L2 terms so
/// the check also covers the penalties.
ModelVariant toy_variant(ModelKind kind);

}  // namespace mcvqa

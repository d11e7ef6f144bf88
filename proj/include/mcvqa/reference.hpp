#pragma once

#include "mcvqa/model.hpp"

namespace mcvqa {

/// Eval-mode loss of `model` on one sample, recomputed with plain loops in
/// long double. Shares no code with the autodiff forward pass.
long double reference_loss(const Model& model, const QaSample& sample, const EmbeddingTable& table);

}  // namespace mcvqa

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "mcvqa/data.hpp"
#include "mcvqa/model.hpp"

namespace mcvqa {

/// Grid-world colour questions.
///
/// Each image is a g×g grid of coloured cells. The first `colors` channels
/// one-hot encode the cell colour; the next 2·ceil(log2 g) channels hold the
/// row and column index in ±1 binary code, the rest are zero. Two templates:
///  - "what color is most common": the colour with a strict majority of cells
///    (solvable from the spatial mean);
///  - "what color is at rRcX": the colour of one cell. Such images use every
///    colour equally often, so their spatial mean is the same for every
///    image and carries no information about the answer.
struct SyntheticTaskSpec {
  std::size_t grid = 4;
  std::size_t channels = 8;
  std::size_t colors = 4;
  std::size_t embed_dim = 16;
  /// Fraction of cell-colour questions; the rest ask for the majority colour.
  double cell_fraction = 0.5;
  std::size_t train = 4000;
  std::size_t val = 1000;
  std::size_t test = 1000;
  std::uint64_t seed = 1;

  /// Throws ConfigError for an inconsistent spec.
  void validate() const;
};

struct SyntheticDataset {
  SyntheticTaskSpec spec;
  EmbeddingTable table;
  ImageFeatureMap images;
  DatasetSplit train;
  DatasetSplit val;
  DatasetSplit test;
};

SyntheticDataset generate_synthetic(const SyntheticTaskSpec& spec);

/// The correct colour for a synthetic sample, computed from its image and
/// question alone (never from the stored label).
std::string synthetic_oracle(const QaSample& sample, const EmbeddingTable& table, const SyntheticTaskSpec& spec);

const std::vector<std::string>& synthetic_color_names();

/// Writes train.tsv, val.tsv, test.tsv, embeddings.txt and images.bin.
void write_synthetic(const std::filesystem::path& dir, const SyntheticDataset& data);

/// Desk-scale hyperparameters for the synthetic task: narrow encoders and
/// head, no dropout, a 60-iteration budget.
ModelVariant synthetic_variant(ModelKind kind);

/// Flat key=value file with the SyntheticTaskSpec field names as keys.
SyntheticTaskSpec load_synthetic_spec(const std::filesystem::path& path);

}  // namespace mcvqa

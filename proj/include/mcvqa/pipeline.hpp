#pragma once

#include <filesystem>

#include "mcvqa/data.hpp"
#include "mcvqa/model.hpp"

namespace mcvqa {

/// A data directory as written by write_synthetic: embeddings.txt,
/// images.bin and one <split>.tsv per split.
struct DataDirectory {
  std::filesystem::path root;
  EmbeddingTable table;
  ImageFeatureMap images;
  ModelDims dims;

  /// Loads the embeddings and image features; throws LoadError or ParseError.
  static DataDirectory open(const std::filesystem::path& root);
  DatasetSplit split(SplitName name, std::size_t max_length = kDefaultMaxLength) const;
};

std::optional<SplitName> parse_split_name(std::string_view s);

}  // namespace mcvqa

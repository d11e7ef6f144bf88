#include "mcvqa/pipeline.hpp"

#include "mcvqa/errors.hpp"

namespace mcvqa {

DataDirectory DataDirectory::open(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root)) throw LoadError("data directory " + root.string() + " does not exist");
  DataDirectory d;
  d.root = root;
  d.table = load_embeddings(root / "embeddings.txt");
  d.images = load_image_features(root / "images.bin");
  if (d.images.empty()) throw LoadError(root.string() + "/images.bin holds no images");
  const ImageGrid& first = *d.images.begin()->second;
  d.dims = ModelDims{d.table.dim(), first.channels(), first.grid()};
  for (const auto& [ref, img] : d.images) {
    if (img->grid() != d.dims.grid || img->channels() != d.dims.channels) {
      throw DimensionError("image '" + ref + "' has shape " + shape_string(img->features.shape()) +
                           ", others are " + shape_string(first.features.shape()));
    }
  }
  return d;
}

DatasetSplit DataDirectory::split(SplitName name, std::size_t max_length) const {
  return load_dataset(root / (std::string(split_name(name)) + ".tsv"), name, table, images, max_length);
}

std::optional<SplitName> parse_split_name(std::string_view s) {
  for (auto n : {SplitName::train, SplitName::val, SplitName::test})
    if (s == split_name(n)) return n;
  return std::nullopt;
}

}  // namespace mcvqa

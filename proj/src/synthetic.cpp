#include "mcvqa/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mcvqa/config.hpp"
#include "mcvqa/errors.hpp"

namespace mcvqa {

namespace {

std::size_t position_bits(std::size_t grid) {
  std::size_t bits = 0;
  while ((std::size_t{1} << bits) < grid) ++bits;
  return bits;
}

std::string cell_token(std::size_t r, std::size_t x) { return "r" + std::to_string(r) + "c" + std::to_string(x); }

std::vector<std::string> vocabulary(const SyntheticTaskSpec& spec) {
  std::vector<std::string> v{"what", "color", "is", "at", "most", "common"};
  for (std::size_t k = 0; k < spec.colors; ++k) v.push_back(synthetic_color_names()[k]);
  for (std::size_t r = 0; r < spec.grid; ++r)
    for (std::size_t x = 0; x < spec.grid; ++x) v.push_back(cell_token(r, x));
  return v;
}

// Per-cell colour indices → feature grid.
ImageGrid render(const std::vector<std::size_t>& cells, const SyntheticTaskSpec& spec) {
  const std::size_t g = spec.grid;
  const std::size_t c = spec.channels;
  const std::size_t bits = position_bits(g);
  std::vector<double> values(g * g * c, 0.0);
  for (std::size_t r = 0; r < g; ++r) {
    for (std::size_t x = 0; x < g; ++x) {
      double* v = values.data() + (r * g + x) * c;
      v[cells[r * g + x]] = 1.0;
      for (std::size_t b = 0; b < bits; ++b) {
        v[spec.colors + b] = ((r >> b) & 1U) ? 1.0 : -1.0;
        v[spec.colors + bits + b] = ((x >> b) & 1U) ? 1.0 : -1.0;
      }
    }
  }
  return ImageGrid(g, c, std::move(values));
}

std::size_t uniform_index(std::size_t n, Rng& rng) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

std::vector<std::size_t> balanced_cells(const SyntheticTaskSpec& spec, Rng& rng) {
  const std::size_t n = spec.grid * spec.grid;
  std::vector<std::size_t> cells(n);
  for (std::size_t j = 0; j < n; ++j) cells[j] = j % spec.colors;
  std::shuffle(cells.begin(), cells.end(), rng);
  return cells;
}

std::vector<std::size_t> majority_cells(const SyntheticTaskSpec& spec, std::size_t majority, Rng& rng) {
  const std::size_t n = spec.grid * spec.grid;
  const std::size_t others = spec.colors - 1;
  // Smallest count that can still beat every other colour.
  std::size_t k_min = 1;
  while (others * (k_min - 1) < n - k_min) ++k_min;
  const std::size_t k_max = std::max(k_min, n / 2 + 1);
  const std::size_t k = k_min + uniform_index(k_max - k_min + 1, rng);
  std::vector<std::size_t> counts(spec.colors, 0);
  counts[majority] = k;
  for (std::size_t rest = n - k; rest > 0; --rest) {
    std::vector<std::size_t> open;
    for (std::size_t col = 0; col < spec.colors; ++col)
      if (col != majority && counts[col] + 1 < k) open.push_back(col);
    counts[open[uniform_index(open.size(), rng)]] += 1;
  }
  std::vector<std::size_t> cells;
  for (std::size_t col = 0; col < spec.colors; ++col) cells.insert(cells.end(), counts[col], col);
  std::shuffle(cells.begin(), cells.end(), rng);
  return cells;
}

DatasetSplit generate_split(SplitName name, std::size_t count, const SyntheticTaskSpec& spec,
                            const EmbeddingTable& table, ImageFeatureMap& images, Rng& rng) {
  const auto& colors = synthetic_color_names();
  const auto n_cell = static_cast<std::size_t>(std::llround(spec.cell_fraction * static_cast<double>(count)));
  std::vector<bool> is_cell(count, false);
  std::fill(is_cell.begin(), is_cell.begin() + static_cast<std::ptrdiff_t>(n_cell), true);
  std::shuffle(is_cell.begin(), is_cell.end(), rng);

  auto encode = [&](const std::vector<std::string>& words) {
    return pad_sequence(table.encode(words), kDefaultMaxLength);
  };

  DatasetSplit split{name, {}};
  for (std::size_t i = 0; i < count; ++i) {
    QaSample s;
    s.id = std::string(split_name(name)) + "-" + std::to_string(i);
    s.image_ref = std::string(split_name(name)) + "-img-" + std::to_string(i);
    std::size_t answer = 0;
    std::vector<std::size_t> cells;
    if (is_cell[i]) {
      cells = balanced_cells(spec, rng);
      const std::size_t r = uniform_index(spec.grid, rng);
      const std::size_t x = uniform_index(spec.grid, rng);
      answer = cells[r * spec.grid + x];
      s.question = encode({"what", "color", "is", "at", cell_token(r, x)});
      s.qtype = QuestionType::where;
    } else {
      answer = uniform_index(spec.colors, rng);
      cells = majority_cells(spec, answer, rng);
      s.question = encode({"what", "color", "is", "most", "common"});
      s.qtype = QuestionType::what;
    }
    std::vector<std::size_t> wrong;
    for (std::size_t col = 0; col < spec.colors; ++col)
      if (col != answer) wrong.push_back(col);
    std::shuffle(wrong.begin(), wrong.end(), rng);
    s.label = static_cast<OptionIndex>(uniform_index(kNumCandidates, rng));
    for (std::size_t k = 0, w = 0; k < kNumCandidates; ++k) {
      const std::size_t col = (k == s.label) ? answer : wrong[w++];
      s.answers[k] = encode({colors[col]});
    }
    auto img = std::make_shared<const ImageGrid>(render(cells, spec));
    images.emplace(s.image_ref, img);
    s.image = std::move(img);
    split.samples.push_back(std::move(s));
  }
  return split;
}

}  // namespace

const std::vector<std::string>& synthetic_color_names() {
  static const std::vector<std::string> names{"red",    "green", "blue",  "yellow", "purple", "orange",
                                              "white",  "black", "brown", "pink",   "gray",   "cyan"};
  return names;
}

void SyntheticTaskSpec::validate() const {
  if (colors < 4) throw ConfigError("synthetic task needs at least 4 colours, got " + std::to_string(colors));
  if (colors > synthetic_color_names().size()) {
    throw ConfigError("synthetic task supports at most " + std::to_string(synthetic_color_names().size()) +
                      " colours");
  }
  if (grid < 2) throw ConfigError("synthetic grid must be at least 2x2");
  const std::size_t needed = colors + 2 * position_bits(grid);
  if (channels < needed) {
    throw ConfigError("synthetic task with " + std::to_string(colors) + " colours on a " + std::to_string(grid) +
                      "x" + std::to_string(grid) + " grid needs at least " + std::to_string(needed) + " channels");
  }
  if (!(cell_fraction >= 0.0 && cell_fraction <= 1.0)) throw ConfigError("cell_fraction must lie in [0, 1]");
  if (cell_fraction > 0.0 && (grid * grid) % colors != 0) {
    throw ConfigError("cell-colour questions need the colour count to divide the number of cells");
  }
  if (embed_dim == 0) throw ConfigError("embed_dim must be positive");
}

SyntheticDataset generate_synthetic(const SyntheticTaskSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  SyntheticDataset out;
  out.spec = spec;
  auto vocab = vocabulary(spec);
  std::normal_distribution<double> normal(0.0, 0.5);
  std::vector<Vector> vectors;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    Vector v(spec.embed_dim);
    for (auto& x : v) x = normal(rng);
    vectors.push_back(std::move(v));
  }
  // Cell tokens carry their coordinates in the same ±1 code as the image.
  const std::size_t bits = position_bits(spec.grid);
  const std::size_t first_cell = vocab.size() - spec.grid * spec.grid;
  for (std::size_t r = 0; r < spec.grid; ++r) {
    for (std::size_t x = 0; x < spec.grid; ++x) {
      Vector& v = vectors[first_cell + r * spec.grid + x];
      for (std::size_t b = 0; b < bits && 2 * bits <= spec.embed_dim; ++b) {
        v[b] = ((r >> b) & 1U) ? 1.0 : -1.0;
        v[bits + b] = ((x >> b) & 1U) ? 1.0 : -1.0;
      }
    }
  }
  out.table = EmbeddingTable(spec.embed_dim, std::move(vocab), vectors);
  out.train = generate_split(SplitName::train, spec.train, spec, out.table, out.images, rng);
  out.val = generate_split(SplitName::val, spec.val, spec, out.table, out.images, rng);
  out.test = generate_split(SplitName::test, spec.test, spec, out.table, out.images, rng);
  return out;
}

std::string synthetic_oracle(const QaSample& sample, const EmbeddingTable& table, const SyntheticTaskSpec& spec) {
  const ImageGrid& img = *sample.image;
  auto cell_color = [&](std::size_t j) {
    auto v = img.position(j);
    return static_cast<std::size_t>(std::max_element(v.begin(), v.begin() + spec.colors) - v.begin());
  };
  for (TokenId id : sample.question.tokens()) {
    const std::string& tok = table.token(id);
    for (std::size_t r = 0; r < spec.grid; ++r)
      for (std::size_t x = 0; x < spec.grid; ++x)
        if (tok == cell_token(r, x)) return synthetic_color_names()[cell_color(r * spec.grid + x)];
  }
  std::vector<std::size_t> counts(spec.colors, 0);
  for (std::size_t j = 0; j < img.positions(); ++j) counts[cell_color(j)] += 1;
  const auto best = std::max_element(counts.begin(), counts.end()) - counts.begin();
  return synthetic_color_names()[static_cast<std::size_t>(best)];
}

void write_synthetic(const std::filesystem::path& dir, const SyntheticDataset& data) {
  std::filesystem::create_directories(dir);
  write_dataset(dir / "train.tsv", data.train, data.table);
  write_dataset(dir / "val.tsv", data.val, data.table);
  write_dataset(dir / "test.tsv", data.test, data.table);
  write_embeddings(dir / "embeddings.txt", data.table);
  write_image_features(dir / "images.bin", data.images);
}

ModelVariant synthetic_variant(ModelKind kind) {
  ModelVariant v = ModelVariant::defaults(kind);
  v.lstm_hidden = 32;
  v.context_hidden = 32;
  v.image_dense = 16;
  v.attention_hidden = 16;
  v.head_hidden = 64;
  v.feature_dropout = 0.0;
  v.encoder_dropout = 0.0;
  v.learning_rate = 3e-3;
  v.batch_size = 32;
  v.max_iterations = 60;
  return v;
}

SyntheticTaskSpec load_synthetic_spec(const std::filesystem::path& path) {
  auto cfg = KeyValueConfig::load(path);
  SyntheticTaskSpec s;
  cfg.read("grid", s.grid);
  cfg.read("channels", s.channels);
  cfg.read("colors", s.colors);
  cfg.read("embed_dim", s.embed_dim);
  cfg.read("cell_fraction", s.cell_fraction);
  cfg.read("train", s.train);
  cfg.read("val", s.val);
  cfg.read("test", s.test);
  cfg.read("seed", s.seed);
  cfg.reject_unknown();
  s.validate();
  return s;
}

}  // namespace mcvqa

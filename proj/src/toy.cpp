#include "mcvqa/toy.hpp"

#include <random>

namespace mcvqa {

ToyProblem make_toy_problem(std::uint64_t seed) {
  Rng rng(seed);
  ToyProblem toy;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::string> tokens;
  std::vector<Vector> vectors;
  for (int i = 0; i < 12; ++i) {
    tokens.push_back("w" + std::to_string(i));
    Vector v(toy.dims.embed_dim);
    for (auto& x : v) x = normal(rng);
    vectors.push_back(std::move(v));
  }
  toy.table = EmbeddingTable(toy.dims.embed_dim, std::move(tokens), vectors);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<double> feats(toy.dims.grid * toy.dims.grid * toy.dims.channels);
  for (auto& x : feats) x = unit(rng);
  toy.image = std::make_shared<const ImageGrid>(toy.dims.grid, toy.dims.channels, std::move(feats));
  return toy;
}

QaSample make_toy_sample(const ToyProblem& toy, Rng& rng, std::size_t max_len, std::size_t pad_to) {
  std::uniform_int_distribution<TokenId> token(1, toy.table.oov_id());
  std::uniform_int_distribution<std::size_t> length(1, max_len);
  auto sequence = [&] {
    std::vector<TokenId> ids(length(rng));
    for (auto& id : ids) id = token(rng);
    return pad_sequence(ids, std::max(pad_to, ids.size()));
  };
  QaSample s;
  s.id = "toy";
  s.image_ref = "toy";
  s.image = toy.image;
  s.question = sequence();
  for (auto& a : s.answers) a = sequence();
  s.label = static_cast<OptionIndex>(std::uniform_int_distribution<int>(0, kNumCandidates - 1)(rng));
  return s;
}

ModelVariant toy_variant(ModelKind kind) {
  ModelVariant v = ModelVariant::defaults(kind);
  v.lstm_hidden = 5;
  v.context_hidden = 5;
  v.image_dense = 7;
  v.attention_hidden = 7;
  v.head_hidden = 7;
  v.l2 = 1e-2;
  v.encoder_l2 = 1e-2;
  return v;
}

}  // namespace mcvqa

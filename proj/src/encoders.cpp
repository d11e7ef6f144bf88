#include "mcvqa/encoders.hpp"

#include <algorithm>
#include <cstring>

#include "mcvqa/errors.hpp"

namespace mcvqa {

std::size_t TokenSequence::pad_length() const {
  std::size_t n = 0;
  while (n < ids.size() && ids[n] == kPadId) ++n;
  return n;
}

void validate_padding(const TokenSequence& seq) {
  const auto rest = seq.tokens();
  if (std::find(rest.begin(), rest.end(), kPadId) != rest.end()) {
    throw LengthError("pad id appears after the first real token");
  }
}

EmbeddingTable::EmbeddingTable(std::size_t dim, std::vector<std::string> tokens, const std::vector<Vector>& vectors)
    : dim_(dim) {
  if (dim == 0) throw DimensionError("embedding dimension must be positive");
  require_size(vectors.size(), tokens.size(), "embedding rows");
  tokens_.reserve(tokens.size() + 2);
  rows_.reserve(tokens.size() + 2);
  tokens_.emplace_back();
  rows_.emplace_back(Shape{dim});
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    require_size(vectors[i].size(), dim, "embedding vector");
    const auto id = static_cast<TokenId>(rows_.size());
    if (!index_.emplace(tokens[i], id).second) throw DuplicateTokenError("duplicate embedding token '" + tokens[i] + "'");
    tokens_.push_back(std::move(tokens[i]));
    rows_.push_back(Tensor::vector(vectors[i]));
  }
  tokens_.emplace_back();
  rows_.emplace_back(Shape{dim});
}

TokenId EmbeddingTable::lookup(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? oov_id() : it->second;
}

const std::string& EmbeddingTable::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw VocabularyError("token id " + std::to_string(id) + " outside vocabulary of size " +
                          std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

const Tensor& EmbeddingTable::row(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= rows_.size()) {
    throw VocabularyError("token id " + std::to_string(id) + " outside vocabulary of size " +
                          std::to_string(rows_.size()));
  }
  return rows_[static_cast<std::size_t>(id)];
}

std::uint64_t EmbeddingTable::fingerprint() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ULL;
    }
  };
  const std::uint64_t d = dim_;
  mix(&d, sizeof d);
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    mix(tokens_[i].data(), tokens_[i].size());
    mix("\n", 1);
    mix(rows_[i].data().data(), rows_[i].size() * sizeof(double));
  }
  return h;
}

std::vector<TokenId> EmbeddingTable::encode(std::span<const std::string> words) const {
  std::vector<TokenId> ids;
  ids.reserve(words.size());
  for (const auto& w : words) ids.push_back(lookup(w));
  return ids;
}

ImageGrid::ImageGrid(std::size_t grid, std::size_t channels, std::vector<double> values)
    : features(Shape{grid, grid, channels}, std::move(values)) {}

AttentionScorer AttentionScorer::init(std::size_t channels, std::size_t word_dim, std::size_t hidden, Rng& rng) {
  return {DenseParams::init(channels + word_dim, hidden, Activation::relu, rng),
          DenseParams::init(hidden, 1, Activation::tanh, rng)};
}

Var embed(Graph& g, const EmbeddingTable& table, TokenId id, const Parameter* oov) {
  if (id == kPadId) throw VocabularyError("pad id has no embedding input");
  if (oov && id == table.oov_id()) {
    require_size(oov->value.size(), table.dim(), "oov embedding");
    return g.parameter(*oov);
  }
  return g.view(table.row(id));
}

std::vector<Var> embed_tokens(Graph& g, const TokenSequence& seq, const EmbeddingTable& table, const Parameter* oov) {
  validate_padding(seq);
  std::vector<Var> out;
  for (TokenId id : seq.tokens()) out.push_back(embed(g, table, id, oov));
  return out;
}

Var bow_text(Graph& g, const TokenSequence& seq, const EmbeddingTable& table, const Parameter* oov) {
  validate_padding(seq);
  // Summing in id order makes the mean independent of word order, bit for bit.
  std::vector<TokenId> ids(seq.tokens().begin(), seq.tokens().end());
  if (ids.empty()) return g.constant(Tensor(Shape{table.dim()}));
  std::sort(ids.begin(), ids.end());
  std::vector<Var> words;
  words.reserve(ids.size());
  for (TokenId id : ids) words.push_back(embed(g, table, id, oov));
  return mean(words);
}

Var bag_of_images(Graph& g, const ImageGrid& img) {
  return g.constant(Tensor::vector(bag_of_images(img)));
}

Vector bag_of_images(const ImageGrid& img) {
  const std::size_t n = img.positions();
  const std::size_t c = img.channels();
  // Same accumulation order as attention with uniform weights, so the two
  // agree bit for bit.
  const double w = 1.0 / static_cast<double>(n);
  Vector out(c, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    auto v = img.position(j);
    for (std::size_t k = 0; k < c; ++k) out[k] += v[k] * w;
  }
  return out;
}

Var lstm_encode(Graph& g, const LstmParams& p, std::span<const Var> steps, bool reverse, RecurrentDropout drop) {
  if (steps.empty()) throw EmptySequenceError("recurrent encoder received a sequence with no real tokens");
  const std::size_t hs = p.hidden_size;
  LstmState state{g.constant(Tensor(Shape{hs})), g.constant(Tensor(Shape{hs}))};
  std::vector<double> x_mask, h_mask;
  if (drop.active()) {
    x_mask = dropout_mask(p.in_dim(), drop.rate, *drop.rng);
    h_mask = dropout_mask(hs, drop.rate, *drop.rng);
  }
  for (std::size_t t = 0; t < steps.size(); ++t) {
    Var x = steps[reverse ? steps.size() - 1 - t : t];
    LstmState in = state;
    if (drop.active()) {
      x = mul_const(x, x_mask);
      in.h = mul_const(in.h, h_mask);
    }
    state = lstm_step(g, p, x, in);
  }
  return state.h;
}

Var bilstm_encode(Graph& g, std::span<const Var> steps, const LstmParams& fwd, const LstmParams& bwd,
                  RecurrentDropout drop) {
  Var f = lstm_encode(g, fwd, steps, false, drop);
  Var b = lstm_encode(g, bwd, steps, true, drop);
  return concat({f, b});
}

Var context_encode(Graph& g, const TokenSequence& question, const EmbeddingTable& table, const ImageGrid& img,
                   const LstmParams& fwd, const LstmParams& bwd, const Parameter* oov, RecurrentDropout drop) {
  Var pooled = bag_of_images(g, img);
  std::vector<Var> steps;
  for (Var w : embed_tokens(g, question, table, oov)) steps.push_back(concat({w, pooled}));
  return bilstm_encode(g, steps, fwd, bwd, drop);
}

Var attend(Graph& g, Var img, Var word, const AttentionScorer& scorer) {
  const std::size_t word_dim = word.size();
  if (scorer.first.in_dim() <= word_dim) throw DimensionError("attention scorer narrower than the word vector");
  const std::size_t channels = scorer.first.in_dim() - word_dim;
  const Tensor& grid = img.value();
  if (grid.rank() < 2 || grid.extent(grid.rank() - 1) != channels) {
    throw DimensionError("attention scorer expects " + std::to_string(channels) + " channels; grid " +
                         shape_string(img.value().shape()) + " does not match");
  }
  if (scorer.second.out_dim() != 1 || scorer.second.in_dim() != scorer.first.out_dim()) {
    throw DimensionError("attention scorer second layer must map the hidden layer to one unit");
  }
  Var hidden = activate(affine_rows(g.parameter(scorer.first.weight), g.parameter(scorer.first.bias), img, word),
                        scorer.first.activation);
  Var scores = activate(add_broadcast(matvec(hidden, g.parameter(scorer.second.weight)), g.parameter(scorer.second.bias)),
                        scorer.second.activation);
  return matvec_t(img, softmax(scores));
}

std::vector<Var> attended_question_sequence(Graph& g, const TokenSequence& question, const EmbeddingTable& table,
                                            const ImageGrid& img, const AttentionScorer& scorer, const Parameter* oov) {
  Var grid = g.view(img.features);
  std::vector<Var> out;
  for (Var w : embed_tokens(g, question, table, oov)) out.push_back(concat({w, attend(g, grid, w, scorer)}));
  return out;
}

Vector bow_text(const TokenSequence& seq, const EmbeddingTable& table) {
  Graph g(false);
  return bow_text(g, seq, table, nullptr).value().values();
}

Vector bilstm_encode(std::span<const Vector> steps, std::span<const bool> mask, const LstmParams& fwd,
                     const LstmParams& bwd) {
  require_size(mask.size(), steps.size(), "bilstm mask");
  Graph g(false);
  std::vector<Var> real;
  for (std::size_t t = 0; t < steps.size(); ++t)
    if (mask[t]) real.push_back(g.constant(steps[t]));
  return bilstm_encode(g, real, fwd, bwd).value().values();
}

Vector context_encode(const TokenSequence& question, const EmbeddingTable& table, const ImageGrid& img,
                      const LstmParams& fwd, const LstmParams& bwd) {
  Graph g(false);
  return context_encode(g, question, table, img, fwd, bwd, nullptr).value().values();
}

Vector attend(const ImageGrid& img, std::span<const double> word, const AttentionScorer& scorer) {
  Graph g(false);
  return attend(g, g.view(img.features), g.constant(word), scorer).value().values();
}

std::vector<Vector> attended_question_sequence(const TokenSequence& question, const EmbeddingTable& table,
                                               const ImageGrid& img, const AttentionScorer& scorer) {
  Graph g(false);
  std::vector<Vector> out;
  for (Var v : attended_question_sequence(g, question, table, img, scorer, nullptr)) out.push_back(v.value().values());
  return out;
}

}  // namespace mcvqa

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mcvqa/graph.hpp"
#include "mcvqa/numerics.hpp"

namespace mcvqa {

using TokenId = std::int32_t;
inline constexpr TokenId kPadId = 0;

/// Token ids, optionally pre-padded with kPadId. Pads only ever form a prefix.
struct TokenSequence {
  std::vector<TokenId> ids;

  /// Number of leading pad ids.
  std::size_t pad_length() const;
  std::span<const TokenId> tokens() const { return std::span(ids).subspan(pad_length()); }
  bool empty() const { return tokens().empty(); }

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

/// Throws LengthError unless pads form a contiguous prefix.
void validate_padding(const TokenSequence& seq);

/// Word vectors. Row 0 is the all-zero pad row, rows 1..n are the loaded
/// tokens in file order and the final row stands for out-of-vocabulary words.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  /// `vectors[i]` belongs to `tokens[i]`; each must have length `dim`.
  EmbeddingTable(std::size_t dim, std::vector<std::string> tokens, const std::vector<Vector>& vectors);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t vocab_size() const noexcept { return rows_.size(); }
  TokenId oov_id() const noexcept { return static_cast<TokenId>(rows_.size() - 1); }
  /// Id for `token`, or oov_id() when unknown.
  TokenId lookup(std::string_view token) const;
  /// Empty for pad and OOV.
  const std::string& token(TokenId id) const;
  const Tensor& row(TokenId id) const;
  /// FNV-1a over the dimension, tokens and raw row bytes.
  std::uint64_t fingerprint() const;
  std::vector<TokenId> encode(std::span<const std::string> words) const;

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> tokens_;  // index = id
  std::vector<Tensor> rows_;
  std::unordered_map<std::string, TokenId> index_;
};

/// CNN feature grid of shape [g × g × c]; spatial position j = x·g + y.
struct ImageGrid {
  Tensor features;

  ImageGrid() = default;
  ImageGrid(std::size_t grid, std::size_t channels, std::vector<double> values);
  std::size_t grid() const { return features.extent(0); }
  std::size_t channels() const { return features.extent(2); }
  std::size_t positions() const { return grid() * grid(); }
  std::span<const double> position(std::size_t j) const {
    return features.data().subspan(j * channels(), channels());
  }
};

/// Two-layer attention scorer: first layer relu over [I_j ; w], second a
/// single tanh unit.
struct AttentionScorer {
  DenseParams first;
  DenseParams second;

  static AttentionScorer init(std::size_t channels, std::size_t word_dim, std::size_t hidden, Rng& rng);
};

/// Per-sequence dropout on LSTM inputs and recurrent state. Inactive when
/// `rng` is null or `rate` is 0.
struct RecurrentDropout {
  double rate = 0.0;
  Rng* rng = nullptr;
  bool active() const { return rng != nullptr && rate > 0.0; }
};

// Graph-building forms. `oov` is the learned out-of-vocabulary row; when null
// the table's own OOV row is used.

Var embed(Graph& g, const EmbeddingTable& table, TokenId id, const Parameter* oov);
std::vector<Var> embed_tokens(Graph& g, const TokenSequence& seq, const EmbeddingTable& table, const Parameter* oov);
Var bow_text(Graph& g, const TokenSequence& seq, const EmbeddingTable& table, const Parameter* oov);
Var bag_of_images(Graph& g, const ImageGrid& img);
/// Last hidden state of one LSTM pass over `steps` (in the given order,
/// or reversed when `reverse`). Throws EmptySequenceError when `steps` is empty.
Var lstm_encode(Graph& g, const LstmParams& p, std::span<const Var> steps, bool reverse, RecurrentDropout drop = {});
Var bilstm_encode(Graph& g, std::span<const Var> steps, const LstmParams& fwd, const LstmParams& bwd,
                  RecurrentDropout drop = {});
Var context_encode(Graph& g, const TokenSequence& question, const EmbeddingTable& table, const ImageGrid& img,
                   const LstmParams& fwd, const LstmParams& bwd, const Parameter* oov, RecurrentDropout drop = {});
Var attend(Graph& g, Var img, Var word, const AttentionScorer& scorer);
std::vector<Var> attended_question_sequence(Graph& g, const TokenSequence& question, const EmbeddingTable& table,
                                            const ImageGrid& img, const AttentionScorer& scorer, const Parameter* oov);

// Plain-value forms.

Vector bow_text(const TokenSequence& seq, const EmbeddingTable& table);
Vector bag_of_images(const ImageGrid& img);
/// `mask[i] == false` marks a pad step: identity on (h, c), never the last state.
Vector bilstm_encode(std::span<const Vector> steps, std::span<const bool> mask, const LstmParams& fwd,
                     const LstmParams& bwd);
Vector context_encode(const TokenSequence& question, const EmbeddingTable& table, const ImageGrid& img,
                      const LstmParams& fwd, const LstmParams& bwd);
Vector attend(const ImageGrid& img, std::span<const double> word, const AttentionScorer& scorer);
std::vector<Vector> attended_question_sequence(const TokenSequence& question, const EmbeddingTable& table,
                                               const ImageGrid& img, const AttentionScorer& scorer);

}  // namespace mcvqa

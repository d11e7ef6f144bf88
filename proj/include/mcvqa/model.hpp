#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mcvqa/config.hpp"
#include "mcvqa/data.hpp"
#include "mcvqa/encoders.hpp"
#include "mcvqa/scoring.hpp"

namespace mcvqa {

enum class ModelKind { BOW_A, BOW_QA, BOW_QAI, BILSTM_A, BILSTM_QA, BILSTM_QA_I, CTX_A, CTX_A_I, CTX_QAI, ATTN_QAI };

inline constexpr std::array<ModelKind, 10> kAllKinds = {
    ModelKind::BOW_A,    ModelKind::BOW_QA,    ModelKind::BOW_QAI, ModelKind::BILSTM_A, ModelKind::BILSTM_QA,
    ModelKind::BILSTM_QA_I, ModelKind::CTX_A, ModelKind::CTX_A_I, ModelKind::CTX_QAI,  ModelKind::ATTN_QAI};

const char* kind_name(ModelKind k);
std::optional<ModelKind> parse_kind(std::string_view s);
/// "BOW_A, BOW_QA, ..." for usage messages.
std::string valid_kind_list();
bool is_recurrent(ModelKind k);
/// True for kinds whose features never look at the image.
bool is_text_only(ModelKind k);

/// Architecture and optimisation hyperparameters of one model.
struct ModelVariant {
  ModelKind kind = ModelKind::BOW_A;
  std::size_t lstm_hidden = 128;
  std::size_t context_hidden = 128;
  std::size_t image_dense = 64;
  std::size_t attention_hidden = 64;
  std::size_t head_hidden = 512;
  double feature_dropout = 0.2;
  double encoder_dropout = 0.0;
  double l2 = 1e-4;
  double encoder_l2 = 0.0;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t max_iterations = 60;
  std::uint64_t seed = 1;

  /// Per-kind defaults: context and attention models get stronger encoder
  /// dropout, a 10x smaller learning rate and a longer budget.
  static ModelVariant defaults(ModelKind kind);
  void validate() const;

  friend bool operator==(const ModelVariant&, const ModelVariant&) = default;
};

/// key=value lines, one per field, in declaration order.
std::string variant_to_config(const ModelVariant& v);
/// Reads any variant keys present in `cfg` over `base`. A `kind` key resets
/// the unspecified fields to that kind's defaults.
ModelVariant variant_from_config(const KeyValueConfig& cfg, std::optional<ModelVariant> base = std::nullopt);

/// Input dimensions fixed by the data.
struct ModelDims {
  std::size_t embed_dim = 300;
  std::size_t channels = 2048;
  std::size_t grid = 7;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

struct Checkpoint {
  ModelVariant variant;
  ModelDims dims;
  std::uint64_t embedding_fingerprint = 0;
  double best_validation_accuracy = 0.0;
  std::uint64_t iteration = 0;
  /// Parameter tensors keyed by stable names, in model order.
  std::vector<std::pair<std::string, Tensor>> parameters;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// As above, and throws VariantMismatchError unless the stored kind is `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, ModelKind expected);
std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::string_view bytes, const std::string& source = "<memory>");

/// One of the ten answer-scoring networks. Copyable; a copy is an
/// independent snapshot of all parameters.
class Model {
 public:
  Model(const ModelVariant& variant, const ModelDims& dims, std::uint64_t embedding_fingerprint, Rng& rng);
  static Model from_checkpoint(const Checkpoint& ckpt);
  Checkpoint to_checkpoint(double best_validation_accuracy, std::uint64_t iteration) const;

  const ModelVariant& variant() const { return variant_; }
  const ModelDims& dims() const { return dims_; }
  std::uint64_t embedding_fingerprint() const { return fingerprint_; }
  std::size_t feature_dim() const;
  std::size_t parameter_count() const;

  /// Throws ConfigError if `table` is not the one the model was built for.
  void check_table(const EmbeddingTable& table) const;
  /// Throws DimensionError if the sample's image does not match the model.
  void check_sample(const QaSample& sample) const;

  void visit_parameters(const std::function<void(const std::string&, Parameter&)>& fn);
  void visit_parameters(const std::function<void(const std::string&, const Parameter&)>& fn) const;
  std::vector<NamedParameter> named_parameters();
  void zero_grad() const;

  std::array<Var, kNumCandidates> build_features(Graph& g, const QaSample& s, const EmbeddingTable& table, Mode mode,
                                                 Rng* rng) const;
  ScoreVars forward(Graph& g, const QaSample& s, const EmbeddingTable& table, Mode mode, Rng* rng) const;
  /// Regularisation terms (head L2 and encoder L2), or nullopt when both are zero.
  std::optional<Var> penalty(Graph& g) const;
  /// Cross-entropy plus penalty.
  Var question_loss(Graph& g, const ScoreVars& scores, OptionIndex label) const;

  Vector features(const QaSample& s, std::size_t candidate, const EmbeddingTable& table) const;
  CandidateScores score(const QaSample& s, const EmbeddingTable& table) const;
  double loss(const QaSample& s, const EmbeddingTable& table) const;

  HeadParams& head() { return head_; }
  const HeadParams& head() const { return head_; }

 private:
  Model() = default;
  RecurrentDropout encoder_dropout(Mode mode, Rng* rng) const;

  ModelVariant variant_;
  ModelDims dims_;
  std::uint64_t fingerprint_ = 0;
  Parameter oov_;
  std::optional<LstmParams> question_fwd_, question_bwd_;
  std::optional<LstmParams> answer_fwd_, answer_bwd_;
  std::optional<LstmParams> context_fwd_, context_bwd_;
  std::optional<LstmParams> attended_question_;
  std::optional<AttentionScorer> scorer_;
  std::optional<DenseParams> image_dense_;
  HeadParams head_;
};

struct ModelGradCheck {
  GradCheckReport report;
  bool passed = false;
};

/// Finite-difference check of every parameter of `model` on one sample with
/// dropout disabled.
ModelGradCheck grad_check(Model& model, const QaSample& sample, const EmbeddingTable& table, double tolerance,
                          double step = 1e-5);

}  // namespace mcvqa

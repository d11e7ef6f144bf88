#include "mcvqa/model.hpp"

#include <cmath>

#include "binary_io.hpp"
#include "mcvqa/errors.hpp"
#include "mcvqa/reference.hpp"

namespace mcvqa {

namespace {

constexpr const char* kKindNames[] = {"BOW_A", "BOW_QA",  "BOW_QAI", "BILSTM_A", "BILSTM_QA",
                                      "BILSTM_QA_I", "CTX_A", "CTX_A_I", "CTX_QAI", "ATTN_QAI"};

bool uses_question_bilstm(ModelKind k) {
  return k == ModelKind::BILSTM_QA || k == ModelKind::BILSTM_QA_I || k == ModelKind::CTX_QAI;
}
bool uses_context(ModelKind k) {
  return k == ModelKind::CTX_A || k == ModelKind::CTX_A_I || k == ModelKind::CTX_QAI;
}
bool uses_image_dense(ModelKind k) { return k == ModelKind::CTX_A_I || k == ModelKind::ATTN_QAI; }

template <class Fn>
void visit_lstm(const std::string& prefix, std::optional<LstmParams>& p, Fn& fn) {
  if (!p) return;
  fn(prefix + ".W", p->input_weights);
  fn(prefix + ".U", p->recurrent_weights);
  fn(prefix + ".b", p->bias);
}

template <class Fn>
void visit_dense(const std::string& prefix, DenseParams& p, Fn& fn) {
  fn(prefix + ".weight", p.weight);
  fn(prefix + ".bias", p.bias);
}

}  // namespace

const char* kind_name(ModelKind k) { return kKindNames[static_cast<int>(k)]; }

std::optional<ModelKind> parse_kind(std::string_view s) {
  for (auto k : kAllKinds)
    if (s == kind_name(k)) return k;
  return std::nullopt;
}

std::string valid_kind_list() {
  std::string out;
  for (auto k : kAllKinds) {
    if (!out.empty()) out += ", ";
    out += kind_name(k);
  }
  return out;
}

bool is_recurrent(ModelKind k) {
  return !(k == ModelKind::BOW_A || k == ModelKind::BOW_QA || k == ModelKind::BOW_QAI);
}

bool is_text_only(ModelKind k) {
  return k == ModelKind::BOW_A || k == ModelKind::BOW_QA || k == ModelKind::BILSTM_A || k == ModelKind::BILSTM_QA;
}

ModelVariant ModelVariant::defaults(ModelKind kind) {
  ModelVariant v;
  v.kind = kind;
  switch (kind) {
    case ModelKind::BOW_A:
    case ModelKind::BOW_QA:
    case ModelKind::BOW_QAI:
      v.max_iterations = 60;
      break;
    case ModelKind::BILSTM_A:
    case ModelKind::BILSTM_QA:
    case ModelKind::BILSTM_QA_I:
      v.max_iterations = 100;
      break;
    default:
      v.encoder_dropout = 0.3;
      v.learning_rate = 1e-4;
      v.max_iterations = 150;
      break;
  }
  return v;
}

void ModelVariant::validate() const {
  auto positive = [](std::size_t v, const char* key) {
    if (v == 0) throw ConfigError(std::string(key) + " must be positive");
  };
  positive(lstm_hidden, "lstm_hidden");
  positive(context_hidden, "context_hidden");
  positive(image_dense, "image_dense");
  positive(attention_hidden, "attention_hidden");
  positive(head_hidden, "head_hidden");
  positive(batch_size, "batch_size");
  if (!(feature_dropout >= 0.0 && feature_dropout < 1.0)) throw ConfigError("feature_dropout must lie in [0, 1)");
  if (!(encoder_dropout >= 0.0 && encoder_dropout < 1.0)) throw ConfigError("encoder_dropout must lie in [0, 1)");
  if (!(l2 >= 0.0)) throw ConfigError("l2 must be non-negative");
  if (!(encoder_l2 >= 0.0)) throw ConfigError("encoder_l2 must be non-negative");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    // Zero is allowed for frozen-parameter diagnostics.
    if (learning_rate != 0.0) throw ConfigError("learning_rate must be positive");
  }
}

std::string variant_to_config(const ModelVariant& v) {
  std::string s;
  auto put = [&s](const char* k, const std::string& val) { s += std::string(k) + "=" + val + "\n"; };
  put("kind", kind_name(v.kind));
  put("lstm_hidden", std::to_string(v.lstm_hidden));
  put("context_hidden", std::to_string(v.context_hidden));
  put("image_dense", std::to_string(v.image_dense));
  put("attention_hidden", std::to_string(v.attention_hidden));
  put("head_hidden", std::to_string(v.head_hidden));
  put("feature_dropout", io::format_double(v.feature_dropout));
  put("encoder_dropout", io::format_double(v.encoder_dropout));
  put("l2", io::format_double(v.l2));
  put("encoder_l2", io::format_double(v.encoder_l2));
  put("learning_rate", io::format_double(v.learning_rate));
  put("batch_size", std::to_string(v.batch_size));
  put("max_iterations", std::to_string(v.max_iterations));
  put("seed", std::to_string(v.seed));
  return s;
}

ModelVariant variant_from_config(const KeyValueConfig& cfg, std::optional<ModelVariant> base) {
  ModelVariant v = base.value_or(ModelVariant::defaults(ModelKind::BOW_A));
  std::string kind;
  cfg.read("kind", kind);
  if (!kind.empty()) {
    auto k = parse_kind(kind);
    if (!k) throw ConfigError(cfg.source() + ": unknown kind '" + kind + "'; valid kinds: " + valid_kind_list());
    if (!base || base->kind != *k) v = ModelVariant::defaults(*k);
  }
  cfg.read("lstm_hidden", v.lstm_hidden);
  cfg.read("context_hidden", v.context_hidden);
  cfg.read("image_dense", v.image_dense);
  cfg.read("attention_hidden", v.attention_hidden);
  cfg.read("head_hidden", v.head_hidden);
  cfg.read("feature_dropout", v.feature_dropout);
  cfg.read("encoder_dropout", v.encoder_dropout);
  cfg.read("l2", v.l2);
  cfg.read("encoder_l2", v.encoder_l2);
  cfg.read("learning_rate", v.learning_rate);
  cfg.read("batch_size", v.batch_size);
  cfg.read("max_iterations", v.max_iterations);
  cfg.read("seed", v.seed);
  v.validate();
  return v;
}

Model::Model(const ModelVariant& variant, const ModelDims& dims, std::uint64_t embedding_fingerprint, Rng& rng)
    : variant_(variant), dims_(dims), fingerprint_(embedding_fingerprint) {
  variant_.validate();
  const std::size_t d = dims.embed_dim, c = dims.channels;
  const std::size_t h = variant.lstm_hidden, hc = variant.context_hidden;
  const ModelKind k = variant.kind;
  oov_ = Parameter(glorot_uniform({d}, d, 1, rng));
  if (uses_context(k)) {
    context_fwd_ = LstmParams::init(d + c, hc, rng);
    context_bwd_ = LstmParams::init(d + c, hc, rng);
  }
  if (uses_question_bilstm(k)) {
    question_fwd_ = LstmParams::init(d, h, rng);
    question_bwd_ = LstmParams::init(d, h, rng);
  }
  if (is_recurrent(k)) {
    const std::size_t answer_in = k == ModelKind::CTX_QAI ? d + 2 * hc : d;
    answer_fwd_ = LstmParams::init(answer_in, h, rng);
    answer_bwd_ = LstmParams::init(answer_in, h, rng);
  }
  if (k == ModelKind::ATTN_QAI) {
    scorer_ = AttentionScorer::init(c, d, variant.attention_hidden, rng);
    attended_question_ = LstmParams::init(d + c, h, rng);
  }
  if (uses_image_dense(k)) image_dense_ = DenseParams::init(c, variant.image_dense, Activation::softmax, rng);
  head_ = HeadParams::init(feature_dim(), variant.head_hidden, variant.feature_dropout, variant.l2, rng);
}

std::size_t Model::feature_dim() const {
  const std::size_t d = dims_.embed_dim, c = dims_.channels;
  const std::size_t h = variant_.lstm_hidden, hc = variant_.context_hidden, w = variant_.image_dense;
  switch (variant_.kind) {
    case ModelKind::BOW_A: return d;
    case ModelKind::BOW_QA: return 2 * d;
    case ModelKind::BOW_QAI: return 2 * d + c;
    case ModelKind::BILSTM_A: return 2 * h;
    case ModelKind::BILSTM_QA: return 4 * h;
    case ModelKind::BILSTM_QA_I: return 4 * h + c;
    case ModelKind::CTX_A: return 2 * h + 2 * hc;
    case ModelKind::CTX_A_I: return 2 * h + 2 * hc + w;
    case ModelKind::CTX_QAI: return 4 * h;
    case ModelKind::ATTN_QAI: return 3 * h + w;
  }
  return 0;
}

void Model::visit_parameters(const std::function<void(const std::string&, Parameter&)>& fn) {
  fn("embedding.oov", oov_);
  visit_lstm("context.fwd", context_fwd_, fn);
  visit_lstm("context.bwd", context_bwd_, fn);
  visit_lstm("question.fwd", question_fwd_, fn);
  visit_lstm("question.bwd", question_bwd_, fn);
  visit_lstm("answer.fwd", answer_fwd_, fn);
  visit_lstm("answer.bwd", answer_bwd_, fn);
  if (scorer_) {
    visit_dense("attention.scorer.first", scorer_->first, fn);
    visit_dense("attention.scorer.second", scorer_->second, fn);
  }
  visit_lstm("attention.question", attended_question_, fn);
  if (image_dense_) visit_dense("image_dense", *image_dense_, fn);
  visit_dense("head.hidden", head_.hidden, fn);
  visit_dense("head.output", head_.output, fn);
}

void Model::visit_parameters(const std::function<void(const std::string&, const Parameter&)>& fn) const {
  const_cast<Model*>(this)->visit_parameters(
      [&fn](const std::string& name, Parameter& p) { fn(name, static_cast<const Parameter&>(p)); });
}

std::vector<NamedParameter> Model::named_parameters() {
  std::vector<NamedParameter> out;
  visit_parameters([&out](const std::string& name, Parameter& p) { out.push_back({name, &p}); });
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  visit_parameters([&n](const std::string&, const Parameter& p) { n += p.value.size(); });
  return n;
}

void Model::zero_grad() const {
  visit_parameters([](const std::string&, const Parameter& p) { p.zero_grad(); });
}

void Model::check_table(const EmbeddingTable& table) const {
  if (table.dim() != dims_.embed_dim) {
    throw ConfigError("embedding dimension " + std::to_string(table.dim()) + " does not match model dimension " +
                      std::to_string(dims_.embed_dim));
  }
  if (fingerprint_ != 0 && table.fingerprint() != fingerprint_) {
    throw ConfigError("embedding table differs from the one the model was trained with");
  }
}

void Model::check_sample(const QaSample& s) const {
  if (!s.image) throw MissingImageError("sample '" + s.id + "' has no image");
  if (s.image->grid() != dims_.grid || s.image->channels() != dims_.channels) {
    throw DimensionError("sample '" + s.id + "' image " + shape_string(s.image->features.shape()) +
                         " does not match model grid " + std::to_string(dims_.grid) + "x" +
                         std::to_string(dims_.grid) + "x" + std::to_string(dims_.channels));
  }
  if (s.label >= kNumCandidates) throw DimensionError("sample '" + s.id + "' label out of range");
}

RecurrentDropout Model::encoder_dropout(Mode mode, Rng* rng) const {
  if (mode != Mode::train) return {};
  return {variant_.encoder_dropout, rng};
}

std::array<Var, kNumCandidates> Model::build_features(Graph& g, const QaSample& s, const EmbeddingTable& table,
                                                      Mode mode, Rng* rng) const {
  check_sample(s);
  const Parameter* oov = &oov_;
  const RecurrentDropout drop = encoder_dropout(mode, rng);
  const ModelKind k = variant_.kind;
  if (drop.active() == false && mode == Mode::train && variant_.encoder_dropout > 0.0 && is_recurrent(k)) {
    throw ConfigError("train-mode forward needs a random stream for encoder dropout");
  }

  // Question-side pieces, shared by all four candidates.
  std::vector<Var> shared;
  Var context{};
  switch (k) {
    case ModelKind::BOW_QA:
      shared.push_back(bow_text(g, s.question, table, oov));
      break;
    case ModelKind::BOW_QAI:
      shared.push_back(bow_text(g, s.question, table, oov));
      break;
    case ModelKind::BILSTM_QA:
    case ModelKind::BILSTM_QA_I:
      shared.push_back(bilstm_encode(g, embed_tokens(g, s.question, table, oov), *question_fwd_, *question_bwd_, drop));
      break;
    case ModelKind::CTX_A:
    case ModelKind::CTX_A_I:
    case ModelKind::CTX_QAI:
      context = context_encode(g, s.question, table, *s.image, *context_fwd_, *context_bwd_, oov, drop);
      break;
    case ModelKind::ATTN_QAI: {
      auto steps = attended_question_sequence(g, s.question, table, *s.image, *scorer_, oov);
      shared.push_back(lstm_encode(g, *attended_question_, steps, false, drop));
      break;
    }
    default:
      break;
  }
  Var question_bilstm{};
  if (k == ModelKind::CTX_QAI) {
    question_bilstm = bilstm_encode(g, embed_tokens(g, s.question, table, oov), *question_fwd_, *question_bwd_, drop);
  }
  Var image{};
  if (k == ModelKind::BOW_QAI || k == ModelKind::BILSTM_QA_I) image = bag_of_images(g, *s.image);
  if (uses_image_dense(k)) image = dense(g, *image_dense_, bag_of_images(g, *s.image));

  std::array<Var, kNumCandidates> out;
  for (std::size_t c = 0; c < kNumCandidates; ++c) {
    const TokenSequence& a = s.answers[c];
    switch (k) {
      case ModelKind::BOW_A:
        out[c] = bow_text(g, a, table, oov);
        break;
      case ModelKind::BOW_QA:
        out[c] = concat({shared[0], bow_text(g, a, table, oov)});
        break;
      case ModelKind::BOW_QAI:
        out[c] = concat({shared[0], bow_text(g, a, table, oov), image});
        break;
      case ModelKind::BILSTM_A:
        out[c] = bilstm_encode(g, embed_tokens(g, a, table, oov), *answer_fwd_, *answer_bwd_, drop);
        break;
      case ModelKind::BILSTM_QA:
        out[c] = concat({shared[0], bilstm_encode(g, embed_tokens(g, a, table, oov), *answer_fwd_, *answer_bwd_, drop)});
        break;
      case ModelKind::BILSTM_QA_I:
        out[c] = concat(
            {shared[0], bilstm_encode(g, embed_tokens(g, a, table, oov), *answer_fwd_, *answer_bwd_, drop), image});
        break;
      case ModelKind::CTX_A:
        out[c] = concat({bilstm_encode(g, embed_tokens(g, a, table, oov), *answer_fwd_, *answer_bwd_, drop), context});
        break;
      case ModelKind::CTX_A_I:
        out[c] = concat(
            {bilstm_encode(g, embed_tokens(g, a, table, oov), *answer_fwd_, *answer_bwd_, drop), context, image});
        break;
      case ModelKind::CTX_QAI: {
        std::vector<Var> steps;
        for (Var w : embed_tokens(g, a, table, oov)) steps.push_back(concat({w, context}));
        out[c] = concat({bilstm_encode(g, steps, *answer_fwd_, *answer_bwd_, drop), question_bilstm});
        break;
      }
      case ModelKind::ATTN_QAI:
        out[c] = concat(
            {shared[0], bilstm_encode(g, embed_tokens(g, a, table, oov), *answer_fwd_, *answer_bwd_, drop), image});
        break;
    }
    if (out[c].size() != feature_dim()) {
      throw ConfigError(std::string("feature length ") + std::to_string(out[c].size()) +
                        " does not match head input " + std::to_string(feature_dim()) + " for " + kind_name(k));
    }
  }
  return out;
}

ScoreVars Model::forward(Graph& g, const QaSample& s, const EmbeddingTable& table, Mode mode, Rng* rng) const {
  auto features = build_features(g, s, table, mode, rng);
  return score_candidates(g, features, head_, mode, rng);
}

std::optional<Var> Model::penalty(Graph& g) const {
  std::vector<Var> terms;
  if (head_.l2 > 0.0) terms.push_back(scale(sum_squares(g.parameter(head_.output.weight)), head_.l2));
  if (variant_.encoder_l2 > 0.0) {
    const_cast<Model*>(this)->visit_parameters([&](const std::string& name, Parameter& p) {
      if (name.starts_with("head.") || name == "embedding.oov") return;
      if (name.ends_with(".b") || name.ends_with(".bias")) return;
      terms.push_back(scale(sum_squares(g.parameter(p)), variant_.encoder_l2));
    });
  }
  if (terms.empty()) return std::nullopt;
  return terms.size() == 1 ? terms[0] : sum(terms);
}

Var Model::question_loss(Graph& g, const ScoreVars& scores, OptionIndex label) const {
  if (label >= kNumCandidates) throw DimensionError("label must be one of 0..3");
  Var ce = neg_log_at(scores.probs, label, kLogFloor);
  auto p = penalty(g);
  return p ? sum(std::array<Var, 2>{ce, *p}) : ce;
}

Vector Model::features(const QaSample& s, std::size_t candidate, const EmbeddingTable& table) const {
  if (candidate >= kNumCandidates) throw DimensionError("candidate index out of range");
  Graph g(false);
  return build_features(g, s, table, Mode::eval, nullptr)[candidate].value().values();
}

CandidateScores Model::score(const QaSample& s, const EmbeddingTable& table) const {
  Graph g(false);
  auto vars = forward(g, s, table, Mode::eval, nullptr);
  CandidateScores out;
  for (std::size_t k = 0; k < kNumCandidates; ++k) {
    out.raw[k] = vars.raw[k];
    out.probs[k] = vars.probs[k];
  }
  return out;
}

double Model::loss(const QaSample& s, const EmbeddingTable& table) const {
  Graph g(false);
  auto vars = forward(g, s, table, Mode::eval, nullptr);
  return question_loss(g, vars, s.label)[0];
}

Checkpoint Model::to_checkpoint(double best_validation_accuracy, std::uint64_t iteration) const {
  Checkpoint c;
  c.variant = variant_;
  c.dims = dims_;
  c.embedding_fingerprint = fingerprint_;
  c.best_validation_accuracy = best_validation_accuracy;
  c.iteration = iteration;
  visit_parameters([&c](const std::string& name, const Parameter& p) { c.parameters.emplace_back(name, p.value); });
  return c;
}

Model Model::from_checkpoint(const Checkpoint& ckpt) {
  Rng rng(0);
  Model m(ckpt.variant, ckpt.dims, ckpt.embedding_fingerprint, rng);
  std::size_t i = 0;
  m.visit_parameters([&](const std::string& name, Parameter& p) {
    if (i >= ckpt.parameters.size()) throw ShapeMismatchError("checkpoint lacks parameter '" + name + "'");
    const auto& [stored_name, tensor] = ckpt.parameters[i++];
    if (stored_name != name) {
      throw ShapeMismatchError("checkpoint parameter '" + stored_name + "' where '" + name + "' was expected");
    }
    if (tensor.shape() != p.value.shape()) {
      throw ShapeMismatchError("checkpoint parameter '" + name + "' has shape " + shape_string(tensor.shape()) +
                               ", model expects " + shape_string(p.value.shape()));
    }
    p = Parameter(tensor);
  });
  if (i != ckpt.parameters.size()) throw ShapeMismatchError("checkpoint has unexpected extra parameters");
  return m;
}

ModelGradCheck grad_check(Model& model, const QaSample& sample, const EmbeddingTable& table, double tolerance,
                          double step) {
  auto params = model.named_parameters();
  auto loss = [&](bool with_grad) {
    Graph g(with_grad);
    auto scores = model.forward(g, sample, table, Mode::eval, nullptr);
    Var l = model.question_loss(g, scores, sample.label);
    if (with_grad) g.backward(l);
    return l[0];
  };
  ModelGradCheck out;
  auto reference = [&] { return reference_loss(model, sample, table); };
  out.report = grad_check(params, loss, reference, step);
  out.passed = out.report.max_relative_error < tolerance;
  return out;
}

}  // namespace mcvqa

#include "mcvqa/reference.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mcvqa/errors.hpp"

namespace mcvqa {

namespace {

using LVec = std::vector<long double>;

class Weights {
 public:
  explicit Weights(const Model& m) {
    m.visit_parameters([this](const std::string& name, const Parameter& p) { by_name_[name] = &p.value; });
  }
  const Tensor& operator()(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw ConfigError("reference: model has no parameter '" + name + "'");
    return *it->second;
  }
  bool has(const std::string& name) const { return by_name_.count(name) != 0; }

 private:
  std::map<std::string, const Tensor*> by_name_;
};

long double logistic(long double x) { return 1.0L / (1.0L + std::exp(-x)); }

LVec cat(std::initializer_list<const LVec*> parts) {
  LVec out;
  for (const LVec* p : parts) out.insert(out.end(), p->begin(), p->end());
  return out;
}

LVec softmax(const LVec& z) {
  const long double mx = *std::max_element(z.begin(), z.end());
  LVec y(z.size());
  long double total = 0.0L;
  for (std::size_t i = 0; i < z.size(); ++i) total += y[i] = std::exp(z[i] - mx);
  for (auto& v : y) v /= total;
  return y;
}

// y = act(W x + b) with W stored [out × in].
LVec affine(const Tensor& W, const Tensor& b, const LVec& x) {
  const std::size_t out = b.size(), in = x.size();
  if (W.size() != out * in) throw DimensionError("reference: weight does not match input");
  LVec y(out);
  for (std::size_t r = 0; r < out; ++r) {
    long double s = b[r];
    for (std::size_t k = 0; k < in; ++k) s += static_cast<long double>(W[r * in + k]) * x[k];
    y[r] = s;
  }
  return y;
}

struct Ctx {
  const Weights& w;
  const EmbeddingTable& table;
};

LVec embed(const Ctx& cx, TokenId id) {
  if (id == kPadId) throw VocabularyError("pad id has no embedding input");
  const Tensor& row = id == cx.table.oov_id() ? cx.w("embedding.oov") : cx.table.row(id);
  return LVec(row.values().begin(), row.values().end());
}

std::vector<LVec> embed_all(const Ctx& cx, const TokenSequence& seq) {
  validate_padding(seq);
  std::vector<LVec> out;
  for (TokenId id : seq.tokens()) out.push_back(embed(cx, id));
  return out;
}

LVec bow(const Ctx& cx, const TokenSequence& seq) {
  auto words = embed_all(cx, seq);
  LVec out(cx.table.dim(), 0.0L);
  if (words.empty()) return out;
  for (const auto& v : words)
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += v[k];
  for (auto& v : out) v /= static_cast<long double>(words.size());
  return out;
}

LVec bag(const ImageGrid& img) {
  LVec out(img.channels(), 0.0L);
  for (std::size_t j = 0; j < img.positions(); ++j) {
    auto v = img.position(j);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += v[k];
  }
  for (auto& v : out) v /= static_cast<long double>(img.positions());
  return out;
}

LVec lstm(const Ctx& cx, const std::string& prefix, const std::vector<LVec>& steps, bool reverse) {
  if (steps.empty()) throw EmptySequenceError("recurrent encoder received a sequence with no real tokens");
  const Tensor& W = cx.w(prefix + ".W");
  const Tensor& U = cx.w(prefix + ".U");
  const Tensor& b = cx.w(prefix + ".b");
  const std::size_t hs = b.size() / 4;
  LVec h(hs, 0.0L), c(hs, 0.0L);
  for (std::size_t t = 0; t < steps.size(); ++t) {
    const LVec& x = steps[reverse ? steps.size() - 1 - t : t];
    LVec z = affine(W, b, x);
    LVec zr = affine(U, Tensor(Shape{4 * hs}), h);
    for (std::size_t r = 0; r < 4 * hs; ++r) z[r] += zr[r];
    for (std::size_t k = 0; k < hs; ++k) {
      const long double i = logistic(z[k]), f = logistic(z[hs + k]);
      const long double g = std::tanh(z[2 * hs + k]), o = logistic(z[3 * hs + k]);
      c[k] = f * c[k] + i * g;
      h[k] = o * std::tanh(c[k]);
    }
  }
  return h;
}

LVec bilstm(const Ctx& cx, const std::string& prefix, const std::vector<LVec>& steps) {
  LVec f = lstm(cx, prefix + ".fwd", steps, false);
  LVec b = lstm(cx, prefix + ".bwd", steps, true);
  return cat({&f, &b});
}

LVec attend(const Ctx& cx, const ImageGrid& img, const LVec& word) {
  const Tensor& W1 = cx.w("attention.scorer.first.weight");
  const Tensor& b1 = cx.w("attention.scorer.first.bias");
  const Tensor& W2 = cx.w("attention.scorer.second.weight");
  const Tensor& b2 = cx.w("attention.scorer.second.bias");
  const std::size_t n = img.positions();
  LVec scores(n);
  for (std::size_t j = 0; j < n; ++j) {
    auto p = img.position(j);
    LVec in(p.begin(), p.end());
    in.insert(in.end(), word.begin(), word.end());
    LVec hidden = affine(W1, b1, in);
    for (auto& v : hidden) v = std::max(v, 0.0L);
    scores[j] = std::tanh(affine(W2, b2, hidden)[0]);
  }
  LVec a = softmax(scores);
  LVec out(img.channels(), 0.0L);
  for (std::size_t j = 0; j < n; ++j) {
    auto p = img.position(j);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += a[j] * p[k];
  }
  return out;
}

LVec image_dense(const Ctx& cx, const ImageGrid& img) {
  return softmax(affine(cx.w("image_dense.weight"), cx.w("image_dense.bias"), bag(img)));
}

LVec features(const Ctx& cx, ModelKind kind, const QaSample& s, const TokenSequence& a) {
  const ImageGrid& img = *s.image;
  switch (kind) {
    case ModelKind::BOW_A: return bow(cx, a);
    case ModelKind::BOW_QA: {
      LVec q = bow(cx, s.question), x = bow(cx, a);
      return cat({&q, &x});
    }
    case ModelKind::BOW_QAI: {
      LVec q = bow(cx, s.question), x = bow(cx, a), i = bag(img);
      return cat({&q, &x, &i});
    }
    case ModelKind::BILSTM_A: return bilstm(cx, "answer", embed_all(cx, a));
    case ModelKind::BILSTM_QA: {
      LVec q = bilstm(cx, "question", embed_all(cx, s.question)), x = bilstm(cx, "answer", embed_all(cx, a));
      return cat({&q, &x});
    }
    case ModelKind::BILSTM_QA_I: {
      LVec q = bilstm(cx, "question", embed_all(cx, s.question)), x = bilstm(cx, "answer", embed_all(cx, a));
      LVec i = bag(img);
      return cat({&q, &x, &i});
    }
    default: break;
  }
  if (kind == ModelKind::ATTN_QAI) {
    std::vector<LVec> steps;
    for (const auto& w : embed_all(cx, s.question)) {
      LVec att = attend(cx, img, w);
      steps.push_back(cat({&w, &att}));
    }
    LVec q = lstm(cx, "attention.question", steps, false);
    LVec x = bilstm(cx, "answer", embed_all(cx, a)), d = image_dense(cx, img);
    return cat({&q, &x, &d});
  }
  // Context kinds.
  const LVec pooled = bag(img);
  std::vector<LVec> qsteps;
  for (const auto& w : embed_all(cx, s.question)) qsteps.push_back(cat({&w, &pooled}));
  const LVec context = bilstm(cx, "context", qsteps);
  if (kind == ModelKind::CTX_QAI) {
    std::vector<LVec> steps;
    for (const auto& w : embed_all(cx, a)) steps.push_back(cat({&w, &context}));
    LVec x = bilstm(cx, "answer", steps), q = bilstm(cx, "question", embed_all(cx, s.question));
    return cat({&x, &q});
  }
  LVec x = bilstm(cx, "answer", embed_all(cx, a));
  if (kind == ModelKind::CTX_A) return cat({&x, &context});
  LVec d = image_dense(cx, img);
  return cat({&x, &context, &d});
}

long double squares(const Tensor& t) {
  long double s = 0.0L;
  for (double v : t.values()) s += static_cast<long double>(v) * v;
  return s;
}

}  // namespace

long double reference_loss(const Model& model, const QaSample& s, const EmbeddingTable& table) {
  if (!s.image) throw MissingImageError("sample '" + s.id + "' has no image");
  if (s.label >= kNumCandidates) throw DimensionError("label must be one of 0..3");
  const Weights w(model);
  const Ctx cx{w, table};
  const ModelVariant& v = model.variant();

  LVec raw(kNumCandidates);
  for (std::size_t c = 0; c < kNumCandidates; ++c) {
    LVec x = features(cx, v.kind, s, s.answers[c]);
    LVec hidden = affine(w("head.hidden.weight"), w("head.hidden.bias"), x);
    for (auto& h : hidden) h = std::max(h, 0.0L);
    raw[c] = logistic(affine(w("head.output.weight"), w("head.output.bias"), hidden)[0]);
  }
  const LVec probs = softmax(raw);
  long double loss = -std::log(std::max(probs[s.label], static_cast<long double>(kLogFloor)));
  loss += static_cast<long double>(v.l2) * squares(w("head.output.weight"));
  if (v.encoder_l2 > 0.0) {
    model.visit_parameters([&](const std::string& name, const Parameter& p) {
      if (name.starts_with("head.") || name == "embedding.oov") return;
      if (name.ends_with(".b") || name.ends_with(".bias")) return;
      loss += static_cast<long double>(v.encoder_l2) * squares(p.value);
    });
  }
  return loss;
}

}  // namespace mcvqa

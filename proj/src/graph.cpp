#include "mcvqa/graph.hpp"

#include <algorithm>
#include <cmath>

#include "mcvqa/errors.hpp"

namespace mcvqa {

const Tensor& Var::value() const { return graph->value(id); }

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::softmax: return "softmax";
  }
  return "?";
}

Var Graph::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), nullptr, {}, nullptr, false, false, {}});
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::constant(std::span<const double> values) {
  return constant(Tensor::vector(std::vector<double>(values.begin(), values.end())));
}

Var Graph::parameter(const Parameter& p) {
  if (!record_) return view(p.value);
  nodes_.push_back(Node{{}, &p.value, {}, &p.grad, true, false, {}});
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Graph::view(const Tensor& t) {
  nodes_.push_back(Node{{}, &t, {}, nullptr, false, false, {}});
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

const Tensor& Graph::value(std::uint32_t id) const {
  const Node& n = nodes_[id];
  return n.alias ? *n.alias : n.value;
}

Tensor& Graph::grad(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.alias_grad) {
    n.has_grad = true;
    return *n.alias_grad;
  }
  if (!n.has_grad) {
    n.grad = Tensor::zeros_like(n.value);
    n.has_grad = true;
  }
  return n.grad;
}

Var Graph::push(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn) {
  return push(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(fn));
}

Var Graph::push(Tensor value, std::span<const Var> inputs, BackwardFn fn) {
  bool needs = false;
  if (record_) {
    for (const Var& v : inputs) {
      if (v.graph != this) throw Error("graph operation mixes variables from different graphs");
      needs = needs || nodes_[v.id].requires_grad;
    }
  }
  nodes_.push_back(Node{std::move(value), nullptr, {}, nullptr, needs, false, needs ? std::move(fn) : BackwardFn{}});
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

void Graph::backward(Var root, double seed) {
  if (!record_) throw Error("backward() on a graph built without recording");
  require_size(value(root).size(), 1, "backward root");
  if (!nodes_[root.id].requires_grad) return;
  grad(root.id)[0] += seed;
  for (std::int64_t id = root.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.has_grad && n.backward) n.backward(*this);
  }
}

namespace {

Graph& graph_of(Var v) { return *v.graph; }

// Elementwise unary op whose derivative is expressible from the output.
template <class F, class D>
Var unary(Var a, F f, D dydx_from_y) {
  Graph& g = graph_of(a);
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  std::uint32_t in = a.id;
  std::uint32_t out = static_cast<std::uint32_t>(g.node_count());
  return g.push(std::move(y), {a}, [in, out, dydx_from_y](Graph& gr) {
    const Tensor& yv = gr.value(out);
    const Tensor& gy = gr.grad(out);
    Tensor& gx = gr.grad(in);
    for (std::size_t i = 0; i < yv.size(); ++i) gx[i] += gy[i] * dydx_from_y(yv[i]);
  });
}

std::uint32_t next_id(Var a) { return static_cast<std::uint32_t>(a.graph->node_count()); }

}  // namespace

Var matvec(Var m, Var x) {
  Graph& g = graph_of(m);
  const Tensor& M = m.value();
  const Tensor& X = x.value();
  const std::size_t cols = X.size();
  if (M.size() % cols != 0 || (M.rank() >= 2 && M.shape().back() != cols)) {
    throw DimensionError("matvec: matrix " + shape_string(M.shape()) + " incompatible with vector of length " +
                         std::to_string(cols));
  }
  const std::size_t rows = M.size() / cols;
  Tensor y(Shape{rows});
  const double* mp = M.data().data();
  const double* xp = X.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    const double* row = mp + r * cols;
    for (std::size_t c = 0; c < cols; ++c) s += row[c] * xp[c];
    y[r] = s;
  }
  std::uint32_t mi = m.id, xi = x.id, out = next_id(m);
  return g.push(std::move(y), {m, x}, [mi, xi, out, rows, cols](Graph& gr) {
    const Tensor& gy = gr.grad(out);
    const double* mp = gr.value(mi).data().data();
    const double* xp = gr.value(xi).data().data();
    if (gr.requires_grad(Var{&gr, mi})) {
      double* gm = gr.grad(mi).data().data();
      for (std::size_t r = 0; r < rows; ++r) {
        const double d = gy[r];
        if (d == 0.0) continue;
        double* row = gm + r * cols;
        for (std::size_t c = 0; c < cols; ++c) row[c] += d * xp[c];
      }
    }
    if (gr.requires_grad(Var{&gr, xi})) {
      double* gx = gr.grad(xi).data().data();
      for (std::size_t r = 0; r < rows; ++r) {
        const double d = gy[r];
        if (d == 0.0) continue;
        const double* row = mp + r * cols;
        for (std::size_t c = 0; c < cols; ++c) gx[c] += d * row[c];
      }
    }
  });
}

Var matvec_t(Var m, Var x) {
  Graph& g = graph_of(m);
  const Tensor& M = m.value();
  const Tensor& X = x.value();
  const std::size_t rows = X.size();
  if (M.size() % rows != 0 || (M.rank() == 2 && M.shape()[0] != rows)) {
    throw DimensionError("matvec_t: matrix " + shape_string(M.shape()) + " incompatible with vector of length " +
                         std::to_string(rows));
  }
  const std::size_t cols = M.size() / rows;
  Tensor y(Shape{cols});
  for (std::size_t r = 0; r < rows; ++r) {
    const double xr = X[r];
    for (std::size_t c = 0; c < cols; ++c) y[c] += M[r * cols + c] * xr;
  }
  std::uint32_t mi = m.id, xi = x.id, out = next_id(m);
  return g.push(std::move(y), {m, x}, [mi, xi, out, rows, cols](Graph& gr) {
    const Tensor& gy = gr.grad(out);
    const Tensor& Mv = gr.value(mi);
    const Tensor& Xv = gr.value(xi);
    if (gr.requires_grad(Var{&gr, mi})) {
      Tensor& gm = gr.grad(mi);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) gm[r * cols + c] += Xv[r] * gy[c];
    }
    if (gr.requires_grad(Var{&gr, xi})) {
      Tensor& gx = gr.grad(xi);
      for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < cols; ++c) s += Mv[r * cols + c] * gy[c];
        gx[r] += s;
      }
    }
  });
}

Var add(Var a, Var b) {
  Graph& g = graph_of(a);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_size(B.size(), A.size(), "add");
  Tensor y(Shape{A.size()});
  for (std::size_t i = 0; i < A.size(); ++i) y[i] = A[i] + B[i];
  std::uint32_t ai = a.id, bi = b.id, out = next_id(a);
  return g.push(std::move(y), {a, b}, [ai, bi, out](Graph& gr) {
    const Tensor& gy = gr.grad(out);
    for (std::uint32_t in : {ai, bi}) {
      if (!gr.requires_grad(Var{&gr, in})) continue;
      Tensor& gx = gr.grad(in);
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
    }
  });
}

Var add_broadcast(Var a, Var s) {
  Graph& g = graph_of(a);
  const Tensor& A = a.value();
  require_size(s.value().size(), 1, "add_broadcast scalar");
  const double sv = s.value()[0];
  Tensor y(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) y[i] = A[i] + sv;
  std::uint32_t ai = a.id, si = s.id, out = next_id(a);
  return g.push(std::move(y), {a, s}, [ai, si, out](Graph& gr) {
    const Tensor& gy = gr.grad(out);
    if (gr.requires_grad(Var{&gr, ai})) {
      Tensor& gx = gr.grad(ai);
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
    }
    if (gr.requires_grad(Var{&gr, si})) {
      double t = 0.0;
      for (std::size_t i = 0; i < gy.size(); ++i) t += gy[i];
      gr.grad(si)[0] += t;
    }
  });
}

Var mul(Var a, Var b) {
  Graph& g = graph_of(a);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_size(B.size(), A.size(), "mul");
  Tensor y(Shape{A.size()});
  for (std::size_t i = 0; i < A.size(); ++i) y[i] = A[i] * B[i];
  std::uint32_t ai = a.id, bi = b.id, out = next_id(a);
  return g.push(std::move(y), {a, b}, [ai, bi, out](Graph& gr) {
    const Tensor& gy = gr.grad(out);
    if (gr.requires_grad(Var{&gr, ai})) {
      const Tensor& Bv = gr.value(bi);
      Tensor& gx = gr.grad(ai);
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * Bv[i];
    }
    if (gr.requires_grad(Var{&gr, bi})) {
      const Tensor& Av = gr.value(ai);
      Tensor& gx = gr.grad(bi);
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * Av[i];
    }
  });
}

Var mul_const(Var a, std::vector<double> mask) {
  Graph& g = graph_of(a);
  const Tensor& A = a.value();
  require_size(mask.size(), A.size(), "mul_const mask");
  Tensor y(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) y[i] = A[i] * mask[i];
  std::uint32_t ai = a.id, out = next_id(a);
  return g.push(std::move(y), {a}, [ai, out, mask = std::move(mask)](Graph& gr) {
    const Tensor& gy = gr.grad(out);
    Tensor& gx = gr.grad(ai);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * mask[i];
  });
}

Var scale(Var a, double factor) {
  return unary(a, [factor](double x) { return x * factor; }, [factor](double) { return factor; });
}

Var relu(Var a) {
  return unary(a, [](double x) { return x < 0.0 ? 0.0 : x; }, [](double y) { return y > 0.0 ? 1.0 : 0.0; });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double y) { return y * (1.0 - y); });
}

Var softmax(Var a) {
  Graph& g = graph_of(a);
  const Tensor& X = a.value();
  Tensor y(Shape{X.size()});
  const double mx = *std::max_element(X.values().begin(), X.values().end());
  for (std::size_t i = 0; i < X.size(); ++i) y[i] = std::exp(X[i] - mx);
  // Normaliser summed in sorted order, so permuting the input permutes the
  // output exactly.
  std::vector<double> terms(y.values().begin(), y.values().end());
  std::sort(terms.begin(), terms.end());
  double total = 0.0;
  for (double t : terms) total += t;
  for (std::size_t i = 0; i < X.size(); ++i) y[i] /= total;
  std::uint32_t ai = a.id, out = next_id(a);
  return g.push(std::move(y), {a}, [ai, out](Graph& gr) {
    const Tensor& yv = gr.value(out);
    const Tensor& gy = gr.grad(out);
    double dot = 0.0;
    for (std::size_t i = 0; i < yv.size(); ++i) dot += gy[i] * yv[i];
    Tensor& gx = gr.grad(ai);
    for (std::size_t i = 0; i < yv.size(); ++i) gx[i] += yv[i] * (gy[i] - dot);
  });
}

Var activate(Var a, Activation act) {
  switch (act) {
    case Activation::identity: return a;
    case Activation::relu: return relu(a);
    case Activation::tanh: return tanh(a);
    case Activation::sigmoid: return sigmoid(a);
    case Activation::softmax: return softmax(a);
  }
  return a;
}

Var slice(Var a, std::size_t offset, std::size_t length) {
  Graph& g = graph_of(a);
  const Tensor& X = a.value();
  if (length == 0 || offset + length > X.size()) {
    throw DimensionError("slice [" + std::to_string(offset) + ", " + std::to_string(offset + length) +
                         ") out of range for length " + std::to_string(X.size()));
  }
  Tensor y(Shape{length}, std::vector<double>(X.values().begin() + offset, X.values().begin() + offset + length));
  std::uint32_t ai = a.id, out = next_id(a);
  return g.push(std::move(y), {a}, [ai, out, offset](Graph& gr) {
    const Tensor& gy = gr.grad(out);
    Tensor& gx = gr.grad(ai);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[offset + i] += gy[i];
  });
}

Var concat(std::initializer_list<Var> parts) { return concat(std::span<const Var>(parts.begin(), parts.size())); }

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat of zero parts");
  Graph& g = graph_of(parts[0]);
  std::vector<double> out;
  std::vector<std::pair<std::uint32_t, std::size_t>> spans;
  for (const Var& p : parts) {
    spans.emplace_back(p.id, out.size());
    const auto& v = p.value().values();
    out.insert(out.end(), v.begin(), v.end());
  }
  std::uint32_t oi = next_id(parts[0]);
  return g.push(Tensor::vector(std::move(out)), parts, [oi, spans = std::move(spans)](Graph& gr) {
    const Tensor& gy = gr.grad(oi);
    for (auto [id, off] : spans) {
      if (!gr.requires_grad(Var{&gr, id})) continue;
      Tensor& gx = gr.grad(id);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[off + i];
    }
  });
}

Var mean(std::span<const Var> parts) {
  if (parts.empty()) throw EmptySequenceError("mean of zero vectors");
  Graph& g = graph_of(parts[0]);
  const std::size_t n = parts[0].size();
  Tensor y(Shape{n});
  for (const Var& p : parts) {
    require_size(p.size(), n, "mean operand");
    for (std::size_t i = 0; i < n; ++i) y[i] += p[i];
  }
  const double inv = 1.0 / static_cast<double>(parts.size());
  for (std::size_t i = 0; i < n; ++i) y[i] *= inv;
  std::vector<std::uint32_t> ids;
  for (const Var& p : parts) ids.push_back(p.id);
  std::uint32_t out = next_id(parts[0]);
  return g.push(std::move(y), parts, [ids = std::move(ids), out, inv](Graph& gr) {
    const Tensor& gy = gr.grad(out);
    for (auto id : ids) {
      if (!gr.requires_grad(Var{&gr, id})) continue;
      Tensor& gx = gr.grad(id);
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * inv;
    }
  });
}

Var sum(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("sum of zero scalars");
  Graph& g = graph_of(parts[0]);
  double s = 0.0;
  std::vector<std::uint32_t> ids;
  for (const Var& p : parts) {
    require_size(p.size(), 1, "sum operand");
    s += p[0];
    ids.push_back(p.id);
  }
  std::uint32_t out = next_id(parts[0]);
  return g.push(Tensor::vector({s}), parts, [ids = std::move(ids), out](Graph& gr) {
    const double gy = gr.grad(out)[0];
    for (auto id : ids)
      if (gr.requires_grad(Var{&gr, id})) gr.grad(id)[0] += gy;
  });
}

Var sum_squares(Var a) {
  Graph& g = graph_of(a);
  double s = 0.0;
  for (double x : a.value().values()) s += x * x;
  std::uint32_t ai = a.id, out = next_id(a);
  return g.push(Tensor::vector({s}), {a}, [ai, out](Graph& gr) {
    const double gy = gr.grad(out)[0];
    const Tensor& x = gr.value(ai);
    Tensor& gx = gr.grad(ai);
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] += 2.0 * x[i] * gy;
  });
}

Var neg_log_at(Var p, std::size_t index, double floor) {
  Graph& g = graph_of(p);
  if (index >= p.size()) throw DimensionError("neg_log_at: index out of range");
  const double pv = p[index];
  const bool clamped = pv <= floor;  // NaN passes through
  const double y = -std::log(clamped ? floor : pv);
  std::uint32_t pi = p.id, out = next_id(p);
  return g.push(Tensor::vector({y}), {p}, [pi, out, index, clamped](Graph& gr) {
    if (clamped) return;
    const double gy = gr.grad(out)[0];
    gr.grad(pi)[index] += -gy / gr.value(pi)[index];
  });
}

Var affine_rows(Var w, Var b, Var x, Var v) {
  Graph& g = graph_of(w);
  const Tensor& W = w.value();
  const Tensor& B = b.value();
  const Tensor& X = x.value();
  const Tensor& V = v.value();
  const std::size_t out_dim = B.size();
  if (W.size() % out_dim != 0) throw DimensionError("affine_rows: weight/bias mismatch");
  const std::size_t in_dim = W.size() / out_dim;
  if (in_dim <= V.size()) throw DimensionError("affine_rows: shared suffix leaves no row features");
  const std::size_t p = in_dim - V.size();
  if (X.size() % p != 0) {
    throw DimensionError("affine_rows: rows of length " + std::to_string(p) + " do not tile " +
                         shape_string(X.shape()));
  }
  const std::size_t n = X.size() / p;
  const std::size_t q = V.size();
  // Shared part W[:, p:]·v + b is common to all rows.
  std::vector<double> shared(out_dim);
  for (std::size_t o = 0; o < out_dim; ++o) {
    double s = B[o];
    const double* wr = W.data().data() + o * in_dim + p;
    for (std::size_t k = 0; k < q; ++k) s += wr[k] * V[k];
    shared[o] = s;
  }
  Tensor y(Shape{n, out_dim});
  for (std::size_t j = 0; j < n; ++j) {
    const double* xr = X.data().data() + j * p;
    for (std::size_t o = 0; o < out_dim; ++o) {
      const double* wr = W.data().data() + o * in_dim;
      double s = shared[o];
      for (std::size_t k = 0; k < p; ++k) s += wr[k] * xr[k];
      y.at(j, o) = s;
    }
  }
  std::uint32_t wi = w.id, bi = b.id, xi = x.id, vi = v.id, out = next_id(w);
  return g.push(std::move(y), {w, b, x, v}, [=](Graph& gr) {
    const Tensor& gy = gr.grad(out);
    const Tensor& Wv = gr.value(wi);
    const Tensor& Xv = gr.value(xi);
    const Tensor& Vv = gr.value(vi);
    std::vector<double> col_sum(out_dim, 0.0);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t o = 0; o < out_dim; ++o) col_sum[o] += gy.at(j, o);
    if (gr.requires_grad(Var{&gr, wi})) {
      Tensor& gw = gr.grad(wi);
      for (std::size_t o = 0; o < out_dim; ++o) {
        double* gr_row = gw.data().data() + o * in_dim;
        for (std::size_t j = 0; j < n; ++j) {
          const double d = gy.at(j, o);
          if (d == 0.0) continue;
          const double* xr = Xv.data().data() + j * p;
          for (std::size_t k = 0; k < p; ++k) gr_row[k] += d * xr[k];
        }
        for (std::size_t k = 0; k < q; ++k) gr_row[p + k] += col_sum[o] * Vv[k];
      }
    }
    if (gr.requires_grad(Var{&gr, bi})) {
      Tensor& gb = gr.grad(bi);
      for (std::size_t o = 0; o < out_dim; ++o) gb[o] += col_sum[o];
    }
    if (gr.requires_grad(Var{&gr, vi})) {
      Tensor& gv = gr.grad(vi);
      for (std::size_t o = 0; o < out_dim; ++o) {
        const double* wr = Wv.data().data() + o * in_dim + p;
        for (std::size_t k = 0; k < q; ++k) gv[k] += col_sum[o] * wr[k];
      }
    }
    if (gr.requires_grad(Var{&gr, xi})) {
      Tensor& gx = gr.grad(xi);
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t o = 0; o < out_dim; ++o) {
          const double d = gy.at(j, o);
          const double* wr = Wv.data().data() + o * in_dim;
          for (std::size_t k = 0; k < p; ++k) gx[j * p + k] += d * wr[k];
        }
    }
  });
}

namespace {

inline double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var lstm_cell(Var w, Var u, Var b, Var x, Var h, Var c) {
  Graph& g = graph_of(w);
  const Tensor& W = w.value();
  const Tensor& U = u.value();
  const Tensor& B = b.value();
  const Tensor& X = x.value();
  const Tensor& H = h.value();
  const Tensor& C = c.value();
  const std::size_t hs = H.size();
  const std::size_t in = X.size();
  require_size(C.size(), hs, "lstm cell state");
  require_size(B.size(), 4 * hs, "lstm bias");
  require_size(W.size(), 4 * hs * in, "lstm input weights");
  require_size(U.size(), 4 * hs * hs, "lstm recurrent weights");

  // gates = [i f g o] after their nonlinearities.
  std::vector<double> gates(4 * hs);
  const double* wp = W.data().data();
  const double* up = U.data().data();
  for (std::size_t r = 0; r < 4 * hs; ++r) {
    double z = B[r];
    const double* wr = wp + r * in;
    for (std::size_t k = 0; k < in; ++k) z += wr[k] * X[k];
    const double* ur = up + r * hs;
    for (std::size_t k = 0; k < hs; ++k) z += ur[k] * H[k];
    gates[r] = (r >= 2 * hs && r < 3 * hs) ? std::tanh(z) : logistic(z);
  }
  Tensor y(Shape{2 * hs});
  std::vector<double> tanh_c(hs);
  for (std::size_t k = 0; k < hs; ++k) {
    const double ig = gates[k], fg = gates[hs + k], cg = gates[2 * hs + k], og = gates[3 * hs + k];
    const double cn = fg * C[k] + ig * cg;
    tanh_c[k] = std::tanh(cn);
    y[hs + k] = cn;
    y[k] = og * tanh_c[k];
  }
  std::uint32_t wi = w.id, ui = u.id, bi = b.id, xi = x.id, hi = h.id, ci = c.id, out = next_id(w);
  return g.push(std::move(y), {w, u, b, x, h, c},
                [=, gates = std::move(gates), tanh_c = std::move(tanh_c)](Graph& gr) {
                  const Tensor& gy = gr.grad(out);
                  const Tensor& Cv = gr.value(ci);
                  const Tensor& Xv = gr.value(xi);
                  const Tensor& Hv = gr.value(hi);
                  std::vector<double> dz(4 * hs);
                  std::vector<double> dc_prev(hs);
                  for (std::size_t k = 0; k < hs; ++k) {
                    const double ig = gates[k], fg = gates[hs + k], cg = gates[2 * hs + k], og = gates[3 * hs + k];
                    const double dh = gy[k];
                    const double dc = gy[hs + k] + dh * og * (1.0 - tanh_c[k] * tanh_c[k]);
                    dz[k] = dc * cg * ig * (1.0 - ig);
                    dz[hs + k] = dc * Cv[k] * fg * (1.0 - fg);
                    dz[2 * hs + k] = dc * ig * (1.0 - cg * cg);
                    dz[3 * hs + k] = dh * tanh_c[k] * og * (1.0 - og);
                    dc_prev[k] = dc * fg;
                  }
                  if (gr.requires_grad(Var{&gr, wi})) {
                    double* gw = gr.grad(wi).data().data();
                    for (std::size_t r = 0; r < 4 * hs; ++r) {
                      const double d = dz[r];
                      if (d == 0.0) continue;
                      double* row = gw + r * in;
                      for (std::size_t k = 0; k < in; ++k) row[k] += d * Xv[k];
                    }
                  }
                  if (gr.requires_grad(Var{&gr, ui})) {
                    double* gu = gr.grad(ui).data().data();
                    for (std::size_t r = 0; r < 4 * hs; ++r) {
                      const double d = dz[r];
                      if (d == 0.0) continue;
                      double* row = gu + r * hs;
                      for (std::size_t k = 0; k < hs; ++k) row[k] += d * Hv[k];
                    }
                  }
                  if (gr.requires_grad(Var{&gr, bi})) {
                    Tensor& gb = gr.grad(bi);
                    for (std::size_t r = 0; r < 4 * hs; ++r) gb[r] += dz[r];
                  }
                  if (gr.requires_grad(Var{&gr, xi})) {
                    const double* wp = gr.value(wi).data().data();
                    Tensor& gx = gr.grad(xi);
                    for (std::size_t r = 0; r < 4 * hs; ++r) {
                      const double d = dz[r];
                      if (d == 0.0) continue;
                      const double* row = wp + r * in;
                      for (std::size_t k = 0; k < in; ++k) gx[k] += d * row[k];
                    }
                  }
                  if (gr.requires_grad(Var{&gr, hi})) {
                    const double* up = gr.value(ui).data().data();
                    Tensor& gh = gr.grad(hi);
                    for (std::size_t r = 0; r < 4 * hs; ++r) {
                      const double d = dz[r];
                      if (d == 0.0) continue;
                      const double* row = up + r * hs;
                      for (std::size_t k = 0; k < hs; ++k) gh[k] += d * row[k];
                    }
                  }
                  if (gr.requires_grad(Var{&gr, ci})) {
                    Tensor& gc = gr.grad(ci);
                    for (std::size_t k = 0; k < hs; ++k) gc[k] += dc_prev[k];
                  }
                });
}

}  // namespace mcvqa

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mcvqa/tensor.hpp"

namespace mcvqa {

/// A trainable tensor together with its accumulated gradient. The gradient
/// is an accumulator, not part of the logical value, hence `mutable`.
struct Parameter {
  Tensor value;
  mutable Tensor grad;

  Parameter() = default;
  explicit Parameter(Shape shape) : value(shape), grad(std::move(shape)) {}
  explicit Parameter(Tensor v) : value(std::move(v)), grad(Tensor::zeros_like(value)) {}

  void zero_grad() const { grad.fill(0.0); }
};

class Graph;

/// Handle to a node of a Graph. Cheap to copy; only valid while its graph lives.
struct Var {
  Graph* graph = nullptr;
  std::uint32_t id = 0;

  const Tensor& value() const;
  std::size_t size() const { return value().size(); }
  double operator[](std::size_t i) const { return value()[i]; }
};

/// Tape for reverse-mode differentiation. Nodes are appended in evaluation
/// order, so reverse insertion order is a valid topological order.
///
/// Parameter nodes alias their Parameter: no copy of the value is made and
/// backward() accumulates straight into Parameter::grad.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&)>;

  /// With `record == false` no backward closures are kept (evaluation mode).
  explicit Graph(bool record = true) : record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  Var constant(std::span<const double> values);
  /// Trainable leaf when recording, otherwise a read-only view.
  Var parameter(const Parameter& p);
  /// Read-only alias of an external tensor; must outlive the graph.
  Var view(const Tensor& t);

  const Tensor& value(Var v) const { return value(v.id); }
  const Tensor& value(std::uint32_t id) const;
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  bool recording() const noexcept { return record_; }
  std::size_t node_count() const noexcept { return nodes_.size(); }

  /// Gradient buffer of node `id`, zero-allocated on first use.
  Tensor& grad(std::uint32_t id);

  /// Seeds d(root)/d(root) = `seed` for a one-element root and propagates.
  void backward(Var root, double seed = 1.0);

  /// Appends a computed node. `inputs` decide whether it requires grad;
  /// `fn` is dropped when no input does or when not recording.
  Var push(Tensor value, std::initializer_list<Var> inputs, BackwardFn fn);
  Var push(Tensor value, std::span<const Var> inputs, BackwardFn fn);

 private:
  struct Node {
    Tensor value;
    const Tensor* alias = nullptr;
    Tensor grad;
    Tensor* alias_grad = nullptr;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
  };

  bool record_;
  std::vector<Node> nodes_;
};

enum class Activation { identity, relu, tanh, sigmoid, softmax };

const char* activation_name(Activation a);

// Differentiable operations. All inputs must belong to the same graph.

/// M·x for M of shape [rows × cols] (rank-1 M is a single row) and |x| = cols.
Var matvec(Var m, Var x);
/// Mᵀ·x for M of shape [rows × cols] and |x| = rows.
Var matvec_t(Var m, Var x);
Var add(Var a, Var b);
/// a + s·1 for a one-element `s`.
Var add_broadcast(Var a, Var s);
Var mul(Var a, Var b);
/// Elementwise product with a constant mask (dropout).
Var mul_const(Var a, std::vector<double> mask);
Var scale(Var a, double factor);
Var relu(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var softmax(Var a);
Var activate(Var a, Activation act);
Var slice(Var a, std::size_t offset, std::size_t length);
Var concat(std::span<const Var> parts);
Var concat(std::initializer_list<Var> parts);
/// Elementwise mean of equally sized vectors.
Var mean(std::span<const Var> parts);
/// Sum of one-element scalars.
Var sum(std::span<const Var> parts);
/// Σ aᵢ² as a one-element tensor.
Var sum_squares(Var a);
/// −ln(max(p[index], floor)); the gradient is zero when the floor is active.
Var neg_log_at(Var p, std::size_t index, double floor);

/// Row-wise affine map over a matrix with a shared suffix: row j of the
/// result is W·[X_j ; v] + b, giving a [n × out] matrix for X of shape [n × p]
/// and W of shape [out × (p + |v|)].
Var affine_rows(Var w, Var b, Var x, Var v);

/// Fused LSTM step. W: [4h × in], U: [4h × h], b: [4h]. Gate blocks are
/// ordered (input, forget, candidate, output). Returns [h' ; c'] of length 2h.
Var lstm_cell(Var w, Var u, Var b, Var x, Var h, Var c);

}  // namespace mcvqa

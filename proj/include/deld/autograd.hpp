#pragma once

// Tape-based reverse-mode differentiation over Tensor values.
//
// A Graph records every op applied to its Vars. Nodes whose inputs carry no
// trainable parameter are recorded without a backward closure, so forward
// passes over a frozen model cost no more than plain evaluation. backward()
// walks the tape once in reverse and accumulates into Parameter::grad of
// every trainable parameter reachable from the loss; frozen parameters never
// receive gradient.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "deld/tensor.hpp"

namespace deld {

class Graph;

class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const;
  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

class Graph {
 public:
  // Receives the gradient flowing into the node's output.
  using BackwardFn = std::function<void(Graph&, const Tensor& out_grad)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  // Leaves reference the parameter's storage directly; the parameter must
  // outlive the graph and must not be stepped before backward() runs.
  Var param(const Parameter& p);

  // Appends an op node. `fn` is dropped when no input requires grad.
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn fn);

  // Populates Parameter::grad for every trainable parameter reachable from
  // `loss`. The loss must be a single element. A graph can be differentiated
  // once.
  void backward(Var loss);

  const Tensor& value(Var v) const { return *nodes_[v.id_].value; }
  bool requires_grad(Var v) const { return nodes_[v.id_].requires_grad; }

  // Gradient buffer for `v`, zero-initialised on first access. Backward
  // closures accumulate into the buffers of their inputs through this.
  Tensor& grad(Var v);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    // Points at `owned` for op outputs and at Parameter::value for leaves.
    const Tensor* value = nullptr;
    std::unique_ptr<Tensor> owned;
    Tensor grad;
    bool requires_grad = false;
    const Parameter* param = nullptr;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  bool differentiated_ = false;
};

// ---- differentiable ops ---------------------------------------------------

Var matmul(Var a, Var b);     // [r x s] * [s x t]
Var matmul_nt(Var a, Var b);  // [r x s] * [t x s]^T
Var add(Var a, Var b);
Var add_row(Var x, Var bias);  // bias broadcast over rows
Var scale(Var x, double factor);

Var softmax_rows(Var x);
// Attention variant over a square score matrix: entries whose column is masked
// out get exactly zero weight, and rows whose own position is masked out are
// all zero. `mask[i] == true` marks a real position.
Var softmax_rows(Var x, const std::vector<bool>& mask);

Var layer_norm(Var x, Var gamma, Var beta, double eps);
Var gelu(Var x);
Var sigmoid(Var x);

Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var slice_rows(Var x, std::size_t begin, std::size_t count);
Var slice_cols(Var x, std::size_t begin, std::size_t count);
Var gather_rows(Var table, std::span<const int> ids);
Var mean_rows(Var x, std::span<const std::size_t> rows);
Var sum(Var x);

// Binary cross-entropy of a single probability against a 0/1 label. The
// probability is clamped into [1e-12, 1 - 1e-12] before the log.
Var bce_loss(Var probability, int label);

// Mean softmax cross-entropy of each logits row against its target column.
// With zero rows the loss is the constant 0.
Var cross_entropy_rows(Var logits, std::span<const int> targets);

// ---- plain tensor helpers (no recording) ---------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor softmax_rows(const Tensor& x);
double gelu(double x);

constexpr double kProbabilityClamp = 1e-12;
double bce_value(double probability, int label);

}  // namespace deld

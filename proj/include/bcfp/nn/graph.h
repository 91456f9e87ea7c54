#ifndef BCFP_NN_GRAPH_H_
#define BCFP_NN_GRAPH_H_

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "bcfp/nn/matrix.h"

namespace bcfp::nn {

// A trainable tensor with its gradient accumulator and Adam moments.
struct Parameter {
  Parameter(std::string name, Matrix init);

  void ZeroGrad() { grad.setZero(); }

  std::string name;
  Matrix value;
  Matrix grad;
  Matrix m;
  Matrix v;
  int64_t step = 0;
};

// Handle to a node in a Graph.
struct Var {
  int32_t id = -1;
};

class Graph;
// Receives the gradient flowing into the node being differentiated.
using BackwardFn = std::function<void(Graph&, const Matrix& dy)>;

// Tape for reverse-mode differentiation. Nodes are appended in evaluation
// order, so Backward() walks them in reverse. A Graph is used by one thread.
class Graph {
 public:
  // With |grad_enabled| false, nothing records a backward rule; used for
  // inference over shared parameters.
  explicit Graph(bool grad_enabled = true);
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaf that never receives a gradient.
  Var Constant(Matrix value);
  // Differentiable leaf with a gradient readable through grad().
  Var Input(Matrix value);
  // Leaf that reads p.value in place. Its gradient accumulates directly into
  // p.grad, across Backward() calls, until the caller zeroes it.
  Var Param(Parameter& p);

  // Records an op result. |backward| runs only if some parent needs a
  // gradient. Throws kNonFiniteValue if |value| has NaN/Inf.
  Var Emit(const char* op, Matrix value, std::span<const Var> parents,
           BackwardFn backward);
  Var Emit(const char* op, Matrix value, std::initializer_list<Var> parents,
           BackwardFn backward) {
    return Emit(op, std::move(value),
                std::span<const Var>(parents.begin(), parents.size()),
                std::move(backward));
  }

  // Handle the next Emit() will return; lets a backward rule read its own
  // output without copying it.
  Var NextVar() const { return {static_cast<int32_t>(nodes_.size())}; }

  const Matrix& value(Var v) const {
    const Node& n = nodes_[Index(v)];
    return n.param ? n.param->value : n.value;
  }
  bool requires_grad(Var v) const { return nodes_[Index(v)].requires_grad; }

  // Gradient of the last Backward() root w.r.t. |v| (zeros if untouched).
  const Matrix& grad(Var v);
  // Accumulation target used by backward rules.
  Matrix& mutable_grad(Var v);

  // |root| must be 1x1. Seeds d(root)/d(root) = |seed|.
  void Backward(Var root, double seed = 1.0);

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool has_grad = false;
    Parameter* param = nullptr;
    BackwardFn backward;
  };

  size_t Index(Var v) const;

  bool grad_enabled_ = true;
  // Deque so references from value() survive later Emit calls.
  std::deque<Node> nodes_;
};

}  // namespace bcfp::nn

#endif  // BCFP_NN_GRAPH_H_

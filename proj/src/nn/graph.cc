#include "bcfp/nn/graph.h"

#include <cmath>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "bcfp/error.h"

namespace bcfp::nn {

Parameter::Parameter(std::string name_in, Matrix init)
    : name(std::move(name_in)), value(std::move(init)) {
  grad = Matrix::Zero(value.rows(), value.cols());
  m = Matrix::Zero(value.rows(), value.cols());
  v = Matrix::Zero(value.rows(), value.cols());
}

size_t Graph::Index(Var v) const {
  if (v.id < 0 || static_cast<size_t>(v.id) >= nodes_.size())
    Fail(ErrorCode::kInvalidArgument, "invalid graph variable");
  return static_cast<size_t>(v.id);
}

Var Graph::Constant(Matrix value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return {static_cast<int32_t>(nodes_.size() - 1)};
}

Var Graph::Input(Matrix value) {
  Var v = Constant(std::move(value));
  nodes_.back().requires_grad = grad_enabled_;
  return v;
}

Var Graph::Param(Parameter& p) {
  Node node;
  node.param = &p;
  node.requires_grad = grad_enabled_;
  nodes_.push_back(std::move(node));
  return {static_cast<int32_t>(nodes_.size() - 1)};
}

namespace {

// x * 0 is NaN exactly when x is NaN or infinite; the vectorized sum
// propagates it. Much faster than Eigen's allFinite.
bool AllFinite(const Matrix& m) {
  return m.size() == 0 || std::isfinite((m.array() * 0.0).sum());
}

// Graph activations are large, short-lived buffers. glibc's default serves
// them with mmap and returns them on free, so every step page-faults afresh.
void KeepLargeBlocksInHeap() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace

Graph::Graph(bool grad_enabled) : grad_enabled_(grad_enabled) {
  static const bool tuned = (KeepLargeBlocksInHeap(), true);
  (void)tuned;
}

Var Graph::Emit(const char* op, Matrix value, std::span<const Var> parents,
                BackwardFn backward) {
  if (!AllFinite(value))
    Fail(ErrorCode::kNonFiniteValue, std::string("output of ") + op);
  Node node;
  node.value = std::move(value);
  for (Var p : parents)
    node.requires_grad = node.requires_grad || requires_grad(p);
  node.requires_grad = node.requires_grad && grad_enabled_;
  if (node.requires_grad)
    node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return {static_cast<int32_t>(nodes_.size() - 1)};
}

Matrix& Graph::mutable_grad(Var v) {
  Node& node = nodes_[Index(v)];
  if (node.param)
    return node.param->grad;
  if (!node.has_grad) {
    node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
    node.has_grad = true;
  }
  return node.grad;
}

const Matrix& Graph::grad(Var v) {
  return mutable_grad(v);
}

void Graph::Backward(Var root, double seed) {
  const size_t r = Index(root);
  if (nodes_[r].value.size() != 1)
    Fail(ErrorCode::kShapeMismatch, "backward root must be a scalar");
  for (Node& node : nodes_) {
    node.has_grad = false;
  }
  mutable_grad(root)(0, 0) = seed;
  for (size_t i = r + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.requires_grad || !node.has_grad)
      continue;
    if (node.backward)
      node.backward(*this, node.grad);
  }
}

}  // namespace bcfp::nn

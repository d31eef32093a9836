// Reverse-mode differentiation over a fixed primitive vocabulary. A Tape is
// rebuilt per training step (dynamic graph); parameters live in a ParamStore
// outside the tape and are looked up by name, so one parameter used several
// times in a graph accumulates gradient from every use.

#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "protshape/nn/tensor.hpp"

namespace protshape::nn {

struct ParamStore {
  std::map<std::string, Tensor> tensors;  // ordered; deterministic iteration

  Tensor& at(const std::string& name) { return tensors.at(name); }
  const Tensor& at(const std::string& name) const { return tensors.at(name); }
  bool contains(const std::string& name) const { return tensors.count(name) > 0; }
};

using NodeId = int;
using GradMap = std::map<std::string, Tensor>;

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaves.
  NodeId constant(Tensor t);
  NodeId param(ParamStore& store, const std::string& name);

  // Primitives. Shapes are checked at graph-build time (ShapeMismatch).
  NodeId dense(NodeId x, NodeId w, NodeId b);        // [B,in]|[in] x [in,out] + [out]
  NodeId conv1d(NodeId x, NodeId k, NodeId b);       // [Cin,T] * [Cout,Cin,k] + [Cout], stride 1, same
  NodeId elu(NodeId x);                              // alpha = 1
  NodeId relu(NodeId x);
  NodeId cumsum(NodeId x);                           // inclusive, 1-d
  NodeId concat(const std::vector<NodeId>& xs);      // along axis 0
  NodeId add(NodeId a, NodeId b);
  NodeId scale(NodeId x, double c);
  NodeId pointwise_mul(NodeId a, NodeId b);
  NodeId l2_loss(NodeId x, NodeId y);                // sum of squared differences
  NodeId normalize_to_unit_sphere(NodeId x);         // x / |x|_2 over all entries
  NodeId sqrt_elem(NodeId x);                        // sqrt(max(x,0)); zero grad at x <= 0
  NodeId recip(NodeId x);
  NodeId slice(NodeId x, std::size_t start, std::size_t len);  // 1-d
  NodeId broadcast_scalar(NodeId x, std::size_t n);  // [1] -> [n]
  NodeId rowmul(NodeId x, NodeId s);                 // [C,K] * [K] row-wise
  NodeId reshape(NodeId x, std::vector<std::size_t> shape);
  // Piecewise-linear interpolation of `values` ([M] or [C,M], nodes at
  // x_max*j/(M-1)) at `positions` ([K]); differentiable in both arguments.
  // Positions outside [0, x_max] clamp to the boundary value with zero
  // position gradient.
  NodeId linear_interp(NodeId values, NodeId positions, double x_max);
  // Forward-difference derivative of a warp sampled at T+1 nodes; output
  // lives on the T left-endpoint grid, matching apply_warp's convention.
  NodeId grid_derivative(NodeId warp);

  const Tensor& value(NodeId id) const { return nodes_[id].val; }
  // Valid after backward(); zero tensor for nodes the loss does not reach.
  const Tensor& grad(NodeId id);

  // Reverse sweep from a scalar loss. Throws NonScalarLoss otherwise.
  // Repeated calls recompute gradients from scratch.
  void backward(NodeId loss);

  // Gradients of every parameter referenced by this tape, keyed by name.
  GradMap param_grads();

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor val;
    Tensor grad;
    std::function<void()> back;  // empty for leaves
  };

  NodeId push(Tensor val, std::function<void()> back = {});
  Tensor& grad_buf(NodeId id);

  std::vector<Node> nodes_;
  std::map<std::string, NodeId> param_nodes_;
};

}  // namespace protshape::nn

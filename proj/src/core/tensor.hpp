#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "core/error.hpp"

namespace cnf::ad {

// Dense row-major tensor of 64-bit floats. `grad` is allocated (zero-filled,
// same extent as `value`) exactly when `requires_grad` is set. Values are
// write-once from the graph's point of view: ops never mutate their inputs.
struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;

  std::int64_t numel() const {
    std::int64_t n = 1;
    for (auto e : shape) n *= e;
    return n;
  }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
  void set_requires_grad(bool on) {
    requires_grad = on;
    grad.assign(on ? value.size() : 0, 0.0);
  }
};

using TensorPtr = std::shared_ptr<Tensor>;

TensorPtr make_tensor(std::vector<std::int64_t> shape, std::vector<double> value,
                      bool requires_grad = false);
TensorPtr zeros(std::vector<std::int64_t> shape, bool requires_grad = false);
TensorPtr full(std::vector<std::int64_t> shape, double v, bool requires_grad = false);
TensorPtr scalar(double v, bool requires_grad = false);

// Recorded computation graph for one forward pass. Construction appends nodes
// in execution order, which is already a topological order, so the backward
// pass is a single reverse sweep. A Graph is single-threaded; independent
// graphs may live on different threads. A graph constructed with
// enable_grad=false runs the same numerics but records nothing, for cheap
// inference paths.
class Graph {
 public:
  explicit Graph(bool enable_grad = true) : enable_grad_(enable_grad) {}

  // Elementwise ops. Binary forms take equal shapes or a one-element operand
  // broadcast against the other.
  TensorPtr add(const TensorPtr& a, const TensorPtr& b);
  TensorPtr sub(const TensorPtr& a, const TensorPtr& b);
  TensorPtr mul(const TensorPtr& a, const TensorPtr& b);
  TensorPtr add(const TensorPtr& a, double b);
  TensorPtr mul(const TensorPtr& a, double b);
  TensorPtr exp(const TensorPtr& a);
  TensorPtr log(const TensorPtr& a);  // strictly positive inputs
  TensorPtr tanh(const TensorPtr& a);
  TensorPtr sigmoid(const TensorPtr& a);
  TensorPtr leaky_relu(const TensorPtr& a, double slope = 0.01);

  // 2-D convolution, stride 1. input C×H×W, kernel O×C×k×k (k odd), bias O.
  // pad < 0 selects the shape-preserving default (k-1)/2.
  TensorPtr conv2d(const TensorPtr& input, const TensorPtr& kernel, const TensorPtr& bias,
                   int pad = -1);

  // Reductions over a set of axes; the reduced axes are dropped from the
  // output shape (an empty shape is a scalar).
  TensorPtr reduce_sum(const TensorPtr& a, std::span<const int> axes);
  TensorPtr reduce_mean(const TensorPtr& a, std::span<const int> axes);
  TensorPtr sum_all(const TensorPtr& a);
  TensorPtr mean_all(const TensorPtr& a);

  // Reshape family: pure rearrangements, adjoints are the inverse moves.
  TensorPtr reshape(const TensorPtr& a, std::vector<std::int64_t> shape);
  TensorPtr concat_channels(std::span<const TensorPtr> parts);
  std::vector<TensorPtr> split_channels(const TensorPtr& a, std::span<const std::int64_t> sizes);
  // 2×2 space-to-depth on C×H×W, block order TL,TR,BL,BR, block index major
  // in the output channel (out channel = b*C + c). depth_to_space inverts it.
  TensorPtr space_to_depth(const TensorPtr& a);
  TensorPtr depth_to_space(const TensorPtr& a);

  // Generic unary hook with caller-supplied value and derivative rules.
  // The named elementwise ops are built on it; tests use it to inject
  // deliberately wrong adjoints. df(x, y) receives input and output values.
  TensorPtr unary_map(const TensorPtr& a, const std::function<double(double)>& f,
                      const std::function<double(double, double)>& df);

  // Reverse sweep from a one-element loss. Grads of tensors produced inside
  // this graph are reset first; grads of external leaves accumulate, so
  // repeated calls add up and an explicit zero_grad is the reset point.
  void backward(const TensorPtr& loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    TensorPtr out;
    std::function<void()> backprop;  // empty for pure rearrangement bookkeeping
  };
  bool enable_grad_ = true;
  std::vector<Node> nodes_;

  bool track(const TensorPtr& a) const { return enable_grad_ && a->requires_grad; }

  TensorPtr binary_op(const TensorPtr& a, const TensorPtr& b, const char* name,
                      const std::function<double(double, double)>& f,
                      const std::function<double(double, double)>& dfa,
                      const std::function<double(double, double)>& dfb);
  void record(TensorPtr out, std::function<void()> backprop);
  friend class ConvOp;
};

// Max over coordinates of |analytic - numeric| / max(1e-12, |analytic| + |numeric|)
// where numeric is the central finite difference of `f` at `point` with the
// given step. `f` must build a one-element output on the provided graph.
using ScalarFn = std::function<TensorPtr(Graph&, const TensorPtr&)>;
double grad_check(const ScalarFn& f, const TensorPtr& point, double step);

}  // namespace cnf::ad

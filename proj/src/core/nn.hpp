#pragma once

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace cnf::nn {

// Shape-preserving 3×3 (or any odd k) convolution with owned parameters.
struct Conv2d {
  ad::TensorPtr weight;  // O×C×k×k
  ad::TensorPtr bias;    // O

  ad::TensorPtr operator()(ad::Graph& g, const ad::TensorPtr& x) const {
    return g.conv2d(x, weight, bias);
  }

  // He-style init: weights ~ N(0, 2 / fan_in), zero bias.
  static Conv2d he_init(std::int64_t in, std::int64_t out, std::int64_t k, Rng& rng) {
    const double std = std::sqrt(2.0 / static_cast<double>(in * k * k));
    std::vector<double> w(static_cast<std::size_t>(out * in * k * k));
    for (auto& v : w) v = std * rng.gaussian();
    return {ad::make_tensor({out, in, k, k}, std::move(w), true), ad::zeros({out}, true)};
  }

  static Conv2d zero_init(std::int64_t in, std::int64_t out, std::int64_t k) {
    return {ad::zeros({out, in, k, k}, true), ad::zeros({out}, true)};
  }

  void collect(std::vector<ad::TensorPtr>& out) const {
    out.push_back(weight);
    out.push_back(bias);
  }
};

// 2×2 mean pooling built from the rearrangement and reduction ops.
inline ad::TensorPtr mean_pool2(ad::Graph& g, const ad::TensorPtr& x) {
  auto s = g.space_to_depth(x);
  const auto c = s->shape[0] / 4, h = s->shape[1], w = s->shape[2];
  auto blocks = g.reshape(s, {4, c, h, w});
  const int axes[] = {0};
  return g.reduce_mean(blocks, axes);
}

// Nearest-neighbour 2× upsampling: duplicate each channel into the four
// block positions and invert the space-to-depth rearrangement.
inline ad::TensorPtr nearest_upsample2(ad::Graph& g, const ad::TensorPtr& x) {
  const ad::TensorPtr reps[] = {x, x, x, x};
  return g.depth_to_space(g.concat_channels(reps));
}

}  // namespace cnf::nn

#pragma once

#include <memory>
#include <string_view>
#include <vector>

#include "core/nn.hpp"
#include "core/tensor.hpp"

namespace cnf::flow {

struct FlowResult {
  ad::TensorPtr z;
  ad::TensorPtr logdet;  // one-element tensor, on the tape when parameters are
};

// One invertible transform. forward maps data to latent and reports
// log|det dz/dy|; inverse is its exact algebraic inverse. The conditioning
// tensor u is a parameter of the bijection and is never transformed; steps
// that ignore it accept a null pointer.
class Step {
 public:
  virtual ~Step() = default;
  virtual FlowResult forward(ad::Graph& g, const ad::TensorPtr& y, const ad::TensorPtr& u) = 0;
  virtual ad::TensorPtr inverse(ad::Graph& g, const ad::TensorPtr& z, const ad::TensorPtr& u) = 0;
  virtual void collect_parameters(std::vector<ad::TensorPtr>&) {}
  virtual std::string_view kind() const = 0;
};

// Per-channel affine map z = scale ⊙ (y + bias). The scale is stored as its
// logarithm, which keeps it strictly positive and keeps the inverse inside
// the engine's op set (z·exp(-log_scale) - bias). Freshly constructed layers
// hold identity values but are "uninitialized": inversion is refused until
// the values are committed by data-dependent init, an explicit setter, or a
// checkpoint load.
class ActNorm final : public Step {
 public:
  explicit ActNorm(std::int64_t channels);

  FlowResult forward(ad::Graph& g, const ad::TensorPtr& y, const ad::TensorPtr& u) override;
  ad::TensorPtr inverse(ad::Graph& g, const ad::TensorPtr& z, const ad::TensorPtr& u) override;
  void collect_parameters(std::vector<ad::TensorPtr>& out) override;
  std::string_view kind() const override { return "actnorm"; }

  // Chooses scale and bias so the batch has zero mean and unit variance per
  // channel after the layer.
  void init_from_batch(std::span<const ad::TensorPtr> batch);
  void set_scale_bias(std::span<const double> scale, std::span<const double> bias);
  void mark_initialized() { initialized_ = true; }
  bool initialized() const { return initialized_; }
  std::vector<double> scale() const;

  ad::TensorPtr log_scale;  // shape (C)
  ad::TensorPtr bias;       // shape (C)

 private:
  std::int64_t channels_;
  bool initialized_ = false;
};

// Conditional affine coupling. The first floor(C/2) channels pass through
// and, together with u, drive a small conv net that produces log-scale and
// shift for the remaining channels. The log-scale is soft-clamped to
// |s| <= s_max via s_max·tanh(s_raw/s_max). A zero-initialized final conv
// makes the fresh layer an exact identity.
class AffineCoupling final : public Step {
 public:
  AffineCoupling(std::int64_t channels, std::int64_t cond_channels, std::int64_t hidden_channels,
                 Rng& rng, double s_max = 2.0);

  FlowResult forward(ad::Graph& g, const ad::TensorPtr& y, const ad::TensorPtr& u) override;
  ad::TensorPtr inverse(ad::Graph& g, const ad::TensorPtr& z, const ad::TensorPtr& u) override;
  void collect_parameters(std::vector<ad::TensorPtr>& out) override;
  std::string_view kind() const override { return "coupling"; }

  // Test hook: replaces the zero final layer with random values so the
  // coupling realizes a non-trivial map.
  void randomize_last_layer(Rng& rng, double std);

  std::int64_t channels() const { return channels_; }

 private:
  // Returns (s, t), each with floor half channels... see forward.
  std::pair<ad::TensorPtr, ad::TensorPtr> scale_shift(ad::Graph& g, const ad::TensorPtr& y_a,
                                                      const ad::TensorPtr& u) const;

  std::int64_t channels_, cond_channels_, split_;
  double s_max_;
  nn::Conv2d conv1_, conv2_, conv3_;
};

// Channel order reversal; volume preserving, its own inverse is the same
// reversal applied again.
class ChannelReversal final : public Step {
 public:
  FlowResult forward(ad::Graph& g, const ad::TensorPtr& y, const ad::TensorPtr& u) override;
  ad::TensorPtr inverse(ad::Graph& g, const ad::TensorPtr& z, const ad::TensorPtr& u) override;
  std::string_view kind() const override { return "permute"; }
};

// 2×2 space-to-depth, logdet 0.
class Squeeze final : public Step {
 public:
  FlowResult forward(ad::Graph& g, const ad::TensorPtr& y, const ad::TensorPtr& u) override;
  ad::TensorPtr inverse(ad::Graph& g, const ad::TensorPtr& z, const ad::TensorPtr& u) override;
  std::string_view kind() const override { return "squeeze"; }
};

// Ordered composition of steps sharing one conditioning tensor.
class Stack {
 public:
  void push(std::unique_ptr<Step> step) { steps_.push_back(std::move(step)); }
  FlowResult forward(ad::Graph& g, const ad::TensorPtr& y, const ad::TensorPtr& u) const;
  ad::TensorPtr inverse(ad::Graph& g, const ad::TensorPtr& z, const ad::TensorPtr& u) const;
  void collect_parameters(std::vector<ad::TensorPtr>& out) const;
  std::span<const std::unique_ptr<Step>> steps() const { return steps_; }

 private:
  std::vector<std::unique_ptr<Step>> steps_;
};

}  // namespace cnf::flow

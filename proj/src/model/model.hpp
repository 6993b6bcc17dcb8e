#pragma once

#include <filesystem>
#include <vector>

#include "data/grid.hpp"
#include "flow/layers.hpp"

namespace cnf::model {

struct ModelConfig {
  std::int64_t scale_factor = 2;  // LR -> HR upsampling factor, 2 or 4
  std::int64_t num_scales = 3;
  std::int64_t steps_per_scale = 2;
  std::int64_t hidden_channels = 64;  // coupling nets
  std::int64_t cond_channels = 64;    // conditioning encoder width

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Conversion helpers between grid fields and engine tensors (C×H×W).
ad::TensorPtr tensor_from_field(const data::GridField& f, bool requires_grad = false);
data::GridField field_from_tensor(const ad::TensorPtr& t, double zmin, double zmax);

// Taped sum over elements of log N(z; mu, exp(log_sigma)). Null mu/log_sigma
// select the standard normal.
ad::TensorPtr gaussian_log_density(ad::Graph& g, const ad::TensorPtr& z, const ad::TensorPtr& mu,
                                   const ad::TensorPtr& log_sigma);

// Conditioning encoder: a shallow conv pyramid over the low-resolution field
// producing one feature map per flow scale, spatially matched to that scale's
// working resolution (HR/2^k). For a 4× factor the input is first brought to
// HR/2 by nearest-neighbour upsampling. Alongside the raw field the pyramid
// sees a fixed local-roughness channel (the magnitude of first differences),
// so the prior heads can modulate sigma with local texture from the first
// steps of training.
class ConditioningEncoder {
 public:
  ConditioningEncoder(const ModelConfig& cfg, std::uint64_t seed);
  std::vector<ad::TensorPtr> encode(ad::Graph& g, const ad::TensorPtr& x_lr) const;
  void collect_parameters(std::vector<ad::TensorPtr>& out) const;

 private:
  ad::TensorPtr roughness(ad::Graph& g, const ad::TensorPtr& x) const;

  std::int64_t scale_factor_, num_scales_;
  nn::Conv2d in_conv_, mix_conv_;
  std::vector<nn::Conv2d> down_convs_;  // one per scale transition
  ad::TensorPtr diff_kernel_, diff_bias_, sum_kernel_, sum_bias_;  // fixed, not trained
};

struct FlowPass {
  std::vector<ad::TensorPtr> latents;  // z_1 … z_K
  ad::TensorPtr logdet;
};

// The conditional flow: per scale a squeeze, steps_per_scale flow steps
// (actnorm, channel reversal, conditional affine coupling), and a split that
// sends half the channels to the latent state; the last scale keeps all.
// Diagonal-Gaussian prior heads map conditioning features to (mu, log sigma)
// per latent block. Zero-initialized heads and couplings make the fresh
// model the exact identity with a unit prior.
class FlowModel {
 public:
  FlowModel(const ModelConfig& cfg, std::uint64_t init_seed);

  FlowModel(FlowModel&&) = default;
  FlowModel& operator=(FlowModel&&) = default;

  const ModelConfig& config() const { return config_; }

  std::vector<ad::TensorPtr> encode_condition(ad::Graph& g, const ad::TensorPtr& x_lr) const;
  FlowPass forward_flow(ad::Graph& g, const ad::TensorPtr& y_hr,
                        const std::vector<ad::TensorPtr>& u) const;
  ad::TensorPtr inverse_flow(ad::Graph& g, const std::vector<ad::TensorPtr>& latents,
                             const std::vector<ad::TensorPtr>& u) const;

  // (mu, log_sigma) for each scale's latent block.
  std::vector<std::pair<ad::TensorPtr, ad::TensorPtr>> prior_params(
      ad::Graph& g, const std::vector<ad::TensorPtr>& u) const;

  // Negative log-likelihood in bits per dimension, as a taped scalar or a
  // plain number. Throws errc::diverged if the result is not finite.
  ad::TensorPtr nll_graph(ad::Graph& g, const ad::TensorPtr& y_hr,
                          const ad::TensorPtr& x_lr) const;
  double nll(const data::GridField& y_hr, const data::GridField& x_lr) const;

  // Temperature sampling: z_k = mu_k + tau * sigma_k * eps with eps from a
  // generator seeded per call, then the inverse flow. tau = 0 is the
  // deterministic prior mean.
  ad::TensorPtr sample_graph(ad::Graph& g, const ad::TensorPtr& x_lr, double tau,
                             std::uint64_t seed) const;
  data::GridField sample(const data::GridField& x_lr, double tau, std::uint64_t seed) const;
  std::vector<data::GridField> sample_ensemble(const data::GridField& x_lr, double tau,
                                               std::int64_t n, std::uint64_t base_seed) const;

  // All parameter tensors in a fixed declaration order (the checkpoint and
  // EMA layout).
  std::vector<ad::TensorPtr> parameters() const;

  // Data-dependent actnorm initialization from a batch of HR fields.
  void init_actnorm(std::span<const data::GridField> batch);
  bool actnorm_initialized() const;
  void mark_actnorm_initialized();

  // Per-scale latent channel counts (after the scale's squeeze and split).
  const std::vector<std::int64_t>& latent_channels() const { return latent_channels_; }

  void save(const std::filesystem::path& path,
            const std::vector<std::vector<double>>* ema_shadow = nullptr) const;
  struct Loaded;
  static Loaded load(const std::filesystem::path& path);

 private:
  void check_lr_shape(const ad::TensorPtr& x_lr) const;

  ModelConfig config_;
  ConditioningEncoder encoder_;
  std::vector<flow::Stack> scales_;
  std::vector<nn::Conv2d> prior_heads_;
  std::vector<std::int64_t> latent_channels_;
};

struct FlowModel::Loaded {
  FlowModel model;
  std::vector<std::vector<double>> ema_shadow;
};

}  // namespace cnf::model

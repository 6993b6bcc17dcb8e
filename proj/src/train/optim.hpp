#pragma once

#include <cstdint>
#include <vector>

#include "core/tensor.hpp"

namespace cnf::train {

struct TrainConfig {
  double lr0 = 2e-4;
  double decay = 0.5;
  std::int64_t decay_interval = 200000;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
  double ema_decay = 0.999;
  std::int64_t epochs = 35;
  std::int64_t batch_size = 16;
  double perceptual_weight = 0.0;  // λ; 0 recovers pure maximum likelihood
  double perceptual_tau = 0.8;
  double jitter = 1e-3;  // training-target noise amplitude
  double grad_clip = 100.0;
  bool actnorm_data_init = true;
  std::uint64_t seed = 0;

  void validate() const;
};

// Step-decay schedule, non-increasing in step.
double lr_at(const TrainConfig& cfg, std::int64_t step);

// Adam with bias correction. State shapes follow the parameter list; the
// second moments stay non-negative by construction.
class Adam {
 public:
  Adam(std::vector<ad::TensorPtr> params, double beta1, double beta2, double eps);

  // One update from the gradients currently held by the parameters. Throws
  // errc::diverged on a non-finite gradient, leaving parameters untouched.
  void step(double lr);
  void zero_grad();
  std::int64_t steps_taken() const { return t_; }
  const std::vector<std::vector<double>>& first_moment() const { return m_; }
  const std::vector<std::vector<double>>& second_moment() const { return v_; }

 private:
  std::vector<ad::TensorPtr> params_;
  std::vector<std::vector<double>> m_, v_;
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

// Exponential moving average of parameter values.
class Ema {
 public:
  explicit Ema(std::vector<ad::TensorPtr> params);

  void update(double decay);
  // Exchanges live parameter values with the shadow copy; call twice to
  // restore. Used to evaluate with averaged weights.
  void swap_with_params();
  const std::vector<std::vector<double>>& shadow() const { return shadow_; }
  void set_shadow(std::vector<std::vector<double>> shadow);

 private:
  std::vector<ad::TensorPtr> params_;
  std::vector<std::vector<double>> shadow_;
};

// Global L2 gradient clipping; returns the pre-clip norm.
double clip_grad_norm(const std::vector<ad::TensorPtr>& params, double max_norm);

}  // namespace cnf::train

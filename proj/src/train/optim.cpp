#include "train/optim.hpp"

#include <cmath>

namespace cnf::train {

void TrainConfig::validate() const {
  require(lr0 > 0.0, errc::invalid_argument, "train: lr0 must be positive");
  require(decay > 0.0 && decay <= 1.0, errc::invalid_argument, "train: decay must be in (0,1]");
  require(decay_interval > 0, errc::invalid_argument, "train: decay interval must be positive");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, errc::invalid_argument,
          "train: betas must be in [0,1)");
  require(eps > 0.0, errc::invalid_argument, "train: eps must be positive");
  require(ema_decay >= 0.0 && ema_decay <= 1.0, errc::invalid_argument,
          "train: ema decay must be in [0,1]");
  require(epochs >= 0, errc::invalid_argument, "train: epochs must be >= 0");
  require(batch_size >= 1, errc::invalid_argument, "train: batch size must be >= 1");
  require(perceptual_weight >= 0.0, errc::invalid_argument, "train: λ must be >= 0");
  require(jitter >= 0.0, errc::invalid_argument, "train: jitter must be >= 0");
  require(grad_clip > 0.0, errc::invalid_argument, "train: grad clip must be positive");
}

double lr_at(const TrainConfig& cfg, std::int64_t step) {
  require(step >= 0, errc::invalid_argument, "lr_at: step must be >= 0");
  const auto k = step / cfg.decay_interval;
  return cfg.lr0 * std::pow(cfg.decay, static_cast<double>(k));
}

Adam::Adam(std::vector<ad::TensorPtr> params, double beta1, double beta2, double eps)
    : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& p : params_) {
    m_.emplace_back(p->value.size(), 0.0);
    v_.emplace_back(p->value.size(), 0.0);
  }
}

void Adam::step(double lr) {
  for (const auto& p : params_)
    for (double g : p->grad)
      require(std::isfinite(g), errc::diverged, "adam: non-finite gradient, step aborted");

  const std::int64_t t = t_ + 1;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = *params_[i];
    for (std::size_t j = 0; j < p.value.size(); ++j) {
      const double g = p.grad[j];
      m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
      v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
      const double mhat = m_[i][j] / bc1;
      const double vhat = v_[i][j] / bc2;
      p.value[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
  t_ = t;
}

void Adam::zero_grad() {
  for (const auto& p : params_) p->zero_grad();
}

Ema::Ema(std::vector<ad::TensorPtr> params) : params_(std::move(params)) {
  shadow_.reserve(params_.size());
  for (const auto& p : params_) shadow_.push_back(p->value);
}

void Ema::update(double decay) {
  for (std::size_t i = 0; i < params_.size(); ++i)
    for (std::size_t j = 0; j < shadow_[i].size(); ++j)
      shadow_[i][j] = decay * shadow_[i][j] + (1.0 - decay) * params_[i]->value[j];
}

void Ema::swap_with_params() {
  for (std::size_t i = 0; i < params_.size(); ++i) params_[i]->value.swap(shadow_[i]);
}

void Ema::set_shadow(std::vector<std::vector<double>> shadow) {
  require(shadow.size() == params_.size(), errc::shape_mismatch, "ema: shadow count mismatch");
  for (std::size_t i = 0; i < shadow.size(); ++i)
    require(shadow[i].size() == params_[i]->value.size(), errc::shape_mismatch,
            "ema: shadow extent mismatch");
  shadow_ = std::move(shadow);
}

double clip_grad_norm(const std::vector<ad::TensorPtr>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params)
    for (double g : p->grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (const auto& p : params)
      for (double& g : p->grad) g *= scale;
  }
  return norm;
}

}  // namespace cnf::train

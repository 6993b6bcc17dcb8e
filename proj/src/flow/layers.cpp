#include "flow/layers.hpp"

#include <cmath>

namespace cnf::flow {

namespace {

// Splits a (C)-shaped parameter into C one-element tensors usable as
// per-channel scalar broadcasts.
std::vector<ad::TensorPtr> per_channel(ad::Graph& g, const ad::TensorPtr& p) {
  auto col = g.reshape(p, {p->shape[0], 1, 1});
  std::vector<std::int64_t> ones(static_cast<std::size_t>(p->shape[0]), 1);
  return g.split_channels(col, ones);
}

}  // namespace

ActNorm::ActNorm(std::int64_t channels) : channels_(channels) {
  require(channels >= 1, errc::invalid_argument, "actnorm: channels must be >= 1");
  log_scale = ad::zeros({channels}, true);
  bias = ad::zeros({channels}, true);
}

FlowResult ActNorm::forward(ad::Graph& g, const ad::TensorPtr& y, const ad::TensorPtr&) {
  require(y->shape.size() == 3 && y->shape[0] == channels_, errc::shape_mismatch,
          "actnorm: input channel mismatch");
  const double hw = static_cast<double>(y->shape[1] * y->shape[2]);
  auto channels = g.split_channels(y, std::vector<std::int64_t>(channels_, 1));
  auto logs = per_channel(g, log_scale);
  auto biases = per_channel(g, bias);
  std::vector<ad::TensorPtr> out(channels.size());
  for (std::size_t c = 0; c < channels.size(); ++c)
    out[c] = g.mul(g.add(channels[c], biases[c]), g.exp(logs[c]));
  auto z = g.concat_channels(out);
  auto logdet = g.mul(g.sum_all(log_scale), hw);
  return {z, logdet};
}

ad::TensorPtr ActNorm::inverse(ad::Graph& g, const ad::TensorPtr& z, const ad::TensorPtr&) {
  require(initialized_, errc::invalid_argument,
          "actnorm: cannot invert an uninitialized layer (no data init, setter, or checkpoint)");
  require(z->shape.size() == 3 && z->shape[0] == channels_, errc::shape_mismatch,
          "actnorm: input channel mismatch");
  auto channels = g.split_channels(z, std::vector<std::int64_t>(channels_, 1));
  auto logs = per_channel(g, log_scale);
  auto biases = per_channel(g, bias);
  std::vector<ad::TensorPtr> out(channels.size());
  for (std::size_t c = 0; c < channels.size(); ++c)
    out[c] = g.sub(g.mul(channels[c], g.exp(g.mul(logs[c], -1.0))), biases[c]);
  return g.concat_channels(out);
}

void ActNorm::collect_parameters(std::vector<ad::TensorPtr>& out) {
  out.push_back(log_scale);
  out.push_back(bias);
}

void ActNorm::init_from_batch(std::span<const ad::TensorPtr> batch) {
  require(!batch.empty(), errc::invalid_argument, "actnorm: empty init batch");
  std::vector<double> mean(static_cast<std::size_t>(channels_), 0.0);
  std::vector<double> sq(static_cast<std::size_t>(channels_), 0.0);
  std::int64_t per_channel_count = 0;
  for (const auto& y : batch) {
    require(y->shape.size() == 3 && y->shape[0] == channels_, errc::shape_mismatch,
            "actnorm: init batch channel mismatch");
    const std::int64_t hw = y->shape[1] * y->shape[2];
    per_channel_count += hw;
    for (std::int64_t c = 0; c < channels_; ++c) {
      const double* p = y->value.data() + c * hw;
      for (std::int64_t i = 0; i < hw; ++i) {
        mean[static_cast<std::size_t>(c)] += p[i];
        sq[static_cast<std::size_t>(c)] += p[i] * p[i];
      }
    }
  }
  for (std::int64_t c = 0; c < channels_; ++c) {
    const auto cc = static_cast<std::size_t>(c);
    mean[cc] /= static_cast<double>(per_channel_count);
    const double var = sq[cc] / static_cast<double>(per_channel_count) - mean[cc] * mean[cc];
    const double std = std::sqrt(std::max(var, 1e-12));
    log_scale->value[cc] = -std::log(std);
    bias->value[cc] = -mean[cc];
  }
  initialized_ = true;
}

void ActNorm::set_scale_bias(std::span<const double> scale, std::span<const double> bias_values) {
  require(static_cast<std::int64_t>(scale.size()) == channels_ &&
              static_cast<std::int64_t>(bias_values.size()) == channels_,
          errc::shape_mismatch, "actnorm: setter extent mismatch");
  for (std::int64_t c = 0; c < channels_; ++c) {
    require(scale[static_cast<std::size_t>(c)] > 0.0, errc::domain_error,
            "actnorm: scale must be strictly positive");
    log_scale->value[static_cast<std::size_t>(c)] = std::log(scale[static_cast<std::size_t>(c)]);
    bias->value[static_cast<std::size_t>(c)] = bias_values[static_cast<std::size_t>(c)];
  }
  initialized_ = true;
}

std::vector<double> ActNorm::scale() const {
  std::vector<double> s(log_scale->value.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::exp(log_scale->value[i]);
  return s;
}

AffineCoupling::AffineCoupling(std::int64_t channels, std::int64_t cond_channels,
                               std::int64_t hidden_channels, Rng& rng, double s_max)
    : channels_(channels),
      cond_channels_(cond_channels),
      split_(channels / 2),
      s_max_(s_max) {
  require(channels >= 2, errc::invalid_argument, "coupling: needs at least 2 channels");
  require(hidden_channels >= 1, errc::invalid_argument, "coupling: hidden channels must be >= 1");
  const std::int64_t in = split_ + cond_channels_;
  const std::int64_t out = 2 * (channels_ - split_);
  conv1_ = nn::Conv2d::he_init(in, hidden_channels, 3, rng);
  conv2_ = nn::Conv2d::he_init(hidden_channels, hidden_channels, 3, rng);
  conv3_ = nn::Conv2d::zero_init(hidden_channels, out, 3);
}

std::pair<ad::TensorPtr, ad::TensorPtr> AffineCoupling::scale_shift(ad::Graph& g,
                                                                    const ad::TensorPtr& y_a,
                                                                    const ad::TensorPtr& u) const {
  ad::TensorPtr h = y_a;
  if (cond_channels_ > 0) {
    require(u != nullptr, errc::invalid_argument, "coupling: conditioning tensor required");
    require(u->shape.size() == 3 && u->shape[0] == cond_channels_, errc::shape_mismatch,
            "coupling: conditioning channel mismatch");
    require(u->shape[1] == y_a->shape[1] && u->shape[2] == y_a->shape[2], errc::shape_mismatch,
            "coupling: conditioning tensor is not spatially aligned with the input");
    const ad::TensorPtr parts[] = {y_a, u};
    h = g.concat_channels(parts);
  }
  h = g.leaky_relu(conv1_(g, h));
  h = g.leaky_relu(conv2_(g, h));
  h = conv3_(g, h);
  const std::int64_t half = channels_ - split_;
  const std::int64_t sizes[] = {half, half};
  auto st = g.split_channels(h, sizes);
  auto s = g.mul(g.tanh(g.mul(st[0], 1.0 / s_max_)), s_max_);
  return {s, st[1]};
}

FlowResult AffineCoupling::forward(ad::Graph& g, const ad::TensorPtr& y, const ad::TensorPtr& u) {
  require(y->shape.size() == 3 && y->shape[0] == channels_, errc::shape_mismatch,
          "coupling: input channel mismatch");
  const std::int64_t sizes[] = {split_, channels_ - split_};
  auto halves = g.split_channels(y, sizes);
  auto [s, t] = scale_shift(g, halves[0], u);
  auto z_b = g.add(g.mul(halves[1], g.exp(s)), t);
  const ad::TensorPtr parts[] = {halves[0], z_b};
  return {g.concat_channels(parts), g.sum_all(s)};
}

ad::TensorPtr AffineCoupling::inverse(ad::Graph& g, const ad::TensorPtr& z,
                                      const ad::TensorPtr& u) {
  require(z->shape.size() == 3 && z->shape[0] == channels_, errc::shape_mismatch,
          "coupling: input channel mismatch");
  const std::int64_t sizes[] = {split_, channels_ - split_};
  auto halves = g.split_channels(z, sizes);
  auto [s, t] = scale_shift(g, halves[0], u);
  auto y_b = g.mul(g.sub(halves[1], t), g.exp(g.mul(s, -1.0)));
  const ad::TensorPtr parts[] = {halves[0], y_b};
  return g.concat_channels(parts);
}

void AffineCoupling::collect_parameters(std::vector<ad::TensorPtr>& out) {
  conv1_.collect(out);
  conv2_.collect(out);
  conv3_.collect(out);
}

void AffineCoupling::randomize_last_layer(Rng& rng, double std) {
  for (auto& v : conv3_.weight->value) v = std * rng.gaussian();
  for (auto& v : conv3_.bias->value) v = std * rng.gaussian();
}

FlowResult ChannelReversal::forward(ad::Graph& g, const ad::TensorPtr& y, const ad::TensorPtr&) {
  require(y->shape.size() == 3, errc::shape_mismatch, "permute: expected C×H×W");
  auto parts = g.split_channels(y, std::vector<std::int64_t>(y->shape[0], 1));
  std::reverse(parts.begin(), parts.end());
  return {g.concat_channels(parts), ad::scalar(0.0)};
}

ad::TensorPtr ChannelReversal::inverse(ad::Graph& g, const ad::TensorPtr& z,
                                       const ad::TensorPtr& u) {
  return forward(g, z, u).z;  // involution
}

FlowResult Squeeze::forward(ad::Graph& g, const ad::TensorPtr& y, const ad::TensorPtr&) {
  return {g.space_to_depth(y), ad::scalar(0.0)};
}

ad::TensorPtr Squeeze::inverse(ad::Graph& g, const ad::TensorPtr& z, const ad::TensorPtr&) {
  return g.depth_to_space(z);
}

FlowResult Stack::forward(ad::Graph& g, const ad::TensorPtr& y, const ad::TensorPtr& u) const {
  ad::TensorPtr h = y;
  ad::TensorPtr logdet = ad::scalar(0.0);
  for (const auto& step : steps_) {
    auto r = step->forward(g, h, u);
    h = r.z;
    logdet = g.add(logdet, r.logdet);
  }
  return {h, logdet};
}

ad::TensorPtr Stack::inverse(ad::Graph& g, const ad::TensorPtr& z, const ad::TensorPtr& u) const {
  ad::TensorPtr h = z;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) h = (*it)->inverse(g, h, u);
  return h;
}

void Stack::collect_parameters(std::vector<ad::TensorPtr>& out) const {
  for (const auto& step : steps_) step->collect_parameters(out);
}

}  // namespace cnf::flow

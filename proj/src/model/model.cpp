#include "model/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace cnf::model {

namespace {

constexpr char kMagic[4] = {'C', 'N', 'F', 'M'};
constexpr std::uint32_t kVersion = 1;
const double kLn2 = std::numbers::ln2;
const double kLog2Pi = std::log(2.0 * std::numbers::pi);

}  // namespace

void ModelConfig::validate() const {
  require(scale_factor == 2 || scale_factor == 4, errc::invalid_argument,
          "model: upsampling factor must be 2 or 4");
  require(num_scales >= 1, errc::invalid_argument, "model: num_scales must be >= 1");
  require(steps_per_scale >= 1, errc::invalid_argument, "model: steps_per_scale must be >= 1");
  require(hidden_channels >= 1 && cond_channels >= 1, errc::invalid_argument,
          "model: channel widths must be >= 1");
}

ad::TensorPtr tensor_from_field(const data::GridField& f, bool requires_grad) {
  return ad::make_tensor({f.channels, f.height, f.width}, f.values, requires_grad);
}

data::GridField field_from_tensor(const ad::TensorPtr& t, double zmin, double zmax) {
  require(t->shape.size() == 3, errc::shape_mismatch, "field_from_tensor: expected C×H×W");
  data::GridField f;
  f.channels = t->shape[0];
  f.height = t->shape[1];
  f.width = t->shape[2];
  f.values = t->value;
  f.zmin = zmin;
  f.zmax = zmax;
  return f;
}

ad::TensorPtr gaussian_log_density(ad::Graph& g, const ad::TensorPtr& z, const ad::TensorPtr& mu,
                                   const ad::TensorPtr& log_sigma) {
  const double d = static_cast<double>(z->numel());
  ad::TensorPtr centered = mu ? g.sub(z, mu) : z;
  ad::TensorPtr scaled =
      log_sigma ? g.mul(centered, g.exp(g.mul(log_sigma, -1.0))) : centered;
  auto quad = g.mul(g.sum_all(g.mul(scaled, scaled)), -0.5);
  auto logp = g.add(quad, -0.5 * d * kLog2Pi);
  if (log_sigma) logp = g.sub(logp, g.sum_all(log_sigma));
  return logp;
}

ConditioningEncoder::ConditioningEncoder(const ModelConfig& cfg, std::uint64_t seed)
    : scale_factor_(cfg.scale_factor), num_scales_(cfg.num_scales) {
  Rng rng(mix_seed(seed, 0xe11c));
  in_conv_ = nn::Conv2d::he_init(2, cfg.cond_channels, 3, rng);
  mix_conv_ = nn::Conv2d::he_init(cfg.cond_channels, cfg.cond_channels, 3, rng);
  for (std::int64_t k = 1; k < cfg.num_scales; ++k)
    down_convs_.push_back(nn::Conv2d::he_init(cfg.cond_channels, cfg.cond_channels, 3, rng));

  // Four first-difference taps (N, S, W, E) and their squared sum; fixed
  // convolution weights, never trained or checkpointed.
  std::vector<double> diff(4 * 9, 0.0);
  const int center = 4;
  const int offsets[4] = {1, 7, 3, 5};  // up, down, left, right neighbours
  for (int k = 0; k < 4; ++k) {
    diff[static_cast<std::size_t>(k * 9 + center)] = 1.0;
    diff[static_cast<std::size_t>(k * 9 + offsets[k])] = -1.0;
  }
  diff_kernel_ = ad::make_tensor({4, 1, 3, 3}, std::move(diff));
  diff_bias_ = ad::zeros({4});
  sum_kernel_ = ad::full({1, 4, 1, 1}, 1.0);
  sum_bias_ = ad::full({1}, 1e-12);
}

ad::TensorPtr ConditioningEncoder::roughness(ad::Graph& g, const ad::TensorPtr& x) const {
  auto d = g.conv2d(x, diff_kernel_, diff_bias_);
  auto sq = g.conv2d(g.mul(d, d), sum_kernel_, sum_bias_);
  return g.exp(g.mul(g.log(sq), 0.5));  // sqrt of the summed squares
}

std::vector<ad::TensorPtr> ConditioningEncoder::encode(ad::Graph& g,
                                                       const ad::TensorPtr& x_lr) const {
  require(x_lr->shape.size() == 3 && x_lr->shape[0] == 1, errc::shape_mismatch,
          "encoder: expected a single-channel LR field");
  ad::TensorPtr h = x_lr;
  if (scale_factor_ == 4) h = nn::nearest_upsample2(g, h);  // bring to HR/2
  const ad::TensorPtr with_texture[] = {h, roughness(g, h)};
  h = g.leaky_relu(in_conv_(g, g.concat_channels(with_texture)));
  h = g.leaky_relu(mix_conv_(g, h));
  std::vector<ad::TensorPtr> u{h};
  for (const auto& conv : down_convs_) {
    h = g.leaky_relu(conv(g, nn::mean_pool2(g, h)));
    u.push_back(h);
  }
  return u;
}

void ConditioningEncoder::collect_parameters(std::vector<ad::TensorPtr>& out) const {
  in_conv_.collect(out);
  mix_conv_.collect(out);
  for (const auto& c : down_convs_) c.collect(out);
}

FlowModel::FlowModel(const ModelConfig& cfg, std::uint64_t init_seed)
    : config_((cfg.validate(), cfg)), encoder_(cfg, init_seed) {
  std::int64_t channels = 1;
  for (std::int64_t k = 0; k < config_.num_scales; ++k) {
    channels *= 4;  // squeeze entering the scale
    Rng rng(mix_seed(init_seed, 0xf10a, static_cast<std::uint64_t>(k)));
    flow::Stack stack;
    for (std::int64_t s = 0; s < config_.steps_per_scale; ++s) {
      stack.push(std::make_unique<flow::ActNorm>(channels));
      stack.push(std::make_unique<flow::ChannelReversal>());
      stack.push(std::make_unique<flow::AffineCoupling>(channels, config_.cond_channels,
                                                        config_.hidden_channels, rng));
    }
    scales_.push_back(std::move(stack));
    const bool last = k + 1 == config_.num_scales;
    const std::int64_t z_channels = last ? channels : channels / 2;
    latent_channels_.push_back(z_channels);
    prior_heads_.push_back(nn::Conv2d::zero_init(config_.cond_channels, 2 * z_channels, 3));
    channels -= z_channels;
  }
}

std::vector<ad::TensorPtr> FlowModel::encode_condition(ad::Graph& g,
                                                       const ad::TensorPtr& x_lr) const {
  check_lr_shape(x_lr);
  return encoder_.encode(g, x_lr);
}

void FlowModel::check_lr_shape(const ad::TensorPtr& x_lr) const {
  require(x_lr->shape.size() == 3 && x_lr->shape[0] == 1, errc::shape_mismatch,
          "model: expected a single-channel LR field");
  const std::int64_t hr_h = x_lr->shape[1] * config_.scale_factor;
  const std::int64_t hr_w = x_lr->shape[2] * config_.scale_factor;
  const std::int64_t div = std::int64_t(1) << config_.num_scales;
  require(hr_h % div == 0 && hr_w % div == 0, errc::shape_mismatch,
          "model: HR extents " + std::to_string(hr_h) + "x" + std::to_string(hr_w) +
              " must be divisible by 2^" + std::to_string(config_.num_scales));
}

FlowPass FlowModel::forward_flow(ad::Graph& g, const ad::TensorPtr& y_hr,
                                 const std::vector<ad::TensorPtr>& u) const {
  require(y_hr->shape.size() == 3 && y_hr->shape[0] == 1, errc::shape_mismatch,
          "model: expected a single-channel HR field");
  require(u.size() == scales_.size(), errc::shape_mismatch,
          "model: conditioning features do not match the scale count");
  FlowPass pass;
  ad::TensorPtr h = y_hr;
  ad::TensorPtr logdet = ad::scalar(0.0);
  for (std::size_t k = 0; k < scales_.size(); ++k) {
    h = g.space_to_depth(h);
    auto r = scales_[k].forward(g, h, u[k]);
    h = r.z;
    logdet = g.add(logdet, r.logdet);
    if (k + 1 < scales_.size()) {
      const std::int64_t zc = latent_channels_[k];
      const std::int64_t sizes[] = {zc, h->shape[0] - zc};
      auto parts = g.split_channels(h, sizes);
      pass.latents.push_back(parts[0]);
      h = parts[1];
    } else {
      pass.latents.push_back(h);
    }
  }
  pass.logdet = logdet;
  return pass;
}

ad::TensorPtr FlowModel::inverse_flow(ad::Graph& g, const std::vector<ad::TensorPtr>& latents,
                                      const std::vector<ad::TensorPtr>& u) const {
  require(latents.size() == scales_.size() && u.size() == scales_.size(), errc::shape_mismatch,
          "model: latent/conditioning count mismatch");
  ad::TensorPtr h = latents.back();
  for (std::size_t k = scales_.size(); k-- > 0;) {
    if (k + 1 < scales_.size()) {
      const ad::TensorPtr parts[] = {latents[k], h};
      h = g.concat_channels(parts);
    }
    h = scales_[k].inverse(g, h, u[k]);
    h = g.depth_to_space(h);
  }
  return h;
}

std::vector<std::pair<ad::TensorPtr, ad::TensorPtr>> FlowModel::prior_params(
    ad::Graph& g, const std::vector<ad::TensorPtr>& u) const {
  std::vector<std::pair<ad::TensorPtr, ad::TensorPtr>> out;
  for (std::size_t k = 0; k < prior_heads_.size(); ++k) {
    auto head = prior_heads_[k](g, u[k]);
    const std::int64_t zc = latent_channels_[k];
    const std::int64_t sizes[] = {zc, zc};
    auto parts = g.split_channels(head, sizes);
    out.emplace_back(parts[0], parts[1]);
  }
  return out;
}

ad::TensorPtr FlowModel::nll_graph(ad::Graph& g, const ad::TensorPtr& y_hr,
                                   const ad::TensorPtr& x_lr) const {
  check_lr_shape(x_lr);
  require(y_hr->shape[1] == x_lr->shape[1] * config_.scale_factor &&
              y_hr->shape[2] == x_lr->shape[2] * config_.scale_factor,
          errc::shape_mismatch, "model: HR extents must be s × LR extents");
  auto u = encoder_.encode(g, x_lr);
  auto pass = forward_flow(g, y_hr, u);
  auto priors = prior_params(g, u);
  ad::TensorPtr logp = pass.logdet;
  for (std::size_t k = 0; k < priors.size(); ++k)
    logp = g.add(logp, gaussian_log_density(g, pass.latents[k], priors[k].first,
                                            priors[k].second));
  const double d = static_cast<double>(y_hr->numel());
  auto bpd = g.mul(logp, -1.0 / (d * kLn2));
  require(std::isfinite(bpd->value[0]), errc::diverged,
          "model: non-finite negative log-likelihood");
  return bpd;
}

double FlowModel::nll(const data::GridField& y_hr, const data::GridField& x_lr) const {
  ad::Graph g(/*enable_grad=*/false);
  return nll_graph(g, tensor_from_field(y_hr), tensor_from_field(x_lr))->value[0];
}

ad::TensorPtr FlowModel::sample_graph(ad::Graph& g, const ad::TensorPtr& x_lr, double tau,
                                      std::uint64_t seed) const {
  require(tau >= 0.0, errc::invalid_argument, "sample: temperature must be non-negative");
  check_lr_shape(x_lr);
  auto u = encoder_.encode(g, x_lr);
  auto priors = prior_params(g, u);
  Rng rng(mix_seed(seed, 0x5a3d));
  std::vector<ad::TensorPtr> latents;
  for (std::size_t k = 0; k < priors.size(); ++k) {
    const auto& mu = priors[k].first;
    auto noise = ad::zeros(mu->shape);
    if (tau > 0.0)
      for (auto& v : noise->value) v = tau * rng.gaussian();
    latents.push_back(g.add(mu, g.mul(g.exp(priors[k].second), noise)));
  }
  return inverse_flow(g, latents, u);
}

data::GridField FlowModel::sample(const data::GridField& x_lr, double tau,
                                  std::uint64_t seed) const {
  ad::Graph g(/*enable_grad=*/false);
  auto y = sample_graph(g, tensor_from_field(x_lr), tau, seed);
  return field_from_tensor(y, x_lr.zmin, x_lr.zmax);
}

std::vector<data::GridField> FlowModel::sample_ensemble(const data::GridField& x_lr, double tau,
                                                        std::int64_t n,
                                                        std::uint64_t base_seed) const {
  require(n >= 1, errc::invalid_argument, "sample_ensemble: member count must be >= 1");
  std::vector<data::GridField> out;
  out.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    out.push_back(sample(x_lr, tau, base_seed + static_cast<std::uint64_t>(i)));
  return out;
}

std::vector<ad::TensorPtr> FlowModel::parameters() const {
  std::vector<ad::TensorPtr> out;
  encoder_.collect_parameters(out);
  for (const auto& stack : scales_) stack.collect_parameters(out);
  for (const auto& head : prior_heads_) head.collect(out);
  return out;
}

void FlowModel::init_actnorm(std::span<const data::GridField> batch) {
  require(!batch.empty(), errc::invalid_argument, "init_actnorm: empty batch");
  ad::Graph g(/*enable_grad=*/false);
  std::vector<ad::TensorPtr> hs;
  std::vector<std::vector<ad::TensorPtr>> us;
  for (const auto& f : batch) {
    hs.push_back(tensor_from_field(f));
    const std::int64_t s = config_.scale_factor;
    require(f.height % s == 0 && f.width % s == 0, errc::shape_mismatch,
            "init_actnorm: HR extents not divisible by the upsampling factor");
    data::GridField lr = data::downsample_avg(f, s);
    us.push_back(encoder_.encode(g, tensor_from_field(lr)));
  }
  for (std::size_t k = 0; k < scales_.size(); ++k) {
    for (auto& h : hs) h = g.space_to_depth(h);
    for (const auto& step : scales_[k].steps()) {
      if (auto* an = dynamic_cast<flow::ActNorm*>(step.get()); an && !an->initialized())
        an->init_from_batch(hs);
      for (std::size_t i = 0; i < hs.size(); ++i)
        hs[i] = step->forward(g, hs[i], us[i][k]).z;
    }
    if (k + 1 < scales_.size()) {
      const std::int64_t zc = latent_channels_[k];
      for (auto& h : hs) {
        const std::int64_t sizes[] = {zc, h->shape[0] - zc};
        h = g.split_channels(h, sizes)[1];
      }
    }
  }
}

bool FlowModel::actnorm_initialized() const {
  for (const auto& stack : scales_)
    for (const auto& step : stack.steps())
      if (auto* an = dynamic_cast<const flow::ActNorm*>(step.get()); an && !an->initialized())
        return false;
  return true;
}

void FlowModel::mark_actnorm_initialized() {
  for (const auto& stack : scales_)
    for (const auto& step : stack.steps())
      if (auto* an = dynamic_cast<flow::ActNorm*>(step.get())) an->mark_initialized();
}

namespace {

void put_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(std::ifstream& in, const std::filesystem::path& path) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) cnf::fail(errc::truncated, "truncated checkpoint " + path.string());
  return v;
}

}  // namespace

void FlowModel::save(const std::filesystem::path& path,
                     const std::vector<std::vector<double>>* ema_shadow) const {
  const auto params = parameters();
  if (ema_shadow)
    require(ema_shadow->size() == params.size(), errc::shape_mismatch,
            "save: EMA shadow count mismatch");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), errc::io_error, "cannot open " + path.string() + " for writing");
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(config_.scale_factor));
  put_u32(out, static_cast<std::uint32_t>(config_.num_scales));
  put_u32(out, static_cast<std::uint32_t>(config_.steps_per_scale));
  put_u32(out, static_cast<std::uint32_t>(config_.hidden_channels));
  put_u32(out, static_cast<std::uint32_t>(config_.cond_channels));
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put_u32(out, static_cast<std::uint32_t>(p->shape.size()));
    for (auto e : p->shape) put_u32(out, static_cast<std::uint32_t>(e));
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::vector<double>& shadow = ema_shadow ? (*ema_shadow)[i] : params[i]->value;
    require(shadow.size() == params[i]->value.size(), errc::shape_mismatch,
            "save: EMA shadow extent mismatch");
    out.write(reinterpret_cast<const char*>(shadow.data()),
              static_cast<std::streamsize>(shadow.size() * sizeof(double)));
  }
  require(out.good(), errc::io_error, "write failed for " + path.string());
}

FlowModel::Loaded FlowModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), errc::io_error, "cannot open checkpoint " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    fail(errc::bad_magic, "bad magic in checkpoint " + path.string());
  const auto version = get_u32(in, path);
  if (version != kVersion)
    fail(errc::version_mismatch, "checkpoint version " + std::to_string(version) + " in " +
                                     path.string() + ", expected " + std::to_string(kVersion));
  ModelConfig cfg;
  cfg.scale_factor = get_u32(in, path);
  cfg.num_scales = get_u32(in, path);
  cfg.steps_per_scale = get_u32(in, path);
  cfg.hidden_channels = get_u32(in, path);
  cfg.cond_channels = get_u32(in, path);
  FlowModel model(cfg, /*init_seed=*/0);
  auto params = model.parameters();
  const auto count = get_u32(in, path);
  require(count == params.size(), errc::truncated,
          "checkpoint parameter count mismatch in " + path.string());
  for (auto& p : params) {
    const auto rank = get_u32(in, path);
    require(rank == p->shape.size(), errc::truncated,
            "checkpoint parameter rank mismatch in " + path.string());
    for (auto e : p->shape) {
      const auto got = get_u32(in, path);
      require(static_cast<std::int64_t>(got) == e, errc::truncated,
              "checkpoint parameter extent mismatch in " + path.string());
    }
    in.read(reinterpret_cast<char*>(p->value.data()),
            static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    if (!in) fail(errc::truncated, "truncated checkpoint " + path.string());
  }
  Loaded loaded{std::move(model), {}};
  loaded.ema_shadow.reserve(params.size());
  for (const auto& p : params) {
    std::vector<double> shadow(p->value.size());
    in.read(reinterpret_cast<char*>(shadow.data()),
            static_cast<std::streamsize>(shadow.size() * sizeof(double)));
    if (!in) fail(errc::truncated, "truncated checkpoint " + path.string());
    loaded.ema_shadow.push_back(std::move(shadow));
  }
  // Loaded values are committed parameters; inversion is legitimate.
  loaded.model.mark_actnorm_initialized();
  return loaded;
}

}  // namespace cnf::model


#include "core/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cnf::ad {

namespace {

std::int64_t product(std::span<const std::int64_t> e) {
  std::int64_t n = 1;
  for (auto v : e) n *= v;
  return n;
}

std::string shape_str(std::span<const std::int64_t> s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

}  // namespace

TensorPtr make_tensor(std::vector<std::int64_t> shape, std::vector<double> value,
                      bool requires_grad) {
  for (auto e : shape)
    require(e > 0, errc::invalid_argument, "tensor extent must be positive");
  require(product(shape) == static_cast<std::int64_t>(value.size()), errc::shape_mismatch,
          "tensor data length " + std::to_string(value.size()) + " does not match shape " +
              shape_str(shape));
  auto t = std::make_shared<Tensor>();
  t->shape = std::move(shape);
  t->value = std::move(value);
  t->set_requires_grad(requires_grad);
  return t;
}

TensorPtr zeros(std::vector<std::int64_t> shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

TensorPtr full(std::vector<std::int64_t> shape, double v, bool requires_grad) {
  const auto n = product(shape);
  require(n > 0, errc::invalid_argument, "tensor extent must be positive");
  return make_tensor(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), v),
                     requires_grad);
}

TensorPtr scalar(double v, bool requires_grad) { return make_tensor({}, {v}, requires_grad); }

void Graph::record(TensorPtr out, std::function<void()> backprop) {
  nodes_.push_back(Node{std::move(out), std::move(backprop)});
}

TensorPtr Graph::binary_op(const TensorPtr& a, const TensorPtr& b, const char* name,
                           const std::function<double(double, double)>& f,
                           const std::function<double(double, double)>& dfa,
                           const std::function<double(double, double)>& dfb) {
  const std::int64_t na = a->numel(), nb = b->numel();
  const bool a_scalar = na == 1, b_scalar = nb == 1;
  require(a->shape == b->shape || a_scalar || b_scalar, errc::shape_mismatch,
          std::string(name) + ": shapes " + shape_str(a->shape) + " and " + shape_str(b->shape) +
              " are neither equal nor scalar-broadcastable");

  const TensorPtr& big = (b_scalar && !a_scalar) ? a : (a_scalar && !b_scalar ? b : a);
  const std::int64_t n = big->numel();
  std::vector<double> out(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const double av = a->value[a_scalar ? 0 : i];
    const double bv = b->value[b_scalar ? 0 : i];
    out[static_cast<std::size_t>(i)] = f(av, bv);
  }
  auto res = make_tensor(big->shape, std::move(out), track(a) || track(b));
  if (res->requires_grad) {
    record(res, [a, b, res, dfa, dfb, a_scalar, b_scalar, n]() {
      for (std::int64_t i = 0; i < n; ++i) {
        const double av = a->value[a_scalar ? 0 : i];
        const double bv = b->value[b_scalar ? 0 : i];
        const double g = res->grad[static_cast<std::size_t>(i)];
        if (a->requires_grad) a->grad[a_scalar ? 0 : i] += g * dfa(av, bv);
        if (b->requires_grad) b->grad[b_scalar ? 0 : i] += g * dfb(av, bv);
      }
    });
  }
  return res;
}

TensorPtr Graph::add(const TensorPtr& a, const TensorPtr& b) {
  return binary_op(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

TensorPtr Graph::sub(const TensorPtr& a, const TensorPtr& b) {
  return binary_op(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

TensorPtr Graph::mul(const TensorPtr& a, const TensorPtr& b) {
  return binary_op(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

TensorPtr Graph::add(const TensorPtr& a, double b) { return add(a, scalar(b)); }
TensorPtr Graph::mul(const TensorPtr& a, double b) { return mul(a, scalar(b)); }

TensorPtr Graph::unary_map(const TensorPtr& a, const std::function<double(double)>& f,
                           const std::function<double(double, double)>& df) {
  const std::int64_t n = a->numel();
  std::vector<double> out(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = f(a->value[i]);
  auto res = make_tensor(a->shape, std::move(out), track(a));
  if (res->requires_grad) {
    record(res, [a, res, df, n]() {
      for (std::int64_t i = 0; i < n; ++i)
        a->grad[i] += res->grad[i] * df(a->value[i], res->value[i]);
    });
  }
  return res;
}

TensorPtr Graph::exp(const TensorPtr& a) {
  return unary_map(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

TensorPtr Graph::log(const TensorPtr& a) {
  for (double v : a->value)
    require(v > 0.0, errc::domain_error, "log requires strictly positive inputs");
  return unary_map(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

TensorPtr Graph::tanh(const TensorPtr& a) {
  return unary_map(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

TensorPtr Graph::sigmoid(const TensorPtr& a) {
  return unary_map(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

TensorPtr Graph::leaky_relu(const TensorPtr& a, double slope) {
  return unary_map(
      a, [slope](double x) { return x >= 0.0 ? x : slope * x; },
      [slope](double x, double) { return x >= 0.0 ? 1.0 : slope; });
}

TensorPtr Graph::reduce_sum(const TensorPtr& a, std::span<const int> axes) {
  const int rank = static_cast<int>(a->shape.size());
  std::vector<bool> reduced(static_cast<std::size_t>(rank), false);
  for (int ax : axes) {
    require(ax >= 0 && ax < rank, errc::invalid_argument,
            "reduce: axis " + std::to_string(ax) + " out of range for rank " +
                std::to_string(rank));
    require(!reduced[static_cast<std::size_t>(ax)], errc::invalid_argument,
            "reduce: duplicate axis");
    reduced[static_cast<std::size_t>(ax)] = true;
  }

  std::vector<std::int64_t> out_shape;
  for (int i = 0; i < rank; ++i)
    if (!reduced[static_cast<std::size_t>(i)]) out_shape.push_back(a->shape[i]);

  // Row-major strides of the input, and the matching output stride for every
  // kept axis (reduced axes map to stride 0).
  std::vector<std::int64_t> in_stride(static_cast<std::size_t>(rank), 1);
  for (int i = rank - 2; i >= 0; --i) in_stride[i] = in_stride[i + 1] * a->shape[i + 1];
  std::vector<std::int64_t> out_stride_for_axis(static_cast<std::size_t>(rank), 0);
  {
    std::int64_t s = 1;
    for (int i = rank - 1; i >= 0; --i) {
      if (!reduced[static_cast<std::size_t>(i)]) {
        out_stride_for_axis[i] = s;
        s *= a->shape[i];
      }
    }
  }

  const std::int64_t n_in = a->numel();
  const std::int64_t n_out = product(out_shape);
  std::vector<std::int64_t> out_index_of(static_cast<std::size_t>(n_in));
  for (std::int64_t flat = 0; flat < n_in; ++flat) {
    std::int64_t rem = flat, oi = 0;
    for (int i = 0; i < rank; ++i) {
      const std::int64_t coord = rem / in_stride[i];
      rem %= in_stride[i];
      oi += coord * out_stride_for_axis[i];
    }
    out_index_of[static_cast<std::size_t>(flat)] = oi;
  }

  std::vector<double> out(static_cast<std::size_t>(n_out), 0.0);
  for (std::int64_t i = 0; i < n_in; ++i) out[out_index_of[i]] += a->value[i];
  auto res = make_tensor(std::move(out_shape), std::move(out), track(a));
  if (res->requires_grad) {
    record(res, [a, res, out_index_of = std::move(out_index_of), n_in]() {
      for (std::int64_t i = 0; i < n_in; ++i) a->grad[i] += res->grad[out_index_of[i]];
    });
  }
  return res;
}

TensorPtr Graph::reduce_mean(const TensorPtr& a, std::span<const int> axes) {
  auto s = reduce_sum(a, axes);
  const double scale =
      static_cast<double>(s->numel()) / static_cast<double>(a->numel());
  return mul(s, scale);
}

TensorPtr Graph::sum_all(const TensorPtr& a) {
  std::vector<int> axes(a->shape.size());
  std::iota(axes.begin(), axes.end(), 0);
  return reduce_sum(a, axes);
}

TensorPtr Graph::mean_all(const TensorPtr& a) {
  return mul(sum_all(a), 1.0 / static_cast<double>(a->numel()));
}

TensorPtr Graph::reshape(const TensorPtr& a, std::vector<std::int64_t> shape) {
  require(product(shape) == a->numel(), errc::shape_mismatch,
          "reshape: element count mismatch, " + shape_str(a->shape) + " -> " + shape_str(shape));
  auto res = make_tensor(std::move(shape), a->value, track(a));
  if (res->requires_grad) {
    record(res, [a, res]() {
      for (std::size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += res->grad[i];
    });
  }
  return res;
}

TensorPtr Graph::concat_channels(std::span<const TensorPtr> parts) {
  require(!parts.empty(), errc::invalid_argument, "concat: no inputs");
  const auto& first = parts[0];
  require(!first->shape.empty(), errc::shape_mismatch, "concat: rank must be >= 1");
  std::int64_t channels = 0;
  bool any_grad = false;
  for (const auto& p : parts) {
    require(p->shape.size() == first->shape.size(), errc::shape_mismatch,
            "concat: rank mismatch");
    for (std::size_t i = 1; i < first->shape.size(); ++i)
      require(p->shape[i] == first->shape[i], errc::shape_mismatch,
              "concat: trailing extents differ");
    channels += p->shape[0];
    any_grad |= enable_grad_ && p->requires_grad;
  }
  std::vector<std::int64_t> out_shape = first->shape;
  out_shape[0] = channels;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(product(out_shape)));
  for (const auto& p : parts) out.insert(out.end(), p->value.begin(), p->value.end());
  auto res = make_tensor(std::move(out_shape), std::move(out), any_grad);
  if (any_grad) {
    std::vector<TensorPtr> held(parts.begin(), parts.end());
    record(res, [held = std::move(held), res]() {
      std::size_t off = 0;
      for (const auto& p : held) {
        if (p->requires_grad)
          for (std::size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += res->grad[off + i];
        off += p->value.size();
      }
    });
  }
  return res;
}

std::vector<TensorPtr> Graph::split_channels(const TensorPtr& a,
                                             std::span<const std::int64_t> sizes) {
  require(!a->shape.empty(), errc::shape_mismatch, "split: rank must be >= 1");
  std::int64_t total = 0;
  for (auto s : sizes) {
    require(s > 0, errc::invalid_argument, "split: sizes must be positive");
    total += s;
  }
  require(total == a->shape[0], errc::shape_mismatch,
          "split: sizes sum to " + std::to_string(total) + ", leading extent is " +
              std::to_string(a->shape[0]));
  const std::int64_t inner = a->numel() / a->shape[0];
  std::vector<TensorPtr> out;
  std::size_t off = 0;
  for (auto s : sizes) {
    std::vector<std::int64_t> shape = a->shape;
    shape[0] = s;
    const std::size_t len = static_cast<std::size_t>(s * inner);
    std::vector<double> vals(a->value.begin() + off, a->value.begin() + off + len);
    auto part = make_tensor(std::move(shape), std::move(vals), track(a));
    if (track(a)) {
      record(part, [a, part, off]() {
        for (std::size_t i = 0; i < part->grad.size(); ++i) a->grad[off + i] += part->grad[i];
      });
    }
    out.push_back(std::move(part));
    off += len;
  }
  return out;
}

namespace {

// Flat index maps for the 2×2 rearrangement: out[b*C + c][i][j] = in[c][2i+bi][2j+bj]
// with b = 0..3 ordered TL, TR, BL, BR.
std::vector<std::int64_t> squeeze_source_index(std::int64_t c, std::int64_t h, std::int64_t w) {
  std::vector<std::int64_t> src(static_cast<std::size_t>(c * h * w));
  const std::int64_t ho = h / 2, wo = w / 2;
  std::int64_t o = 0;
  for (std::int64_t b = 0; b < 4; ++b) {
    const std::int64_t bi = b / 2, bj = b % 2;
    for (std::int64_t ch = 0; ch < c; ++ch)
      for (std::int64_t i = 0; i < ho; ++i)
        for (std::int64_t j = 0; j < wo; ++j)
          src[o++] = (ch * h + 2 * i + bi) * w + 2 * j + bj;
  }
  return src;
}

}  // namespace

TensorPtr Graph::space_to_depth(const TensorPtr& a) {
  require(a->shape.size() == 3, errc::shape_mismatch, "space_to_depth: expected C×H×W");
  const auto c = a->shape[0], h = a->shape[1], w = a->shape[2];
  require(h % 2 == 0 && w % 2 == 0, errc::shape_mismatch,
          "space_to_depth: spatial extents must be even, got " + shape_str(a->shape));
  auto src = squeeze_source_index(c, h, w);
  std::vector<double> out(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = a->value[src[i]];
  auto res = make_tensor({4 * c, h / 2, w / 2}, std::move(out), track(a));
  if (res->requires_grad) {
    record(res, [a, res, src = std::move(src)]() {
      for (std::size_t i = 0; i < src.size(); ++i) a->grad[src[i]] += res->grad[i];
    });
  }
  return res;
}

TensorPtr Graph::depth_to_space(const TensorPtr& a) {
  require(a->shape.size() == 3, errc::shape_mismatch, "depth_to_space: expected C×H×W");
  const auto c4 = a->shape[0], h = a->shape[1], w = a->shape[2];
  require(c4 % 4 == 0, errc::shape_mismatch,
          "depth_to_space: channel extent must be divisible by 4");
  auto dst = squeeze_source_index(c4 / 4, 2 * h, 2 * w);
  std::vector<double> out(dst.size());
  for (std::size_t i = 0; i < dst.size(); ++i) out[dst[i]] = a->value[i];
  auto res = make_tensor({c4 / 4, 2 * h, 2 * w}, std::move(out), track(a));
  if (res->requires_grad) {
    record(res, [a, res, dst = std::move(dst)]() {
      for (std::size_t i = 0; i < dst.size(); ++i) a->grad[i] += res->grad[dst[i]];
    });
  }
  return res;
}

void Graph::backward(const TensorPtr& loss) {
  require(loss && loss->numel() == 1, errc::invalid_argument,
          "backward: loss must be a one-element tensor");
  if (!loss->requires_grad) return;  // loss does not depend on any tracked leaf
  for (auto& node : nodes_)
    if (node.out->requires_grad) node.out->zero_grad();
  loss->grad[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
    if (it->backprop) it->backprop();
}

}  // namespace cnf::ad

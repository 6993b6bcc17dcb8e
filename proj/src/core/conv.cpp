#include <cblas.h>

#include <cstring>
#include <vector>

#include "core/tensor.hpp"

namespace cnf::ad {

namespace {

// im2col for stride-1 convolution with zero padding. Columns are laid out
// (C*k*k) × (Ho*Wo) so the forward pass is one dgemm against the O×(C*k*k)
// kernel matrix.
void im2col(const double* in, std::int64_t c, std::int64_t h, std::int64_t w, std::int64_t k,
            std::int64_t pad, std::int64_t ho, std::int64_t wo, double* cols) {
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t di = 0; di < k; ++di) {
      for (std::int64_t dj = 0; dj < k; ++dj) {
        double* row = cols + ((ch * k + di) * k + dj) * ho * wo;
        for (std::int64_t i = 0; i < ho; ++i) {
          const std::int64_t si = i + di - pad;
          if (si < 0 || si >= h) {
            std::memset(row + i * wo, 0, sizeof(double) * static_cast<std::size_t>(wo));
            continue;
          }
          const double* src = in + (ch * h + si) * w;
          for (std::int64_t j = 0; j < wo; ++j) {
            const std::int64_t sj = j + dj - pad;
            row[i * wo + j] = (sj >= 0 && sj < w) ? src[sj] : 0.0;
          }
        }
      }
    }
  }
}

// Scatter-add transpose of im2col.
void col2im_add(const double* cols, std::int64_t c, std::int64_t h, std::int64_t w,
                std::int64_t k, std::int64_t pad, std::int64_t ho, std::int64_t wo, double* out) {
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t di = 0; di < k; ++di) {
      for (std::int64_t dj = 0; dj < k; ++dj) {
        const double* row = cols + ((ch * k + di) * k + dj) * ho * wo;
        for (std::int64_t i = 0; i < ho; ++i) {
          const std::int64_t si = i + di - pad;
          if (si < 0 || si >= h) continue;
          double* dst = out + (ch * h + si) * w;
          for (std::int64_t j = 0; j < wo; ++j) {
            const std::int64_t sj = j + dj - pad;
            if (sj >= 0 && sj < w) dst[sj] += row[i * wo + j];
          }
        }
      }
    }
  }
}

void dgemm(CBLAS_TRANSPOSE ta, CBLAS_TRANSPOSE tb, std::int64_t m, std::int64_t n, std::int64_t k,
           const double* a, const double* b, double beta, double* out) {
  cblas_dgemm(CblasRowMajor, ta, tb, static_cast<int>(m), static_cast<int>(n),
              static_cast<int>(k), 1.0, a, static_cast<int>(ta == CblasNoTrans ? k : m), b,
              static_cast<int>(tb == CblasNoTrans ? n : k), beta, out, static_cast<int>(n));
}

}  // namespace

TensorPtr Graph::conv2d(const TensorPtr& input, const TensorPtr& kernel, const TensorPtr& bias,
                        int pad) {
  require(input->shape.size() == 3, errc::shape_mismatch, "conv2d: input must be C×H×W");
  require(kernel->shape.size() == 4, errc::shape_mismatch, "conv2d: kernel must be O×C×k×k");
  const auto c = input->shape[0], h = input->shape[1], w = input->shape[2];
  const auto o = kernel->shape[0], kc = kernel->shape[1], k = kernel->shape[2];
  require(kernel->shape[3] == k, errc::shape_mismatch, "conv2d: kernel window must be square");
  require(k % 2 == 1, errc::invalid_argument, "conv2d: kernel extent must be odd");
  require(kc == c, errc::shape_mismatch,
          "conv2d: input has " + std::to_string(c) + " channels, kernel expects " +
              std::to_string(kc));
  require(bias->shape.size() == 1 && bias->shape[0] == o, errc::shape_mismatch,
          "conv2d: bias must have one value per output channel");
  const std::int64_t p = pad < 0 ? (k - 1) / 2 : pad;
  const std::int64_t ho = h + 2 * p - k + 1, wo = w + 2 * p - k + 1;
  require(ho > 0 && wo > 0, errc::shape_mismatch, "conv2d: output extent would be empty");

  const std::int64_t patch = c * k * k, npos = ho * wo;
  std::vector<double> cols(static_cast<std::size_t>(patch * npos));
  im2col(input->value.data(), c, h, w, k, p, ho, wo, cols.data());

  std::vector<double> out(static_cast<std::size_t>(o * npos));
  for (std::int64_t oc = 0; oc < o; ++oc)
    std::fill_n(out.begin() + oc * npos, npos, bias->value[static_cast<std::size_t>(oc)]);
  dgemm(CblasNoTrans, CblasNoTrans, o, npos, patch, kernel->value.data(), cols.data(), 1.0,
        out.data());

  const bool needs_grad = track(input) || track(kernel) || track(bias);
  auto res = make_tensor({o, ho, wo}, std::move(out), needs_grad);
  if (needs_grad) {
    // The column buffer is recomputed in the backward closure rather than
    // captured; graphs for conv-heavy models would otherwise hold on to
    // k*k times the activation memory.
    record(res, [input, kernel, bias, res, c, h, w, k, p, ho, wo, o, patch, npos]() {
      std::vector<double> cols(static_cast<std::size_t>(patch * npos));
      im2col(input->value.data(), c, h, w, k, p, ho, wo, cols.data());
      if (bias->requires_grad) {
        for (std::int64_t oc = 0; oc < o; ++oc) {
          double s = 0.0;
          const double* g = res->grad.data() + oc * npos;
          for (std::int64_t i = 0; i < npos; ++i) s += g[i];
          bias->grad[static_cast<std::size_t>(oc)] += s;
        }
      }
      if (kernel->requires_grad)
        dgemm(CblasNoTrans, CblasTrans, o, patch, npos, res->grad.data(), cols.data(), 1.0,
              kernel->grad.data());
      if (input->requires_grad) {
        std::vector<double> dcols(static_cast<std::size_t>(patch * npos));
        dgemm(CblasTrans, CblasNoTrans, patch, npos, o, kernel->value.data(), res->grad.data(),
              0.0, dcols.data());
        col2im_add(dcols.data(), c, h, w, k, p, ho, wo, input->grad.data());
      }
    });
  }
  return res;
}

}  // namespace cnf::ad

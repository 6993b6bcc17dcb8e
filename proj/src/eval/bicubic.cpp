#include "eval/bicubic.hpp"

#include <algorithm>
#include <cmath>

#include "core/error.hpp"

namespace cnf::eval {

namespace {

constexpr double kA = -0.5;

double kernel(double t) {
  t = std::abs(t);
  if (t <= 1.0) return ((kA + 2.0) * t - (kA + 3.0)) * t * t + 1.0;
  if (t < 2.0) return (((t - 5.0) * t + 8.0) * t - 4.0) * kA;
  return 0.0;
}

// One separable pass along the leading-extent axis of a rows×cols plane.
void upsample_axis(const std::vector<double>& src, std::int64_t rows, std::int64_t cols,
                   std::int64_t s, std::vector<double>& dst) {
  const std::int64_t out_rows = rows * s;
  dst.assign(static_cast<std::size_t>(out_rows * cols), 0.0);
  double w[4];
  for (std::int64_t r = 0; r < out_rows; ++r) {
    const double sr = (static_cast<double>(r) + 0.5) / static_cast<double>(s) - 0.5;
    const std::int64_t base = static_cast<std::int64_t>(std::floor(sr));
    catmull_rom_weights(sr - static_cast<double>(base), w);
    for (std::int64_t tap = 0; tap < 4; ++tap) {
      const std::int64_t src_r = std::clamp<std::int64_t>(base - 1 + tap, 0, rows - 1);
      const double wt = w[tap];
      const double* in = src.data() + src_r * cols;
      double* out = dst.data() + r * cols;
      for (std::int64_t c = 0; c < cols; ++c) out[c] += wt * in[c];
    }
  }
}

}  // namespace

void catmull_rom_weights(double f, double w[4]) {
  w[0] = kernel(1.0 + f);
  w[1] = kernel(f);
  w[2] = kernel(1.0 - f);
  w[3] = kernel(2.0 - f);
}

data::GridField bicubic_upsample(const data::GridField& lr, std::int64_t s) {
  require(s == 2 || s == 4, errc::invalid_argument, "bicubic: factor must be 2 or 4");
  require(lr.channels == 1, errc::invalid_argument, "bicubic: single-channel fields only");
  std::vector<double> rows_up;
  upsample_axis(lr.values, lr.height, lr.width, s, rows_up);

  // Transpose, upsample the other axis, transpose back.
  const std::int64_t h2 = lr.height * s;
  std::vector<double> t(static_cast<std::size_t>(h2 * lr.width));
  for (std::int64_t i = 0; i < h2; ++i)
    for (std::int64_t j = 0; j < lr.width; ++j) t[j * h2 + i] = rows_up[i * lr.width + j];
  std::vector<double> cols_up;
  upsample_axis(t, lr.width, h2, s, cols_up);

  data::GridField out;
  out.channels = 1;
  out.height = h2;
  out.width = lr.width * s;
  out.zmin = lr.zmin;
  out.zmax = lr.zmax;
  out.values.resize(static_cast<std::size_t>(out.numel()));
  for (std::int64_t j = 0; j < out.width; ++j)
    for (std::int64_t i = 0; i < out.height; ++i)
      out.values[static_cast<std::size_t>(i * out.width + j)] =
          cols_up[static_cast<std::size_t>(j * h2 + i)];
  return out;
}

}  // namespace cnf::eval

#include "data/grf.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace cnf::data {

namespace {

using cdouble = std::complex<double>;

// Direct inverse DFT along one dimension of an n×m array (rows when
// `rows`=true). O(len²) per line, which is cheap at the grid sizes this
// generator targets and has no extent restrictions.
void idft_lines(std::vector<cdouble>& a, std::int64_t n, std::int64_t m, bool rows) {
  const std::int64_t len = rows ? m : n, count = rows ? n : m;
  std::vector<cdouble> twiddle(static_cast<std::size_t>(len));
  for (std::int64_t k = 0; k < len; ++k) {
    const double ang = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(len);
    twiddle[static_cast<std::size_t>(k)] = {std::cos(ang), std::sin(ang)};
  }
  std::vector<cdouble> line(static_cast<std::size_t>(len));
  for (std::int64_t c = 0; c < count; ++c) {
    for (std::int64_t x = 0; x < len; ++x) {
      cdouble acc{0.0, 0.0};
      for (std::int64_t k = 0; k < len; ++k) {
        const std::int64_t idx = rows ? c * m + k : k * m + c;
        acc += a[static_cast<std::size_t>(idx)] *
               twiddle[static_cast<std::size_t>((x * k) % len)];
      }
      line[static_cast<std::size_t>(x)] = acc / static_cast<double>(len);
    }
    for (std::int64_t x = 0; x < len; ++x) {
      const std::int64_t idx = rows ? c * m + x : x * m + c;
      a[static_cast<std::size_t>(idx)] = line[static_cast<std::size_t>(x)];
    }
  }
}

}  // namespace

GridField generate_grf(std::uint64_t seed, std::int64_t height, std::int64_t width, double beta) {
  require(height >= 8 && width >= 8, errc::invalid_argument, "generate_grf: extents must be >= 8");
  require(beta >= 0.0, errc::domain_error, "generate_grf: spectral exponent must be >= 0");

  Rng rng(seed);
  std::vector<cdouble> spectrum(static_cast<std::size_t>(height * width));
  for (std::int64_t ki = 0; ki < height; ++ki) {
    const double fi = static_cast<double>(std::min(ki, height - ki));
    for (std::int64_t kj = 0; kj < width; ++kj) {
      const double fj = static_cast<double>(std::min(kj, width - kj));
      const double re = rng.gaussian();
      const double im = rng.gaussian();
      const double k = std::sqrt(fi * fi + fj * fj);
      const double amp = k > 0.0 ? std::pow(k, -beta / 2.0) : 0.0;  // zero the mean mode
      spectrum[static_cast<std::size_t>(ki * width + kj)] = cdouble{re, im} * amp;
    }
  }

  idft_lines(spectrum, height, width, /*rows=*/true);
  idft_lines(spectrum, height, width, /*rows=*/false);

  GridField f = make_field(height, width);
  for (std::int64_t i = 0; i < height * width; ++i)
    f.values[static_cast<std::size_t>(i)] = spectrum[static_cast<std::size_t>(i)].real();

  const auto [lo, hi] = std::minmax_element(f.values.begin(), f.values.end());
  require(*hi > *lo, errc::domain_error, "generate_grf: degenerate (constant) field");
  const double inv = 1.0 / (*hi - *lo);
  const double lo_v = *lo;
  for (auto& v : f.values) v = (v - lo_v) * inv;
  f.zmin = 0.0;
  f.zmax = 1.0;
  return f;
}

}  // namespace cnf::data

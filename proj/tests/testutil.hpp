#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace testutil {

// Dense Jacobian by central finite differences: J[i][j] = d out_i / d in_j.
using VectorFn = std::function<std::vector<double>(const std::vector<double>&)>;

inline std::vector<std::vector<double>> fd_jacobian(const VectorFn& fn,
                                                    const std::vector<double>& point,
                                                    double step) {
  std::vector<double> x = point;
  std::vector<std::vector<double>> cols;
  for (std::size_t j = 0; j < point.size(); ++j) {
    const double saved = x[j];
    x[j] = saved + step;
    const auto fp = fn(x);
    x[j] = saved - step;
    const auto fm = fn(x);
    x[j] = saved;
    std::vector<double> col(fp.size());
    for (std::size_t i = 0; i < fp.size(); ++i) col[i] = (fp[i] - fm[i]) / (2.0 * step);
    cols.push_back(std::move(col));
  }
  const std::size_t rows = cols.empty() ? 0 : cols[0].size();
  std::vector<std::vector<double>> jac(rows, std::vector<double>(point.size()));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < point.size(); ++j) jac[i][j] = cols[j][i];
  return jac;
}

// log|det| via LU with partial pivoting; the independent oracle for the
// analytic log-determinants.
inline double logabsdet(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  double logdet = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t pivot = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a[i][k]) > std::abs(a[pivot][k])) pivot = i;
    if (pivot != k) std::swap(a[pivot], a[k]);
    const double d = a[k][k];
    if (d == 0.0) return -std::numeric_limits<double>::infinity();
    logdet += std::log(std::abs(d));
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a[i][k] / d;
      for (std::size_t j = k; j < n; ++j) a[i][j] -= f * a[k][j];
    }
  }
  return logdet;
}

inline cnf::ad::TensorPtr random_tensor(std::vector<std::int64_t> shape, cnf::Rng& rng,
                                        bool requires_grad = false, double scale = 1.0,
                                        double offset = 0.0) {
  std::int64_t n = 1;
  for (auto e : shape) n *= e;
  std::vector<double> v(static_cast<std::size_t>(n));
  for (auto& x : v) x = offset + scale * rng.gaussian();
  return cnf::ad::make_tensor(std::move(shape), std::move(v), requires_grad);
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace testutil

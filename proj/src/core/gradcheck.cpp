#include <algorithm>
#include <cmath>

#include "core/tensor.hpp"

namespace cnf::ad {

double grad_check(const ScalarFn& f, const TensorPtr& point, double step) {
  require(step > 0.0, errc::invalid_argument, "grad_check: step must be positive");

  // Analytic gradient via one taped evaluation.
  auto x = make_tensor(point->shape, point->value, /*requires_grad=*/true);
  Graph g;
  auto loss = f(g, x);
  require(loss->numel() == 1, errc::invalid_argument, "grad_check: function must be scalar");
  g.backward(loss);
  const std::vector<double> analytic = x->grad;

  // Central finite differences, one coordinate at a time.
  const auto eval = [&](const std::vector<double>& v) {
    Graph scratch;
    auto p = make_tensor(point->shape, v, /*requires_grad=*/false);
    return f(scratch, p)->value[0];
  };
  double worst = 0.0;
  std::vector<double> v = point->value;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double saved = v[i];
    v[i] = saved + step;
    const double fp = eval(v);
    v[i] = saved - step;
    const double fm = eval(v);
    v[i] = saved;
    const double numeric = (fp - fm) / (2.0 * step);
    const double rel = std::abs(analytic[i] - numeric) /
                       std::max(1e-12, std::abs(analytic[i]) + std::abs(numeric));
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace cnf::ad

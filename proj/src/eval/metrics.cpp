#include "eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "core/error.hpp"

namespace cnf::eval {

namespace {

void check_same_extents(const data::GridField& a, const data::GridField& b, const char* what) {
  require(a.channels == b.channels && a.height == b.height && a.width == b.width,
          errc::shape_mismatch, std::string(what) + ": extent mismatch");
}

}  // namespace

double mae(const data::GridField& a, const data::GridField& b) {
  check_same_extents(a, b, "mae");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) acc += std::abs(a.values[i] - b.values[i]);
  return acc / static_cast<double>(a.values.size());
}

double rmse(const data::GridField& a, const data::GridField& b) {
  check_same_extents(a, b, "rmse");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(a.values.size()));
}

double crps_ensemble(std::span<const data::GridField> members, const data::GridField& truth) {
  require(!members.empty(), errc::invalid_argument, "crps: empty ensemble");
  const auto n = members.size();
  for (const auto& m : members) check_same_extents(m, truth, "crps");
  const double inv_n = 1.0 / static_cast<double>(n);
  const double inv_2n2 = 0.5 * inv_n * inv_n;
  double total = 0.0;
  for (std::size_t p = 0; p < truth.values.size(); ++p) {
    double dist = 0.0;
    for (std::size_t i = 0; i < n; ++i) dist += std::abs(members[i].values[p] - truth.values[p]);
    double spread = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        spread += std::abs(members[i].values[p] - members[j].values[p]);
    total += dist * inv_n - spread * inv_2n2;
  }
  return total / static_cast<double>(truth.values.size());
}

EnsembleStats ensemble_stats(std::span<const data::GridField> members) {
  require(!members.empty(), errc::invalid_argument, "ensemble_stats: empty ensemble");
  for (const auto& m : members) check_same_extents(m, members[0], "ensemble_stats");
  EnsembleStats out;
  out.count = static_cast<std::int64_t>(members.size());
  out.mean = members[0];
  out.stddev = members[0];
  const double inv_n = 1.0 / static_cast<double>(members.size());
  // Accumulate deviations from the first member: exact zeros for identical
  // ensembles and better conditioned than the raw moment difference.
  for (std::size_t p = 0; p < out.mean.values.size(); ++p) {
    const double ref = members[0].values[p];
    double s = 0.0, sq = 0.0;
    for (const auto& m : members) {
      const double d = m.values[p] - ref;
      s += d;
      sq += d * d;
    }
    const double mean_dev = s * inv_n;
    out.mean.values[p] = ref + mean_dev;
    out.stddev.values[p] = std::sqrt(std::max(0.0, sq * inv_n - mean_dev * mean_dev));
  }
  return out;
}

data::GridField apply_additive_constraint(const data::GridField& y_hr,
                                          const data::GridField& x_lr, std::int64_t s) {
  require(y_hr.height == x_lr.height * s && y_hr.width == x_lr.width * s, errc::shape_mismatch,
          "additive constraint: extents are not consistent with the factor");
  data::GridField out = y_hr;
  const double inv = 1.0 / static_cast<double>(s * s);
  for (std::int64_t c = 0; c < y_hr.channels; ++c)
    for (std::int64_t i = 0; i < x_lr.height; ++i)
      for (std::int64_t j = 0; j < x_lr.width; ++j) {
        double block = 0.0;
        for (std::int64_t di = 0; di < s; ++di)
          for (std::int64_t dj = 0; dj < s; ++dj) block += y_hr.at(c, i * s + di, j * s + dj);
        const double corr = x_lr.at(c, i, j) - block * inv;
        for (std::int64_t di = 0; di < s; ++di)
          for (std::int64_t dj = 0; dj < s; ++dj) out.at(c, i * s + di, j * s + dj) += corr;
      }
  return out;
}

data::GridField error_map(const data::GridField& prediction, const data::GridField& truth) {
  check_same_extents(prediction, truth, "error_map");
  data::GridField out = prediction;
  for (std::size_t i = 0; i < out.values.size(); ++i)
    out.values[i] = std::abs(prediction.values[i] - truth.values[i]);
  return out;
}

data::GridField gradient_magnitude(const data::GridField& field) {
  data::GridField out = field;
  for (std::int64_t c = 0; c < field.channels; ++c)
    for (std::int64_t i = 0; i < field.height; ++i)
      for (std::int64_t j = 0; j < field.width; ++j) {
        const std::int64_t im = std::max<std::int64_t>(i - 1, 0);
        const std::int64_t ip = std::min(i + 1, field.height - 1);
        const std::int64_t jm = std::max<std::int64_t>(j - 1, 0);
        const std::int64_t jp = std::min(j + 1, field.width - 1);
        const double gi = (field.at(c, ip, j) - field.at(c, im, j)) / static_cast<double>(ip - im);
        const double gj = (field.at(c, i, jp) - field.at(c, i, jm)) / static_cast<double>(jp - jm);
        out.at(c, i, j) = std::sqrt(gi * gi + gj * gj);
      }
  return out;
}

namespace {

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size() && a.size() >= 2, errc::invalid_argument,
          "spearman: need two equal-length series");
  const auto ra = ranks(a), rb = ranks(b);
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= static_cast<double>(ra.size());
  mb /= static_cast<double>(rb.size());
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const double da = ra[i] - ma, db = rb[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  require(va > 0.0 && vb > 0.0, errc::domain_error, "spearman: a series is constant");
  return cov / std::sqrt(va * vb);
}

}  // namespace cnf::eval

#include "data/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace cnf::data {

SplitIndices split_indices(std::size_t count, std::uint64_t seed) {
  require(count >= 6, errc::invalid_argument,
          "split: corpus must hold at least 6 samples, got " + std::to_string(count));
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed, 0x5370));
  rng.shuffle(order);
  const std::size_t hold = count / 6;
  SplitIndices s;
  s.train.assign(order.begin(), order.end() - 2 * static_cast<std::ptrdiff_t>(hold));
  s.val.assign(order.end() - 2 * static_cast<std::ptrdiff_t>(hold),
               order.end() - static_cast<std::ptrdiff_t>(hold));
  s.test.assign(order.end() - static_cast<std::ptrdiff_t>(hold), order.end());
  return s;
}

Dataset build_dataset(const std::vector<GridField>& corpus, std::int64_t s,
                      std::uint64_t split_seed) {
  const auto idx = split_indices(corpus.size(), split_seed);

  // Corpus-level range from the training split only.
  double zmin = corpus[idx.train[0]].values[0];
  double zmax = zmin;
  for (auto i : idx.train)
    for (double v : corpus[i].values) {
      zmin = std::min(zmin, v);
      zmax = std::max(zmax, v);
    }
  require(zmax > zmin, errc::domain_error, "build_dataset: training split has constant values");

  Dataset out;
  out.s = s;
  out.zmin = zmin;
  out.zmax = zmax;
  const auto build = [&](const std::vector<std::size_t>& ids,
                         std::vector<PairedSample>& dst) {
    dst.reserve(ids.size());
    for (auto i : ids) {
      PairedSample p;
      p.s = s;
      p.y_hr = minmax_normalize(corpus[i], zmin, zmax);
      p.x_lr = downsample_avg(p.y_hr, s);
      dst.push_back(std::move(p));
    }
  };
  build(idx.train, out.train);
  build(idx.val, out.val);
  build(idx.test, out.test);
  return out;
}

void write_manifest(const std::vector<std::string>& entries, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), errc::io_error, "cannot open " + path.string() + " for writing");
  for (const auto& e : entries) out << e << "\n";
  require(out.good(), errc::io_error, "write failed for " + path.string());
}

std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), errc::io_error, "cannot open manifest " + path.string());
  const auto base = path.parent_path();
  std::vector<std::filesystem::path> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::filesystem::path p(line);
    out.push_back(p.is_absolute() ? p : base / p);
  }
  return out;
}

std::vector<GridField> load_corpus(const std::filesystem::path& manifest) {
  std::vector<GridField> corpus;
  for (const auto& p : read_manifest(manifest)) corpus.push_back(read_grid(p));
  return corpus;
}

}  // namespace cnf::data

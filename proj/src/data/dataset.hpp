#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "data/grid.hpp"

namespace cnf::data {

struct PairedSample {
  GridField x_lr;
  GridField y_hr;
  std::int64_t s = 2;
};

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

// Dataset with normalization constants computed on the training split only
// and applied to every split; each field's (zmin, zmax) metadata records
// that provenance.
struct Dataset {
  std::vector<PairedSample> train, val, test;
  std::int64_t s = 2;
  double zmin = 0.0;  // train-split statistics
  double zmax = 1.0;
};

// Deterministic 4:1:1 shuffle split; val and test each get floor(n/6).
SplitIndices split_indices(std::size_t count, std::uint64_t seed);

Dataset build_dataset(const std::vector<GridField>& corpus, std::int64_t s,
                      std::uint64_t split_seed);

// Manifest: one corpus path per line, resolved relative to the manifest's
// directory on read.
void write_manifest(const std::vector<std::string>& entries, const std::filesystem::path& path);
std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& path);
std::vector<GridField> load_corpus(const std::filesystem::path& manifest);

}  // namespace cnf::data

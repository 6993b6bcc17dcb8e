#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cnf::data {

// A 2-D scalar field, row-major channel×height×width, with the source value
// range carried along so normalized fields can be mapped back exactly.
struct GridField {
  std::int64_t channels = 1;
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::vector<double> values;
  double zmin = 0.0;
  double zmax = 1.0;

  std::int64_t numel() const { return channels * height * width; }
  double& at(std::int64_t c, std::int64_t i, std::int64_t j) {
    return values[static_cast<std::size_t>((c * height + i) * width + j)];
  }
  double at(std::int64_t c, std::int64_t i, std::int64_t j) const {
    return values[static_cast<std::size_t>((c * height + i) * width + j)];
  }
};

GridField make_field(std::int64_t height, std::int64_t width, double fill = 0.0);

// Affine map of the source range [zmin, zmax] onto [0,1]; the range is kept
// in the result's metadata. zmax must exceed zmin.
GridField minmax_normalize(const GridField& field, double zmin, double zmax);
GridField minmax_denormalize(const GridField& field);

// Block-mean coarsening by factor s; conserves the field total up to
// rounding, which is the physically consistent choice for column-integrated
// quantities.
GridField downsample_avg(const GridField& hr, std::int64_t s);

// "CNFG" container: magic, u32 version, u32 rank, u32 extents, f64 values
// row-major, then (zmin, zmax) as two f64. All integers and floats are
// little-endian. Read distinguishes bad magic, version mismatch, and
// truncated payloads.
void write_grid(const GridField& field, const std::filesystem::path& path);
GridField read_grid(const std::filesystem::path& path);

// 8-bit grayscale PGM, values linearly mapped from [0,1] to [0,255] with
// clamping.
void write_pgm(const GridField& field, const std::filesystem::path& path);

}  // namespace cnf::data

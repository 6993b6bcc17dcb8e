#include "data/grid.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "core/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "grid container I/O assumes a little-endian host");

namespace cnf::data {

namespace {

constexpr char kMagic[4] = {'C', 'N', 'F', 'G'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t get_u32(std::ifstream& in, const std::filesystem::path& path) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) cnf::fail(errc::truncated, "truncated payload in " + path.string());
  return v;
}

}  // namespace

GridField make_field(std::int64_t height, std::int64_t width, double fill) {
  require(height > 0 && width > 0, errc::invalid_argument, "field extents must be positive");
  GridField f;
  f.height = height;
  f.width = width;
  f.values.assign(static_cast<std::size_t>(height * width), fill);
  return f;
}

GridField minmax_normalize(const GridField& field, double zmin, double zmax) {
  require(zmax > zmin, errc::domain_error, "minmax_normalize: zmax must exceed zmin");
  GridField out = field;
  const double inv = 1.0 / (zmax - zmin);
  for (auto& v : out.values) v = (v - zmin) * inv;
  out.zmin = zmin;
  out.zmax = zmax;
  return out;
}

GridField minmax_denormalize(const GridField& field) {
  GridField out = field;
  for (auto& v : out.values) v = field.zmin + v * (field.zmax - field.zmin);
  return out;
}

GridField downsample_avg(const GridField& hr, std::int64_t s) {
  require(s >= 1, errc::invalid_argument, "downsample: factor must be >= 1");
  require(hr.height % s == 0 && hr.width % s == 0, errc::shape_mismatch,
          "downsample: extents " + std::to_string(hr.height) + "x" + std::to_string(hr.width) +
              " are not divisible by " + std::to_string(s));
  GridField lr;
  lr.channels = hr.channels;
  lr.height = hr.height / s;
  lr.width = hr.width / s;
  lr.zmin = hr.zmin;
  lr.zmax = hr.zmax;
  lr.values.assign(static_cast<std::size_t>(lr.numel()), 0.0);
  const double inv = 1.0 / static_cast<double>(s * s);
  for (std::int64_t c = 0; c < hr.channels; ++c)
    for (std::int64_t i = 0; i < lr.height; ++i)
      for (std::int64_t j = 0; j < lr.width; ++j) {
        double acc = 0.0;
        for (std::int64_t di = 0; di < s; ++di)
          for (std::int64_t dj = 0; dj < s; ++dj) acc += hr.at(c, i * s + di, j * s + dj);
        lr.at(c, i, j) = acc * inv;
      }
  return lr;
}

void write_grid(const GridField& field, const std::filesystem::path& path) {
  require(field.numel() == static_cast<std::int64_t>(field.values.size()), errc::shape_mismatch,
          "write_grid: extents do not match payload");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), errc::io_error, "cannot open " + path.string() + " for writing");
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, 3);
  put_u32(out, static_cast<std::uint32_t>(field.channels));
  put_u32(out, static_cast<std::uint32_t>(field.height));
  put_u32(out, static_cast<std::uint32_t>(field.width));
  out.write(reinterpret_cast<const char*>(field.values.data()),
            static_cast<std::streamsize>(field.values.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(&field.zmin), sizeof(double));
  out.write(reinterpret_cast<const char*>(&field.zmax), sizeof(double));
  require(out.good(), errc::io_error, "write failed for " + path.string());
}

GridField read_grid(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), errc::io_error, "cannot open " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    fail(errc::bad_magic, "bad magic in " + path.string());
  const std::uint32_t version = get_u32(in, path);
  if (version != kVersion)
    fail(errc::version_mismatch, "grid version " + std::to_string(version) + " in " +
                                     path.string() + ", expected " + std::to_string(kVersion));
  const std::uint32_t rank = get_u32(in, path);
  if (rank != 3) fail(errc::version_mismatch, "unsupported grid rank in " + path.string());
  GridField f;
  f.channels = get_u32(in, path);
  f.height = get_u32(in, path);
  f.width = get_u32(in, path);
  require(f.channels > 0 && f.height > 0 && f.width > 0, errc::truncated,
          "degenerate extents in " + path.string());
  f.values.resize(static_cast<std::size_t>(f.numel()));
  in.read(reinterpret_cast<char*>(f.values.data()),
          static_cast<std::streamsize>(f.values.size() * sizeof(double)));
  in.read(reinterpret_cast<char*>(&f.zmin), sizeof(double));
  in.read(reinterpret_cast<char*>(&f.zmax), sizeof(double));
  if (!in) fail(errc::truncated, "truncated payload in " + path.string());
  return f;
}

void write_pgm(const GridField& field, const std::filesystem::path& path) {
  require(field.channels == 1, errc::invalid_argument, "write_pgm: single-channel fields only");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), errc::io_error, "cannot open " + path.string() + " for writing");
  out << "P5\n" << field.width << " " << field.height << "\n255\n";
  std::vector<unsigned char> bytes(field.values.size());
  for (std::size_t i = 0; i < field.values.size(); ++i) {
    const double v = std::min(1.0, std::max(0.0, field.values[i]));
    bytes[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  require(out.good(), errc::io_error, "write failed for " + path.string());
}

}  // namespace cnf::data

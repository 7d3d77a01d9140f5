// grid.hpp - voxel occupancy grids, real-valued scalar fields, VOXG files.
//
// Memory layout is x-fastest everywhere: index = x + dx*(y + dy*z).
#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "salvox/errors.hpp"
#include "salvox/geometry.hpp"

namespace salvox {

struct ScalarField {
  std::array<int, 3> dims{};
  std::vector<double> values;

  ScalarField() = default;
  ScalarField(int dx, int dy, int dz, double fill = 0.0)
      : dims{dx, dy, dz}, values(static_cast<size_t>(dx) * dy * dz, fill) {}

  size_t index(int x, int y, int z) const {
    return static_cast<size_t>(x) + static_cast<size_t>(dims[0]) * (static_cast<size_t>(y) + static_cast<size_t>(dims[1]) * z);
  }
  double& at(int x, int y, int z) { return values[index(x, y, z)]; }
  double at(int x, int y, int z) const { return values[index(x, y, z)]; }
  bool in_bounds(int x, int y, int z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < dims[0] && y < dims[1] && z < dims[2];
  }
  size_t size() const { return values.size(); }
};

struct VoxelGrid {
  std::array<int, 3> dims{};
  std::vector<std::uint8_t> occupancy;  // 0x00 empty, 0x01 occupied
  double voxel_size{1.0};               // model units per voxel
  Vec3 origin{};                        // corner of voxel (0,0,0)

  VoxelGrid() = default;
  VoxelGrid(int dx, int dy, int dz)
      : dims{dx, dy, dz}, occupancy(static_cast<size_t>(dx) * dy * dz, 0) {}

  size_t index(int x, int y, int z) const {
    return static_cast<size_t>(x) + static_cast<size_t>(dims[0]) * (static_cast<size_t>(y) + static_cast<size_t>(dims[1]) * z);
  }
  std::uint8_t& at(int x, int y, int z) { return occupancy[index(x, y, z)]; }
  std::uint8_t at(int x, int y, int z) const { return occupancy[index(x, y, z)]; }
  bool in_bounds(int x, int y, int z) const {
    return x >= 0 && y >= 0 && z >= 0 && x < dims[0] && y < dims[1] && z < dims[2];
  }

  size_t occupied_count() const {
    size_t n = 0;
    for (auto v : occupancy) n += v != 0;
    return n;
  }

  ScalarField as_field() const {
    ScalarField f(dims[0], dims[1], dims[2]);
    for (size_t i = 0; i < occupancy.size(); ++i) f.values[i] = occupancy[i] ? 1.0 : 0.0;
    return f;
  }
};

namespace detail {

inline void put_u32le(std::ostream& out, std::uint32_t v) {
  char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff), char((v >> 24) & 0xff)};
  out.write(b, 4);
}

inline std::uint32_t get_u32le(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
         (std::uint32_t(b[3]) << 24);
}

inline void put_f32le(std::ostream& out, float f) {
  std::uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32le(out, v);
}

inline float get_f32le(std::istream& in) {
  std::uint32_t v = get_u32le(in);
  float f;
  std::memcpy(&f, &v, 4);
  return f;
}

inline void check_voxg_header(std::istream& in, std::uint8_t expect_version) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "VOXG", 4) != 0) throw FormatError("not a VOXG file");
  char version;
  in.read(&version, 1);
  if (static_cast<std::uint8_t>(version) != expect_version)
    throw FormatError("unexpected VOXG version " + std::to_string(int(version)));
}

}  // namespace detail

// VOXG v1: magic, version 0x01, dims (3 x u32le), voxel_size (f32le),
// origin (3 x f32le), then dx*dy*dz occupancy bytes, x-fastest.
inline void save_voxel_grid(const VoxelGrid& g, std::ostream& out) {
  out.write("VOXG", 4);
  char version = 0x01;
  out.write(&version, 1);
  for (int d : g.dims) detail::put_u32le(out, static_cast<std::uint32_t>(d));
  detail::put_f32le(out, static_cast<float>(g.voxel_size));
  detail::put_f32le(out, static_cast<float>(g.origin.x));
  detail::put_f32le(out, static_cast<float>(g.origin.y));
  detail::put_f32le(out, static_cast<float>(g.origin.z));
  out.write(reinterpret_cast<const char*>(g.occupancy.data()),
            static_cast<std::streamsize>(g.occupancy.size()));
}

inline VoxelGrid load_voxel_grid(std::istream& in) {
  detail::check_voxg_header(in, 0x01);
  VoxelGrid g;
  for (int i = 0; i < 3; ++i) g.dims[i] = static_cast<int>(detail::get_u32le(in));
  g.voxel_size = detail::get_f32le(in);
  g.origin.x = detail::get_f32le(in);
  g.origin.y = detail::get_f32le(in);
  g.origin.z = detail::get_f32le(in);
  size_t n = static_cast<size_t>(g.dims[0]) * g.dims[1] * g.dims[2];
  g.occupancy.resize(n);
  in.read(reinterpret_cast<char*>(g.occupancy.data()), static_cast<std::streamsize>(n));
  if (!in) throw FormatError("truncated VOXG payload");
  return g;
}

// VOXG v2: same header with version 0x02 and f32le values in place of the
// occupancy bytes. Debug dump for scalar fields.
inline void save_scalar_field(const ScalarField& f, double voxel_size, const Vec3& origin,
                              std::ostream& out) {
  out.write("VOXG", 4);
  char version = 0x02;
  out.write(&version, 1);
  for (int d : f.dims) detail::put_u32le(out, static_cast<std::uint32_t>(d));
  detail::put_f32le(out, static_cast<float>(voxel_size));
  detail::put_f32le(out, static_cast<float>(origin.x));
  detail::put_f32le(out, static_cast<float>(origin.y));
  detail::put_f32le(out, static_cast<float>(origin.z));
  for (double v : f.values) detail::put_f32le(out, static_cast<float>(v));
}

inline ScalarField load_scalar_field(std::istream& in) {
  detail::check_voxg_header(in, 0x02);
  ScalarField f;
  for (int i = 0; i < 3; ++i) f.dims[i] = static_cast<int>(detail::get_u32le(in));
  detail::get_f32le(in);  // voxel_size
  for (int i = 0; i < 3; ++i) detail::get_f32le(in);  // origin
  size_t n = static_cast<size_t>(f.dims[0]) * f.dims[1] * f.dims[2];
  f.values.resize(n);
  for (size_t i = 0; i < n; ++i) f.values[i] = detail::get_f32le(in);
  if (!in) throw FormatError("truncated VOXG payload");
  return f;
}

inline void save_voxel_grid_file(const VoxelGrid& g, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  save_voxel_grid(g, out);
}

inline VoxelGrid load_voxel_grid_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return load_voxel_grid(in);
}

}  // namespace salvox

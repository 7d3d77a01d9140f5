// keypoints.hpp - DoG extrema detection, surface filtering, normals.
//
// A keypoint is a voxel that is a strict maximum (or minimum) of the DoG
// stack against its 26 spatial neighbors, with |DoG| at or above the
// contrast threshold, plus a cross-scale condition selected by
// ScaleCompare: dominance over the 3x3x3 neighborhoods of the adjacent
// scales (80 comparisons), of every other scale, or none (each DoG level
// tested independently). Ties disqualify. Boundary voxels are never
// extrema; Adjacent/All also exclude the boundary scale levels. Output is
// sorted by (scale_index, z, y, x), so traversal and partitioning order
// never show.
#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "salvox/errors.hpp"
#include "salvox/parallel.hpp"
#include "salvox/scale_space.hpp"
#include "salvox/voxelize.hpp"

namespace salvox {

enum class Polarity { Maximum, Minimum };

struct Keypoint {
  int x{}, y{}, z{};
  int scale_index{};   // into ScaleSpace::dog
  double dog_value{};
  Polarity polarity{Polarity::Maximum};
  Vec3 normal{};
  bool normal_valid{false};
};

// Cross-scale handling of the extremum test. Adjacent and All demand
// strict dominance over the 3x3x3 neighborhoods of other scales (the 2D
// convention and its all-scale variant); Spatial tests each DoG level
// independently against its own 26 spatial neighbors, emitting one
// keypoint per (position, scale) extremum.
enum class ScaleCompare { Adjacent, All, Spatial };

namespace detail {

// Strict dominance of value c at (x,y,z) over the 3x3x3 block of `f`,
// excluding the center when skip_center is set.
inline bool dominates_block(double c, bool maximum, const ScalarField& f, int x, int y, int z,
                            bool skip_center) {
  for (int oz = -1; oz <= 1; ++oz)
    for (int oy = -1; oy <= 1; ++oy)
      for (int ox = -1; ox <= 1; ++ox) {
        if (skip_center && ox == 0 && oy == 0 && oz == 0) continue;
        double v = f.at(x + ox, y + oy, z + oz);
        if (maximum ? c <= v : c >= v) return false;
      }
  return true;
}

}  // namespace detail

inline std::vector<Keypoint> detect_extrema(const ScaleSpace& space, double threshold,
                                            ScaleCompare compare = ScaleCompare::Adjacent,
                                            int threads = 1) {
  if (threshold < 0.0) throw InvalidArgument("threshold must be nonnegative");
  const int levels = static_cast<int>(space.dog.size());
  if (levels < 3) throw InvalidArgument("extrema detection needs at least 3 DoG levels");
  const auto [dx, dy, dz] = space.dims();

  std::vector<Keypoint> result;
  const int s_lo = compare == ScaleCompare::Spatial ? 0 : 1;
  const int s_hi = compare == ScaleCompare::Spatial ? levels - 1 : levels - 2;
  for (int s = s_lo; s <= s_hi; ++s) {
    const ScalarField& cur = space.dog[static_cast<size_t>(s)].field;
    // Parallel over z slabs; per-slab buffers are concatenated in slab
    // order so the output is identical for any thread count.
    const std::int64_t interior = dz - 2;
    if (interior <= 0) continue;
    std::vector<std::vector<Keypoint>> slabs(static_cast<size_t>(interior));
    parallel_for(interior, threads, [&](std::int64_t zi) {
      int z = static_cast<int>(zi) + 1;
      auto& out = slabs[static_cast<size_t>(zi)];
      for (int y = 1; y < dy - 1; ++y)
        for (int x = 1; x < dx - 1; ++x) {
          double c = cur.at(x, y, z);
          if (std::fabs(c) < threshold || c == 0.0) continue;
          for (int maximum = 0; maximum <= 1; ++maximum) {
            if (!detail::dominates_block(c, maximum, cur, x, y, z, true)) continue;
            bool ok = true;
            if (compare == ScaleCompare::Adjacent) {
              ok = detail::dominates_block(c, maximum, space.dog[static_cast<size_t>(s - 1)].field,
                                           x, y, z, false) &&
                   detail::dominates_block(c, maximum, space.dog[static_cast<size_t>(s + 1)].field,
                                           x, y, z, false);
            } else if (compare == ScaleCompare::All) {
              for (int o = 0; o < levels && ok; ++o) {
                if (o == s) continue;
                ok = detail::dominates_block(c, maximum, space.dog[static_cast<size_t>(o)].field,
                                             x, y, z, false);
              }
            }
            if (ok) {
              Keypoint kp;
              kp.x = x;
              kp.y = y;
              kp.z = z;
              kp.scale_index = s;
              kp.dog_value = c;
              kp.polarity = maximum ? Polarity::Maximum : Polarity::Minimum;
              out.push_back(kp);
            }
          }
        }
    });
    for (auto& slab : slabs)
      for (auto& kp : slab) result.push_back(kp);
  }
  return result;
}

// Keeps keypoints whose voxel is set in the surface mask; order preserved.
inline std::vector<Keypoint> filter_surface(std::vector<Keypoint> keypoints,
                                            const std::vector<std::uint8_t>& surface_mask,
                                            const std::array<int, 3>& dims) {
  std::vector<Keypoint> out;
  out.reserve(keypoints.size());
  for (auto& kp : keypoints) {
    size_t idx = static_cast<size_t>(kp.x) +
                 static_cast<size_t>(dims[0]) * (static_cast<size_t>(kp.y) + static_cast<size_t>(dims[1]) * kp.z);
    if (surface_mask[idx]) out.push_back(kp);
  }
  return out;
}

// Outward normal: negated central-difference gradient of the smoothed
// field at the keypoint's scale. If the gradient is numerically zero,
// falls back to the direction from the occupied-voxel centroid of the 5^3
// neighborhood toward the keypoint. Sets normal_valid accordingly.
inline void estimate_normal(const ScaleSpace& space, const VoxelGrid& occupancy, Keypoint& kp) {
  const ScalarField& f = space.levels[static_cast<size_t>(kp.scale_index)].field;
  Vec3 g{(f.at(kp.x + 1, kp.y, kp.z) - f.at(kp.x - 1, kp.y, kp.z)) * 0.5,
         (f.at(kp.x, kp.y + 1, kp.z) - f.at(kp.x, kp.y - 1, kp.z)) * 0.5,
         (f.at(kp.x, kp.y, kp.z + 1) - f.at(kp.x, kp.y, kp.z - 1)) * 0.5};
  double n = norm(g);
  if (n >= 1e-9) {
    kp.normal = g / -n;
    kp.normal_valid = true;
    return;
  }
  Vec3 centroid{};
  int count = 0;
  for (int oz = -2; oz <= 2; ++oz)
    for (int oy = -2; oy <= 2; ++oy)
      for (int ox = -2; ox <= 2; ++ox) {
        int x = kp.x + ox, y = kp.y + oy, z = kp.z + oz;
        if (!occupancy.in_bounds(x, y, z) || !occupancy.at(x, y, z)) continue;
        centroid += Vec3{double(x), double(y), double(z)};
        ++count;
      }
  if (count > 0) {
    Vec3 dir = Vec3{double(kp.x), double(kp.y), double(kp.z)} - centroid / double(count);
    double len = norm(dir);
    if (len >= 1e-9) {
      kp.normal = dir / len;
      kp.normal_valid = true;
      return;
    }
  }
  kp.normal = {};
  kp.normal_valid = false;
}

inline void estimate_normals(const ScaleSpace& space, const VoxelGrid& occupancy,
                             std::vector<Keypoint>& keypoints, int threads = 1) {
  parallel_for(static_cast<std::int64_t>(keypoints.size()), threads,
               [&](std::int64_t i) { estimate_normal(space, occupancy, keypoints[static_cast<size_t>(i)]); });
}

// CSV interface: "x,y,z,scale_index,dog_value,polarity,nx,ny,nz", rows
// sorted by (scale_index, z, y, x). Degenerate normals are written as
// zeros.
inline void save_keypoints_csv(std::vector<Keypoint> keypoints, std::ostream& out) {
  std::sort(keypoints.begin(), keypoints.end(), [](const Keypoint& a, const Keypoint& b) {
    if (a.scale_index != b.scale_index) return a.scale_index < b.scale_index;
    if (a.z != b.z) return a.z < b.z;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  out << "x,y,z,scale_index,dog_value,polarity,nx,ny,nz\n";
  char buf[160];
  for (const auto& kp : keypoints) {
    std::snprintf(buf, sizeof buf, "%d,%d,%d,%d,%.9g,%s,%.9g,%.9g,%.9g\n", kp.x, kp.y, kp.z,
                  kp.scale_index, kp.dog_value, kp.polarity == Polarity::Maximum ? "max" : "min",
                  kp.normal.x, kp.normal.y, kp.normal.z);
    out << buf;
  }
}

}  // namespace salvox

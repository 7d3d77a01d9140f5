// voxelize.hpp - solid voxelization by even-odd parity along +z columns.
//
// For every (x,y) voxel-center column the mesh triangles are rasterized in
// the xy plane with a half-open boundary rule, producing the sorted list of
// z values where the column crosses the surface. A voxel center is inside
// iff an odd number of crossings lies strictly below it. The boundary rule
// is equivalent to testing the perturbed point (cx - eps^2, cy + eps), so a
// ray through a shared edge or vertex is counted by exactly one of the
// incident triangles and closed meshes yield even crossing counts.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "salvox/errors.hpp"
#include "salvox/grid.hpp"
#include "salvox/mesh.hpp"

namespace salvox {

namespace detail {

// Half-open acceptance for a point exactly on edge a->b of a CCW triangle.
inline bool edge_accepts_boundary(double dx, double dy) {
  return dx > 0.0 || (dx == 0.0 && dy > 0.0);
}

}  // namespace detail

// Mesh must already live in voxel units (see normalize_mesh). The grid is
// cubic with dims resolution^3, voxel_size 1 and origin at (0,0,0).
inline VoxelGrid voxelize(const TriangleMesh& mesh, int resolution) {
  if (resolution < 1) throw InvalidArgument("resolution must be positive");
  if (mesh.triangles.empty()) throw DegenerateError("cannot voxelize an empty mesh");
  const int res = resolution;

  // Crossing z values per (x,y) column.
  std::vector<std::vector<double>> crossings(static_cast<size_t>(res) * res);

  for (const auto& tri : mesh.triangles) {
    Vec3 p0 = mesh.vertices[static_cast<size_t>(tri[0])];
    Vec3 p1 = mesh.vertices[static_cast<size_t>(tri[1])];
    Vec3 p2 = mesh.vertices[static_cast<size_t>(tri[2])];
    Vec3 n = cross(p1 - p0, p2 - p0);
    if (n.z == 0.0) continue;  // projects to a segment; the ray only grazes
    if (n.z < 0.0) {
      std::swap(p1, p2);
      n = -n;
    }
    double minx = std::min(p0.x, std::min(p1.x, p2.x));
    double maxx = std::max(p0.x, std::max(p1.x, p2.x));
    double miny = std::min(p0.y, std::min(p1.y, p2.y));
    double maxy = std::max(p0.y, std::max(p1.y, p2.y));
    int x0 = std::max(0, static_cast<int>(std::ceil(minx - 0.5)));
    int x1 = std::min(res - 1, static_cast<int>(std::floor(maxx - 0.5)));
    int y0 = std::max(0, static_cast<int>(std::ceil(miny - 0.5)));
    int y1 = std::min(res - 1, static_cast<int>(std::floor(maxy - 0.5)));

    const Vec3 v[3] = {p0, p1, p2};
    for (int y = y0; y <= y1; ++y) {
      double cy = y + 0.5;
      for (int x = x0; x <= x1; ++x) {
        double cx = x + 0.5;
        bool inside = true;
        for (int e = 0; e < 3 && inside; ++e) {
          const Vec3& a = v[e];
          const Vec3& b = v[(e + 1) % 3];
          double dx = b.x - a.x, dy = b.y - a.y;
          double ef = dx * (cy - a.y) - dy * (cx - a.x);
          if (ef < 0.0 || (ef == 0.0 && !detail::edge_accepts_boundary(dx, dy))) inside = false;
        }
        if (!inside) continue;
        double z = p0.z - (n.x * (cx - p0.x) + n.y * (cy - p0.y)) / n.z;
        crossings[static_cast<size_t>(x) + static_cast<size_t>(res) * y].push_back(z);
      }
    }
  }

  // Columns with an odd crossing count cannot be filled consistently.
  size_t non_empty = 0, inconsistent = 0;
  for (auto& c : crossings) {
    if (c.empty()) continue;
    ++non_empty;
    std::sort(c.begin(), c.end());
    if (c.size() % 2 != 0) ++inconsistent;
  }
  if (non_empty > 0 && static_cast<double>(inconsistent) > 0.02 * static_cast<double>(non_empty)) {
    throw WatertightError("mesh is not watertight: " + std::to_string(inconsistent) + " of " +
                          std::to_string(non_empty) + " columns have odd crossing parity");
  }

  VoxelGrid grid(res, res, res);
  grid.voxel_size = 1.0;
  grid.origin = {0.0, 0.0, 0.0};

  auto fill_column = [&](int x, int y, const std::vector<double>& zs) {
    size_t ptr = 0;
    for (int z = 0; z < res; ++z) {
      double center = z + 0.5;
      while (ptr < zs.size() && zs[ptr] < center) ++ptr;
      if (ptr % 2 == 1) grid.at(x, y, z) = 1;
    }
  };

  for (int y = 0; y < res; ++y)
    for (int x = 0; x < res; ++x) {
      const auto& zs = crossings[static_cast<size_t>(x) + static_cast<size_t>(res) * y];
      if (zs.size() % 2 == 0) fill_column(x, y, zs);
    }

  // Repair: copy the occupancy of the nearest parity-consistent column.
  if (inconsistent > 0) {
    for (int y = 0; y < res; ++y)
      for (int x = 0; x < res; ++x) {
        const auto& zs = crossings[static_cast<size_t>(x) + static_cast<size_t>(res) * y];
        if (zs.size() % 2 == 0) continue;
        long best_d2 = -1;
        int bx = -1, by = -1;
        for (int ring = 1; ring < 2 * res; ++ring) {
          if (best_d2 >= 0 && static_cast<long>(ring) * ring > best_d2) break;
          for (int oy = -ring; oy <= ring; ++oy)
            for (int ox = -ring; ox <= ring; ++ox) {
              if (std::max(std::abs(ox), std::abs(oy)) != ring) continue;
              int nx = x + ox, ny = y + oy;
              if (nx < 0 || ny < 0 || nx >= res || ny >= res) continue;
              if (crossings[static_cast<size_t>(nx) + static_cast<size_t>(res) * ny].size() % 2 != 0)
                continue;
              long d2 = static_cast<long>(ox) * ox + static_cast<long>(oy) * oy;
              if (best_d2 < 0 || d2 < best_d2) {
                best_d2 = d2;
                bx = nx;
                by = ny;
              }
            }
        }
        if (bx >= 0)
          for (int z = 0; z < res; ++z) grid.at(x, y, z) = grid.at(bx, by, z);
      }
  }
  return grid;
}

// Mask of occupied voxels with at least one empty 6-neighbor; voxels on the
// grid boundary treat out-of-grid as empty. Same x-fastest layout.
inline std::vector<std::uint8_t> surface_voxels(const VoxelGrid& grid) {
  const auto [dx, dy, dz] = grid.dims;
  std::vector<std::uint8_t> mask(grid.occupancy.size(), 0);
  for (int z = 0; z < dz; ++z)
    for (int y = 0; y < dy; ++y)
      for (int x = 0; x < dx; ++x) {
        if (!grid.at(x, y, z)) continue;
        bool exposed = x == 0 || y == 0 || z == 0 || x == dx - 1 || y == dy - 1 || z == dz - 1 ||
                       !grid.at(x - 1, y, z) || !grid.at(x + 1, y, z) || !grid.at(x, y - 1, z) ||
                       !grid.at(x, y + 1, z) || !grid.at(x, y, z - 1) || !grid.at(x, y, z + 1);
        if (exposed) mask[grid.index(x, y, z)] = 1;
      }
  return mask;
}

}  // namespace salvox

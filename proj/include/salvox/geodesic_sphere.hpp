// geodesic_sphere.hpp - subdivided-octahedron sphere and orientation bins.
//
// Level 1 is the regular octahedron; each level splits every triangle into
// four by inserting normalized edge midpoints. Midpoints are deduplicated
// through a canonical (sorted index pair) edge key, so vertex counts are
// exact: 6, 18, 66, 258, ... The vertex set is closed under the 24
// axis-aligned rotations at every level.
#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <map>
#include <ostream>
#include <utility>
#include <vector>

#include "salvox/errors.hpp"
#include "salvox/geometry.hpp"

namespace salvox {

struct GeodesicSphere {
  std::vector<Vec3> vertices;                  // unit directions
  std::vector<std::array<int, 3>> triangles;   // outward CCW
  int level{1};
};

inline GeodesicSphere build_geodesic_sphere(int level) {
  if (level < 1 || level > 6) throw InvalidArgument("geodesic sphere level must be in [1, 6]");
  GeodesicSphere s;
  s.level = 1;
  s.vertices = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  s.triangles = {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4},
                 {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
  // Normalization with the squared components summed in sorted order, so
  // the result is bit-identical under coordinate permutations and sign
  // flips: the vertex set is then closed under the octahedral group
  // exactly, not just within rounding.
  auto unit_symmetric = [](const Vec3& v) {
    double s0 = v.x * v.x, s1 = v.y * v.y, s2 = v.z * v.z;
    if (s0 > s1) std::swap(s0, s1);
    if (s1 > s2) std::swap(s1, s2);
    if (s0 > s1) std::swap(s0, s1);
    double n = std::sqrt((s0 + s1) + s2);
    return Vec3{v.x / n, v.y / n, v.z / n};
  };
  while (s.level < level) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      Vec3 m = unit_symmetric(s.vertices[static_cast<size_t>(a)] + s.vertices[static_cast<size_t>(b)]);
      int idx = static_cast<int>(s.vertices.size());
      s.vertices.push_back(m);
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(s.triangles.size() * 4);
    for (const auto& t : s.triangles) {
      int ab = mid(t[0], t[1]), bc = mid(t[1], t[2]), ca = mid(t[2], t[0]);
      next.push_back({t[0], ab, ca});
      next.push_back({t[1], bc, ab});
      next.push_back({t[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    s.triangles = std::move(next);
    ++s.level;
  }
  return s;
}

// Index of the vertex with maximum dot product; ties go to the lowest
// index. The direction need not be exactly unit length, only nonzero.
inline int nearest_vertex(const GeodesicSphere& sphere, const Vec3& direction) {
  if (dot(direction, direction) < 1e-24) throw DegenerateError("zero-length direction");
  int best = 0;
  double best_dot = dot(sphere.vertices[0], direction);
  for (size_t i = 1; i < sphere.vertices.size(); ++i) {
    double d = dot(sphere.vertices[i], direction);
    if (d > best_dot) {
      best_dot = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

// Normalized triangle centroids; an area-uniform alternative bin layout
// with one direction per face (8*4^(level-1) of them).
inline std::vector<Vec3> face_centroid_directions(const GeodesicSphere& sphere) {
  std::vector<Vec3> dirs;
  dirs.reserve(sphere.triangles.size());
  for (const auto& t : sphere.triangles) {
    Vec3 c = sphere.vertices[static_cast<size_t>(t[0])] + sphere.vertices[static_cast<size_t>(t[1])] +
             sphere.vertices[static_cast<size_t>(t[2])];
    dirs.push_back(normalized(c));
  }
  return dirs;
}

// Directional histogram bins: a set of unit directions plus the
// nearest-direction lookup shared by descriptor computation.
struct OrientationBins {
  std::vector<Vec3> directions;
  // Sphere kept when bins are its vertices; enables soft assignment to the
  // containing triangle.
  GeodesicSphere sphere;
  bool vertex_mode{true};

  static OrientationBins from_vertices(int level) {
    OrientationBins b;
    b.sphere = build_geodesic_sphere(level);
    b.directions = b.sphere.vertices;
    b.vertex_mode = true;
    return b;
  }

  static OrientationBins from_faces(int level) {
    OrientationBins b;
    b.sphere = build_geodesic_sphere(level);
    b.directions = face_centroid_directions(b.sphere);
    b.vertex_mode = false;
    return b;
  }

  int count() const { return static_cast<int>(directions.size()); }

  int nearest(const Vec3& direction) const {
    if (dot(direction, direction) < 1e-24) throw DegenerateError("zero-length direction");
    int best = 0;
    double best_dot = dot(directions[0], direction);
    for (size_t i = 1; i < directions.size(); ++i) {
      double d = dot(directions[i], direction);
      if (d > best_dot) {
        best_dot = d;
        best = static_cast<int>(i);
      }
    }
    return best;
  }
};

inline void export_sphere_off(const GeodesicSphere& s, std::ostream& out) {
  out << "OFF\n" << s.vertices.size() << " " << s.triangles.size() << " 0\n";
  char buf[96];
  for (const auto& v : s.vertices) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", v.x, v.y, v.z);
    out << buf;
  }
  for (const auto& t : s.triangles) out << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
}

}  // namespace salvox

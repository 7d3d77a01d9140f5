// synthetic.hpp - seeded generator for a small labeled mesh corpus.
//
// Four shape families: ellipsoid, box-with-protrusions, torus and
// multi-limb star (limb count fixed per class, bend angles random per
// instance). Every mesh is a union of independently closed surfaces whose
// contacts are coplanar caps, so parity voxelization sees a watertight
// solid. Same seed, same arguments -> byte-identical files.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "salvox/det_random.hpp"
#include "salvox/errors.hpp"
#include "salvox/mesh.hpp"

namespace salvox {

struct CorpusEntry {
  std::string model_id;
  std::string label;
  std::string path;  // relative to the manifest directory
};

struct CorpusManifest {
  std::vector<CorpusEntry> entries;
  std::uint64_t seed{};
};

namespace detail {

constexpr double kPi = 3.14159265358979323846;

inline void append_mesh(TriangleMesh& dst, const TriangleMesh& src) {
  int base = static_cast<int>(dst.vertices.size());
  dst.vertices.insert(dst.vertices.end(), src.vertices.begin(), src.vertices.end());
  for (const auto& t : src.triangles) dst.triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
}

inline TriangleMesh make_uv_sphere(int segments, int rings) {
  TriangleMesh m;
  m.vertices.push_back({0, 0, 1});
  for (int r = 1; r < rings; ++r) {
    double phi = kPi * r / rings;
    for (int s = 0; s < segments; ++s) {
      double theta = 2.0 * kPi * s / segments;
      m.vertices.push_back(
          {std::sin(phi) * std::cos(theta), std::sin(phi) * std::sin(theta), std::cos(phi)});
    }
  }
  m.vertices.push_back({0, 0, -1});
  int south = static_cast<int>(m.vertices.size()) - 1;
  auto ring_vertex = [&](int r, int s) { return 1 + (r - 1) * segments + (s % segments); };
  for (int s = 0; s < segments; ++s) m.triangles.push_back({0, ring_vertex(1, s), ring_vertex(1, s + 1)});
  for (int r = 1; r < rings - 1; ++r)
    for (int s = 0; s < segments; ++s) {
      int a = ring_vertex(r, s), b = ring_vertex(r, s + 1);
      int c = ring_vertex(r + 1, s), d = ring_vertex(r + 1, s + 1);
      m.triangles.push_back({a, c, d});
      m.triangles.push_back({a, d, b});
    }
  for (int s = 0; s < segments; ++s)
    m.triangles.push_back({south, ring_vertex(rings - 1, s + 1), ring_vertex(rings - 1, s)});
  return m;
}

inline TriangleMesh make_box(const Vec3& center, const Vec3& half) {
  TriangleMesh m;
  for (int i = 0; i < 8; ++i)
    m.vertices.push_back({center.x + ((i & 1) ? half.x : -half.x),
                          center.y + ((i & 2) ? half.y : -half.y),
                          center.z + ((i & 4) ? half.z : -half.z)});
  const int quads[6][4] = {{0, 2, 3, 1}, {4, 5, 7, 6}, {0, 1, 5, 4},
                           {2, 6, 7, 3}, {0, 4, 6, 2}, {1, 3, 7, 5}};
  for (const auto& q : quads) {
    m.triangles.push_back({q[0], q[1], q[2]});
    m.triangles.push_back({q[0], q[2], q[3]});
  }
  return m;
}

inline TriangleMesh make_torus(double major, double minor, int major_segs, int minor_segs) {
  TriangleMesh m;
  for (int i = 0; i < major_segs; ++i) {
    double u = 2.0 * kPi * i / major_segs;
    for (int j = 0; j < minor_segs; ++j) {
      double v = 2.0 * kPi * j / minor_segs;
      double r = major + minor * std::cos(v);
      m.vertices.push_back({r * std::cos(u), r * std::sin(u), minor * std::sin(v)});
    }
  }
  auto vid = [&](int i, int j) { return (i % major_segs) * minor_segs + (j % minor_segs); };
  for (int i = 0; i < major_segs; ++i)
    for (int j = 0; j < minor_segs; ++j) {
      int a = vid(i, j), b = vid(i + 1, j), c = vid(i + 1, j + 1), d = vid(i, j + 1);
      m.triangles.push_back({a, b, c});
      m.triangles.push_back({a, c, d});
    }
  return m;
}

// Square-section tube with one bend, capped at both ends. The base ring
// lies in the plane through `base` perpendicular to `axis`.
inline TriangleMesh make_bent_tube(const Vec3& base, const Vec3& axis, const Vec3& side,
                                   double width, double len1, double len2, double bend_angle,
                                   double bend_azimuth) {
  TriangleMesh m;
  Vec3 u = normalized(axis);
  Vec3 v = normalized(side - u * dot(side, u));
  Vec3 w = cross(u, v);
  double h = width * 0.5;
  const double corners[4][2] = {{-h, -h}, {h, -h}, {h, h}, {-h, h}};

  // Bend direction in the (v, w) plane, then rotate u toward it.
  Vec3 bend_dir = v * std::cos(bend_azimuth) + w * std::sin(bend_azimuth);
  Vec3 u2 = u * std::cos(bend_angle) + bend_dir * std::sin(bend_angle);
  Vec3 v2 = normalized(v - u2 * dot(v, u2));
  Vec3 w2 = cross(u2, v2);

  Vec3 c0 = base;
  Vec3 c1 = base + u * len1;
  Vec3 c2 = c1 + u2 * len2;
  for (const auto& cr : corners) m.vertices.push_back(c0 + v * cr[0] + w * cr[1]);
  for (const auto& cr : corners) m.vertices.push_back(c1 + v * cr[0] + w * cr[1]);
  for (const auto& cr : corners) m.vertices.push_back(c2 + v2 * cr[0] + w2 * cr[1]);

  auto quad = [&](int a, int b, int c, int d) {
    m.triangles.push_back({a, b, c});
    m.triangles.push_back({a, c, d});
  };
  // base cap (faces -u), side walls, end cap (faces +u2)
  quad(0, 3, 2, 1);
  for (int ring = 0; ring < 2; ++ring) {
    int lo = ring * 4, hi = lo + 4;
    for (int i = 0; i < 4; ++i) {
      int j = (i + 1) % 4;
      quad(lo + i, lo + j, hi + j, hi + i);
    }
  }
  quad(8, 9, 10, 11);
  return m;
}

inline void transform_mesh(TriangleMesh& m, const Mat3& rot, double scale) {
  for (auto& p : m.vertices) p = rot * (p * scale);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (a + 1) + 0xbf58476d1ce4e5b9ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline TriangleMesh generate_instance(const std::string& family, Rng& rng) {
  auto jitter = [&](double v, double rel) { return v * uniform_range(rng, 1.0 - rel, 1.0 + rel); };

  TriangleMesh mesh;
  if (family == "ellipsoid") {
    mesh = make_uv_sphere(32, 16);
    double a = jitter(1.0, 0.2), b = jitter(0.62, 0.2), c = jitter(0.45, 0.2);
    for (auto& p : mesh.vertices) p = {p.x * a, p.y * b, p.z * c};
  } else if (family == "torus") {
    mesh = make_torus(1.0, jitter(0.45, 0.2), 40, 18);
  } else if (family == "box" || family == "box-with-protrusions") {
    Vec3 half{jitter(0.8, 0.15), jitter(0.6, 0.15), jitter(0.45, 0.15)};
    mesh = make_box({0, 0, 0}, half);
    // One protrusion on each of four fixed faces, jittered in place/size.
    struct Face {
      Vec3 normal, t1, t2;
      double offset;
      double span1, span2;
    };
    const Face faces[4] = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, half.x, half.y, half.z},
                           {{-1, 0, 0}, {0, 1, 0}, {0, 0, 1}, half.x, half.y, half.z},
                           {{0, 1, 0}, {1, 0, 0}, {0, 0, 1}, half.y, half.x, half.z},
                           {{0, 0, 1}, {1, 0, 0}, {0, 1, 0}, half.z, half.x, half.y}};
    for (const auto& f : faces) {
      double cross_half = uniform_range(rng, 0.15, 0.22);
      double length = uniform_range(rng, 0.45, 0.7);
      double m1 = f.span1 - cross_half - 0.05;
      double m2 = f.span2 - cross_half - 0.05;
      double o1 = uniform_range(rng, -m1, m1);
      double o2 = uniform_range(rng, -m2, m2);
      Vec3 center = f.normal * (f.offset + length * 0.5) + f.t1 * o1 + f.t2 * o2;
      Vec3 phalf = f.t1 * cross_half + f.t2 * cross_half + f.normal * (length * 0.5);
      append_mesh(mesh, make_box(center, {std::fabs(phalf.x), std::fabs(phalf.y), std::fabs(phalf.z)}));
    }
  } else if (family == "star" || family == "multi-limb-star") {
    double core = 0.38;
    mesh = make_box({0, 0, 0}, {core, core, core});
    const Vec3 normals[6] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    const Vec3 sides[6] = {{0, 1, 0}, {0, 1, 0}, {0, 0, 1}, {0, 0, 1}, {1, 0, 0}, {1, 0, 0}};
    for (int limb = 0; limb < 6; ++limb) {
      double bend = uniform_range(rng, 0.26, 0.70);  // ~15..40 degrees
      double azimuth = uniform_range(rng, 0.0, 2.0 * kPi);
      double len1 = jitter(0.5, 0.1), len2 = jitter(0.45, 0.1);
      append_mesh(mesh, make_bent_tube(normals[limb] * core, normals[limb], sides[limb], 0.18,
                                       len1, len2, bend, azimuth));
    }
  } else {
    throw InvalidArgument("unsupported shape family '" + family + "'");
  }

  double scale = uniform_range(rng, 0.8, 1.2);
  // Uniform (Haar) random pose. Grid-aligned poses yield almost no
  // staircase extrema on flat faces; the rotation tests cover them.
  transform_mesh(mesh, random_rotation(rng), scale);
  return mesh;
}

}  // namespace detail

inline CorpusManifest generate_corpus(std::span<const std::string> classes, int per_class,
                                      std::uint64_t seed, const std::string& out_dir) {
  if (per_class < 2) throw InvalidArgument("per_class must be >= 2");
  if (classes.empty()) throw InvalidArgument("need at least one shape family");
  std::filesystem::create_directories(out_dir);
  CorpusManifest manifest;
  manifest.seed = seed;
  std::ofstream out(std::filesystem::path(out_dir) / "manifest.csv");
  if (!out) throw IoError("cannot write manifest in '" + out_dir + "'");
  out << "model_id,class,path\n";
  for (size_t ci = 0; ci < classes.size(); ++ci) {
    for (int i = 0; i < per_class; ++i) {
      Rng rng(detail::mix_seed(seed, ci, static_cast<std::uint64_t>(i)));
      TriangleMesh mesh = detail::generate_instance(classes[ci], rng);
      char idbuf[16];
      std::snprintf(idbuf, sizeof idbuf, "_%02d", i);
      CorpusEntry entry;
      entry.model_id = classes[ci] + idbuf;
      entry.label = classes[ci];
      std::string file = entry.model_id + ".off";
      out << entry.model_id << "," << entry.label << "," << file << "\n";
      // The manifest stores the relative name; the returned entries carry
      // the resolved path, same as load_manifest_csv would produce.
      entry.path = (std::filesystem::path(out_dir) / file).string();
      save_off_file(mesh, entry.path);
      manifest.entries.push_back(std::move(entry));
    }
  }
  return manifest;
}

// Manifest CSV "model_id,class,path"; relative paths resolve against the
// manifest's directory.
inline CorpusManifest load_manifest_csv(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open manifest '" + manifest_path + "'");
  std::filesystem::path dir = std::filesystem::path(manifest_path).parent_path();
  CorpusManifest manifest;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line == "model_id,class,path") continue;
    size_t c1 = line.find(',');
    size_t c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    if (c2 == std::string::npos) throw ParseError("manifest row needs model_id,class,path", line_no);
    CorpusEntry e;
    e.model_id = line.substr(0, c1);
    e.label = line.substr(c1 + 1, c2 - c1 - 1);
    std::string p = line.substr(c2 + 1);
    std::filesystem::path fp(p);
    e.path = fp.is_absolute() ? p : (dir / fp).string();
    manifest.entries.push_back(std::move(e));
  }
  if (manifest.entries.empty()) throw ParseError("manifest has no entries", line_no);
  return manifest;
}

}  // namespace salvox

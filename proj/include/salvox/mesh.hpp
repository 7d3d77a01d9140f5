// mesh.hpp - indexed triangle mesh, OFF/OBJ parsing, grid-frame normalization.
//
// The pipeline consumes triangle soups; polygons are fan-triangulated at
// load time and every non-geometry record is skipped. Parsing is strict
// about the things that matter downstream (index bounds, at least one
// face) and tolerant about decorations (OFF color variants, OBJ groups).
#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "salvox/errors.hpp"
#include "salvox/geometry.hpp"

namespace salvox {

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;

  Aabb bounds() const {
    Aabb box;
    for (const auto& v : vertices) box.expand(v);
    return box;
  }
};

enum class MeshFormat { Off, Obj };

namespace detail {

// Splits a line into whitespace-separated tokens, dropping a trailing
// '#' comment.
inline std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : line) {
    if (c == '#') break;
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      if (!cur.empty()) {
        tokens.push_back(cur);
        cur.clear();
      }
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) tokens.push_back(cur);
  return tokens;
}

inline double parse_double(const std::string& tok, long line) {
  char* end = nullptr;
  double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') throw ParseError("expected a number, got '" + tok + "'", line);
  return v;
}

inline long parse_long(const std::string& tok, long line) {
  char* end = nullptr;
  long v = std::strtol(tok.c_str(), &end, 10);
  if (end == tok.c_str() || *end != '\0') throw ParseError("expected an integer, got '" + tok + "'", line);
  return v;
}

// Reads the next line that contains tokens; returns false at EOF.
inline bool next_token_line(std::istream& in, long& line_no, std::vector<std::string>& tokens) {
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    tokens = tokenize(line);
    if (!tokens.empty()) return true;
  }
  return false;
}

inline void fan_triangulate(TriangleMesh& mesh, const std::vector<int>& poly, long line) {
  if (poly.size() < 3) throw ParseError("face with fewer than 3 vertices", line);
  for (size_t i = 1; i + 1 < poly.size(); ++i)
    mesh.triangles.push_back({poly[0], poly[i], poly[i + 1]});
}

inline TriangleMesh load_off(std::istream& in) {
  TriangleMesh mesh;
  long line_no = 0;
  std::vector<std::string> tok;
  if (!next_token_line(in, line_no, tok)) throw ParseError("empty OFF file", line_no);

  // Header token: OFF or a color/normal variant (COFF, NOFF, ...). Some
  // files put the counts on the header line.
  const std::string& head = tok[0];
  bool is_off = head.size() >= 3 && head.substr(head.size() - 3) == "OFF";
  if (!is_off) throw ParseError("missing OFF header, got '" + head + "'", line_no);
  std::vector<std::string> counts(tok.begin() + 1, tok.end());
  if (counts.empty()) {
    if (!next_token_line(in, line_no, counts)) throw ParseError("missing OFF counts line", line_no);
  }
  if (counts.size() < 3) throw ParseError("OFF counts line needs nV nF nE", line_no);
  long nv = parse_long(counts[0], line_no);
  long nf = parse_long(counts[1], line_no);
  if (nv < 0 || nf < 1) throw ParseError("OFF needs nV >= 0 and nF >= 1", line_no);

  mesh.vertices.reserve(static_cast<size_t>(nv));
  for (long i = 0; i < nv; ++i) {
    if (!next_token_line(in, line_no, tok)) throw ParseError("unexpected EOF in vertex list", line_no);
    if (tok.size() < 3) throw ParseError("vertex line needs 3 coordinates", line_no);
    // Trailing values (colors, normals) are ignored.
    mesh.vertices.push_back(
        {parse_double(tok[0], line_no), parse_double(tok[1], line_no), parse_double(tok[2], line_no)});
  }
  for (long f = 0; f < nf; ++f) {
    if (!next_token_line(in, line_no, tok)) throw ParseError("unexpected EOF in face list", line_no);
    long n = parse_long(tok[0], line_no);
    if (n < 3) throw ParseError("face with fewer than 3 vertices", line_no);
    if (static_cast<long>(tok.size()) < 1 + n) throw ParseError("face line has too few indices", line_no);
    std::vector<int> poly;
    poly.reserve(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i) {
      long idx = parse_long(tok[1 + i], line_no);
      if (idx < 0 || idx >= nv) throw ParseError("vertex index " + std::to_string(idx) + " out of range", line_no);
      poly.push_back(static_cast<int>(idx));
    }
    fan_triangulate(mesh, poly, line_no);
  }
  return mesh;
}

inline TriangleMesh load_obj(std::istream& in) {
  TriangleMesh mesh;
  long line_no = 0;
  std::vector<std::string> tok;
  while (next_token_line(in, line_no, tok)) {
    const std::string& kind = tok[0];
    if (kind == "v") {
      if (tok.size() < 4) throw ParseError("v record needs 3 coordinates", line_no);
      mesh.vertices.push_back(
          {parse_double(tok[1], line_no), parse_double(tok[2], line_no), parse_double(tok[3], line_no)});
    } else if (kind == "f") {
      std::vector<int> poly;
      for (size_t i = 1; i < tok.size(); ++i) {
        // "i", "i/t", "i/t/n", "i//n" - only the vertex index matters here.
        std::string first = tok[i].substr(0, tok[i].find('/'));
        long idx = parse_long(first, line_no);
        long nv = static_cast<long>(mesh.vertices.size());
        if (idx < 0) idx = nv + idx;  // -1 refers to the last vertex so far
        else if (idx > 0) idx = idx - 1;
        else throw ParseError("OBJ vertex index 0 is invalid", line_no);
        if (idx < 0 || idx >= nv) throw ParseError("vertex index out of range", line_no);
        poly.push_back(static_cast<int>(idx));
      }
      fan_triangulate(mesh, poly, line_no);
    }
    // vn, vt, g, o, s, usemtl, mtllib, ... are ignored.
  }
  if (mesh.triangles.empty()) throw ParseError("OBJ file contains no faces", line_no);
  return mesh;
}

}  // namespace detail

inline TriangleMesh load_mesh(std::istream& in, MeshFormat format) {
  return format == MeshFormat::Off ? detail::load_off(in) : detail::load_obj(in);
}

// Format from file extension; unknown extensions are sniffed by header.
inline TriangleMesh load_mesh_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mesh file '" + path + "'");
  auto ends_with = [&](const char* suf) {
    std::string s = path, t = suf;
    if (s.size() < t.size()) return false;
    for (size_t i = 0; i < t.size(); ++i) {
      char a = s[s.size() - t.size() + i];
      if (a >= 'A' && a <= 'Z') a = static_cast<char>(a - 'A' + 'a');
      if (a != t[i]) return false;
    }
    return true;
  };
  if (ends_with(".off")) return load_mesh(in, MeshFormat::Off);
  if (ends_with(".obj")) return load_mesh(in, MeshFormat::Obj);
  // Sniff: OFF files start with a *OFF header token.
  std::string first;
  in >> first;
  in.seekg(0);
  bool off = first.size() >= 3 && first.substr(first.size() - 3) == "OFF";
  return load_mesh(in, off ? MeshFormat::Off : MeshFormat::Obj);
}

inline void save_off(const TriangleMesh& mesh, std::ostream& out) {
  out << "OFF\n" << mesh.vertices.size() << " " << mesh.triangles.size() << " 0\n";
  char buf[96];
  for (const auto& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g\n", v.x, v.y, v.z);
    out << buf;
  }
  for (const auto& t : mesh.triangles) out << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
}

inline void save_off_file(const TriangleMesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write mesh file '" + path + "'");
  save_off(mesh, out);
}

// Centers the mesh bounding box on the grid center and scales uniformly so
// the longest bounding-box edge spans resolution - 2*padding voxels. After
// this the mesh lives in voxel units: voxel (i,j,k) has center
// (i+0.5, j+0.5, k+0.5).
inline TriangleMesh normalize_mesh(TriangleMesh mesh, int resolution, int padding) {
  if (resolution < 8) throw InvalidArgument("resolution must be >= 8");
  if (padding < 1) throw InvalidArgument("padding must be >= 1");
  if (2 * padding >= resolution) throw InvalidArgument("2*padding must be < resolution");
  if (mesh.vertices.empty() || mesh.triangles.empty())
    throw DegenerateError("mesh has no geometry to normalize");
  Aabb box = mesh.bounds();
  Vec3 ext = box.extent();
  double longest = std::max(ext.x, std::max(ext.y, ext.z));
  if (!(longest > 0.0)) throw DegenerateError("mesh bounding box has zero extent");
  double scale = static_cast<double>(resolution - 2 * padding) / longest;
  Vec3 center = box.center();
  Vec3 grid_center{resolution * 0.5, resolution * 0.5, resolution * 0.5};
  for (auto& v : mesh.vertices) v = (v - center) * scale + grid_center;
  return mesh;
}

}  // namespace salvox

// descriptor.hpp - rotation-normalized orientation histograms at keypoints.
//
// An 8x8x8 window of voxels around the keypoint is split into eight
// subblocks; every window gradient is rotated so the keypoint normal lands
// on +z and the dominant azimuth on theta = 0, then its magnitude is added
// to the nearest orientation bin of its subblock. The concatenated
// histogram is L2-normalized, clamped at 0.2 and renormalized.
//
// An even window has no central voxel, so the extra half-voxel per axis
// extends toward the normal's octant (offsets -3..+4 where the normal
// component is nonnegative, -4..+3 where it is negative), and a voxel's
// subblock is the octant of its window-centered offset in the normalized
// frame. Both choices follow the data, not the grid axes: rotating the
// model maps window sets, subblocks and bins onto each other exactly,
// which is what makes the descriptor pose-invariant.
#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "salvox/errors.hpp"
#include "salvox/geodesic_sphere.hpp"
#include "salvox/grid.hpp"
#include "salvox/keypoints.hpp"
#include "salvox/parallel.hpp"

namespace salvox {

struct VectorField {
  std::array<int, 3> dims{};
  std::vector<Vec3> values;

  size_t index(int x, int y, int z) const {
    return static_cast<size_t>(x) + static_cast<size_t>(dims[0]) * (static_cast<size_t>(y) + static_cast<size_t>(dims[1]) * z);
  }
  const Vec3& at(int x, int y, int z) const { return values[index(x, y, z)]; }
};

// Central differences at interior voxels, one-sided at the boundary.
inline Vec3 gradient_at(const ScalarField& f, int x, int y, int z) {
  const auto [dx, dy, dz] = f.dims;
  auto diff = [](double fwd, double bwd, double denom) { return (fwd - bwd) / denom; };
  Vec3 g;
  g.x = x == 0           ? diff(f.at(1, y, z), f.at(0, y, z), 1.0)
        : x == dx - 1    ? diff(f.at(dx - 1, y, z), f.at(dx - 2, y, z), 1.0)
                         : diff(f.at(x + 1, y, z), f.at(x - 1, y, z), 2.0);
  g.y = y == 0           ? diff(f.at(x, 1, z), f.at(x, 0, z), 1.0)
        : y == dy - 1    ? diff(f.at(x, dy - 1, z), f.at(x, dy - 2, z), 1.0)
                         : diff(f.at(x, y + 1, z), f.at(x, y - 1, z), 2.0);
  g.z = z == 0           ? diff(f.at(x, y, 1), f.at(x, y, 0), 1.0)
        : z == dz - 1    ? diff(f.at(x, y, dz - 1), f.at(x, y, dz - 2), 1.0)
                         : diff(f.at(x, y, z + 1), f.at(x, y, z - 1), 2.0);
  return g;
}

inline VectorField gradient_field(const ScalarField& f) {
  if (f.dims[0] < 3 || f.dims[1] < 3 || f.dims[2] < 3)
    throw InvalidArgument("gradient_field needs dims >= 3 per axis");
  VectorField g;
  g.dims = f.dims;
  g.values.resize(f.values.size());
  for (int z = 0; z < f.dims[2]; ++z)
    for (int y = 0; y < f.dims[1]; ++y)
      for (int x = 0; x < f.dims[0]; ++x) g.values[g.index(x, y, z)] = gradient_at(f, x, y, z);
  return g;
}

struct SphericalAngles {
  double phi{};    // inclination from +z, [0, pi]
  double theta{};  // azimuth, [0, 2*pi)
};

// phi = arccos(z/R); theta = arcsin(y/S) for x >= 0, else pi - arcsin(y/S),
// wrapped into [0, 2*pi). Polar vectors (S ~ 0) get theta = 0.
inline SphericalAngles spherical_angles(const Vec3& v) {
  double r = norm(v);
  if (r <= 1e-12) throw DegenerateError("spherical_angles of zero vector");
  SphericalAngles a;
  double cz = v.z / r;
  if (cz > 1.0) cz = 1.0;
  if (cz < -1.0) cz = -1.0;
  a.phi = std::acos(cz);
  double s = std::sqrt(v.x * v.x + v.y * v.y);
  if (s < 1e-12) {
    a.theta = 0.0;
    return a;
  }
  double sy = v.y / s;
  if (sy > 1.0) sy = 1.0;
  if (sy < -1.0) sy = -1.0;
  constexpr double pi = 3.14159265358979323846;
  double base = std::asin(sy);
  double theta = v.x >= 0.0 ? base : pi - base;
  const double two_pi = 2.0 * pi;
  if (theta < 0.0) theta += two_pi;
  if (theta >= two_pi) theta -= two_pi;
  a.theta = theta;
  return a;
}

// Rotation R = R_az * R_align: R_align is the minimal rotation taking the
// normal to +z (rotation by pi about x if the normal is -z); R_az then
// spins about z so the magnitude-weighted mean azimuth of the aligned
// window gradients maps to theta = 0. Near-polar aligned gradients
// (S < 1e-6) are excluded from the azimuth vote; if the remaining mass is
// below 1e-9 the spin is the identity.
inline Mat3 normalization_rotation(const Vec3& normal, std::span<const Vec3> window_gradients,
                                   bool azimuth_alignment = true) {
  double len = norm(normal);
  if (std::fabs(len - 1.0) > 1e-6) throw InvalidArgument("normal must be unit length");

  Mat3 align;
  double c = normal.z;
  Vec3 axis{normal.y, -normal.x, 0.0};  // normal x z_hat
  double s = norm(axis);
  if (s < 1e-12) {
    if (c > 0.0) {
      align = Mat3::identity();
    } else {
      align = Mat3::identity();
      align.m[1][1] = -1.0;
      align.m[2][2] = -1.0;  // pi about x
    }
  } else {
    align = Mat3::axis_angle(axis / s, std::atan2(s, c));
  }

  if (!azimuth_alignment) return align;

  double ax = 0.0, ay = 0.0;
  for (const Vec3& g : window_gradients) {
    Vec3 r = align * g;
    double sxy = std::sqrt(r.x * r.x + r.y * r.y);
    if (sxy < 1e-6) continue;
    double mass = norm(g);
    ax += mass * (r.x / sxy);
    ay += mass * (r.y / sxy);
  }
  if (std::sqrt(ax * ax + ay * ay) < 1e-9) return align;
  double mean_azimuth = std::atan2(ay, ax);
  return Mat3::rotation_z(-mean_azimuth) * align;
}

struct DescriptorParams {
  bool azimuth_alignment = true;
  bool soft_binning = false;       // spread over the containing sphere triangle
  double clamp = 0.2;
  bool spatial_weighting = false;  // Gaussian falloff over the window
};

struct Descriptor {
  int x{}, y{}, z{};
  int scale_index{};
  std::vector<double> bins;  // n_subblocks * n_bins
};

namespace detail {

// Window start per axis: the 8 offsets [lo, lo+7] whose continuous center
// lo+3.5 sits half a voxel toward the normal's side.
inline int window_lo(double normal_component) { return normal_component >= 0.0 ? -3 : -4; }

// Octant of the normalized-frame offset, x-fastest.
inline int subblock_index(const Vec3& canonical_offset) {
  return (canonical_offset.x > 0.0 ? 1 : 0) + 2 * (canonical_offset.y > 0.0 ? 1 : 0) +
         4 * (canonical_offset.z > 0.0 ? 1 : 0);
}

// Soft assignment: barycentric split over the sphere triangle whose cone
// contains the direction. Requires vertex-mode bins.
inline void soft_assign(const OrientationBins& bins, const Vec3& dir, int base, double mass,
                        std::vector<double>& out) {
  const GeodesicSphere& s = bins.sphere;
  int best_tri = -1;
  double best_min = -1e300;
  for (size_t t = 0; t < s.triangles.size(); ++t) {
    const Vec3& a = s.vertices[static_cast<size_t>(s.triangles[t][0])];
    const Vec3& b = s.vertices[static_cast<size_t>(s.triangles[t][1])];
    const Vec3& c = s.vertices[static_cast<size_t>(s.triangles[t][2])];
    double e0 = dot(dir, cross(a, b));
    double e1 = dot(dir, cross(b, c));
    double e2 = dot(dir, cross(c, a));
    double m = std::min(e0, std::min(e1, e2));
    if (m > best_min) {
      best_min = m;
      best_tri = static_cast<int>(t);
    }
  }
  const auto& tri = s.triangles[static_cast<size_t>(best_tri)];
  const Vec3& a = s.vertices[static_cast<size_t>(tri[0])];
  const Vec3& b = s.vertices[static_cast<size_t>(tri[1])];
  const Vec3& c = s.vertices[static_cast<size_t>(tri[2])];
  // Barycentric weights of the central projection onto the plane.
  double wa = dot(dir, cross(b, c));
  double wb = dot(dir, cross(c, a));
  double wc = dot(dir, cross(a, b));
  wa = wa < 0 ? 0 : wa;
  wb = wb < 0 ? 0 : wb;
  wc = wc < 0 ? 0 : wc;
  double sum = wa + wb + wc;
  if (sum <= 0) {
    out[static_cast<size_t>(base + tri[0])] += mass;
    return;
  }
  out[static_cast<size_t>(base + tri[0])] += mass * wa / sum;
  out[static_cast<size_t>(base + tri[1])] += mass * wb / sum;
  out[static_cast<size_t>(base + tri[2])] += mass * wc / sum;
}

}  // namespace detail

// Returns nullopt when the keypoint has no valid normal or the window has
// zero gradient mass.
inline std::optional<Descriptor> compute_descriptor(const ScalarField& field, const Keypoint& kp,
                                                    const OrientationBins& bins,
                                                    const DescriptorParams& params = {}) {
  if (!kp.normal_valid) return std::nullopt;
  const int n_bins = bins.count();
  const int lo_x = detail::window_lo(kp.normal.x);
  const int lo_y = detail::window_lo(kp.normal.y);
  const int lo_z = detail::window_lo(kp.normal.z);

  // Window gradients in a fixed traversal order (z, y, x ascending), with
  // each voxel's offset from the window center lo+3.5 per axis.
  std::vector<Vec3> gradients;
  gradients.reserve(512);
  std::vector<Vec3> centered;
  centered.reserve(512);
  std::vector<double> weight;
  weight.reserve(512);
  for (int oz = lo_z; oz <= lo_z + 7; ++oz)
    for (int oy = lo_y; oy <= lo_y + 7; ++oy)
      for (int ox = lo_x; ox <= lo_x + 7; ++ox) {
        int x = kp.x + ox, y = kp.y + oy, z = kp.z + oz;
        if (!field.in_bounds(x, y, z)) continue;  // zero padding
        gradients.push_back(gradient_at(field, x, y, z));
        Vec3 u{ox - (lo_x + 3.5), oy - (lo_y + 3.5), oz - (lo_z + 3.5)};
        centered.push_back(u);
        if (params.spatial_weighting) {
          weight.push_back(std::exp(-dot(u, u) / (2.0 * 16.0)));  // sigma = half window
        } else {
          weight.push_back(1.0);
        }
      }

  Mat3 rot = normalization_rotation(kp.normal, gradients, params.azimuth_alignment);

  Descriptor desc;
  desc.x = kp.x;
  desc.y = kp.y;
  desc.z = kp.z;
  desc.scale_index = kp.scale_index;
  desc.bins.assign(static_cast<size_t>(8) * n_bins, 0.0);

  double total_mass = 0.0;
  for (size_t i = 0; i < gradients.size(); ++i) {
    double mass = norm(gradients[i]) * weight[i];
    if (mass <= 0.0) continue;
    Vec3 dir = rot * gradients[i];
    int base = detail::subblock_index(rot * centered[i]) * n_bins;
    if (params.soft_binning && bins.vertex_mode) {
      detail::soft_assign(bins, dir, base, mass, desc.bins);
    } else {
      desc.bins[static_cast<size_t>(base + bins.nearest(dir))] += mass;
    }
    total_mass += mass;
  }
  if (total_mass < 1e-12) return std::nullopt;

  auto l2_normalize = [](std::vector<double>& v) {
    double n2 = 0.0;
    for (double x : v) n2 += x * x;
    double n = std::sqrt(n2);
    if (n > 0.0)
      for (double& x : v) x /= n;
  };
  l2_normalize(desc.bins);
  for (double& b : desc.bins)
    if (b > params.clamp) b = params.clamp;
  l2_normalize(desc.bins);
  return desc;
}

// Descriptors for all keypoints against their own scale level, in keypoint
// order. Degenerate keypoints are skipped.
inline std::vector<Descriptor> compute_descriptors(const ScaleSpace& space,
                                                   std::span<const Keypoint> keypoints,
                                                   const OrientationBins& bins,
                                                   const DescriptorParams& params = {},
                                                   int threads = 1) {
  std::vector<std::optional<Descriptor>> slots(keypoints.size());
  parallel_for(static_cast<std::int64_t>(keypoints.size()), threads, [&](std::int64_t i) {
    const Keypoint& kp = keypoints[static_cast<size_t>(i)];
    const ScalarField& field = space.levels[static_cast<size_t>(kp.scale_index)].field;
    slots[static_cast<size_t>(i)] = compute_descriptor(field, kp, bins, params);
  });
  std::vector<Descriptor> out;
  out.reserve(keypoints.size());
  for (auto& s : slots)
    if (s) out.push_back(std::move(*s));
  return out;
}

// CSV interface: header "x,y,z,scale_index,b0,...,b{D-1}", bins with 9
// significant digits.
inline void save_descriptors_csv(std::span<const Descriptor> descriptors, int n_total_bins,
                                 std::ostream& out) {
  out << "x,y,z,scale_index";
  for (int i = 0; i < n_total_bins; ++i) out << ",b" << i;
  out << "\n";
  char buf[48];
  for (const auto& d : descriptors) {
    out << d.x << "," << d.y << "," << d.z << "," << d.scale_index;
    for (double b : d.bins) {
      std::snprintf(buf, sizeof buf, ",%.9g", b);
      out << buf;
    }
    out << "\n";
  }
}

}  // namespace salvox

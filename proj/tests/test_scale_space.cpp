#include <doctest.h>

#include <cmath>
#include <random>

#include "salvox/scale_space.hpp"

using namespace salvox;

namespace {

// Independent oracle: direct triple-loop 3D convolution with the kernel
// built from first principles (normalized 1D Gaussian weight products),
// zero-padded. Deliberately shares no code with smooth().
ScalarField brute_force_convolve(const ScalarField& f, double sigma) {
  int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> w(static_cast<size_t>(2 * r + 1));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    w[static_cast<size_t>(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += w[static_cast<size_t>(i + r)];
  }
  for (auto& v : w) v /= sum;

  ScalarField out(f.dims[0], f.dims[1], f.dims[2]);
  for (int z = 0; z < f.dims[2]; ++z)
    for (int y = 0; y < f.dims[1]; ++y)
      for (int x = 0; x < f.dims[0]; ++x) {
        double acc = 0.0;
        for (int kz = -r; kz <= r; ++kz)
          for (int ky = -r; ky <= r; ++ky)
            for (int kx = -r; kx <= r; ++kx) {
              int sx = x + kx, sy = y + ky, sz = z + kz;
              if (!f.in_bounds(sx, sy, sz)) continue;
              acc += w[static_cast<size_t>(kx + r)] * w[static_cast<size_t>(ky + r)] *
                     w[static_cast<size_t>(kz + r)] * f.at(sx, sy, sz);
            }
        out.at(x, y, z) = acc;
      }
  return out;
}

ScalarField random_field(int n, unsigned seed) {
  ScalarField f(n, n, n);
  std::mt19937_64 rng(seed);
  for (auto& v : f.values) v = double(rng() >> 11) * 0x1.0p-53;
  return f;
}

double max_abs_diff(const ScalarField& a, const ScalarField& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.values.size(); ++i)
    m = std::max(m, std::fabs(a.values[i] - b.values[i]));
  return m;
}

}  // namespace

TEST_CASE("kernel sigma=1: radius 3, unit sum, unimodal") {
  auto w = gaussian_kernel_1d(1.0);
  REQUIRE(w.size() == 7);
  double sum = 0.0;
  for (double v : w) sum += v;
  CHECK(std::fabs(sum - 1.0) < 1e-12);
  for (size_t i = 0; i < w.size(); ++i) CHECK(w[3] >= w[i]);
}

TEST_CASE("kernel sigma=0.5: radius 2, symmetric") {
  auto w = gaussian_kernel_1d(0.5);
  REQUIRE(w.size() == 5);
  for (int i = 0; i <= 2; ++i) CHECK(w[size_t(2 - i)] == doctest::Approx(w[size_t(2 + i)]).epsilon(1e-15));
}

TEST_CASE("kernel sigma=1.6: center-to-neighbor ratio") {
  auto w = gaussian_kernel_1d(1.6);
  double expected = std::exp(1.0 / (2.0 * 1.6 * 1.6));  // direct Gaussian ratio
  CHECK(w[w.size() / 2] / w[w.size() / 2 + 1] == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(1.2157).epsilon(1e-4));
}

TEST_CASE("kernel rejects nonpositive sigma") {
  CHECK_THROWS_AS(gaussian_kernel_1d(0.0), InvalidArgument);
  CHECK_THROWS_AS(gaussian_kernel_1d(-1.0), InvalidArgument);
}

TEST_CASE("impulse response: center value is w0^3, mass preserved") {
  ScalarField f(15, 15, 15);
  f.at(7, 7, 7) = 1.0;
  ScalarField s = smooth(f, 1.0);
  auto w = gaussian_kernel_1d(1.0);
  double w0 = w[3];
  CHECK(s.at(7, 7, 7) == doctest::Approx(w0 * w0 * w0).epsilon(1e-12));
  double mass = 0.0;
  for (double v : s.values) mass += v;
  CHECK(std::fabs(mass - 1.0) < 1e-12);  // kernel fully inside the grid
}

TEST_CASE("constant field stays constant away from the boundary") {
  ScalarField f(13, 13, 13, 1.0);
  ScalarField s = smooth(f, 1.0);  // radius 3: voxel (6,6,6) is interior
  CHECK(std::fabs(s.at(6, 6, 6) - 1.0) < 1e-12);
}

TEST_CASE("separable smoothing equals brute-force 3D convolution") {
  ScalarField f = random_field(8, 42);
  for (double sigma : {0.8, 1.2, 1.6}) {
    ScalarField fast = smooth(f, sigma);
    ScalarField slow = brute_force_convolve(f, sigma);
    CHECK(max_abs_diff(fast, slow) < 1e-10);
  }
}

TEST_CASE("smoothing is linear") {
  ScalarField f = random_field(8, 1);
  ScalarField h = random_field(8, 2);
  double a = 0.7, b = -1.3;
  ScalarField combo(8, 8, 8);
  for (size_t i = 0; i < combo.values.size(); ++i)
    combo.values[i] = a * f.values[i] + b * h.values[i];
  ScalarField left = smooth(combo, 1.1);
  ScalarField sf = smooth(f, 1.1), sh = smooth(h, 1.1);
  double err = 0.0;
  for (size_t i = 0; i < left.values.size(); ++i)
    err = std::max(err, std::fabs(left.values[i] - (a * sf.values[i] + b * sh.values[i])));
  CHECK(err < 1e-10);
}

TEST_CASE("smoothed occupancy stays in [0,1]") {
  VoxelGrid g(16, 16, 16);
  std::mt19937_64 rng(9);
  for (auto& v : g.occupancy) v = (rng() & 1) ? 1 : 0;
  ScalarField s = smooth(g.as_field(), 1.6);
  for (double v : s.values) {
    CHECK(v >= -1e-15);
    CHECK(v <= 1.0 + 1e-15);
  }
}

TEST_CASE("smoothing result is independent of thread count") {
  ScalarField f = random_field(12, 5);
  ScalarField t1 = smooth(f, 1.3, 1);
  ScalarField t4 = smooth(f, 1.3, 4);
  CHECK(t1.values == t4.values);
}

TEST_CASE("empty grid gives identically zero DoG") {
  VoxelGrid g(10, 10, 10);
  auto ks = default_k_values();
  ScaleSpace space = build_scale_space(g, 1.6, ks);
  for (const auto& d : space.dog)
    for (double v : d.field.values) CHECK(v == 0.0);
}

TEST_CASE("fully occupied grid: interior DoG is zero") {
  VoxelGrid g(32, 32, 32);
  for (auto& v : g.occupancy) v = 1;
  std::vector<double> ks{1.0, 2.0};
  ScaleSpace space = build_scale_space(g, 1.0, ks);
  // sigma = 2 -> radius 6; voxel (16,16,16) is deep interior.
  CHECK(std::fabs(space.dog[1].field.at(16, 16, 16)) < 1e-12);
}

TEST_CASE("single-voxel grid: DoG at the impulse is w0^3 - 1") {
  VoxelGrid g(31, 31, 31);
  g.at(15, 15, 15) = 1;
  std::vector<double> ks{1.0, 2.0};
  ScaleSpace space = build_scale_space(g, 1.6, ks);
  auto w = gaussian_kernel_1d(1.6);
  double w0 = w[w.size() / 2];
  double expected = w0 * w0 * w0 - 1.0;
  CHECK(expected < 0.0);
  CHECK(space.dog[0].field.at(15, 15, 15) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("dog levels reconstruct as level minus base") {
  VoxelGrid g(12, 12, 12);
  std::mt19937_64 rng(3);
  for (auto& v : g.occupancy) v = (rng() % 3) == 0 ? 1 : 0;
  ScaleSpace space = build_scale_space(g, 1.6, default_k_values());
  for (size_t s = 0; s < space.dog.size(); ++s)
    for (size_t i = 0; i < space.base.values.size(); ++i)
      CHECK(std::fabs(space.dog[s].field.values[i] -
                      (space.levels[s].field.values[i] - space.base.values[i])) < 1e-12);
}

TEST_CASE("adjacent mode is the band-pass of consecutive levels") {
  VoxelGrid g(12, 12, 12);
  g.at(6, 6, 6) = 1;
  std::vector<double> ks{1.0, 1.5, 2.0};
  ScaleSpace space = build_scale_space(g, 1.0, ks, DogMode::Adjacent);
  REQUIRE(space.dog.size() == 2);  // one fewer than the scale count
  for (size_t i = 0; i < space.base.values.size(); ++i) {
    CHECK(space.dog[0].field.values[i] ==
          space.levels[1].field.values[i] - space.levels[0].field.values[i]);
    CHECK(space.dog[1].field.values[i] ==
          space.levels[2].field.values[i] - space.levels[1].field.values[i]);
  }
}

TEST_CASE("total mass is preserved when the object is padded") {
  VoxelGrid g(48, 48, 48);
  for (int z = 20; z < 28; ++z)
    for (int y = 20; y < 28; ++y)
      for (int x = 20; x < 28; ++x) g.at(x, y, z) = 1;
  ScaleSpace space = build_scale_space(g, 1.6, default_k_values());
  double base_mass = 0.0;
  for (double v : space.base.values) base_mass += v;
  for (const auto& level : space.levels) {
    double mass = 0.0;
    for (double v : level.field.values) mass += v;
    CHECK(std::fabs(mass - base_mass) < 1e-6);
  }
}

TEST_CASE("DoG stack is equivariant under axis-aligned rotations") {
  VoxelGrid g(14, 14, 14);
  std::mt19937_64 rng(11);
  for (auto& v : g.occupancy) v = (rng() % 4) == 0 ? 1 : 0;
  std::vector<double> ks{1.0, 1.26, 1.59};
  ScaleSpace base = build_scale_space(g, 1.2, ks);
  const int n = 14;
  Vec3 gc{n / 2.0, n / 2.0, n / 2.0};
  for (size_t ri = 0; ri < 24; ri += 5) {  // a sample of the group
    const Mat3& r = axis_aligned_rotations()[ri];
    VoxelGrid rot(n, n, n);
    for (int z = 0; z < n; ++z)
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
          Vec3 c = r * (Vec3{x + 0.5, y + 0.5, z + 0.5} - gc) + gc;
          rot.at(int(std::floor(c.x)), int(std::floor(c.y)), int(std::floor(c.z))) = g.at(x, y, z);
        }
    ScaleSpace rs = build_scale_space(rot, 1.2, ks);
    double err = 0.0;
    for (int z = 0; z < n; ++z)
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
          Vec3 c = r * (Vec3{x + 0.5, y + 0.5, z + 0.5} - gc) + gc;
          int nx = int(std::floor(c.x)), ny = int(std::floor(c.y)), nz = int(std::floor(c.z));
          for (size_t s = 0; s < ks.size(); ++s)
            err = std::max(err, std::fabs(rs.dog[s].field.at(nx, ny, nz) -
                                          base.dog[s].field.at(x, y, z)));
        }
    CHECK(err < 1e-12);
  }
}

TEST_CASE("build_scale_space validates its schedule") {
  VoxelGrid g(8, 8, 8);
  g.at(4, 4, 4) = 1;
  std::vector<double> bad1{1.0, 1.0};
  std::vector<double> bad2{};
  std::vector<double> bad3{-1.0, 2.0};
  CHECK_THROWS_AS(build_scale_space(g, 1.6, bad1), InvalidArgument);
  CHECK_THROWS_AS(build_scale_space(g, 1.6, bad2), InvalidArgument);
  CHECK_THROWS_AS(build_scale_space(g, 1.6, bad3), InvalidArgument);
  std::vector<double> good{1.0, 2.0};
  CHECK_THROWS_AS(build_scale_space(g, 0.0, good), InvalidArgument);
}

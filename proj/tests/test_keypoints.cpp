#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "salvox/keypoints.hpp"

using namespace salvox;

namespace {

using KeyTuple = std::tuple<int, int, int, int, int>;  // scale, z, y, x, polarity

std::set<KeyTuple> to_set(const std::vector<Keypoint>& kps) {
  std::set<KeyTuple> out;
  for (const auto& kp : kps)
    out.insert({kp.scale_index, kp.z, kp.y, kp.x, kp.polarity == Polarity::Maximum ? 1 : 0});
  return out;
}

// Independent oracle for the adjacent-scale mode: literal 80-neighbor
// comparison with no shared helpers.
std::set<KeyTuple> brute_force_extrema(const ScaleSpace& space, double threshold) {
  std::set<KeyTuple> out;
  int levels = int(space.dog.size());
  auto [dx, dy, dz] = space.dims();
  for (int s = 1; s + 1 < levels; ++s)
    for (int z = 1; z + 1 < dz; ++z)
      for (int y = 1; y + 1 < dy; ++y)
        for (int x = 1; x + 1 < dx; ++x) {
          double c = space.dog[size_t(s)].field.at(x, y, z);
          if (std::fabs(c) < threshold || c == 0.0) continue;
          bool is_max = true, is_min = true;
          for (int ds = -1; ds <= 1; ++ds)
            for (int oz = -1; oz <= 1; ++oz)
              for (int oy = -1; oy <= 1; ++oy)
                for (int ox = -1; ox <= 1; ++ox) {
                  if (ds == 0 && ox == 0 && oy == 0 && oz == 0) continue;
                  double v = space.dog[size_t(s + ds)].field.at(x + ox, y + oy, z + oz);
                  if (v >= c) is_max = false;
                  if (v <= c) is_min = false;
                }
          if (is_max) out.insert({s, z, y, x, 1});
          if (is_min) out.insert({s, z, y, x, 0});
        }
  return out;
}

// Independent oracle for the spatial mode: per-level 26-neighbor scan.
std::set<KeyTuple> brute_force_spatial(const ScaleSpace& space, double threshold) {
  std::set<KeyTuple> out;
  auto [dx, dy, dz] = space.dims();
  for (int s = 0; s < int(space.dog.size()); ++s)
    for (int z = 1; z + 1 < dz; ++z)
      for (int y = 1; y + 1 < dy; ++y)
        for (int x = 1; x + 1 < dx; ++x) {
          double c = space.dog[size_t(s)].field.at(x, y, z);
          if (std::fabs(c) < threshold || c == 0.0) continue;
          bool is_max = true, is_min = true;
          for (int oz = -1; oz <= 1; ++oz)
            for (int oy = -1; oy <= 1; ++oy)
              for (int ox = -1; ox <= 1; ++ox) {
                if (ox == 0 && oy == 0 && oz == 0) continue;
                double v = space.dog[size_t(s)].field.at(x + ox, y + oy, z + oz);
                if (v >= c) is_max = false;
                if (v <= c) is_min = false;
              }
          if (is_max) out.insert({s, z, y, x, 1});
          if (is_min) out.insert({s, z, y, x, 0});
        }
  return out;
}

VoxelGrid random_grid(int n, unsigned seed, int fill_mod = 2) {
  VoxelGrid g(n, n, n);
  std::mt19937_64 rng(seed);
  for (auto& v : g.occupancy) v = (rng() % fill_mod) == 0 ? 1 : 0;
  return g;
}

// Synthetic DoG stack with smooth random fields; adjacent-scale extrema
// are plentiful here, unlike on binary occupancy.
ScaleSpace random_stack(int n, int levels, unsigned seed) {
  ScaleSpace space;
  space.base = ScalarField(n, n, n);
  std::mt19937_64 rng(seed);
  for (int s = 0; s < levels; ++s) {
    ScalarField f(n, n, n);
    for (auto& v : f.values) v = double(rng() >> 11) * 0x1.0p-53;
    DogLevel d;
    d.k = 1.0 + s;
    d.field = smooth(f, 1.0);
    space.dog.push_back(std::move(d));
    space.levels.push_back({1.0 + s, 1.0 + s, space.dog.back().field});
  }
  return space;
}

VoxelGrid rotate_grid(const VoxelGrid& g, const Mat3& r) {
  const int n = g.dims[0];
  Vec3 gc{n / 2.0, n / 2.0, n / 2.0};
  VoxelGrid out(n, n, n);
  for (int z = 0; z < n; ++z)
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        Vec3 c = r * (Vec3{x + 0.5, y + 0.5, z + 0.5} - gc) + gc;
        out.at(int(std::floor(c.x)), int(std::floor(c.y)), int(std::floor(c.z))) = g.at(x, y, z);
      }
  return out;
}

}  // namespace

TEST_CASE("isolated impulse: spatial extrema sit exactly at the impulse") {
  VoxelGrid g(15, 15, 15);
  g.at(7, 7, 7) = 1;
  ScaleSpace space = build_scale_space(g, kDefaultBaseDelta, default_k_values());

  // Adjacent-scale mode: the vs-base DoG is monotone in scale at a fixed
  // voxel, so the 80-neighbor rule finds nothing; the oracle agrees.
  auto adjacent = detect_extrema(space, 0.01, ScaleCompare::Adjacent);
  CHECK(to_set(adjacent) == brute_force_extrema(space, 0.01));

  // Spatial mode: the impulse voxel is the strict minimum of every level;
  // ring neighbors tie away. One location, one extremum per level.
  auto spatial = detect_extrema(space, 0.01, ScaleCompare::Spatial);
  CHECK(spatial.size() == space.dog.size());
  for (const auto& kp : spatial) {
    CHECK(kp.x == 7);
    CHECK(kp.y == 7);
    CHECK(kp.z == 7);
    CHECK(kp.polarity == Polarity::Minimum);
  }
  CHECK(to_set(spatial) == brute_force_spatial(space, 0.01));
}

TEST_CASE("constant-zero DoG stack yields no keypoints") {
  VoxelGrid g(10, 10, 10);  // empty grid -> zero DoG everywhere
  ScaleSpace space = build_scale_space(g, 1.6, default_k_values());
  CHECK(detect_extrema(space, 0.0).empty());
  CHECK(detect_extrema(space, 0.0, ScaleCompare::Spatial).empty());
}

TEST_CASE("random grids match the brute-force oracles exactly") {
  std::vector<double> ks{1.0, 1.26, 1.59, 2.0};  // 4 DoG levels
  size_t spatial_total = 0;
  for (unsigned seed = 0; seed < 20; ++seed) {
    VoxelGrid g = random_grid(12, 1000 + seed);
    ScaleSpace space = build_scale_space(g, 1.0, ks);
    CHECK(to_set(detect_extrema(space, 0.005)) == brute_force_extrema(space, 0.005));
    auto spatial = detect_extrema(space, 0.005, ScaleCompare::Spatial);
    CHECK(to_set(spatial) == brute_force_spatial(space, 0.005));
    spatial_total += spatial.size();
  }
  CHECK(spatial_total > 0);  // the spatial check is not vacuous
}

TEST_CASE("adjacent-scale extrema on a random stack match the 80-neighbor oracle") {
  for (unsigned seed = 0; seed < 5; ++seed) {
    ScaleSpace space = random_stack(12, 4, 7000 + seed);
    auto got = detect_extrema(space, 0.0);
    auto want = brute_force_extrema(space, 0.0);
    CHECK(!want.empty());
    CHECK(to_set(got) == want);
  }
}

TEST_CASE("every adjacent-mode keypoint strictly dominates its 80 neighbors") {
  ScaleSpace space = random_stack(14, 4, 99);
  auto kps = detect_extrema(space, 0.0);
  REQUIRE(!kps.empty());
  for (const auto& kp : kps) {
    bool maximum = kp.polarity == Polarity::Maximum;
    for (int ds = -1; ds <= 1; ++ds)
      for (int oz = -1; oz <= 1; ++oz)
        for (int oy = -1; oy <= 1; ++oy)
          for (int ox = -1; ox <= 1; ++ox) {
            if (ds == 0 && ox == 0 && oy == 0 && oz == 0) continue;
            double v = space.dog[size_t(kp.scale_index + ds)].field.at(kp.x + ox, kp.y + oy,
                                                                       kp.z + oz);
            CHECK((maximum ? kp.dog_value > v : kp.dog_value < v));
          }
  }
}

TEST_CASE("detection is independent of thread count") {
  VoxelGrid g = random_grid(16, 5, 3);
  ScaleSpace space = build_scale_space(g, 1.3, default_k_values());
  auto a = detect_extrema(space, 0.002, ScaleCompare::Spatial, 1);
  auto b = detect_extrema(space, 0.002, ScaleCompare::Spatial, 4);
  REQUIRE(!a.empty());
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].x == b[i].x);
    CHECK(a[i].scale_index == b[i].scale_index);
    CHECK(a[i].dog_value == b[i].dog_value);
  }
}

TEST_CASE("all-scale extrema are a subset of adjacent-scale extrema") {
  ScaleSpace space = random_stack(12, 4, 44);
  auto adjacent = to_set(detect_extrema(space, 0.0, ScaleCompare::Adjacent));
  auto all = to_set(detect_extrema(space, 0.0, ScaleCompare::All));
  for (const auto& k : all) CHECK(adjacent.count(k) == 1);
}

TEST_CASE("fewer than 3 DoG levels is an error") {
  VoxelGrid g(8, 8, 8);
  g.at(4, 4, 4) = 1;
  std::vector<double> ks{1.0, 2.0};
  ScaleSpace space = build_scale_space(g, 1.0, ks);
  CHECK_THROWS_AS(detect_extrema(space, 0.01), InvalidArgument);
}

TEST_CASE("keypoint set maps bijectively under axis-aligned rotations") {
  VoxelGrid g = random_grid(14, 7, 3);
  ScaleSpace space = build_scale_space(g, 1.2, default_k_values());
  auto base = detect_extrema(space, 0.002, ScaleCompare::Spatial);
  REQUIRE(!base.empty());
  const int n = 14;
  Vec3 gc{n / 2.0, n / 2.0, n / 2.0};
  for (size_t ri = 0; ri < 24; ri += 3) {
    const Mat3& r = axis_aligned_rotations()[ri];
    ScaleSpace rspace = build_scale_space(rotate_grid(g, r), 1.2, default_k_values());
    auto rotated = detect_extrema(rspace, 0.002, ScaleCompare::Spatial);
    std::set<KeyTuple> expected;
    for (const auto& kp : base) {
      Vec3 c = r * (Vec3{kp.x + 0.5, kp.y + 0.5, kp.z + 0.5} - gc) + gc;
      expected.insert({kp.scale_index, int(std::floor(c.z)), int(std::floor(c.y)),
                       int(std::floor(c.x)), kp.polarity == Polarity::Maximum ? 1 : 0});
    }
    CHECK(to_set(rotated) == expected);
  }
}

TEST_CASE("filter_surface keeps exactly the masked keypoints in order") {
  VoxelGrid g(9, 9, 9);
  for (int z = 2; z < 7; ++z)
    for (int y = 2; y < 7; ++y)
      for (int x = 2; x < 7; ++x) g.at(x, y, z) = 1;
  auto mask = surface_voxels(g);

  Keypoint interior;  // center of the solid block
  interior.x = interior.y = interior.z = 4;
  Keypoint corner;
  corner.x = corner.y = corner.z = 2;
  Keypoint empty_space;
  empty_space.x = empty_space.y = empty_space.z = 0;
  std::vector<Keypoint> kps{interior, corner, empty_space};
  auto kept = filter_surface(kps, mask, g.dims);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].x == 2);

  CHECK(filter_surface({}, mask, g.dims).empty());
}

TEST_CASE("normal on the +z face of a large solid block points up") {
  VoxelGrid g(40, 40, 40);
  for (int z = 4; z < 16; ++z)
    for (int y = 4; y < 36; ++y)
      for (int x = 4; x < 36; ++x) g.at(x, y, z) = 1;
  std::vector<double> ks{1.0, 1.26, 1.59};
  ScaleSpace space = build_scale_space(g, 1.6, ks);
  Keypoint kp;
  kp.x = 20;
  kp.y = 20;
  kp.z = 15;  // top surface voxel, far from the lateral faces
  kp.scale_index = 1;
  estimate_normal(space, g, kp);
  REQUIRE(kp.normal_valid);
  CHECK(std::fabs(kp.normal.x - 0.0) < 1e-6);
  CHECK(std::fabs(kp.normal.y - 0.0) < 1e-6);
  CHECK(std::fabs(kp.normal.z - 1.0) < 1e-6);
  CHECK(std::fabs(norm(kp.normal) - 1.0) < 1e-9);
}

TEST_CASE("fully symmetric neighborhood flags a degenerate normal") {
  VoxelGrid g(16, 16, 16);
  for (auto& v : g.occupancy) v = 1;
  std::vector<double> ks{1.0, 1.26, 1.59};
  ScaleSpace space = build_scale_space(g, 1.0, ks);
  Keypoint kp;
  kp.x = kp.y = kp.z = 8;  // deep interior: zero gradient, symmetric 5^3
  kp.scale_index = 0;
  estimate_normal(space, g, kp);
  CHECK(!kp.normal_valid);
}

TEST_CASE("normals rotate with the grid") {
  VoxelGrid g = random_grid(14, 21, 3);
  ScaleSpace space = build_scale_space(g, 1.2, default_k_values());
  auto kps = detect_extrema(space, 0.002, ScaleCompare::Spatial);
  kps = filter_surface(std::move(kps), surface_voxels(g), g.dims);
  estimate_normals(space, g, kps);
  REQUIRE(!kps.empty());

  const int n = 14;
  Vec3 gc{n / 2.0, n / 2.0, n / 2.0};
  const Mat3& r = axis_aligned_rotations()[9];
  VoxelGrid rot = rotate_grid(g, r);
  ScaleSpace rspace = build_scale_space(rot, 1.2, default_k_values());
  for (const auto& kp : kps) {
    if (!kp.normal_valid) continue;
    Vec3 c = r * (Vec3{kp.x + 0.5, kp.y + 0.5, kp.z + 0.5} - gc) + gc;
    Keypoint rkp;
    rkp.x = int(std::floor(c.x));
    rkp.y = int(std::floor(c.y));
    rkp.z = int(std::floor(c.z));
    rkp.scale_index = kp.scale_index;
    estimate_normal(rspace, rot, rkp);
    REQUIRE(rkp.normal_valid);
    Vec3 expected = r * kp.normal;
    CHECK(norm(rkp.normal - expected) < 1e-9);
  }
}

TEST_CASE("keypoint CSV is sorted and carries the documented header") {
  std::vector<Keypoint> kps(3);
  kps[0] = {5, 4, 3, 2, 0.5, Polarity::Maximum, {0, 0, 1}, true};
  kps[1] = {1, 1, 1, 1, -0.25, Polarity::Minimum, {1, 0, 0}, true};
  kps[2] = {2, 1, 1, 1, 0.125, Polarity::Maximum, {0, 1, 0}, true};
  std::ostringstream out;
  save_keypoints_csv(kps, out);
  std::istringstream lines(out.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == "x,y,z,scale_index,dog_value,polarity,nx,ny,nz");
  std::getline(lines, line);
  CHECK(line == "1,1,1,1,-0.25,min,1,0,0");
  std::getline(lines, line);
  CHECK(line == "2,1,1,1,0.125,max,0,1,0");
  std::getline(lines, line);
  CHECK(line == "5,4,3,2,0.5,max,0,0,1");
}

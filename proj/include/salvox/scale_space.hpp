// scale_space.hpp - separable 3D Gaussian smoothing and the DoG stack.
//
// The smoothed occupancy at scale multiplier k is the base grid convolved
// with a truncated, normalized Gaussian of sigma = k * base_delta, applied
// as three 1D passes with zero padding. Each 1D sum is accumulated as
// center + sum of symmetric pairs, so reversing a grid axis reproduces the
// result bitwise.
//
// The vs-base DoG mode subtracts the unsmoothed base model from every
// level (one DoG level per scale). The adjacent mode is the band-pass
// convention: dog[i] = levels[i+1] - levels[i], one fewer DoG level than
// scales. A keypoint at DoG index s samples gradients from levels[s] in
// either mode.
#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "salvox/errors.hpp"
#include "salvox/grid.hpp"
#include "salvox/parallel.hpp"

namespace salvox {

// Truncated at radius ceil(3*sigma), normalized to unit sum. Returned
// vector has size 2r+1 with the center weight at index r.
inline std::vector<double> gaussian_kernel_1d(double sigma) {
  if (!(sigma > 0.0)) throw InvalidArgument("sigma must be positive");
  int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> w(static_cast<size_t>(2 * r + 1));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    double v = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
    w[static_cast<size_t>(i + r)] = v;
    sum += v;
  }
  for (double& v : w) v /= sum;
  return w;
}

namespace detail {

// One separable pass along `axis`. Zero padding outside the grid.
inline ScalarField smooth_axis(const ScalarField& f, const std::vector<double>& kernel, int axis,
                               int threads) {
  const int r = static_cast<int>(kernel.size() / 2);
  const auto [dx, dy, dz] = f.dims;
  ScalarField out(dx, dy, dz);
  const int extent[3] = {dx, dy, dz};
  const std::int64_t stride[3] = {1, dx, static_cast<std::int64_t>(dx) * dy};
  const int n = extent[axis];
  const std::int64_t step = stride[axis];

  // Iterate over all lines perpendicular to `axis`.
  const int a1 = axis == 0 ? 1 : 0;
  const int a2 = axis == 2 ? 1 : 2;
  const std::int64_t lines = static_cast<std::int64_t>(extent[a1]) * extent[a2];
  parallel_chunks(lines, 64, threads, [&](std::int64_t, std::int64_t lo, std::int64_t hi) {
    for (std::int64_t line = lo; line < hi; ++line) {
      const std::int64_t i1 = line % extent[a1];
      const std::int64_t i2 = line / extent[a1];
      const std::int64_t base = i1 * stride[a1] + i2 * stride[a2];
      const double* src = f.values.data() + base;
      double* dst = out.values.data() + base;
      for (int i = 0; i < n; ++i) {
        double s = kernel[static_cast<size_t>(r)] * src[i * step];
        for (int t = 1; t <= r; ++t) {
          double left = i - t >= 0 ? src[(i - t) * step] : 0.0;
          double right = i + t < n ? src[(i + t) * step] : 0.0;
          s += kernel[static_cast<size_t>(r + t)] * (left + right);
        }
        dst[i * step] = s;
      }
    }
  });
  return out;
}

}  // namespace detail

inline ScalarField smooth(const ScalarField& f, double sigma, int threads = 1) {
  auto kernel = gaussian_kernel_1d(sigma);
  ScalarField out = detail::smooth_axis(f, kernel, 0, threads);
  out = detail::smooth_axis(out, kernel, 1, threads);
  out = detail::smooth_axis(out, kernel, 2, threads);
  return out;
}

enum class DogMode { VsBase, Adjacent };

struct ScaleLevel {
  double k{};
  double sigma{};
  ScalarField field;
};

struct DogLevel {
  double k{};
  ScalarField field;
};

struct ScaleSpace {
  double base_delta{};
  DogMode mode{DogMode::VsBase};
  ScalarField base;               // unsmoothed occupancy as reals
  std::vector<ScaleLevel> levels;
  std::vector<DogLevel> dog;

  const std::array<int, 3>& dims() const { return base.dims; }
};

// Scale multipliers following the 2D convention the method derives from:
// five levels spanning one octave plus a third.
inline std::vector<double> default_k_values() {
  return {1.0, std::pow(2.0, 1.0 / 3.0), std::pow(2.0, 2.0 / 3.0), 2.0, std::pow(2.0, 4.0 / 3.0)};
}

constexpr double kDefaultBaseDelta = 1.6;

inline ScaleSpace build_scale_space(const VoxelGrid& grid, double base_delta,
                                    std::span<const double> k_values,
                                    DogMode mode = DogMode::VsBase, int threads = 1) {
  if (!(base_delta > 0.0)) throw InvalidArgument("base_delta must be positive");
  if (k_values.empty()) throw InvalidArgument("k_values must be nonempty");
  for (size_t i = 0; i < k_values.size(); ++i) {
    if (!(k_values[i] > 0.0)) throw InvalidArgument("k values must be positive");
    if (i > 0 && !(k_values[i] > k_values[i - 1]))
      throw InvalidArgument("k values must be strictly increasing");
  }
  ScaleSpace space;
  space.base_delta = base_delta;
  space.mode = mode;
  space.base = grid.as_field();
  space.levels.reserve(k_values.size());
  space.dog.reserve(k_values.size());
  for (double k : k_values) {
    ScaleLevel level;
    level.k = k;
    level.sigma = k * base_delta;
    level.field = smooth(space.base, level.sigma, threads);
    space.levels.push_back(std::move(level));
  }
  const size_t dog_count = mode == DogMode::VsBase ? space.levels.size() : space.levels.size() - 1;
  for (size_t i = 0; i < dog_count; ++i) {
    DogLevel d;
    d.k = space.levels[i].k;
    const ScalarField& ref = mode == DogMode::VsBase ? space.base : space.levels[i].field;
    const ScalarField& cur =
        mode == DogMode::VsBase ? space.levels[i].field : space.levels[i + 1].field;
    d.field = ScalarField(cur.dims[0], cur.dims[1], cur.dims[2]);
    for (size_t j = 0; j < cur.values.size(); ++j) d.field.values[j] = cur.values[j] - ref.values[j];
    space.dog.push_back(std::move(d));
  }
  return space;
}

}  // namespace salvox

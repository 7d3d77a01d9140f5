// bow.hpp - K-means codebook, visual-word histograms, descriptor matching.
//
// Determinism contract: given the same features, k, iterations and seed,
// the codebook is bitwise identical for any thread count. Assignment is
// per-point pure, reductions use fixed 4096-point chunks merged in chunk
// order, and centroid updates run serially in ascending point index.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>
#endif

#include "salvox/det_random.hpp"
#include "salvox/errors.hpp"
#include "salvox/parallel.hpp"

namespace salvox {

// Dense row-major feature matrix.
struct FeatureMatrix {
  size_t rows{};
  size_t cols{};
  std::vector<double> data;

  const double* row(size_t i) const { return data.data() + i * cols; }
  double* row(size_t i) { return data.data() + i * cols; }

  void append_row(std::span<const double> values) {
    if (rows == 0 && cols == 0) cols = values.size();
    if (values.size() != cols) throw InvalidArgument("feature dimension mismatch");
    data.insert(data.end(), values.begin(), values.end());
    ++rows;
  }
};

struct Codebook {
  int k{};
  int dim{};
  std::uint64_t seed{};
  int iterations_run{};
  std::vector<double> centroids;     // k * dim, row-major
  std::vector<double> sse_history;   // SSE after each assignment step

  const double* centroid(int c) const { return centroids.data() + static_cast<size_t>(c) * dim; }
};

namespace detail {

inline double sq_dist(const double* a, const double* b, size_t dim) {
  double s = 0.0;
  for (size_t i = 0; i < dim; ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Four dot products of one row against four consecutive centroid rows.
// The summation order is fixed by this code (lane-striped with a single
// horizontal reduction), so results are identical for any thread count.
#if defined(__AVX2__) && defined(__FMA__)
inline void dot4(const double* __restrict p, const double* __restrict c0,
                 const double* __restrict c1, const double* __restrict c2,
                 const double* __restrict c3, size_t dim, double* __restrict out) {
  __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
  __m256d a2 = _mm256_setzero_pd(), a3 = _mm256_setzero_pd();
  size_t d = 0;
  for (; d + 4 <= dim; d += 4) {
    __m256d pv = _mm256_loadu_pd(p + d);
    a0 = _mm256_fmadd_pd(pv, _mm256_loadu_pd(c0 + d), a0);
    a1 = _mm256_fmadd_pd(pv, _mm256_loadu_pd(c1 + d), a1);
    a2 = _mm256_fmadd_pd(pv, _mm256_loadu_pd(c2 + d), a2);
    a3 = _mm256_fmadd_pd(pv, _mm256_loadu_pd(c3 + d), a3);
  }
  alignas(32) double lanes[4];
  auto reduce = [&](const __m256d& acc) {
    _mm256_store_pd(lanes, acc);
    return ((lanes[0] + lanes[1]) + lanes[2]) + lanes[3];
  };
  double d0 = reduce(a0), d1 = reduce(a1), d2 = reduce(a2), d3 = reduce(a3);
  for (; d < dim; ++d) {
    double pv = p[d];
    d0 += pv * c0[d];
    d1 += pv * c1[d];
    d2 += pv * c2[d];
    d3 += pv * c3[d];
  }
  out[0] = d0;
  out[1] = d1;
  out[2] = d2;
  out[3] = d3;
}
#else
inline void dot4(const double* __restrict p, const double* __restrict c0,
                 const double* __restrict c1, const double* __restrict c2,
                 const double* __restrict c3, size_t dim, double* __restrict out) {
  double d0 = 0.0, d1 = 0.0, d2 = 0.0, d3 = 0.0;
  for (size_t d = 0; d < dim; ++d) {
    double pv = p[d];
    d0 += pv * c0[d];
    d1 += pv * c1[d];
    d2 += pv * c2[d];
    d3 += pv * c3[d];
  }
  out[0] = d0;
  out[1] = d1;
  out[2] = d2;
  out[3] = d3;
}
#endif

inline double sq_norm(const double* a, size_t dim) {
  double s = 0.0;
  for (size_t i = 0; i < dim; ++i) s += a[i] * a[i];
  return s;
}

// Nearest centroid by squared Euclidean distance; ties to lowest index.
inline int nearest_centroid(const double* point, const std::vector<double>& centroids, int k,
                            size_t dim, double* out_d2 = nullptr) {
  int best = 0;
  double best_d2 = sq_dist(point, centroids.data(), dim);
  for (int c = 1; c < k; ++c) {
    double d2 = sq_dist(point, centroids.data() + static_cast<size_t>(c) * dim, dim);
    if (d2 < best_d2) {
      best_d2 = d2;
      best = c;
    }
  }
  if (out_d2) *out_d2 = best_d2;
  return best;
}

// Assigns every point to its nearest centroid, writing the squared
// distance alongside. Uses d2 = |x|^2 - 2 x.c + |c|^2 with the point block
// held in cache while the centroids stream once per block, which keeps the
// large-codebook case compute-bound. Block boundaries are fixed, so the
// result does not depend on the thread count.
inline void assign_nearest(const FeatureMatrix& features, const std::vector<double>& centroids,
                           int k, const std::vector<double>& point_norms, int threads,
                           std::vector<int>& assign, std::vector<double>& d2_out) {
  const size_t dim = features.cols;
  std::vector<double> centroid_norms(static_cast<size_t>(k));
  for (int c = 0; c < k; ++c)
    centroid_norms[static_cast<size_t>(c)] = sq_norm(centroids.data() + static_cast<size_t>(c) * dim, dim);

  // 64 points fit L2 alongside a 4-centroid strip; centroids stream once
  // per sub-block, each loaded point row feeds four dot products.
  const std::int64_t block = 256;
  const std::int64_t sub = 64;
  parallel_chunks(
      static_cast<std::int64_t>(features.rows), block, threads,
      [&](std::int64_t, std::int64_t chunk_lo, std::int64_t chunk_hi) {
        for (std::int64_t i = chunk_lo; i < chunk_hi; ++i) {
          assign[static_cast<size_t>(i)] = -1;
          d2_out[static_cast<size_t>(i)] = std::numeric_limits<double>::infinity();
        }
        for (std::int64_t lo = chunk_lo; lo < chunk_hi; lo += sub) {
          const std::int64_t hi = lo + sub < chunk_hi ? lo + sub : chunk_hi;
          int c = 0;
          for (; c + 4 <= k; c += 4) {
            const double* c0 = centroids.data() + static_cast<size_t>(c) * dim;
            const double* c1 = c0 + dim;
            const double* c2 = c1 + dim;
            const double* c3 = c2 + dim;
            for (std::int64_t i = lo; i < hi; ++i) {
              const double* p = features.row(static_cast<size_t>(i));
              double dots[4];
              dot4(p, c0, c1, c2, c3, dim, dots);
              const double pn = point_norms[static_cast<size_t>(i)];
              double best = d2_out[static_cast<size_t>(i)];
              int best_c = assign[static_cast<size_t>(i)];
              for (int j = 0; j < 4; ++j) {
                double d2 = pn - 2.0 * dots[j] + centroid_norms[static_cast<size_t>(c + j)];
                if (d2 < 0.0) d2 = 0.0;
                if (d2 < best) {
                  best = d2;
                  best_c = c + j;
                }
              }
              d2_out[static_cast<size_t>(i)] = best;
              assign[static_cast<size_t>(i)] = best_c;
            }
          }
          for (; c < k; ++c) {
            const double* cen = centroids.data() + static_cast<size_t>(c) * dim;
            const double cn = centroid_norms[static_cast<size_t>(c)];
            for (std::int64_t i = lo; i < hi; ++i) {
              const double* p = features.row(static_cast<size_t>(i));
              double dot = 0.0;
              for (size_t d = 0; d < dim; ++d) dot += p[d] * cen[d];
              double d2 = point_norms[static_cast<size_t>(i)] - 2.0 * dot + cn;
              if (d2 < 0.0) d2 = 0.0;
              if (d2 < d2_out[static_cast<size_t>(i)]) {
                d2_out[static_cast<size_t>(i)] = d2;
                assign[static_cast<size_t>(i)] = c;
              }
            }
          }
        }
      });
}

}  // namespace detail

// Lloyd iterations over a k-means++ seeding. Runs exactly `iterations`
// rounds unless assignments stop changing first. Empty clusters are
// re-seeded from the point farthest from its centroid; exact duplicate
// centroids are re-seeded the same way.
inline Codebook kmeans(const FeatureMatrix& features, int k, int iterations, std::uint64_t seed,
                       int threads = 1) {
  const size_t n = features.rows;
  const size_t dim = features.cols;
  if (n == 0) throw InvalidArgument("kmeans needs at least one feature");
  if (k < 1) throw InvalidArgument("k must be positive");
  if (static_cast<size_t>(k) > n) throw InvalidArgument("k exceeds feature count");
  if (iterations < 1) throw InvalidArgument("iterations must be positive");

  Codebook book;
  book.k = k;
  book.dim = static_cast<int>(dim);
  book.seed = seed;
  book.centroids.assign(static_cast<size_t>(k) * dim, 0.0);

  // k-means++ seeding.
  Rng rng(seed);
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  std::vector<char> is_center(n, 0);
  size_t first = static_cast<size_t>(uniform_index(rng, n));
  std::copy_n(features.row(first), dim, book.centroids.begin());
  is_center[first] = 1;
  for (int c = 1; c < k; ++c) {
    const double* prev = book.centroids.data() + static_cast<size_t>(c - 1) * dim;
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) {
      double d2 = detail::sq_dist(features.row(i), prev, dim);
      if (d2 < min_d2[i]) min_d2[i] = d2;
      total += min_d2[i];
    }
    size_t chosen = n;
    if (total > 0.0) {
      double r = uniform01(rng) * total;
      double acc = 0.0;
      for (size_t i = 0; i < n; ++i) {
        acc += min_d2[i];
        if (acc >= r) {
          chosen = i;
          break;
        }
      }
    }
    if (chosen == n || is_center[chosen]) {
      // All remaining mass is zero or we landed on a duplicate: take the
      // first point not yet used as a center.
      chosen = n;
      for (size_t i = 0; i < n; ++i)
        if (!is_center[i]) {
          chosen = i;
          break;
        }
      if (chosen == n) chosen = 0;  // every point is a center already
    }
    std::copy_n(features.row(chosen), dim, book.centroids.begin() + static_cast<size_t>(c) * dim);
    is_center[chosen] = 1;
  }

  std::vector<int> assign(n, -1), prev_assign(n, -1);
  std::vector<double> d2_assigned(n, 0.0);
  std::vector<double> point_norms(n);
  for (size_t i = 0; i < n; ++i) point_norms[i] = detail::sq_norm(features.row(i), dim);

  for (int it = 0; it < iterations; ++it) {
    detail::assign_nearest(features, book.centroids, k, point_norms, threads, assign, d2_assigned);
    double sse = 0.0;
    size_t changed = 0;
    for (size_t i = 0; i < n; ++i) {
      sse += d2_assigned[i];
      changed += assign[i] != prev_assign[i];
    }
    prev_assign = assign;
    book.sse_history.push_back(sse);
    book.iterations_run = it + 1;
    if (changed == 0) break;

    // Update: serial accumulation in ascending point index.
    std::vector<double> sums(static_cast<size_t>(k) * dim, 0.0);
    std::vector<std::int64_t> counts(static_cast<size_t>(k), 0);
    for (size_t i = 0; i < n; ++i) {
      const double* p = features.row(i);
      double* s = sums.data() + static_cast<size_t>(assign[i]) * dim;
      for (size_t d = 0; d < dim; ++d) s[d] += p[d];
      ++counts[static_cast<size_t>(assign[i])];
    }
    std::vector<char> reseeded(n, 0);
    auto farthest_point = [&]() {
      size_t best = n;
      double best_d2 = -1.0;
      for (size_t i = 0; i < n; ++i) {
        if (reseeded[i]) continue;
        if (d2_assigned[i] > best_d2) {
          best_d2 = d2_assigned[i];
          best = i;
        }
      }
      return best;
    };
    for (int c = 0; c < k; ++c) {
      double* dst = book.centroids.data() + static_cast<size_t>(c) * dim;
      if (counts[static_cast<size_t>(c)] > 0) {
        const double* s = sums.data() + static_cast<size_t>(c) * dim;
        double inv = 1.0 / static_cast<double>(counts[static_cast<size_t>(c)]);
        for (size_t d = 0; d < dim; ++d) dst[d] = s[d] * inv;
      } else {
        size_t far = farthest_point();
        if (far < n) {
          std::copy_n(features.row(far), dim, dst);
          reseeded[far] = 1;
        }
      }
    }
    // Exact duplicate centroids would tie every assignment to the lower
    // index; re-seed the later copy. Hash first so the scan stays O(k*dim).
    std::vector<std::pair<std::uint64_t, int>> hashes(static_cast<size_t>(k));
    for (int c = 0; c < k; ++c) {
      const unsigned char* bytes =
          reinterpret_cast<const unsigned char*>(book.centroids.data() + static_cast<size_t>(c) * dim);
      std::uint64_t h = 1469598103934665603ull;
      for (size_t b = 0; b < dim * sizeof(double); ++b) h = (h ^ bytes[b]) * 1099511628211ull;
      hashes[static_cast<size_t>(c)] = {h, c};
    }
    std::sort(hashes.begin(), hashes.end());
    for (size_t i = 1; i < hashes.size(); ++i) {
      if (hashes[i].first != hashes[i - 1].first) continue;
      int lo = std::min(hashes[i - 1].second, hashes[i].second);
      int hi = std::max(hashes[i - 1].second, hashes[i].second);
      double* a = book.centroids.data() + static_cast<size_t>(lo) * dim;
      double* b = book.centroids.data() + static_cast<size_t>(hi) * dim;
      if (!std::equal(a, a + dim, b)) continue;
      size_t far = farthest_point();
      if (far < n) {
        std::copy_n(features.row(far), dim, b);
        reseeded[far] = 1;
      }
    }
  }
  return book;
}

enum class HistNorm { Raw, L1 };

inline std::string to_string(HistNorm n) { return n == HistNorm::Raw ? "raw" : "l1"; }

struct BowHistogram {
  std::string model_id;
  std::vector<double> counts;
  HistNorm normalization{HistNorm::L1};
  bool empty_input{false};  // warning flag: quantized an empty descriptor set
};

inline BowHistogram quantize(const FeatureMatrix& descriptors, const Codebook& book,
                             const std::string& model_id, HistNorm normalization = HistNorm::L1,
                             int threads = 1) {
  if (descriptors.rows > 0 && descriptors.cols != static_cast<size_t>(book.dim))
    throw InvalidArgument("descriptor dimension does not match codebook");
  BowHistogram h;
  h.model_id = model_id;
  h.normalization = normalization;
  h.counts.assign(static_cast<size_t>(book.k), 0.0);
  if (descriptors.rows == 0) {
    h.empty_input = true;
    return h;
  }
  std::vector<int> assign(descriptors.rows);
  std::vector<double> d2(descriptors.rows);
  std::vector<double> point_norms(descriptors.rows);
  for (size_t i = 0; i < descriptors.rows; ++i)
    point_norms[i] = detail::sq_norm(descriptors.row(i), descriptors.cols);
  detail::assign_nearest(descriptors, book.centroids, book.k, point_norms, threads, assign, d2);
  for (size_t i = 0; i < descriptors.rows; ++i) h.counts[static_cast<size_t>(assign[i])] += 1.0;
  if (normalization == HistNorm::L1) {
    double total = static_cast<double>(descriptors.rows);
    for (double& c : h.counts) c /= total;
  }
  return h;
}

inline double histogram_distance(const BowHistogram& a, const BowHistogram& b) {
  if (a.counts.size() != b.counts.size()) throw InvalidArgument("histogram length mismatch");
  if (a.normalization != b.normalization) throw InvalidArgument("histogram normalization mismatch");
  double s = 0.0;
  for (size_t i = 0; i < a.counts.size(); ++i) {
    double d = a.counts[i] - b.counts[i];
    s += d * d;
  }
  return std::sqrt(s);
}

struct Match {
  int a{}, b{};
  double d1{}, d2{};
};

// Lowe-style ratio test: for each descriptor in A, accept its nearest
// neighbor in B iff d1 < ratio * d2. One-to-many on the B side.
inline std::vector<Match> match_keypoints(const FeatureMatrix& desc_a, const FeatureMatrix& desc_b,
                                          double ratio = 0.8, int threads = 1) {
  if (desc_a.rows == 0) throw InvalidArgument("descriptor set A is empty");
  if (desc_b.rows < 2) throw InvalidArgument("ratio test needs at least 2 descriptors in B");
  if (desc_a.cols != desc_b.cols) throw InvalidArgument("descriptor dimension mismatch");
  if (!(ratio > 0.0 && ratio <= 1.0)) throw InvalidArgument("ratio must be in (0, 1]");

  std::vector<Match> candidates(desc_a.rows);
  parallel_for(static_cast<std::int64_t>(desc_a.rows), threads, [&](std::int64_t ai) {
    const double* a = desc_a.row(static_cast<size_t>(ai));
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    double second_d2 = std::numeric_limits<double>::infinity();
    for (size_t bi = 0; bi < desc_b.rows; ++bi) {
      double d2 = detail::sq_dist(a, desc_b.row(bi), desc_a.cols);
      if (d2 < best_d2) {
        second_d2 = best_d2;
        best_d2 = d2;
        best = static_cast<int>(bi);
      } else if (d2 < second_d2) {
        second_d2 = d2;
      }
    }
    candidates[static_cast<size_t>(ai)] = {static_cast<int>(ai), best, std::sqrt(best_d2),
                                           std::sqrt(second_d2)};
  });
  std::vector<Match> out;
  for (const auto& m : candidates)
    if (m.d1 < ratio * m.d2) out.push_back(m);
  return out;
}

// Codebook CSV: "k,D,seed,iterations" then k rows of D values.
inline void save_codebook_csv(const Codebook& book, std::ostream& out) {
  out << book.k << "," << book.dim << "," << book.seed << "," << book.iterations_run << "\n";
  char buf[40];
  for (int c = 0; c < book.k; ++c) {
    const double* row = book.centroid(c);
    for (int d = 0; d < book.dim; ++d) {
      std::snprintf(buf, sizeof buf, d == 0 ? "%.17g" : ",%.17g", row[d]);
      out << buf;
    }
    out << "\n";
  }
}

inline Codebook load_codebook_csv(std::istream& in) {
  Codebook book;
  char comma;
  in >> book.k >> comma >> book.dim >> comma >> book.seed >> comma >> book.iterations_run;
  if (!in || book.k < 1 || book.dim < 1) throw FormatError("malformed codebook header");
  book.centroids.resize(static_cast<size_t>(book.k) * book.dim);
  for (size_t i = 0; i < book.centroids.size(); ++i) {
    if (i % static_cast<size_t>(book.dim) != 0) in >> comma;
    in >> book.centroids[i];
  }
  if (!in) throw FormatError("truncated codebook");
  return book;
}

inline void save_codebook_csv_file(const Codebook& book, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  save_codebook_csv(book, out);
}

inline Codebook load_codebook_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return load_codebook_csv(in);
}

}  // namespace salvox

// pipeline.hpp - wires the stages together: mesh in, descriptors out.
//
// Every stage is reachable on its own; this header only sequences them
// under one config so the CLI and the evaluation harness agree on what a
// "run" means.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "salvox/bow.hpp"
#include "salvox/config.hpp"
#include "salvox/descriptor.hpp"
#include "salvox/geodesic_sphere.hpp"
#include "salvox/keypoints.hpp"
#include "salvox/mesh.hpp"
#include "salvox/scale_space.hpp"
#include "salvox/synthetic.hpp"
#include "salvox/voxelize.hpp"

namespace salvox {

// 66 -> level-3 vertices; 32 / 128 -> face centroids of levels 2 / 3.
// The face layouts reproduce the 256 / 1024 total descriptor lengths.
inline OrientationBins make_orientation_bins(const PipelineConfig& config) {
  switch (config.n_bins) {
    case 66: return OrientationBins::from_vertices(3);
    case 32: return OrientationBins::from_faces(2);
    case 128: return OrientationBins::from_faces(3);
    default: throw ConfigError("n_bins must be 32, 66 or 128");
  }
}

inline DescriptorParams make_descriptor_params(const PipelineConfig& config) {
  DescriptorParams p;
  p.azimuth_alignment = config.azimuth_alignment;
  p.soft_binning = config.soft_binning;
  p.clamp = config.clamp;
  p.spatial_weighting = config.spatial_weighting;
  return p;
}

struct ModelFeatures {
  std::string model_id;
  std::vector<Keypoint> keypoints;    // surface extrema with normals
  std::vector<Descriptor> descriptors;
  int descriptor_dim{};
};

inline VoxelGrid voxelize_with_config(const TriangleMesh& mesh, const PipelineConfig& config) {
  TriangleMesh normalized = normalize_mesh(mesh, config.resolution, config.padding);
  return voxelize(normalized, config.resolution);
}

inline ModelFeatures extract_features(const TriangleMesh& mesh, const PipelineConfig& config,
                                      const OrientationBins& bins, const std::string& model_id,
                                      int threads = 1) {
  ModelFeatures out;
  out.model_id = model_id;
  VoxelGrid grid = voxelize_with_config(mesh, config);
  ScaleSpace space =
      build_scale_space(grid, config.base_delta, config.k_values, config.dog_mode, threads);
  std::vector<Keypoint> kps =
      detect_extrema(space, config.extrema_threshold, config.extrema_compare, threads);
  kps = filter_surface(std::move(kps), surface_voxels(grid), grid.dims);
  estimate_normals(space, grid, kps, threads);
  out.descriptors = compute_descriptors(space, kps, bins, make_descriptor_params(config), threads);
  out.keypoints = std::move(kps);
  out.descriptor_dim = 8 * bins.count();
  return out;
}

inline ModelFeatures extract_features_file(const std::string& mesh_path,
                                           const PipelineConfig& config,
                                           const OrientationBins& bins,
                                           const std::string& model_id, int threads = 1) {
  return extract_features(load_mesh_file(mesh_path), config, bins, model_id, threads);
}

inline FeatureMatrix descriptors_to_matrix(std::span<const Descriptor> descriptors, int dim) {
  FeatureMatrix m;
  m.cols = static_cast<size_t>(dim);
  m.rows = descriptors.size();
  m.data.reserve(m.rows * m.cols);
  for (const auto& d : descriptors) m.data.insert(m.data.end(), d.bins.begin(), d.bins.end());
  return m;
}

// Features for every manifest entry, in manifest order.
inline std::vector<ModelFeatures> extract_corpus_features(const CorpusManifest& manifest,
                                                          const PipelineConfig& config,
                                                          const OrientationBins& bins,
                                                          int threads = 1) {
  std::vector<ModelFeatures> out;
  out.reserve(manifest.entries.size());
  for (const auto& entry : manifest.entries)
    out.push_back(extract_features_file(entry.path, config, bins, entry.model_id, threads));
  return out;
}

// Pools descriptors of all models into one training matrix.
inline FeatureMatrix pool_descriptors(std::span<const ModelFeatures> models) {
  FeatureMatrix pool;
  for (const auto& m : models) {
    if (pool.cols == 0) pool.cols = static_cast<size_t>(m.descriptor_dim);
    for (const auto& d : m.descriptors) pool.append_row(d.bins);
  }
  return pool;
}

}  // namespace salvox

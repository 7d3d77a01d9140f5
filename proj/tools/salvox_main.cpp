// salvox - batch CLI for voxel-grid salient features and shape retrieval.
//
// Subcommands: gen-corpus, voxelize, keypoints, describe, codebook, index,
// query, evaluate, match. Stages hand off through documented file formats;
// every output file gets a .meta.json sidecar echoing the effective config
// and its digest. Identical inputs and config produce byte-identical
// outputs; --threads only changes speed.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "salvox/config.hpp"
#include "salvox/io_json.hpp"
#include "salvox/pipeline.hpp"
#include "salvox/retrieval.hpp"
#include "salvox/synthetic.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  int threads = 0;  // 0 = hardware concurrency
  std::uint64_t seed = 0;
  bool seed_set = false;
};

salvox::PipelineConfig effective_config(const CommonOpts& opts) {
  salvox::PipelineConfig config;
  if (!opts.config_path.empty()) config = salvox::load_config_file(opts.config_path);
  if (opts.seed_set) config.codebook_seed = opts.seed;
  salvox::validate(config);
  return config;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "pipeline config file (key = value lines)");
  cmd->add_option("--threads", opts.threads, "worker threads (speed only, never output)");
  cmd->add_option("--seed", opts.seed, "override codebook_seed")->each([&](const std::string&) {
    opts.seed_set = true;
  });
}

std::string model_id_from_path(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

salvox::Labels manifest_labels(const salvox::CorpusManifest& manifest) {
  salvox::Labels labels;
  for (const auto& e : manifest.entries) {
    if (labels.count(e.model_id)) throw salvox::FormatError("duplicate model_id '" + e.model_id + "'");
    labels[e.model_id] = e.label;
  }
  return labels;
}

// Features -> histograms for every manifest entry against one codebook.
std::vector<salvox::BowHistogram> build_histograms(const salvox::CorpusManifest& manifest,
                                                   const salvox::PipelineConfig& config,
                                                   const salvox::Codebook& book, int threads) {
  salvox::OrientationBins bins = salvox::make_orientation_bins(config);
  std::vector<salvox::BowHistogram> out;
  out.reserve(manifest.entries.size());
  for (const auto& entry : manifest.entries) {
    auto features = salvox::extract_features_file(entry.path, config, bins, entry.model_id, threads);
    auto matrix = salvox::descriptors_to_matrix(features.descriptors, features.descriptor_dim);
    out.push_back(
        salvox::quantize(matrix, book, entry.model_id, config.histogram_normalization, threads));
  }
  return out;
}

salvox::Codebook train_codebook(const salvox::CorpusManifest& manifest,
                                const salvox::PipelineConfig& config, int threads) {
  salvox::OrientationBins bins = salvox::make_orientation_bins(config);
  auto models = salvox::extract_corpus_features(manifest, config, bins, threads);
  salvox::FeatureMatrix pool = salvox::pool_descriptors(models);
  if (pool.rows == 0) throw salvox::DegenerateError("corpus produced no descriptors");
  int k = std::min<std::size_t>(static_cast<std::size_t>(config.codebook_k), pool.rows);
  return salvox::kmeans(pool, k, config.codebook_iterations, config.codebook_seed, threads);
}

int run_gen_corpus(const std::string& out_dir, const std::string& classes_csv, int per_class,
                   std::uint64_t seed) {
  std::vector<std::string> classes;
  std::string cur;
  for (char c : classes_csv + ",") {
    if (c == ',') {
      if (!cur.empty()) classes.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  for (size_t i = 0; i < classes.size(); ++i)
    for (size_t j = i + 1; j < classes.size(); ++j)
      if (classes[i] == classes[j])
        throw salvox::InvalidArgument("duplicate shape family '" + classes[i] + "'");
  auto manifest = salvox::generate_corpus(classes, per_class, seed, out_dir);
  std::cout << "wrote " << manifest.entries.size() << " meshes and "
            << (std::filesystem::path(out_dir) / "manifest.csv").string() << "\n";
  return 0;
}

int run_voxelize(const CommonOpts& opts, const std::string& in_path, const std::string& out_path,
                 double smooth_sigma) {
  auto config = effective_config(opts);
  auto mesh = salvox::load_mesh_file(in_path);
  auto grid = salvox::voxelize_with_config(mesh, config);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw salvox::IoError("cannot write '" + out_path + "'");
  if (smooth_sigma > 0.0) {
    auto field = salvox::smooth(grid.as_field(), smooth_sigma, salvox::resolve_threads(opts.threads));
    salvox::save_scalar_field(field, grid.voxel_size, grid.origin, out);
  } else {
    salvox::save_voxel_grid(grid, out);
  }
  salvox::write_meta_sidecar(out_path, "voxelize", config);
  std::cout << "occupied " << grid.occupied_count() << " of " << grid.occupancy.size()
            << " voxels -> " << out_path << "\n";
  return 0;
}

int run_keypoints(const CommonOpts& opts, const std::string& in_path, const std::string& out_path) {
  auto config = effective_config(opts);
  int threads = salvox::resolve_threads(opts.threads);
  auto bins = salvox::make_orientation_bins(config);
  auto features =
      salvox::extract_features_file(in_path, config, bins, model_id_from_path(in_path), threads);
  std::ofstream out(out_path);
  if (!out) throw salvox::IoError("cannot write '" + out_path + "'");
  salvox::save_keypoints_csv(features.keypoints, out);
  salvox::write_meta_sidecar(out_path, "keypoints", config);
  std::cout << features.keypoints.size() << " keypoints -> " << out_path << "\n";
  return 0;
}

int run_describe(const CommonOpts& opts, const std::string& in_path, const std::string& out_path) {
  auto config = effective_config(opts);
  int threads = salvox::resolve_threads(opts.threads);
  auto bins = salvox::make_orientation_bins(config);
  auto features =
      salvox::extract_features_file(in_path, config, bins, model_id_from_path(in_path), threads);
  std::ofstream out(out_path);
  if (!out) throw salvox::IoError("cannot write '" + out_path + "'");
  salvox::save_descriptors_csv(features.descriptors, features.descriptor_dim, out);
  salvox::write_meta_sidecar(out_path, "describe", config);
  std::cout << features.descriptors.size() << " descriptors (dim " << features.descriptor_dim
            << ") -> " << out_path << "\n";
  return 0;
}

int run_codebook(const CommonOpts& opts, const std::string& manifest_path,
                 const std::string& out_path) {
  auto config = effective_config(opts);
  int threads = salvox::resolve_threads(opts.threads);
  auto manifest = salvox::load_manifest_csv(manifest_path);
  auto book = train_codebook(manifest, config, threads);
  salvox::save_codebook_csv_file(book, out_path);
  salvox::write_meta_sidecar(out_path, "codebook", config);
  std::cout << "codebook k=" << book.k << " dim=" << book.dim << " -> " << out_path << "\n";
  return 0;
}

int run_index(const CommonOpts& opts, const std::string& manifest_path,
              const std::string& codebook_path, const std::string& out_path) {
  auto config = effective_config(opts);
  int threads = salvox::resolve_threads(opts.threads);
  auto manifest = salvox::load_manifest_csv(manifest_path);
  auto book = salvox::load_codebook_csv_file(codebook_path);
  auto histograms = build_histograms(manifest, config, book, threads);
  salvox::save_histogram_index(histograms, manifest_labels(manifest), out_path);
  salvox::write_meta_sidecar(out_path, "index", config);
  std::cout << histograms.size() << " models -> " << out_path << "\n";
  return 0;
}

int run_query(const CommonOpts& opts, const std::string& in_path, const std::string& index_path,
              const std::string& codebook_path, const std::string& out_path, int top) {
  auto config = effective_config(opts);
  int threads = salvox::resolve_threads(opts.threads);
  auto [corpus, labels] = salvox::load_histogram_index(index_path);
  if (corpus.empty()) throw salvox::FormatError("histogram index is empty");
  auto book = salvox::load_codebook_csv_file(codebook_path);
  auto bins = salvox::make_orientation_bins(config);
  auto features =
      salvox::extract_features_file(in_path, config, bins, model_id_from_path(in_path), threads);
  auto matrix = salvox::descriptors_to_matrix(features.descriptors, features.descriptor_dim);
  auto query =
      salvox::quantize(matrix, book, model_id_from_path(in_path), config.histogram_normalization, threads);
  if (query.normalization != corpus.front().normalization)
    throw salvox::InvalidArgument("index normalization differs from configured normalization");
  auto ranked = salvox::rank(query, corpus);
  int shown = std::min<int>(top, static_cast<int>(ranked.entries.size()));
  for (int i = 0; i < shown; ++i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%4d  %-24s %.6f\n", i + 1, ranked.entries[i].model_id.c_str(),
                  ranked.entries[i].distance);
    std::cout << buf;
  }
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw salvox::IoError("cannot write '" + out_path + "'");
    out << "rank,model_id,distance\n";
    char buf[96];
    for (size_t i = 0; i < ranked.entries.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%zu,%s,%.9g\n", i + 1, ranked.entries[i].model_id.c_str(),
                    ranked.entries[i].distance);
      out << buf;
    }
    salvox::write_meta_sidecar(out_path, "query", config);
  }
  return 0;
}

int run_evaluate(const CommonOpts& opts, const std::string& manifest_path,
                 const std::string& codebook_path, const std::string& out_path) {
  auto config = effective_config(opts);
  int threads = salvox::resolve_threads(opts.threads);
  auto manifest = salvox::load_manifest_csv(manifest_path);

  // One feature-extraction pass feeds both codebook training and
  // quantization; the codebook stage dominates the runtime as it is.
  salvox::OrientationBins bins = salvox::make_orientation_bins(config);
  auto models = salvox::extract_corpus_features(manifest, config, bins, threads);
  salvox::Codebook book;
  if (!codebook_path.empty()) {
    book = salvox::load_codebook_csv_file(codebook_path);
  } else {
    salvox::FeatureMatrix pool = salvox::pool_descriptors(models);
    if (pool.rows == 0) throw salvox::DegenerateError("corpus produced no descriptors");
    int k = std::min<std::size_t>(static_cast<std::size_t>(config.codebook_k), pool.rows);
    book = salvox::kmeans(pool, k, config.codebook_iterations, config.codebook_seed, threads);
  }
  std::vector<salvox::BowHistogram> histograms;
  histograms.reserve(models.size());
  for (const auto& m : models) {
    auto matrix = salvox::descriptors_to_matrix(m.descriptors, m.descriptor_dim);
    histograms.push_back(
        salvox::quantize(matrix, book, m.model_id, config.histogram_normalization, threads));
  }
  auto labels = manifest_labels(manifest);
  auto report = salvox::evaluate_corpus(histograms, labels);

  salvox::save_eval_report_json(report, config, out_path);
  std::string base = out_path;
  if (base.size() > 5 && base.substr(base.size() - 5) == ".json") base.resize(base.size() - 5);
  salvox::save_eval_summary_csv(report, "salvox-" + salvox::config_digest(config),
                                base + ".summary.csv");
  salvox::save_precision_recall_csv(report, base + ".pr.csv");
  salvox::write_meta_sidecar(out_path, "evaluate", config);

  char buf[160];
  std::snprintf(buf, sizeof buf, "NN %.4f  FT %.4f  ST %.4f  DCG %.4f  (%zu queries, %zu skipped)\n",
                report.mean.nn, report.mean.ft, report.mean.st, report.mean.dcg,
                report.per_query.size(), report.skipped_queries.size());
  std::cout << buf << "report -> " << out_path << "\n";
  return 0;
}

int run_match(const CommonOpts& opts, const std::string& a_path, const std::string& b_path,
              double ratio, const std::string& out_path) {
  auto config = effective_config(opts);
  if (ratio > 0.0) config.ratio_threshold = ratio;
  int threads = salvox::resolve_threads(opts.threads);
  auto bins = salvox::make_orientation_bins(config);
  auto fa = salvox::extract_features_file(a_path, config, bins, model_id_from_path(a_path), threads);
  auto fb = salvox::extract_features_file(b_path, config, bins, model_id_from_path(b_path), threads);
  auto ma = salvox::descriptors_to_matrix(fa.descriptors, fa.descriptor_dim);
  auto mb = salvox::descriptors_to_matrix(fb.descriptors, fb.descriptor_dim);
  auto matches = salvox::match_keypoints(ma, mb, config.ratio_threshold, threads);
  std::ofstream out(out_path);
  if (!out) throw salvox::IoError("cannot write '" + out_path + "'");
  out << "ai,bi,d1,d2\n";
  char buf[96];
  for (const auto& m : matches) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.9g,%.9g\n", m.a, m.b, m.d1, m.d2);
    out << buf;
  }
  salvox::write_meta_sidecar(out_path, "match", config);
  std::cout << matches.size() << " matches (of " << fa.descriptors.size() << " queries) -> "
            << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"salvox - voxel-grid salient local features and bag-of-words shape retrieval"};
  app.require_subcommand(1);

  CommonOpts opts;

  auto* gen = app.add_subcommand("gen-corpus", "generate a labeled synthetic mesh corpus");
  std::string gen_out, gen_classes = "ellipsoid,box,torus,star";
  int gen_per_class = 8;
  std::uint64_t gen_seed = 1;
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--classes", gen_classes, "comma-separated shape families");
  gen->add_option("--per-class", gen_per_class, "instances per family");
  gen->add_option("--seed", gen_seed, "corpus seed");

  auto* vox = app.add_subcommand("voxelize", "mesh -> VOXG occupancy grid");
  std::string vox_in, vox_out;
  double vox_smooth = 0.0;
  vox->add_option("--in", vox_in, "input mesh (OFF/OBJ)")->required();
  vox->add_option("--out", vox_out, "output .voxg file")->required();
  vox->add_option("--smooth", vox_smooth, "dump the field smoothed at this sigma (VOXG v2)");
  add_common(vox, opts);

  auto* kps = app.add_subcommand("keypoints", "mesh -> surface keypoint CSV");
  std::string kps_in, kps_out;
  kps->add_option("--in", kps_in, "input mesh (OFF/OBJ)")->required();
  kps->add_option("--out", kps_out, "output CSV")->required();
  add_common(kps, opts);

  auto* desc = app.add_subcommand("describe", "mesh -> descriptor CSV");
  std::string desc_in, desc_out;
  desc->add_option("--in", desc_in, "input mesh (OFF/OBJ)")->required();
  desc->add_option("--out", desc_out, "output CSV")->required();
  add_common(desc, opts);

  auto* cb = app.add_subcommand("codebook", "manifest -> K-means codebook CSV");
  std::string cb_manifest, cb_out;
  cb->add_option("--manifest", cb_manifest, "corpus manifest CSV")->required();
  cb->add_option("--out", cb_out, "output codebook CSV")->required();
  add_common(cb, opts);

  auto* idx = app.add_subcommand("index", "manifest + codebook -> histogram index JSON");
  std::string idx_manifest, idx_codebook, idx_out;
  idx->add_option("--manifest", idx_manifest, "corpus manifest CSV")->required();
  idx->add_option("--codebook", idx_codebook, "codebook CSV")->required();
  idx->add_option("--out", idx_out, "output index JSON")->required();
  add_common(idx, opts);

  auto* qry = app.add_subcommand("query", "rank a model against a saved index");
  std::string qry_in, qry_index, qry_codebook, qry_out;
  int qry_top = 10;
  qry->add_option("--in", qry_in, "query mesh (OFF/OBJ)")->required();
  qry->add_option("--index", qry_index, "histogram index JSON")->required();
  qry->add_option("--codebook", qry_codebook, "codebook CSV")->required();
  qry->add_option("--out", qry_out, "optional ranked-list CSV");
  qry->add_option("--top", qry_top, "rows to print");
  add_common(qry, opts);

  auto* ev = app.add_subcommand("evaluate", "leave-one-in retrieval evaluation over a manifest");
  std::string ev_manifest, ev_codebook, ev_out;
  ev->add_option("--manifest", ev_manifest, "corpus manifest CSV")->required();
  ev->add_option("--codebook", ev_codebook, "reuse an existing codebook CSV");
  ev->add_option("--out", ev_out, "output report JSON")->required();
  add_common(ev, opts);

  auto* mt = app.add_subcommand("match", "ratio-test keypoint matching between two meshes");
  std::string mt_a, mt_b, mt_out;
  double mt_ratio = 0.0;
  mt->add_option("--a", mt_a, "first mesh")->required();
  mt->add_option("--b", mt_b, "second mesh")->required();
  mt->add_option("--ratio", mt_ratio, "ratio-test threshold (default from config)");
  mt->add_option("--out", mt_out, "output matches CSV")->required();
  add_common(mt, opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "ERROR:USAGE:" << e.what() << "\n";
    return 1;
  }

  try {
    if (gen->parsed()) return run_gen_corpus(gen_out, gen_classes, gen_per_class, gen_seed);
    if (vox->parsed()) return run_voxelize(opts, vox_in, vox_out, vox_smooth);
    if (kps->parsed()) return run_keypoints(opts, kps_in, kps_out);
    if (desc->parsed()) return run_describe(opts, desc_in, desc_out);
    if (cb->parsed()) return run_codebook(opts, cb_manifest, cb_out);
    if (idx->parsed()) return run_index(opts, idx_manifest, idx_codebook, idx_out);
    if (qry->parsed()) return run_query(opts, qry_in, qry_index, qry_codebook, qry_out, qry_top);
    if (ev->parsed()) return run_evaluate(opts, ev_manifest, ev_codebook, ev_out);
    if (mt->parsed()) return run_match(opts, mt_a, mt_b, mt_ratio, mt_out);
  } catch (const salvox::Error& e) {
    std::cerr << "ERROR:" << e.code() << ":" << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "ERROR:INTERNAL:" << e.what() << "\n";
    return 1;
  }
  return 0;
}

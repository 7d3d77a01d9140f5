// io_json.hpp - JSON interfaces: histogram index, evaluation report,
// config echo sidecars. Kept apart from the core headers so the library
// only pulls in the JSON dependency where files are produced.
#pragma once

#include <fstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "salvox/bow.hpp"
#include "salvox/config.hpp"
#include "salvox/retrieval.hpp"

namespace salvox {

inline nlohmann::json config_to_json(const PipelineConfig& c) {
  nlohmann::json j;
  j["resolution"] = c.resolution;
  j["padding"] = c.padding;
  j["base_delta"] = c.base_delta;
  j["k_values"] = c.k_values;
  j["dog_mode"] = c.dog_mode == DogMode::VsBase ? "vs-base" : "adjacent";
  j["extrema_threshold"] = c.extrema_threshold;
  j["extrema_compare"] = c.extrema_compare == ScaleCompare::Adjacent
                             ? "adjacent"
                             : (c.extrema_compare == ScaleCompare::All ? "all" : "spatial");
  j["n_bins"] = c.n_bins;
  j["azimuth_alignment"] = c.azimuth_alignment;
  j["soft_binning"] = c.soft_binning;
  j["clamp"] = c.clamp;
  j["spatial_weighting"] = c.spatial_weighting;
  j["codebook_k"] = c.codebook_k;
  j["codebook_iterations"] = c.codebook_iterations;
  j["codebook_seed"] = c.codebook_seed;
  j["histogram_normalization"] = to_string(c.histogram_normalization);
  j["ratio_threshold"] = c.ratio_threshold;
  return j;
}

// Written next to every output file as <path>.meta.json.
inline void write_meta_sidecar(const std::string& out_path, const std::string& subcommand,
                               const PipelineConfig& config) {
  nlohmann::json j;
  j["tool"] = "salvox";
  j["subcommand"] = subcommand;
  j["config_digest"] = config_digest(config);
  j["config"] = config_to_json(config);
  std::ofstream out(out_path + ".meta.json");
  if (!out) throw IoError("cannot write '" + out_path + ".meta.json'");
  out << j.dump(2) << "\n";
}

// Histogram index: model_id -> {label, counts, normalization}.
inline void save_histogram_index(std::span<const BowHistogram> histograms, const Labels& labels,
                                 const std::string& path) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& h : histograms) {
    nlohmann::json e;
    auto it = labels.find(h.model_id);
    e["label"] = it == labels.end() ? "" : it->second;
    e["counts"] = h.counts;
    e["normalization"] = to_string(h.normalization);
    j[h.model_id] = std::move(e);
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

inline std::pair<std::vector<BowHistogram>, Labels> load_histogram_index(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad histogram index JSON: ") + e.what());
  }
  std::vector<BowHistogram> histograms;
  Labels labels;
  for (auto it = j.begin(); it != j.end(); ++it) {
    BowHistogram h;
    h.model_id = it.key();
    h.counts = it.value().at("counts").get<std::vector<double>>();
    std::string norm = it.value().at("normalization").get<std::string>();
    if (norm != "raw" && norm != "l1") throw FormatError("unknown normalization '" + norm + "'");
    h.normalization = norm == "raw" ? HistNorm::Raw : HistNorm::L1;
    labels[h.model_id] = it.value().at("label").get<std::string>();
    histograms.push_back(std::move(h));
  }
  return {std::move(histograms), std::move(labels)};
}

inline nlohmann::json eval_report_to_json(const EvalReport& report, const PipelineConfig& config) {
  nlohmann::json j;
  j["mean"] = {{"nn", report.mean.nn}, {"ft", report.mean.ft}, {"st", report.mean.st},
               {"dcg", report.mean.dcg}};
  nlohmann::json per_query = nlohmann::json::array();
  for (const auto& q : report.per_query) {
    per_query.push_back({{"query_id", q.query_id},
                         {"class", q.label},
                         {"class_size", q.class_size},
                         {"nn", q.metrics.nn},
                         {"ft", q.metrics.ft},
                         {"st", q.metrics.st},
                         {"dcg", q.metrics.dcg}});
  }
  j["per_query"] = std::move(per_query);
  nlohmann::json recall = nlohmann::json::array(), precision = nlohmann::json::array();
  for (const auto& [r, p] : report.mean_precision_recall) {
    recall.push_back(r);
    precision.push_back(p);
  }
  j["precision_recall"] = {{"recall", std::move(recall)}, {"precision", std::move(precision)}};
  j["class_sizes"] = report.class_sizes;
  j["skipped_queries"] = report.skipped_queries;
  j["histogram_normalization"] = to_string(report.normalization);
  j["degenerate_corpus"] = report.degenerate_corpus;
  j["config_digest"] = config_digest(config);
  j["config"] = config_to_json(config);
  return j;
}

inline void save_eval_report_json(const EvalReport& report, const PipelineConfig& config,
                                  const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << eval_report_to_json(report, config).dump(2) << "\n";
}

// One row in the shape of the benchmark summary tables.
inline void save_eval_summary_csv(const EvalReport& report, const std::string& method,
                                  const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s,%.4f,%.4f,%.4f,%.4f\n", method.c_str(), report.mean.nn,
                report.mean.ft, report.mean.st, report.mean.dcg);
  out << "method,nn,ft,st,dcg\n" << buf;
}

inline void save_precision_recall_csv(const EvalReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << "recall,precision\n";
  char buf[64];
  for (const auto& [r, p] : report.mean_precision_recall) {
    std::snprintf(buf, sizeof buf, "%.2f,%.6f\n", r, p);
    out << buf;
  }
}

}  // namespace salvox

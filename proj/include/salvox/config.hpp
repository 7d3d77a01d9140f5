// config.hpp - pipeline parameters, key=value file parsing, validation,
// canonical serialization and digest.
//
// Unknown keys are rejected so a typo never silently runs with defaults.
#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "salvox/bow.hpp"
#include "salvox/errors.hpp"
#include "salvox/keypoints.hpp"
#include "salvox/scale_space.hpp"

namespace salvox {

struct PipelineConfig {
  int resolution = 64;
  int padding = 4;
  double base_delta = 1.6;
  std::vector<double> k_values = default_k_values();
  DogMode dog_mode = DogMode::VsBase;
  double extrema_threshold = 0.01;
  ScaleCompare extrema_compare = ScaleCompare::Spatial;
  int n_bins = 66;  // 32, 66 or 128 (level-2 faces, level-3 vertices, level-3 faces)
  bool azimuth_alignment = true;
  bool soft_binning = false;
  double clamp = 0.2;
  bool spatial_weighting = false;
  int codebook_k = 3000;
  int codebook_iterations = 20;
  std::uint64_t codebook_seed = 42;
  HistNorm histogram_normalization = HistNorm::L1;
  double ratio_threshold = 0.8;
};

namespace detail {

inline std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline bool parse_bool(const std::string& v, long line) {
  if (v == "true" || v == "on" || v == "1") return true;
  if (v == "false" || v == "off" || v == "0") return false;
  throw ParseError("expected a boolean, got '" + v + "'", line);
}

inline std::vector<double> parse_double_list(const std::string& v, long line) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    out.push_back(parse_double(item, line));
  }
  return out;
}

}  // namespace detail

inline void validate(const PipelineConfig& c) {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (c.resolution < 8 || c.resolution > 1024) fail("resolution must be in [8, 1024]");
  if (c.padding < 1) fail("padding must be >= 1");
  if (2 * c.padding >= c.resolution) fail("2*padding must be < resolution");
  if (!(c.base_delta > 0.0 && c.base_delta <= 16.0)) fail("base_delta must be in (0, 16]");
  if (c.k_values.empty()) fail("k_values must be nonempty");
  for (size_t i = 0; i < c.k_values.size(); ++i) {
    if (!(c.k_values[i] > 0.0)) fail("k_values must be positive");
    if (i > 0 && !(c.k_values[i] > c.k_values[i - 1])) fail("k_values must be strictly increasing");
  }
  if (!(c.extrema_threshold >= 0.0)) fail("extrema_threshold must be >= 0");
  if (c.n_bins != 32 && c.n_bins != 66 && c.n_bins != 128) fail("n_bins must be 32, 66 or 128");
  if (c.soft_binning && c.n_bins != 66) fail("soft_binning requires the vertex bin layout (n_bins = 66)");
  if (!(c.clamp > 0.0 && c.clamp <= 1.0)) fail("clamp must be in (0, 1]");
  if (c.codebook_k < 1) fail("codebook_k must be >= 1");
  if (c.codebook_iterations < 1) fail("codebook_iterations must be >= 1");
  if (!(c.ratio_threshold > 0.0 && c.ratio_threshold <= 1.0)) fail("ratio_threshold must be in (0, 1]");
}

// Key = value lines, '#' comments, unknown keys rejected.
inline PipelineConfig parse_config(std::istream& in) {
  PipelineConfig c;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", line_no);
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    if (value.empty()) throw ParseError("empty value for key '" + key + "'", line_no);

    if (key == "resolution") c.resolution = static_cast<int>(detail::parse_long(value, line_no));
    else if (key == "padding") c.padding = static_cast<int>(detail::parse_long(value, line_no));
    else if (key == "base_delta") c.base_delta = detail::parse_double(value, line_no);
    else if (key == "k_values") c.k_values = detail::parse_double_list(value, line_no);
    else if (key == "dog_mode") {
      if (value == "vs-base") c.dog_mode = DogMode::VsBase;
      else if (value == "adjacent") c.dog_mode = DogMode::Adjacent;
      else throw ParseError("dog_mode must be vs-base or adjacent", line_no);
    } else if (key == "extrema_threshold") c.extrema_threshold = detail::parse_double(value, line_no);
    else if (key == "extrema_compare") {
      if (value == "adjacent") c.extrema_compare = ScaleCompare::Adjacent;
      else if (value == "all") c.extrema_compare = ScaleCompare::All;
      else if (value == "spatial") c.extrema_compare = ScaleCompare::Spatial;
      else throw ParseError("extrema_compare must be spatial, adjacent or all", line_no);
    } else if (key == "n_bins") c.n_bins = static_cast<int>(detail::parse_long(value, line_no));
    else if (key == "azimuth_alignment") c.azimuth_alignment = detail::parse_bool(value, line_no);
    else if (key == "soft_binning") c.soft_binning = detail::parse_bool(value, line_no);
    else if (key == "clamp") c.clamp = detail::parse_double(value, line_no);
    else if (key == "spatial_weighting") c.spatial_weighting = detail::parse_bool(value, line_no);
    else if (key == "codebook_k") c.codebook_k = static_cast<int>(detail::parse_long(value, line_no));
    else if (key == "codebook_iterations")
      c.codebook_iterations = static_cast<int>(detail::parse_long(value, line_no));
    else if (key == "codebook_seed") {
      char* end = nullptr;
      c.codebook_seed = std::strtoull(value.c_str(), &end, 10);
      if (end == value.c_str() || *end != '\0')
        throw ParseError("expected an unsigned integer, got '" + value + "'", line_no);
    }
    else if (key == "histogram_normalization") {
      if (value == "raw") c.histogram_normalization = HistNorm::Raw;
      else if (value == "l1") c.histogram_normalization = HistNorm::L1;
      else throw ParseError("histogram_normalization must be raw or l1", line_no);
    } else if (key == "ratio_threshold") c.ratio_threshold = detail::parse_double(value, line_no);
    else throw ConfigError("unknown config key '" + key + "'");
  }
  validate(c);
  return c;
}

inline PipelineConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  return parse_config(in);
}

// Canonical serialization: fixed key order, %.17g numbers. Feeds both the
// digest and the config echo written next to every output.
inline std::string config_to_string(const PipelineConfig& c) {
  std::string out;
  char buf[64];
  auto add = [&](const std::string& key, const std::string& value) {
    out += key;
    out += " = ";
    out += value;
    out += "\n";
  };
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  add("resolution", std::to_string(c.resolution));
  add("padding", std::to_string(c.padding));
  add("base_delta", num(c.base_delta));
  {
    std::string list;
    for (size_t i = 0; i < c.k_values.size(); ++i) {
      if (i) list += ",";
      list += num(c.k_values[i]);
    }
    add("k_values", list);
  }
  add("dog_mode", c.dog_mode == DogMode::VsBase ? "vs-base" : "adjacent");
  add("extrema_threshold", num(c.extrema_threshold));
  add("extrema_compare", c.extrema_compare == ScaleCompare::Adjacent
                             ? "adjacent"
                             : (c.extrema_compare == ScaleCompare::All ? "all" : "spatial"));
  add("n_bins", std::to_string(c.n_bins));
  add("azimuth_alignment", c.azimuth_alignment ? "true" : "false");
  add("soft_binning", c.soft_binning ? "true" : "false");
  add("clamp", num(c.clamp));
  add("spatial_weighting", c.spatial_weighting ? "true" : "false");
  add("codebook_k", std::to_string(c.codebook_k));
  add("codebook_iterations", std::to_string(c.codebook_iterations));
  add("codebook_seed", std::to_string(c.codebook_seed));
  add("histogram_normalization", to_string(c.histogram_normalization));
  add("ratio_threshold", num(c.ratio_threshold));
  return out;
}

// FNV-1a over the canonical serialization, as 16 hex digits.
inline std::string config_digest(const PipelineConfig& c) {
  std::string s = config_to_string(c);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) h = (h ^ ch) * 1099511628211ull;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace salvox

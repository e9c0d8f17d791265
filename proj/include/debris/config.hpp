#pragma once

#include <istream>
#include <optional>
#include <string>

#include "debris/types.hpp"

namespace debris {

/// Pipeline parameters parsed from a TOML-style key/value file. Unknown keys
/// are rejected.
struct PipelineConfig {
  std::string cameras;
  std::string cloud;
  std::string masks;
  std::string outdir = "out";

  int depth_downsample = 4;                 // D: depth grid = image / D
  std::optional<double> depth_tolerance;    // eps, m; default 3x point spacing
  double gs = 0.05;                         // resampling cell size, m
  int min_cells = 4;
  double inlier_threshold = 0.05;           // ground RANSAC, m
  int ransac_iters = 1000;
  std::optional<double> risk_threshold;     // joules; nothing flagged if unset
  int heatmap_pixels_per_cell = 4;
  std::string units = "m";                  // echoed into output metadata

  ClassTable class_table;
  MaterialTable materials;
  WindScale wind = WindScale::saffir_simpson();

  int threads = 1;  // CLI flag, not a config key

  void validate() const;

  static PipelineConfig defaults();
  /// Resolves relative input paths against the config file's directory.
  static PipelineConfig load(const std::string& path);
  static PipelineConfig parse(std::istream& in, const std::string& origin);
};

void write_config(const PipelineConfig& cfg, const std::string& path);

}  // namespace debris

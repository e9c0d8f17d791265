#pragma once

#include <optional>
#include <string>
#include <vector>

#include "debris/volumetry.hpp"

namespace debris {

/// 0.5 * rho * V * U^2, joules. Throws DomainError on negative inputs.
double kinetic_energy(double rho, double volume, double wind_speed);

/// Per-cell and per-instance kinetic energy for one wind category.
struct RiskMap {
  int category = 0;
  double wind_speed = 0;  // m/s
  // grid geometry mirrors the source HeightGrid
  double x0 = 0, y0 = 0, gs = 0;
  int cols = 0, rows = 0;
  std::vector<double> cell_ke;               // joules; 0 where Z = 0
  std::vector<std::uint8_t> cell_class;
  std::vector<double> instance_ke;           // parallel to the instance list
};

std::vector<RiskMap> build_risk_maps(const HeightGrid& grid,
                                     std::span<const DebrisInstance> instances,
                                     const MaterialTable& materials,
                                     const WindScale& scale,
                                     const ClassTable& classes);

struct HeatmapStyle {
  // log10(KE) range shared across all categories so colors are comparable
  double log_min = 0;
  double log_max = 1;
  int pixels_per_cell = 4;
};

/// Global log10 color range over every nonzero cell of every map.
HeatmapStyle heatmap_style(std::span<const RiskMap> maps, int pixels_per_cell = 4);

/// Renders one category as a top-down PNG (zero-KE cells transparent) and
/// writes cells above the threshold to a sidecar CSV. Rendering is
/// deterministic: same map and style give byte-identical files.
void render_heatmap(const RiskMap& map, const HeatmapStyle& style,
                    std::optional<double> threshold, const ClassTable& classes,
                    const std::string& png_path, const std::string& csv_path);

/// Cells at or above the threshold (empty when no threshold is set).
std::vector<std::size_t> flagged_cells(const RiskMap& map,
                                       std::optional<double> threshold);

}  // namespace debris

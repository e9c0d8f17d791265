#include "debris/risk.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "debris/png_io.hpp"
#include "debris/scene_io.hpp"

namespace debris {

double kinetic_energy(double rho, double volume, double wind_speed) {
  if (rho <= 0) fail(ErrorKind::DomainError, "density must be positive");
  if (volume < 0) fail(ErrorKind::DomainError, "volume must be non-negative");
  if (wind_speed < 0) fail(ErrorKind::DomainError, "wind speed must be non-negative");
  return 0.5 * rho * volume * wind_speed * wind_speed;
}

std::vector<RiskMap> build_risk_maps(const HeightGrid& grid,
                                     std::span<const DebrisInstance> instances,
                                     const MaterialTable& materials,
                                     const WindScale& scale,
                                     const ClassTable& classes) {
  scale.validate();

  // resolve densities up front so a missing class fails before any output
  std::vector<double> cell_volume(grid.cell_count(), 0.0);
  std::vector<double> cell_rho(grid.cell_count(), 0.0);
  for (std::size_t i = 0; i < grid.cell_count(); ++i) {
    if (grid.point_count[i] == 0 || grid.cell_class[i] == kBackgroundClass) continue;
    cell_volume[i] = grid.gs * grid.gs * static_cast<double>(grid.z[i]);
    cell_rho[i] = materials.density_for(grid.cell_class[i], classes);
  }

  std::vector<RiskMap> maps;
  maps.reserve(scale.categories.size());
  for (const auto& [category, speed] : scale.categories) {
    RiskMap map;
    map.category = category;
    map.wind_speed = speed;
    map.x0 = grid.x0;
    map.y0 = grid.y0;
    map.gs = grid.gs;
    map.cols = grid.cols;
    map.rows = grid.rows;
    map.cell_class = grid.cell_class;
    map.cell_ke.assign(grid.cell_count(), 0.0);
    for (std::size_t i = 0; i < grid.cell_count(); ++i) {
      if (cell_volume[i] <= 0.0) continue;
      map.cell_ke[i] = kinetic_energy(cell_rho[i], cell_volume[i], speed);
    }
    map.instance_ke.reserve(instances.size());
    for (const DebrisInstance& inst : instances) {
      double rho = materials.density_for(inst.class_index, classes);
      map.instance_ke.push_back(kinetic_energy(rho, inst.volume, speed));
    }
    maps.push_back(std::move(map));
  }
  return maps;
}

std::vector<std::size_t> flagged_cells(const RiskMap& map,
                                       std::optional<double> threshold) {
  std::vector<std::size_t> out;
  if (!threshold) return out;
  for (std::size_t i = 0; i < map.cell_ke.size(); ++i)
    if (map.cell_ke[i] > 0.0 && map.cell_ke[i] >= *threshold) out.push_back(i);
  return out;
}

namespace {

// perceptually ordered dark-blue -> yellow ramp (viridis anchors)
constexpr double kRamp[][3] = {
    {0.267, 0.005, 0.329}, {0.283, 0.141, 0.458}, {0.254, 0.265, 0.530},
    {0.207, 0.372, 0.553}, {0.164, 0.471, 0.558}, {0.128, 0.567, 0.551},
    {0.135, 0.659, 0.518}, {0.267, 0.749, 0.441}, {0.478, 0.821, 0.318},
    {0.741, 0.873, 0.150}, {0.993, 0.906, 0.144}};

Rgba ramp_color(double t) {
  t = std::clamp(t, 0.0, 1.0);
  constexpr int n = static_cast<int>(sizeof(kRamp) / sizeof(kRamp[0]));
  double s = t * (n - 1);
  int i = std::min(static_cast<int>(s), n - 2);
  double f = s - i;
  auto ch = [&](int k) {
    double v = kRamp[i][k] * (1.0 - f) + kRamp[i + 1][k] * f;
    return static_cast<std::uint8_t>(std::lround(v * 255.0));
  };
  return Rgba{ch(0), ch(1), ch(2), 255};
}

}  // namespace

HeatmapStyle heatmap_style(std::span<const RiskMap> maps, int pixels_per_cell) {
  HeatmapStyle style;
  style.pixels_per_cell = pixels_per_cell;
  bool any = false;
  double lo = 0, hi = 0;
  for (const RiskMap& m : maps) {
    for (double ke : m.cell_ke) {
      if (ke <= 0.0) continue;
      double l = std::log10(ke);
      if (!any) {
        lo = hi = l;
        any = true;
      } else {
        lo = std::min(lo, l);
        hi = std::max(hi, l);
      }
    }
  }
  style.log_min = any ? lo : 0.0;
  style.log_max = any && hi > lo ? hi : style.log_min + 1.0;
  return style;
}

void render_heatmap(const RiskMap& map, const HeatmapStyle& style,
                    std::optional<double> threshold, const ClassTable& classes,
                    const std::string& png_path, const std::string& csv_path) {
  const int ppc = std::max(1, style.pixels_per_cell);
  Image<Rgba> img(std::max(1, map.cols * ppc), std::max(1, map.rows * ppc),
                  Rgba{0, 0, 0, 0});
  for (int cy = 0; cy < map.rows; ++cy) {
    for (int cx = 0; cx < map.cols; ++cx) {
      double ke = map.cell_ke[static_cast<std::size_t>(cy) * map.cols + cx];
      if (ke <= 0.0) continue;
      double t = (std::log10(ke) - style.log_min) / (style.log_max - style.log_min);
      Rgba color = ramp_color(t);
      // row 0 of the image is the northernmost row of the grid
      int px0 = cx * ppc;
      int py0 = (map.rows - 1 - cy) * ppc;
      for (int dy = 0; dy < ppc; ++dy)
        for (int dx = 0; dx < ppc; ++dx) img.at(px0 + dx, py0 + dy) = color;
    }
  }
  write_png_rgba8(img, png_path);

  std::ofstream csv(csv_path);
  if (!csv) fail(ErrorKind::IoError, "cannot open for writing: " + csv_path);
  csv << "col,row,class,ke_joules\n";
  for (std::size_t idx : flagged_cells(map, threshold)) {
    int cx = static_cast<int>(idx % map.cols);
    int cy = static_cast<int>(idx / map.cols);
    int cls = map.cell_class[idx];
    const std::string& name = cls < static_cast<int>(classes.size())
                                  ? classes.names[cls]
                                  : std::to_string(cls);
    csv << cx << "," << cy << "," << name << "," << format_double(map.cell_ke[idx])
        << "\n";
  }
  if (!csv) fail(ErrorKind::IoError, "write failed: " + csv_path);
}

}  // namespace debris

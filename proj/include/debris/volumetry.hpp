#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

#include "debris/projection.hpp"

namespace debris {

/// Fitted terrain plane n.x + d = 0 with |n| = 1, oriented so debris sits on
/// the positive side.
struct GroundPlane {
  Eigen::Vector3d n = Eigen::Vector3d::UnitZ();
  double d = 0;
  double inlier_fraction = 0;

  double signed_height(const Eigen::Vector3d& p) const { return n.dot(p) + d; }

  /// Deterministic in-plane tangent basis (seeded from the world axis with
  /// the smallest normal component).
  void tangent_basis(Eigen::Vector3d& t1, Eigen::Vector3d& t2) const;
};

struct RansacOptions {
  double inlier_threshold = 0.05;  // meters
  int max_iters = 1000;
  std::uint64_t seed = 0x9e3779b97f4a7c15ull;
};

/// Consensus plane fit over background-labeled points (all points when no
/// background exists), refined by least squares over the inliers.
GroundPlane register_ground(const SemanticCloud& cloud, const RansacOptions& opts);

/// XY height grid above the registered ground. Cell height is the max signed
/// height of its non-background points (clamped at 0); cell class is the
/// majority class (ties to the smallest index).
struct HeightGrid {
  double x0 = 0, y0 = 0;  // grid origin in the plane's 2D frame
  double gs = 0.05;       // cell size, meters
  int cols = 0, rows = 0;
  std::vector<float> z;
  std::vector<std::uint8_t> cell_class;
  std::vector<std::uint32_t> point_count;
  GroundPlane plane;
  Eigen::Vector3d t1 = Eigen::Vector3d::UnitX();
  Eigen::Vector3d t2 = Eigen::Vector3d::UnitY();

  std::size_t cell_count() const { return z.size(); }
  std::size_t cell_index(int cx, int cy) const {
    return static_cast<std::size_t>(cy) * cols + cx;
  }
};

HeightGrid resample(const SemanticCloud& cloud, const GroundPlane& plane,
                    double gs, int threads = 1);

/// GS^2 * sum of Z over the given cells.
double compute_volume(const HeightGrid& grid, std::span<const std::size_t> cells);
double compute_total_volume(const HeightGrid& grid);

struct DebrisInstance {
  int id = 0;
  int class_index = 0;
  std::vector<std::size_t> cells;
  double volume = 0;      // m^3
  double centroid_x = 0;  // plane frame, m
  double centroid_y = 0;
  double area = 0;  // footprint, m^2
};

/// 8-connected same-class components with footprint >= min_cells, sorted by
/// descending volume; ids assigned 1..n in that order.
std::vector<DebrisInstance> cluster_instances(const HeightGrid& grid,
                                              int min_cells = 4);

}  // namespace debris

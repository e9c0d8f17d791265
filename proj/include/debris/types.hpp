#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "debris/error.hpp"
#include "debris/image.hpp"

namespace debris {

constexpr int kBackgroundClass = 0;

/// One calibrated view: pinhole intrinsics plus world->camera pose.
/// Convention: x_cam = R * p_world + T, camera looks down +z, pixel u grows
/// right and v grows down.
struct CameraPose {
  std::string camera_id;
  int width = 0;
  int height = 0;
  double fx = 0, fy = 0, cx = 0, cy = 0;
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d T = Eigen::Vector3d::Zero();
  std::string mask_path;

  Eigen::Matrix3d intrinsics() const {
    Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
    K(0, 0) = fx;
    K(1, 1) = fy;
    K(0, 2) = cx;
    K(1, 2) = cy;
    return K;
  }

  /// Checks rotation orthonormality (1e-6), det +1, positive focal lengths
  /// and principal point inside the image. Throws on violation.
  void validate() const;
};

struct CloudPoint {
  float x = 0, y = 0, z = 0;
  std::uint8_t r = 0, g = 0, b = 0;

  Eigen::Vector3d position() const { return {x, y, z}; }
};

/// Ordered class names; index 0 is always background.
struct ClassTable {
  std::vector<std::string> names;

  std::size_t size() const { return names.size(); }

  int index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<int>(i);
    return -1;
  }
};

using LabelMask = Image<std::uint8_t>;

struct Scene {
  std::vector<CameraPose> cameras;
  std::vector<CloudPoint> cloud;
  bool cloud_has_color = false;
  ClassTable class_table;
};

/// Per-class material density in kg/m^3. Background has no entry.
struct MaterialTable {
  std::map<int, double> density;

  double density_for(int class_index, const ClassTable& classes) const {
    auto it = density.find(class_index);
    if (it == density.end()) {
      std::string name = class_index >= 0 &&
                                 class_index < static_cast<int>(classes.size())
                             ? classes.names[class_index]
                             : std::to_string(class_index);
      fail(ErrorKind::MissingDensity, "no density configured for class '" + name + "'");
    }
    return it->second;
  }
};

/// Saffir-Simpson style categories with representative wind speeds (m/s),
/// strictly increasing with category.
struct WindScale {
  std::vector<std::pair<int, double>> categories;

  void validate() const {
    double prev = -1.0;
    for (const auto& [cat, speed] : categories) {
      if (speed <= prev)
        fail(ErrorKind::InvalidConfig,
             "wind speeds must be strictly increasing with category");
      prev = speed;
    }
  }

  static WindScale saffir_simpson() {
    return WindScale{{{1, 33.0}, {2, 43.0}, {3, 50.0}, {4, 58.0}, {5, 70.0}}};
  }
};

}  // namespace debris

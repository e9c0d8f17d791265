#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "debris/types.hpp"

namespace debris {

struct PixelCoord {
  double u = 0;
  double v = 0;
  double depth = 0;  // camera-frame z, > 0
};

/// World->pixel mapping. Returns nullopt when the point is at or behind the
/// camera plane (z <= 0).
std::optional<PixelCoord> project_point(const Eigen::Vector3d& p,
                                        const CameraPose& cam);

/// Per-view min-depth raster over patches of D x D pixels. Patches no cloud
/// point projects into hold +infinity.
struct DepthMap {
  std::string camera_id;
  int grid_w = 0;
  int grid_h = 0;
  int downsample = 1;
  std::vector<float> values;

  static constexpr float kEmpty = std::numeric_limits<float>::infinity();

  float at_patch(int px, int py) const {
    return values[static_cast<std::size_t>(py) * grid_w + px];
  }
  /// Patch index for a continuous pixel coordinate.
  int patch_x(double u) const {
    int px = static_cast<int>(u) / downsample;
    return px < 0 ? 0 : (px >= grid_w ? grid_w - 1 : px);
  }
  int patch_y(double v) const {
    int py = static_cast<int>(v) / downsample;
    return py < 0 ? 0 : (py >= grid_h ? grid_h - 1 : py);
  }
};

DepthMap build_depth_map(std::span<const CloudPoint> cloud, const CameraPose& cam,
                         int downsample, int threads = 1);

/// True iff the point projects in front of the camera, inside the image, and
/// its depth is within eps of the patch minimum (empty patches always pass).
bool is_visible(const Eigen::Vector3d& p, const CameraPose& cam,
                const DepthMap& dmap, double eps);

/// Point cloud with per-point class votes accumulated across views.
struct SemanticCloud {
  std::vector<CloudPoint> points;
  int num_classes = 1;
  std::vector<std::uint32_t> votes;  // points.size() x num_classes, row-major
  std::vector<std::uint8_t> fused_class;
  std::vector<std::uint32_t> support;

  std::size_t size() const { return points.size(); }
  std::uint32_t vote_count(std::size_t i, int cls) const {
    return votes[i * num_classes + cls];
  }
};

struct ProjectOptions {
  double eps = 0.05;
  bool depth_aware = true;  // false = naive projection, no visibility test
  int threads = 1;
};

/// Depth-aware multi-view label fusion. One vote per camera per visible
/// point; ties go to the smallest class index, background never outvotes a
/// debris class. Vote accumulation is commutative, so the result does not
/// depend on camera order or thread count.
SemanticCloud project_labels(const Scene& scene, std::span<const LabelMask> masks,
                             std::span<const DepthMap> dmaps,
                             const ProjectOptions& opts);

/// Recomputes fused_class/support from the vote table.
void fuse_votes(SemanticCloud& cloud);

/// Median nearest-neighbor spacing, estimated on a sample of at most
/// max_sample points. Used for the default visibility tolerance (3x spacing).
double estimate_point_spacing(std::span<const CloudPoint> cloud,
                              std::size_t max_sample = 50000);

}  // namespace debris

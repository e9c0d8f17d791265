#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "debris/types.hpp"

namespace debris {

// Deterministic synthetic scenes with closed-form ground truth. Masks are
// rendered by ray casting the analytic primitives, a code path fully separate
// from the projection pipeline, so end-to-end agreement is meaningful
// evidence rather than a tautology.

enum class ShapeKind { Box, Cylinder, Sheet };

struct Primitive {
  ShapeKind kind = ShapeKind::Box;
  int class_index = 1;
  double cx = 0, cy = 0;      // footprint center on the ground, m
  double size_x = 1;          // box/sheet extent; cylinder: diameter
  double size_y = 1;
  double size_z = 1;          // height above ground
  double analytic_volume() const;
};

struct CameraRing {
  int count = 6;
  double radius = 6.0;
  double height = 4.0;
  Eigen::Vector3d look_at = Eigen::Vector3d::Zero();
  int image_width = 640;
  int image_height = 480;
  double focal = 500.0;  // pixels
  // overrides count/radius/height placement when non-empty
  std::vector<Eigen::Vector3d> positions;
};

struct SceneSpec {
  std::uint64_t seed = 1;
  double ground_half_extent = 4.0;  // floor is a square of side 2*extent
  double density = 2000.0;          // surface samples per m^2
  double jitter_sigma = 0.0;        // optional gaussian point noise, m
  std::vector<Primitive> primitives;
  CameraRing ring;
  ClassTable class_table;  // defaults applied when empty

  void validate() const;
};

struct SynthResult {
  Scene scene;
  std::vector<LabelMask> masks;           // one per camera, exact raster
  std::vector<std::uint8_t> true_class;   // per cloud point
  std::vector<double> primitive_volumes;  // closed form, per primitive
};

SynthResult generate(const SceneSpec& spec);

/// Writes the fixture in the pipeline's input formats: cameras.txt,
/// cloud.ply, masks/cam*.png, config.toml and scene_spec.toml.
void write_fixture(const SynthResult& result, const SceneSpec& spec,
                   const std::string& dir);

}  // namespace debris

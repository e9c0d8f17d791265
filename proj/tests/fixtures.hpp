#pragma once

// Shared helpers for the test binaries: canned cameras, synthetic fixture
// specs with hand-checked geometry, byte-level file comparison and a small
// wrapper for invoking the CLI binary.

#include <sys/wait.h>

#include <Eigen/Geometry>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "debris/projection.hpp"
#include "debris/synth.hpp"

namespace testutil {

namespace fs = std::filesystem;
using namespace debris;

/// Fresh scratch directory under the test working directory.
inline std::string tmp_dir(const std::string& name) {
  fs::path p = fs::path("test_tmp") / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

inline CameraPose identity_camera(double f, double cx, double cy, int w, int h,
                                  const std::string& id = "cam0") {
  CameraPose cam;
  cam.camera_id = id;
  cam.width = w;
  cam.height = h;
  cam.fx = cam.fy = f;
  cam.cx = cx;
  cam.cy = cy;
  cam.mask_path = id + ".png";
  return cam;
}

/// Camera at `pos` looking at `target`, +z forward, v growing downward.
inline CameraPose look_at_camera(const Eigen::Vector3d& pos,
                                 const Eigen::Vector3d& target, double f, int w,
                                 int h, const std::string& id) {
  Eigen::Vector3d z_cam = (target - pos).normalized();
  Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
  if (std::abs(z_cam.dot(up)) > 0.999) up = Eigen::Vector3d::UnitY();
  Eigen::Vector3d x_cam = z_cam.cross(up).normalized();
  Eigen::Vector3d y_cam = z_cam.cross(x_cam);
  CameraPose cam;
  cam.camera_id = id;
  cam.width = w;
  cam.height = h;
  cam.fx = cam.fy = f;
  cam.cx = w / 2.0;
  cam.cy = h / 2.0;
  cam.R.row(0) = x_cam;
  cam.R.row(1) = y_cam;
  cam.R.row(2) = z_cam;
  cam.T = -(cam.R * pos);
  cam.mask_path = id + ".png";
  return cam;
}

/// Two-primitive occlusion fixture. A 4 x 0.3 x 2 m wall (class 1) stands at
/// y in [0, 0.3]; a 1 x 1 x 0.5 m crate (class 2) sits behind it at y in
/// [1.5, 2.5]. Cameras 0-3 sit low at y = -5, z = 1: every ray from them to
/// any crate point crosses the wall slab between z = 0.23 and z = 0.67, so
/// the crate is fully hidden in those views. Cameras 4-5 sit high at z = 8
/// and clear the wall top (crossing height >= 2.6 m), so they see the crate.
inline SceneSpec occlusion_spec() {
  SceneSpec spec;
  spec.seed = 77;
  spec.ground_half_extent = 3.0;
  spec.density = 6000.0;

  Primitive wall;
  wall.kind = ShapeKind::Box;
  wall.class_index = 1;
  wall.cx = 0.0;
  wall.cy = 0.15;
  wall.size_x = 4.0;
  wall.size_y = 0.3;
  wall.size_z = 2.0;
  spec.primitives.push_back(wall);

  Primitive crate;
  crate.kind = ShapeKind::Box;
  crate.class_index = 2;
  crate.cx = 0.0;
  crate.cy = 2.0;
  crate.size_x = 1.0;
  crate.size_y = 1.0;
  crate.size_z = 0.5;
  spec.primitives.push_back(crate);

  spec.ring.look_at = {0.0, 1.5, 0.3};
  spec.ring.image_width = 640;
  spec.ring.image_height = 480;
  spec.ring.focal = 500.0;
  spec.ring.positions = {{-1.5, -5.0, 1.0}, {-0.5, -5.0, 1.0},
                         {0.5, -5.0, 1.0},  {1.5, -5.0, 1.0},
                         {-2.0, -3.0, 8.0}, {2.0, -3.0, 8.0}};
  return spec;
}

/// Floor plus a single unit box of the given class, ringed by six cameras.
inline SceneSpec unit_box_spec(int class_index = 4, std::uint64_t seed = 11) {
  SceneSpec spec;
  spec.seed = seed;
  spec.ground_half_extent = 3.0;
  spec.density = 4000.0;
  Primitive box;
  box.kind = ShapeKind::Box;
  box.class_index = class_index;
  box.size_x = box.size_y = box.size_z = 1.0;
  spec.primitives.push_back(box);
  spec.ring.count = 6;
  spec.ring.radius = 6.0;
  spec.ring.height = 4.0;
  return spec;
}

/// SemanticCloud carrying the generator's ground-truth labels, bypassing
/// mask fusion (for volumetry-only tests).
inline SemanticCloud cloud_from_truth(const SynthResult& synth, int num_classes) {
  SemanticCloud cloud;
  cloud.points = synth.scene.cloud;
  cloud.num_classes = num_classes;
  cloud.votes.assign(cloud.points.size() * num_classes, 0);
  cloud.fused_class = synth.true_class;
  cloud.support.assign(cloud.points.size(), 1);
  for (std::size_t i = 0; i < cloud.points.size(); ++i)
    cloud.votes[i * num_classes + synth.true_class[i]] = 1;
  return cloud;
}

/// Occluded-object mislabel count: fused to some debris class other than the
/// true one. Points that end up unlabeled (background) are not mislabels.
inline std::size_t count_mislabels(const SemanticCloud& fused,
                                   const std::vector<std::uint8_t>& truth,
                                   int target_class) {
  std::size_t bad = 0;
  for (std::size_t i = 0; i < fused.size(); ++i) {
    if (truth[i] != target_class) continue;
    int got = fused.fused_class[i];
    if (got != target_class && got != kBackgroundClass) ++bad;
  }
  return bad;
}

inline std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
}

inline bool same_bytes(const std::string& a, const std::string& b) {
  return read_bytes(a) == read_bytes(b);
}

/// Relative path -> content for every regular file under root.
inline std::map<std::string, std::vector<std::uint8_t>> dir_snapshot(
    const std::string& root) {
  std::map<std::string, std::vector<std::uint8_t>> snap;
  for (const auto& entry : fs::recursive_directory_iterator(root))
    if (entry.is_regular_file())
      snap[fs::relative(entry.path(), root).generic_string()] =
          read_bytes(entry.path().string());
  return snap;
}

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

inline std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
}

#ifdef DEBRIS_TWIN_BIN
/// Runs the debris-twin binary with the given arguments, capturing streams.
inline CliResult run_cli(const std::string& args, const std::string& scratch) {
  fs::create_directories(scratch);
  std::string out_path = (fs::path(scratch) / "stdout.txt").string();
  std::string err_path = (fs::path(scratch) / "stderr.txt").string();
  std::string cmd = std::string("\"") + DEBRIS_TWIN_BIN + "\" " + args + " > " +
                    out_path + " 2> " + err_path;
  int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = (status >= 0 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
  r.out = read_text(out_path);
  r.err = read_text(err_path);
  return r;
}
#endif

}  // namespace testutil

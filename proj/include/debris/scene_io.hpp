#pragma once

#include <istream>
#include <string>
#include <vector>

#include "debris/projection.hpp"
#include "debris/types.hpp"
#include "debris/volumetry.hpp"

namespace debris {

// --- cameras.txt ------------------------------------------------------------
// One record per camera:
//   id width height fx fy cx cy r11..r33 tx ty tz mask_filename
// whitespace separated, '#' starts a comment.
std::vector<CameraPose> parse_cameras(std::istream& in, const std::string& origin);
std::vector<CameraPose> parse_cameras(const std::string& path);
void write_cameras(const std::vector<CameraPose>& cams, const std::string& path);

// --- PLY --------------------------------------------------------------------
struct PlyCloud {
  std::vector<CloudPoint> points;
  bool has_color = false;
  bool has_class = false;
  std::vector<std::uint8_t> classes;
};

PlyCloud read_ply(std::istream& in, const std::string& origin);
PlyCloud read_ply(const std::string& path);
void write_ply(const std::vector<CloudPoint>& points, bool with_color,
               const std::string& path);

/// Binary PLY with x,y,z (float32), class-colormap RGB and a class_index
/// property. Round-trips bit-exactly at float32 precision.
void write_labeled_cloud(const SemanticCloud& cloud, const std::string& path);
SemanticCloud read_labeled_cloud(const std::string& path);

/// Fixed palette color for a class index (background is neutral gray).
Rgba class_color(int class_index);

// --- scene ------------------------------------------------------------------
struct LoadedScene {
  Scene scene;
  std::vector<LabelMask> masks;  // one per camera, dimension-checked
};

/// Parses and validates all pipeline inputs. Masks are resolved relative to
/// mask_dir and must match their camera's dimensions; every mask value must
/// be a valid index into class_table.
LoadedScene parse_scene(const std::string& camera_file, const std::string& cloud_file,
                        const std::string& mask_dir, const ClassTable& class_table);

// --- depth maps -------------------------------------------------------------
// Binary format: "DMAP" magic, u32 grid_w, grid_h, downsample, then
// grid_w*grid_h little-endian float32 values (+inf for empty patches).
void write_depth_map(const DepthMap& dmap, const std::string& path);
DepthMap read_depth_map(const std::string& path);

/// Debug dump: 16-bit PNG, depth mapped linearly onto [0, 65535] over
/// [0, max finite depth]; empty patches map to 0.
void write_depth_png(const DepthMap& dmap, const std::string& path);

// --- height grid ------------------------------------------------------------
// ASCII ESRI-style raster (ncols/nrows/xllcorner/yllcorner/cellsize/
// NODATA_value header, then rows north to south).
void write_height_grid(const HeightGrid& grid, const std::string& z_path,
                       const std::string& class_path);

struct AscRaster {
  int cols = 0, rows = 0;
  double x0 = 0, y0 = 0, cellsize = 0, nodata = -9999;
  std::vector<double> values;  // row-major, north to south as stored
};
AscRaster read_asc(const std::string& path);

void write_instances_csv(std::span<const DebrisInstance> instances,
                         const ClassTable& classes, const std::string& path);

/// Shortest float formatting that round-trips (printf %.17g trimmed).
std::string format_double(double v);

}  // namespace debris

#include "debris/scene_io.hpp"

#include <Eigen/LU>

#include <charconv>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "debris/image.hpp"
#include "debris/png_io.hpp"

namespace debris {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) return "0";
  return std::string(buf, ptr);
}

Rgba class_color(int class_index) {
  static const Rgba palette[] = {
      {128, 128, 128, 255},  // background
      {230, 25, 75, 255},   {60, 180, 75, 255},  {0, 130, 200, 255},
      {255, 225, 25, 255},  {145, 30, 180, 255}, {70, 240, 240, 255},
      {245, 130, 48, 255},  {240, 50, 230, 255}, {210, 245, 60, 255},
      {0, 128, 128, 255},   {170, 110, 40, 255}};
  constexpr int n = static_cast<int>(sizeof(palette) / sizeof(palette[0]));
  if (class_index <= 0) return palette[0];
  return palette[1 + (class_index - 1) % (n - 1)];
}

void CameraPose::validate() const {
  Eigen::Matrix3d err = R.transpose() * R - Eigen::Matrix3d::Identity();
  if (err.cwiseAbs().maxCoeff() > 1e-6 || std::abs(R.determinant() - 1.0) > 1e-6)
    fail(ErrorKind::NonOrthonormalRotation,
         "camera '" + camera_id + "': R is not a proper rotation");
  if (width <= 0 || height <= 0)
    fail(ErrorKind::MalformedFile,
         "camera '" + camera_id + "': image dimensions must be positive");
  if (!(fx > 0) || !(fy > 0))
    fail(ErrorKind::MalformedFile,
         "camera '" + camera_id + "': focal lengths must be positive");
  if (!(cx >= 0 && cx < width) || !(cy >= 0 && cy < height))
    fail(ErrorKind::MalformedFile,
         "camera '" + camera_id + "': principal point outside image");
}

namespace {

double parse_number(const std::string& tok, const std::string& origin,
                    std::size_t line) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(v))
    fail_at(ErrorKind::MalformedFile, origin, line, "bad number '" + tok + "'");
  return v;
}

long parse_integer(const std::string& tok, const std::string& origin,
                   std::size_t line) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size())
    fail_at(ErrorKind::MalformedFile, origin, line, "bad integer '" + tok + "'");
  return v;
}

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> toks;
  std::istringstream iss(line);
  std::string t;
  while (iss >> t) toks.push_back(t);
  return toks;
}

}  // namespace

std::vector<CameraPose> parse_cameras(std::istream& in, const std::string& origin) {
  std::vector<CameraPose> cams;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    auto toks = tokenize(line);
    if (toks.empty()) continue;
    if (toks.size() != 20)
      fail_at(ErrorKind::MalformedFile, origin, lineno,
              "expected 20 fields per camera record, got " +
                  std::to_string(toks.size()));
    CameraPose cam;
    cam.camera_id = toks[0];
    cam.width = static_cast<int>(parse_integer(toks[1], origin, lineno));
    cam.height = static_cast<int>(parse_integer(toks[2], origin, lineno));
    cam.fx = parse_number(toks[3], origin, lineno);
    cam.fy = parse_number(toks[4], origin, lineno);
    cam.cx = parse_number(toks[5], origin, lineno);
    cam.cy = parse_number(toks[6], origin, lineno);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        cam.R(r, c) = parse_number(toks[7 + r * 3 + c], origin, lineno);
    for (int k = 0; k < 3; ++k) cam.T[k] = parse_number(toks[16 + k], origin, lineno);
    cam.mask_path = toks[19];
    try {
      cam.validate();
    } catch (const DebrisError& e) {
      throw DebrisError(e.kind(),
                        origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
    if (!ids.insert(cam.camera_id).second)
      fail_at(ErrorKind::MalformedFile, origin, lineno,
              "duplicate camera id '" + cam.camera_id + "'");
    cams.push_back(std::move(cam));
  }
  return cams;
}

std::vector<CameraPose> parse_cameras(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::MalformedFile, "cannot open: " + path);
  return parse_cameras(f, path);
}

void write_cameras(const std::vector<CameraPose>& cams, const std::string& path) {
  std::ofstream f(path);
  if (!f) fail(ErrorKind::IoError, "cannot open for writing: " + path);
  f << "# id width height fx fy cx cy r11 r12 r13 r21 r22 r23 r31 r32 r33"
       " tx ty tz mask_filename\n";
  for (const CameraPose& cam : cams) {
    f << cam.camera_id << " " << cam.width << " " << cam.height << " "
      << format_double(cam.fx) << " " << format_double(cam.fy) << " "
      << format_double(cam.cx) << " " << format_double(cam.cy);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) f << " " << format_double(cam.R(r, c));
    for (int k = 0; k < 3; ++k) f << " " << format_double(cam.T[k]);
    f << " " << cam.mask_path << "\n";
  }
  if (!f) fail(ErrorKind::IoError, "write failed: " + path);
}

// --- PLY ---------------------------------------------------------------------

namespace {

struct PlyProperty {
  std::string name;
  std::string type;
  int size = 0;
};

int ply_type_size(const std::string& type) {
  if (type == "char" || type == "int8" || type == "uchar" || type == "uint8")
    return 1;
  if (type == "short" || type == "int16" || type == "ushort" || type == "uint16")
    return 2;
  if (type == "int" || type == "int32" || type == "uint" || type == "uint32" ||
      type == "float" || type == "float32")
    return 4;
  if (type == "double" || type == "float64") return 8;
  return 0;
}

double ply_value(const std::uint8_t* p, const std::string& type) {
  auto load = [&]<typename T>() {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return static_cast<double>(v);
  };
  if (type == "float" || type == "float32") return load.operator()<float>();
  if (type == "double" || type == "float64") return load.operator()<double>();
  if (type == "uchar" || type == "uint8") return load.operator()<std::uint8_t>();
  if (type == "char" || type == "int8") return load.operator()<std::int8_t>();
  if (type == "ushort" || type == "uint16") return load.operator()<std::uint16_t>();
  if (type == "short" || type == "int16") return load.operator()<std::int16_t>();
  if (type == "uint" || type == "uint32") return load.operator()<std::uint32_t>();
  return load.operator()<std::int32_t>();
}

}  // namespace

PlyCloud read_ply(std::istream& in, const std::string& origin) {
  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&]() -> std::string& {
    if (!std::getline(in, line))
      fail_at(ErrorKind::MalformedFile, origin, lineno, "unexpected end of header");
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };

  if (next_line() != "ply")
    fail_at(ErrorKind::MalformedFile, origin, lineno, "missing 'ply' magic");

  bool binary = false;
  bool have_format = false;
  std::size_t vertex_count = 0;
  bool in_vertex = false, seen_vertex = false;
  std::vector<PlyProperty> props;

  for (;;) {
    auto toks = tokenize(next_line());
    if (toks.empty()) continue;
    if (toks[0] == "comment" || toks[0] == "obj_info") continue;
    if (toks[0] == "format") {
      if (toks.size() != 3 || toks[2] != "1.0" ||
          (toks[1] != "ascii" && toks[1] != "binary_little_endian"))
        fail_at(ErrorKind::MalformedFile, origin, lineno,
                "unsupported PLY format (need ascii or binary_little_endian 1.0)");
      binary = toks[1] == "binary_little_endian";
      have_format = true;
    } else if (toks[0] == "element") {
      if (toks.size() != 3)
        fail_at(ErrorKind::MalformedFile, origin, lineno, "bad element line");
      if (toks[1] == "vertex") {
        long n = parse_integer(toks[2], origin, lineno);
        if (n < 0 || n > (1l << 28))
          fail_at(ErrorKind::MalformedFile, origin, lineno,
                  "unreasonable vertex count");
        vertex_count = static_cast<std::size_t>(n);
        in_vertex = true;
        seen_vertex = true;
      } else {
        if (!seen_vertex)
          fail_at(ErrorKind::MalformedFile, origin, lineno,
                  "element '" + toks[1] + "' before vertex is not supported");
        in_vertex = false;  // trailing elements are ignored
      }
    } else if (toks[0] == "property") {
      if (!in_vertex) continue;
      if (toks.size() == 3) {
        PlyProperty p{toks[2], toks[1], ply_type_size(toks[1])};
        if (p.size == 0)
          fail_at(ErrorKind::MalformedFile, origin, lineno,
                  "unknown property type '" + toks[1] + "'");
        props.push_back(std::move(p));
      } else if (toks.size() == 5 && toks[1] == "list") {
        fail_at(ErrorKind::MalformedFile, origin, lineno,
                "list properties on vertices are not supported");
      } else {
        fail_at(ErrorKind::MalformedFile, origin, lineno, "bad property line");
      }
    } else if (toks[0] == "end_header") {
      break;
    } else {
      fail_at(ErrorKind::MalformedFile, origin, lineno,
              "unexpected header line '" + toks[0] + "'");
    }
  }
  if (!have_format)
    fail_at(ErrorKind::MalformedFile, origin, lineno, "missing format line");
  if (!seen_vertex)
    fail_at(ErrorKind::MalformedFile, origin, lineno, "missing vertex element");

  auto prop_index = [&](std::initializer_list<const char*> names) {
    for (const char* n : names)
      for (std::size_t i = 0; i < props.size(); ++i)
        if (props[i].name == n) return static_cast<int>(i);
    return -1;
  };
  int ix = prop_index({"x"}), iy = prop_index({"y"}), iz = prop_index({"z"});
  int ir = prop_index({"red", "r"}), ig = prop_index({"green", "g"}),
      ib = prop_index({"blue", "b"});
  int icls = prop_index({"class_index", "class", "label"});
  if (ix < 0 || iy < 0 || iz < 0)
    fail(ErrorKind::MalformedFile, origin + ": vertex needs x, y, z properties");

  PlyCloud cloud;
  cloud.has_color = ir >= 0 && ig >= 0 && ib >= 0;
  cloud.has_class = icls >= 0;
  cloud.points.reserve(std::min<std::size_t>(vertex_count, 1u << 20));
  if (cloud.has_class) cloud.classes.reserve(cloud.points.capacity());

  if (binary) {
    std::size_t stride = 0;
    std::vector<std::size_t> offsets(props.size());
    for (std::size_t i = 0; i < props.size(); ++i) {
      offsets[i] = stride;
      stride += props[i].size;
    }
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    if (data.size() < vertex_count * stride)
      fail(ErrorKind::MalformedFile, origin + ": truncated vertex data");
    for (std::size_t v = 0; v < vertex_count; ++v) {
      const std::uint8_t* row = data.data() + v * stride;
      auto get = [&](int pi) { return ply_value(row + offsets[pi], props[pi].type); };
      CloudPoint pt;
      pt.x = static_cast<float>(get(ix));
      pt.y = static_cast<float>(get(iy));
      pt.z = static_cast<float>(get(iz));
      if (cloud.has_color) {
        pt.r = static_cast<std::uint8_t>(get(ir));
        pt.g = static_cast<std::uint8_t>(get(ig));
        pt.b = static_cast<std::uint8_t>(get(ib));
      }
      cloud.points.push_back(pt);
      if (cloud.has_class)
        cloud.classes.push_back(static_cast<std::uint8_t>(get(icls)));
    }
  } else {
    for (std::size_t v = 0; v < vertex_count; ++v) {
      std::vector<double> vals(props.size());
      for (std::size_t p = 0; p < props.size(); ++p) {
        std::string tok;
        if (!(in >> tok))
          fail(ErrorKind::MalformedFile, origin + ": truncated vertex data at vertex " +
                                             std::to_string(v));
        vals[p] = parse_number(tok, origin, lineno);
      }
      CloudPoint pt;
      pt.x = static_cast<float>(vals[ix]);
      pt.y = static_cast<float>(vals[iy]);
      pt.z = static_cast<float>(vals[iz]);
      if (cloud.has_color) {
        pt.r = static_cast<std::uint8_t>(vals[ir]);
        pt.g = static_cast<std::uint8_t>(vals[ig]);
        pt.b = static_cast<std::uint8_t>(vals[ib]);
      }
      cloud.points.push_back(pt);
      if (cloud.has_class)
        cloud.classes.push_back(static_cast<std::uint8_t>(vals[icls]));
    }
  }
  return cloud;
}

PlyCloud read_ply(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::MalformedFile, "cannot open: " + path);
  return read_ply(f, path);
}

namespace {

void ply_header(std::ostream& out, std::size_t count, bool with_color,
                bool with_class) {
  out << "ply\nformat binary_little_endian 1.0\n";
  out << "element vertex " << count << "\n";
  out << "property float x\nproperty float y\nproperty float z\n";
  if (with_color)
    out << "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  if (with_class) out << "property uchar class_index\n";
  out << "end_header\n";
}

void put_float(std::ostream& out, float v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}

}  // namespace

void write_ply(const std::vector<CloudPoint>& points, bool with_color,
               const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::IoError, "cannot open for writing: " + path);
  ply_header(f, points.size(), with_color, false);
  for (const CloudPoint& pt : points) {
    put_float(f, pt.x);
    put_float(f, pt.y);
    put_float(f, pt.z);
    if (with_color) {
      f.put(static_cast<char>(pt.r));
      f.put(static_cast<char>(pt.g));
      f.put(static_cast<char>(pt.b));
    }
  }
  if (!f) fail(ErrorKind::IoError, "write failed: " + path);
}

void write_labeled_cloud(const SemanticCloud& cloud, const std::string& path) {
  if (cloud.fused_class.size() != cloud.points.size())
    fail(ErrorKind::DomainError, "cloud is not fused");
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::IoError, "cannot open for writing: " + path);
  ply_header(f, cloud.points.size(), true, true);
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const CloudPoint& pt = cloud.points[i];
    put_float(f, pt.x);
    put_float(f, pt.y);
    put_float(f, pt.z);
    Rgba c = class_color(cloud.fused_class[i]);
    f.put(static_cast<char>(c.r));
    f.put(static_cast<char>(c.g));
    f.put(static_cast<char>(c.b));
    f.put(static_cast<char>(cloud.fused_class[i]));
  }
  if (!f) fail(ErrorKind::IoError, "write failed: " + path);
}

SemanticCloud read_labeled_cloud(const std::string& path) {
  PlyCloud ply = read_ply(path);
  if (!ply.has_class)
    fail(ErrorKind::MalformedFile, path + ": missing class_index property");
  SemanticCloud cloud;
  cloud.points = std::move(ply.points);
  int max_class = 0;
  for (std::uint8_t c : ply.classes) max_class = std::max(max_class, int(c));
  cloud.num_classes = max_class + 1;
  cloud.fused_class = std::move(ply.classes);
  cloud.support.assign(cloud.points.size(), 0);
  return cloud;
}

// --- scene -------------------------------------------------------------------

LoadedScene parse_scene(const std::string& camera_file, const std::string& cloud_file,
                        const std::string& mask_dir, const ClassTable& class_table) {
  if (class_table.size() == 0)
    fail(ErrorKind::InvalidConfig, "class table must contain at least background");

  LoadedScene out;
  out.scene.class_table = class_table;
  out.scene.cameras = parse_cameras(camera_file);
  PlyCloud ply = read_ply(cloud_file);
  out.scene.cloud = std::move(ply.points);
  out.scene.cloud_has_color = ply.has_color;

  out.masks.reserve(out.scene.cameras.size());
  for (const CameraPose& cam : out.scene.cameras) {
    std::string mpath = (fs::path(mask_dir) / cam.mask_path).string();
    LabelMask mask = read_mask(mpath);
    if (mask.width != cam.width || mask.height != cam.height)
      fail(ErrorKind::DimensionMismatch,
           mpath + ": mask is " + std::to_string(mask.width) + "x" +
               std::to_string(mask.height) + " but camera '" + cam.camera_id +
               "' is " + std::to_string(cam.width) + "x" +
               std::to_string(cam.height));
    for (std::uint8_t v : mask.pixels)
      if (v >= class_table.size())
        fail(ErrorKind::UnknownClassIndex,
             mpath + ": class index " + std::to_string(v) + " exceeds table size " +
                 std::to_string(class_table.size()));
    out.masks.push_back(std::move(mask));
  }
  return out;
}

// --- depth maps ----------------------------------------------------------------

void write_depth_map(const DepthMap& dmap, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::IoError, "cannot open for writing: " + path);
  f.write("DMAP", 4);
  std::uint32_t hdr[3] = {static_cast<std::uint32_t>(dmap.grid_w),
                          static_cast<std::uint32_t>(dmap.grid_h),
                          static_cast<std::uint32_t>(dmap.downsample)};
  f.write(reinterpret_cast<const char*>(hdr), sizeof(hdr));
  f.write(reinterpret_cast<const char*>(dmap.values.data()),
          static_cast<std::streamsize>(dmap.values.size() * sizeof(float)));
  if (!f) fail(ErrorKind::IoError, "write failed: " + path);
}

DepthMap read_depth_map(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::MalformedFile, "cannot open: " + path);
  char magic[4];
  std::uint32_t hdr[3];
  if (!f.read(magic, 4) || std::memcmp(magic, "DMAP", 4) != 0)
    fail(ErrorKind::MalformedFile, path + ": bad depth map magic");
  if (!f.read(reinterpret_cast<char*>(hdr), sizeof(hdr)))
    fail(ErrorKind::MalformedFile, path + ": truncated depth map header");
  if (hdr[0] == 0 || hdr[1] == 0 || hdr[2] == 0 || hdr[0] > (1u << 16) ||
      hdr[1] > (1u << 16) ||
      static_cast<std::uint64_t>(hdr[0]) * hdr[1] > (1ull << 26))
    fail(ErrorKind::MalformedFile, path + ": unreasonable depth map header");
  DepthMap dmap;
  dmap.grid_w = static_cast<int>(hdr[0]);
  dmap.grid_h = static_cast<int>(hdr[1]);
  dmap.downsample = static_cast<int>(hdr[2]);
  dmap.values.resize(static_cast<std::size_t>(dmap.grid_w) * dmap.grid_h);
  if (!f.read(reinterpret_cast<char*>(dmap.values.data()),
              static_cast<std::streamsize>(dmap.values.size() * sizeof(float))))
    fail(ErrorKind::MalformedFile, path + ": truncated depth map data");
  return dmap;
}

void write_depth_png(const DepthMap& dmap, const std::string& path) {
  float max_depth = 0;
  for (float v : dmap.values)
    if (std::isfinite(v)) max_depth = std::max(max_depth, v);
  Image<std::uint16_t> img(dmap.grid_w, dmap.grid_h, 0);
  if (max_depth > 0) {
    for (std::size_t i = 0; i < dmap.values.size(); ++i) {
      float v = dmap.values[i];
      if (!std::isfinite(v)) continue;
      img.pixels[i] = static_cast<std::uint16_t>(
          std::lround(static_cast<double>(v) / max_depth * 65535.0));
    }
  }
  write_png_gray16(img, path);
}

// --- height grid -----------------------------------------------------------

namespace {

void write_asc_header(std::ostream& out, const HeightGrid& grid) {
  out << "ncols " << grid.cols << "\n";
  out << "nrows " << grid.rows << "\n";
  out << "xllcorner " << format_double(grid.x0) << "\n";
  out << "yllcorner " << format_double(grid.y0) << "\n";
  out << "cellsize " << format_double(grid.gs) << "\n";
  out << "NODATA_value -9999\n";
}

}  // namespace

void write_height_grid(const HeightGrid& grid, const std::string& z_path,
                       const std::string& class_path) {
  std::ofstream zf(z_path);
  if (!zf) fail(ErrorKind::IoError, "cannot open for writing: " + z_path);
  write_asc_header(zf, grid);
  for (int r = grid.rows - 1; r >= 0; --r) {  // north to south
    for (int c = 0; c < grid.cols; ++c) {
      if (c) zf << " ";
      zf << format_double(grid.z[grid.cell_index(c, r)]);
    }
    zf << "\n";
  }
  if (!zf) fail(ErrorKind::IoError, "write failed: " + z_path);

  std::ofstream cf(class_path);
  if (!cf) fail(ErrorKind::IoError, "cannot open for writing: " + class_path);
  write_asc_header(cf, grid);
  for (int r = grid.rows - 1; r >= 0; --r) {
    for (int c = 0; c < grid.cols; ++c) {
      if (c) cf << " ";
      cf << static_cast<int>(grid.cell_class[grid.cell_index(c, r)]);
    }
    cf << "\n";
  }
  if (!cf) fail(ErrorKind::IoError, "write failed: " + class_path);
}

AscRaster read_asc(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::MalformedFile, "cannot open: " + path);
  AscRaster r;
  auto header_value = [&](const char* key) {
    std::string k, v;
    if (!(f >> k >> v) || k != key)
      fail(ErrorKind::MalformedFile, path + ": expected header key '" +
                                         std::string(key) + "', got '" + k + "'");
    return parse_number(v, path, 0);
  };
  r.cols = static_cast<int>(header_value("ncols"));
  r.rows = static_cast<int>(header_value("nrows"));
  if (r.cols <= 0 || r.rows <= 0 || static_cast<long>(r.cols) * r.rows > (1l << 26))
    fail(ErrorKind::MalformedFile, path + ": unreasonable raster dimensions");
  r.x0 = header_value("xllcorner");
  r.y0 = header_value("yllcorner");
  r.cellsize = header_value("cellsize");
  r.nodata = header_value("NODATA_value");
  r.values.resize(static_cast<std::size_t>(r.cols) * r.rows);
  for (auto& v : r.values) {
    std::string tok;
    if (!(f >> tok)) fail(ErrorKind::MalformedFile, path + ": truncated raster data");
    v = parse_number(tok, path, 0);
  }
  return r;
}

void write_instances_csv(std::span<const DebrisInstance> instances,
                         const ClassTable& classes, const std::string& path) {
  std::ofstream f(path);
  if (!f) fail(ErrorKind::IoError, "cannot open for writing: " + path);
  f << "id,class,volume_m3,centroid_x,centroid_y,area_m2\n";
  for (const DebrisInstance& inst : instances) {
    const std::string& name = inst.class_index < static_cast<int>(classes.size())
                                  ? classes.names[inst.class_index]
                                  : std::to_string(inst.class_index);
    f << inst.id << "," << name << "," << format_double(inst.volume) << ","
      << format_double(inst.centroid_x) << "," << format_double(inst.centroid_y)
      << "," << format_double(inst.area) << "\n";
  }
  if (!f) fail(ErrorKind::IoError, "write failed: " + path);
}

}  // namespace debris

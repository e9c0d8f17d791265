#include "debris/synth.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "debris/config.hpp"
#include "debris/png_io.hpp"
#include "debris/scene_io.hpp"

namespace debris {

namespace fs = std::filesystem;

double Primitive::analytic_volume() const {
  switch (kind) {
    case ShapeKind::Box:
    case ShapeKind::Sheet:
      return size_x * size_y * size_z;
    case ShapeKind::Cylinder: {
      double r = size_x / 2.0;
      return std::numbers::pi * r * r * size_z;
    }
  }
  return 0;
}

void SceneSpec::validate() const {
  if (!(ground_half_extent > 0))
    fail(ErrorKind::InvalidSpec, "ground extent must be positive");
  if (!(density > 0)) fail(ErrorKind::InvalidSpec, "sampling density must be positive");
  if (jitter_sigma < 0) fail(ErrorKind::InvalidSpec, "jitter sigma must be >= 0");
  if (ring.count < 0) fail(ErrorKind::InvalidSpec, "camera count must be >= 0");
  if (ring.count > 0 || !ring.positions.empty()) {
    if (ring.image_width <= 0 || ring.image_height <= 0)
      fail(ErrorKind::InvalidSpec, "camera image dimensions must be positive");
    if (!(ring.focal > 0)) fail(ErrorKind::InvalidSpec, "focal length must be positive");
    if (ring.positions.empty() && !(ring.radius > 0))
      fail(ErrorKind::InvalidSpec, "ring radius must be positive");
  }
  std::size_t nclasses =
      class_table.size() > 0 ? class_table.size()
                             : PipelineConfig::defaults().class_table.size();
  for (const Primitive& prim : primitives) {
    if (!(prim.size_x > 0 && prim.size_y > 0 && prim.size_z > 0))
      fail(ErrorKind::InvalidSpec, "primitive dimensions must be positive");
    if (prim.class_index <= 0 ||
        prim.class_index >= static_cast<int>(nclasses))
      fail(ErrorKind::InvalidSpec, "primitive class index out of range");
  }
}

namespace {

/// Deterministic RNG independent of libstdc++ distribution internals.
struct Rng {
  std::mt19937_64 gen;
  bool have_spare = false;
  double spare = 0;

  explicit Rng(std::uint64_t seed) : gen(seed) {}

  double uniform() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

  double normal() {
    if (have_spare) {
      have_spare = false;
      return spare;
    }
    double u1 = 0, u2 = 0;
    do {
      u1 = uniform();
    } while (u1 <= 0);
    u2 = uniform();
    double mag = std::sqrt(-2.0 * std::log(u1));
    spare = mag * std::sin(2.0 * std::numbers::pi * u2);
    have_spare = true;
    return mag * std::cos(2.0 * std::numbers::pi * u2);
  }
};

struct Builder {
  const SceneSpec& spec;
  Rng rng;
  std::vector<CloudPoint> points;
  std::vector<std::uint8_t> true_class;

  Builder(const SceneSpec& s) : spec(s), rng(s.seed) {}

  void emit(Eigen::Vector3d p, int cls) {
    if (spec.jitter_sigma > 0) {
      p.x() += rng.normal() * spec.jitter_sigma;
      p.y() += rng.normal() * spec.jitter_sigma;
      p.z() += rng.normal() * spec.jitter_sigma;
    }
    CloudPoint pt;
    pt.x = static_cast<float>(p.x());
    pt.y = static_cast<float>(p.y());
    pt.z = static_cast<float>(p.z());
    Rgba c = class_color(cls);
    pt.r = c.r;
    pt.g = c.g;
    pt.b = c.b;
    points.push_back(pt);
    true_class.push_back(static_cast<std::uint8_t>(cls));
  }

  /// Stratified jittered samples over a planar rectangle patch:
  /// p = origin + s*eu + t*ev, (s,t) in [0,su]x[0,sv].
  void sample_rect(const Eigen::Vector3d& origin, const Eigen::Vector3d& eu,
                   const Eigen::Vector3d& ev, double su, double sv, int cls) {
    double area = su * sv;
    double target = area * spec.density;
    if (target < 1) target = 1;
    int ku = std::max(1, static_cast<int>(std::lround(std::sqrt(target * su / sv))));
    int kv = std::max(1, static_cast<int>(std::lround(target / ku)));
    for (int i = 0; i < ku; ++i) {
      for (int j = 0; j < kv; ++j) {
        double s = (i + rng.uniform()) / ku * su;
        double t = (j + rng.uniform()) / kv * sv;
        emit(origin + s * eu + t * ev, cls);
      }
    }
  }

  void sample_disk(const Eigen::Vector3d& center, double radius, double z, int cls) {
    double target = std::numbers::pi * radius * radius * spec.density;
    if (target < 1) target = 1;
    int k = std::max(1, static_cast<int>(std::lround(std::sqrt(target))));
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        double u = (i + rng.uniform()) / k;
        double v = (j + rng.uniform()) / k;
        double r = radius * std::sqrt(u);
        double theta = 2.0 * std::numbers::pi * v;
        emit({center.x() + r * std::cos(theta), center.y() + r * std::sin(theta), z},
             cls);
      }
    }
  }

  void sample_box(const Primitive& prim) {
    double hx = prim.size_x / 2, hy = prim.size_y / 2, h = prim.size_z;
    Eigen::Vector3d ex = Eigen::Vector3d::UnitX();
    Eigen::Vector3d ey = Eigen::Vector3d::UnitY();
    Eigen::Vector3d ez = Eigen::Vector3d::UnitZ();
    Eigen::Vector3d c{prim.cx, prim.cy, 0};
    int cls = prim.class_index;
    // top face and four sides; the bottom rests on the ground
    sample_rect(c + Eigen::Vector3d{-hx, -hy, h}, ex, ey, prim.size_x, prim.size_y, cls);
    sample_rect(c + Eigen::Vector3d{-hx, -hy, 0}, ex, ez, prim.size_x, h, cls);
    sample_rect(c + Eigen::Vector3d{-hx, hy, 0}, ex, ez, prim.size_x, h, cls);
    sample_rect(c + Eigen::Vector3d{-hx, -hy, 0}, ey, ez, prim.size_y, h, cls);
    sample_rect(c + Eigen::Vector3d{hx, -hy, 0}, ey, ez, prim.size_y, h, cls);
  }

  void sample_cylinder(const Primitive& prim) {
    double r = prim.size_x / 2, h = prim.size_z;
    int cls = prim.class_index;
    sample_disk({prim.cx, prim.cy, 0}, r, h, cls);
    // lateral surface, stratified over (angle, height)
    double target = 2.0 * std::numbers::pi * r * h * spec.density;
    if (target < 1) target = 1;
    int ka = std::max(1, static_cast<int>(
                             std::lround(std::sqrt(target * 2 * std::numbers::pi * r / h))));
    int kh = std::max(1, static_cast<int>(std::lround(target / ka)));
    for (int i = 0; i < ka; ++i) {
      for (int j = 0; j < kh; ++j) {
        double theta = (i + rng.uniform()) / ka * 2.0 * std::numbers::pi;
        double z = (j + rng.uniform()) / kh * h;
        emit({prim.cx + r * std::cos(theta), prim.cy + r * std::sin(theta), z}, cls);
      }
    }
  }
};

// --- exact rasterizer (independent of the projection module) -----------------

struct Ray {
  Eigen::Vector3d origin;
  Eigen::Vector3d dir;
};

bool hit_box(const Ray& ray, double x0, double x1, double y0, double y1, double z0,
             double z1, double& t_hit) {
  double tmin = 0.0, tmax = std::numeric_limits<double>::infinity();
  const double lo[3] = {x0, y0, z0}, hi[3] = {x1, y1, z1};
  for (int k = 0; k < 3; ++k) {
    double o = ray.origin[k], d = ray.dir[k];
    if (std::abs(d) < 1e-15) {
      if (o < lo[k] || o > hi[k]) return false;
      continue;
    }
    double t0 = (lo[k] - o) / d, t1 = (hi[k] - o) / d;
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return false;
  }
  if (tmin <= 1e-9) return false;  // origin inside or behind
  t_hit = tmin;
  return true;
}

bool hit_cylinder(const Ray& ray, double cx, double cy, double r, double h,
                  double& t_hit) {
  double best = std::numeric_limits<double>::infinity();
  double ox = ray.origin.x() - cx, oy = ray.origin.y() - cy;
  double dx = ray.dir.x(), dy = ray.dir.y();
  double a = dx * dx + dy * dy;
  if (a > 1e-15) {
    double b = 2.0 * (ox * dx + oy * dy);
    double c = ox * ox + oy * oy - r * r;
    double disc = b * b - 4 * a * c;
    if (disc >= 0) {
      double sq = std::sqrt(disc);
      for (double t : {(-b - sq) / (2 * a), (-b + sq) / (2 * a)}) {
        if (t <= 1e-9) continue;
        double z = ray.origin.z() + t * ray.dir.z();
        if (z >= 0 && z <= h) best = std::min(best, t);
      }
    }
  }
  if (std::abs(ray.dir.z()) > 1e-15) {
    double t = (h - ray.origin.z()) / ray.dir.z();  // top cap
    if (t > 1e-9) {
      double x = ox + t * dx, y = oy + t * dy;
      if (x * x + y * y <= r * r) best = std::min(best, t);
    }
  }
  if (!std::isfinite(best)) return false;
  t_hit = best;
  return true;
}

LabelMask render_mask(const CameraPose& cam, const SceneSpec& spec) {
  LabelMask mask(cam.width, cam.height, kBackgroundClass);
  Eigen::Matrix3d Rt = cam.R.transpose();
  Eigen::Vector3d center = -(Rt * cam.T);
  for (int py = 0; py < cam.height; ++py) {
    for (int px = 0; px < cam.width; ++px) {
      Eigen::Vector3d dir_cam{(px - cam.cx) / cam.fx, (py - cam.cy) / cam.fy, 1.0};
      Ray ray{center, Rt * dir_cam};
      double best = std::numeric_limits<double>::infinity();
      int cls = kBackgroundClass;
      for (const Primitive& prim : spec.primitives) {
        double t;
        bool hit = false;
        if (prim.kind == ShapeKind::Cylinder) {
          hit = hit_cylinder(ray, prim.cx, prim.cy, prim.size_x / 2, prim.size_z, t);
        } else {
          hit = hit_box(ray, prim.cx - prim.size_x / 2, prim.cx + prim.size_x / 2,
                        prim.cy - prim.size_y / 2, prim.cy + prim.size_y / 2, 0.0,
                        prim.size_z, t);
        }
        if (hit && t < best) {
          best = t;
          cls = prim.class_index;
        }
      }
      mask.at(px, py) = static_cast<std::uint8_t>(cls);
    }
  }
  return mask;
}

CameraPose make_camera(int index, const CameraRing& ring) {
  Eigen::Vector3d pos;
  if (!ring.positions.empty()) {
    pos = ring.positions[static_cast<std::size_t>(index)];
  } else {
    double theta = 2.0 * std::numbers::pi * index / ring.count;
    pos = {ring.look_at.x() + ring.radius * std::cos(theta),
           ring.look_at.y() + ring.radius * std::sin(theta), ring.height};
  }
  Eigen::Vector3d z_cam = (ring.look_at - pos).normalized();
  Eigen::Vector3d up = Eigen::Vector3d::UnitZ();
  if (std::abs(z_cam.dot(up)) > 0.999) up = Eigen::Vector3d::UnitY();
  Eigen::Vector3d x_cam = z_cam.cross(up).normalized();
  Eigen::Vector3d y_cam = z_cam.cross(x_cam);

  CameraPose cam;
  cam.camera_id = "cam" + std::to_string(index);
  cam.width = ring.image_width;
  cam.height = ring.image_height;
  cam.fx = cam.fy = ring.focal;
  cam.cx = ring.image_width / 2.0;
  cam.cy = ring.image_height / 2.0;
  cam.R.row(0) = x_cam;
  cam.R.row(1) = y_cam;
  cam.R.row(2) = z_cam;
  cam.T = -(cam.R * pos);
  cam.mask_path = cam.camera_id + ".png";
  return cam;
}

}  // namespace

SynthResult generate(const SceneSpec& spec) {
  spec.validate();

  SynthResult result;
  result.scene.class_table = spec.class_table.size() > 0
                                 ? spec.class_table
                                 : PipelineConfig::defaults().class_table;

  Builder builder(spec);
  double e = spec.ground_half_extent;
  builder.sample_rect({-e, -e, 0}, Eigen::Vector3d::UnitX(), Eigen::Vector3d::UnitY(),
                      2 * e, 2 * e, kBackgroundClass);
  for (const Primitive& prim : spec.primitives) {
    if (prim.kind == ShapeKind::Cylinder)
      builder.sample_cylinder(prim);
    else
      builder.sample_box(prim);
    result.primitive_volumes.push_back(prim.analytic_volume());
  }
  result.scene.cloud = std::move(builder.points);
  result.scene.cloud_has_color = true;
  result.true_class = std::move(builder.true_class);

  int ncams = spec.ring.positions.empty()
                  ? spec.ring.count
                  : static_cast<int>(spec.ring.positions.size());
  for (int i = 0; i < ncams; ++i) {
    CameraPose cam = make_camera(i, spec.ring);
    result.masks.push_back(render_mask(cam, spec));
    result.scene.cameras.push_back(std::move(cam));
  }
  return result;
}

void write_fixture(const SynthResult& result, const SceneSpec& spec,
                   const std::string& dir) {
  fs::create_directories(fs::path(dir) / "masks");
  write_cameras(result.scene.cameras, (fs::path(dir) / "cameras.txt").string());
  write_ply(result.scene.cloud, result.scene.cloud_has_color,
            (fs::path(dir) / "cloud.ply").string());
  for (std::size_t i = 0; i < result.masks.size(); ++i)
    write_png_gray8(result.masks[i], (fs::path(dir) / "masks" /
                                      result.scene.cameras[i].mask_path)
                                         .string());

  PipelineConfig cfg = PipelineConfig::defaults();
  cfg.class_table = result.scene.class_table;
  cfg.cameras = "cameras.txt";
  cfg.cloud = "cloud.ply";
  cfg.masks = "masks";
  cfg.outdir = "out";
  write_config(cfg, (fs::path(dir) / "config.toml").string());

  std::ofstream f((fs::path(dir) / "scene_spec.toml").string());
  if (!f) fail(ErrorKind::IoError, "cannot open for writing: scene_spec.toml");
  f << "seed = " << spec.seed << "\n";
  f << "ground_half_extent = " << format_double(spec.ground_half_extent) << "\n";
  f << "density = " << format_double(spec.density) << "\n";
  f << "jitter_sigma = " << format_double(spec.jitter_sigma) << "\n";
  f << "cameras = " << spec.ring.count << "\n";
  for (std::size_t i = 0; i < spec.primitives.size(); ++i) {
    const Primitive& p = spec.primitives[i];
    const char* kind = p.kind == ShapeKind::Box ? "box"
                       : p.kind == ShapeKind::Cylinder ? "cylinder"
                                                       : "sheet";
    f << "primitive." << i << " = \"" << kind << " class=" << p.class_index
      << " center=(" << format_double(p.cx) << "," << format_double(p.cy)
      << ") size=(" << format_double(p.size_x) << "," << format_double(p.size_y)
      << "," << format_double(p.size_z)
      << ") volume=" << format_double(p.analytic_volume()) << "\"\n";
  }
  if (!f) fail(ErrorKind::IoError, "write failed: scene_spec.toml");
}

}  // namespace debris

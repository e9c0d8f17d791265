#include "debris/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "debris/scene_io.hpp"

namespace debris {

namespace fs = std::filesystem;

PipelineConfig PipelineConfig::defaults() {
  PipelineConfig cfg;
  cfg.class_table.names = {"background",    "metal_girder", "portable_toilet",
                           "pvc_piping",    "plywood",      "metal_piping"};
  // editable engineering defaults, kg/m^3 (effective density for the toilet)
  cfg.materials.density = {{1, 7850.0}, {2, 150.0}, {3, 1400.0},
                           {4, 600.0},  {5, 7850.0}};
  return cfg;
}

void PipelineConfig::validate() const {
  if (depth_downsample < 1)
    fail(ErrorKind::InvalidConfig, "depth_downsample must be >= 1");
  if (depth_tolerance && !(*depth_tolerance > 0))
    fail(ErrorKind::InvalidConfig, "depth_tolerance must be positive");
  if (!(gs > 0)) fail(ErrorKind::InvalidConfig, "gs must be positive");
  if (min_cells < 1) fail(ErrorKind::InvalidConfig, "min_cells must be >= 1");
  if (!(inlier_threshold > 0))
    fail(ErrorKind::InvalidConfig, "inlier_threshold must be positive");
  if (ransac_iters < 1) fail(ErrorKind::InvalidConfig, "ransac_iters must be >= 1");
  if (heatmap_pixels_per_cell < 1)
    fail(ErrorKind::InvalidConfig, "heatmap_pixels_per_cell must be >= 1");
  if (threads < 1) fail(ErrorKind::InvalidConfig, "threads must be >= 1");
  if (class_table.size() == 0 || class_table.names[0] != "background")
    fail(ErrorKind::InvalidConfig, "class table must start with 'background'");
  if (class_table.size() > 256)
    fail(ErrorKind::InvalidConfig, "at most 256 classes supported");
  std::set<std::string> unique(class_table.names.begin(), class_table.names.end());
  if (unique.size() != class_table.size())
    fail(ErrorKind::InvalidConfig, "class names must be unique");
  for (const auto& [cls, rho] : materials.density) {
    if (cls == kBackgroundClass)
      fail(ErrorKind::InvalidConfig, "background class must not have a density");
    if (!(rho > 0)) fail(ErrorKind::InvalidConfig, "densities must be positive");
  }
  wind.validate();
}

namespace {

struct RawValue {
  std::string text;
  std::vector<std::string> array;
  bool is_array = false;
  bool is_string = false;
  std::size_t line = 0;
};

std::string strip(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// cut a trailing comment, honoring double quotes
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

RawValue parse_value(const std::string& text, const std::string& origin,
                     std::size_t line) {
  RawValue v;
  v.line = line;
  std::string t = strip(text);
  if (t.empty()) fail_at(ErrorKind::InvalidConfig, origin, line, "missing value");
  if (t.front() == '"') {
    if (t.size() < 2 || t.back() != '"')
      fail_at(ErrorKind::InvalidConfig, origin, line, "unterminated string");
    v.is_string = true;
    v.text = t.substr(1, t.size() - 2);
    return v;
  }
  if (t.front() == '[') {
    if (t.back() != ']')
      fail_at(ErrorKind::InvalidConfig, origin, line, "unterminated array");
    v.is_array = true;
    std::string body = t.substr(1, t.size() - 2);
    std::size_t pos = 0;
    while (pos < body.size()) {
      std::size_t comma = body.find(',', pos);
      std::string item = strip(body.substr(pos, comma - pos));
      if (!item.empty()) {
        if (item.size() >= 2 && item.front() == '"' && item.back() == '"')
          item = item.substr(1, item.size() - 2);
        v.array.push_back(item);
      }
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    return v;
  }
  v.text = t;
  return v;
}

double as_number(const RawValue& v, const std::string& origin) {
  if (v.is_array || v.is_string)
    fail_at(ErrorKind::InvalidConfig, origin, v.line, "expected a number");
  double out = 0;
  auto [ptr, ec] = std::from_chars(v.text.data(), v.text.data() + v.text.size(), out);
  if (ec != std::errc{} || ptr != v.text.data() + v.text.size() ||
      !std::isfinite(out))
    fail_at(ErrorKind::InvalidConfig, origin, v.line,
            "bad number '" + v.text + "'");
  return out;
}

int as_int(const RawValue& v, const std::string& origin) {
  double d = as_number(v, origin);
  if (d != std::floor(d) || std::abs(d) > 1e9)
    fail_at(ErrorKind::InvalidConfig, origin, v.line,
            "expected an integer, got '" + v.text + "'");
  return static_cast<int>(d);
}

std::string as_string(const RawValue& v, const std::string& origin) {
  if (v.is_array)
    fail_at(ErrorKind::InvalidConfig, origin, v.line, "expected a string");
  return v.text;
}

}  // namespace

PipelineConfig PipelineConfig::parse(std::istream& in, const std::string& origin) {
  std::map<std::string, RawValue> raw;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = strip(strip_comment(line));
    if (t.empty()) continue;
    std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      fail_at(ErrorKind::InvalidConfig, origin, lineno, "expected 'key = value'");
    std::string key = strip(t.substr(0, eq));
    if (key.empty())
      fail_at(ErrorKind::InvalidConfig, origin, lineno, "empty key");
    if (raw.count(key))
      fail_at(ErrorKind::InvalidConfig, origin, lineno, "duplicate key '" + key + "'");
    raw.emplace(key, parse_value(t.substr(eq + 1), origin, lineno));
  }

  PipelineConfig cfg = defaults();
  auto take = [&](const char* key) -> const RawValue* {
    auto it = raw.find(key);
    if (it == raw.end()) return nullptr;
    return &it->second;
  };
  std::set<std::string> consumed;
  auto consume = [&](const char* key) -> const RawValue* {
    const RawValue* v = take(key);
    if (v) consumed.insert(key);
    return v;
  };

  if (const auto* v = consume("classes")) {
    if (!v->is_array)
      fail_at(ErrorKind::InvalidConfig, origin, v->line, "classes must be an array");
    cfg.class_table.names = v->array;
    cfg.materials.density.clear();  // defaults keyed to default classes
  }
  if (const auto* v = consume("cameras")) cfg.cameras = as_string(*v, origin);
  if (const auto* v = consume("cloud")) cfg.cloud = as_string(*v, origin);
  if (const auto* v = consume("masks")) cfg.masks = as_string(*v, origin);
  if (const auto* v = consume("outdir")) cfg.outdir = as_string(*v, origin);
  if (const auto* v = consume("units")) cfg.units = as_string(*v, origin);
  if (const auto* v = consume("depth_downsample"))
    cfg.depth_downsample = as_int(*v, origin);
  if (const auto* v = consume("depth_tolerance"))
    cfg.depth_tolerance = as_number(*v, origin);
  if (const auto* v = consume("gs")) cfg.gs = as_number(*v, origin);
  if (const auto* v = consume("min_cells")) cfg.min_cells = as_int(*v, origin);
  if (const auto* v = consume("inlier_threshold"))
    cfg.inlier_threshold = as_number(*v, origin);
  if (const auto* v = consume("ransac_iters")) cfg.ransac_iters = as_int(*v, origin);
  if (const auto* v = consume("risk_threshold"))
    cfg.risk_threshold = as_number(*v, origin);
  if (const auto* v = consume("heatmap_pixels_per_cell"))
    cfg.heatmap_pixels_per_cell = as_int(*v, origin);

  bool custom_wind = false;
  for (const auto& [key, value] : raw) {
    if (consumed.count(key)) continue;
    if (key.rfind("density.", 0) == 0) {
      std::string cls_name = key.substr(8);
      int idx = cfg.class_table.index_of(cls_name);
      if (idx < 0)
        fail_at(ErrorKind::InvalidConfig, origin, value.line,
                "density for unknown class '" + cls_name + "'");
      cfg.materials.density[idx] = as_number(value, origin);
    } else if (key.rfind("wind.", 0) == 0) {
      if (!custom_wind) {
        cfg.wind.categories.clear();
        custom_wind = true;
      }
      RawValue cat_raw;
      cat_raw.text = key.substr(5);
      cat_raw.line = value.line;
      int cat = as_int(cat_raw, origin);
      cfg.wind.categories.emplace_back(cat, as_number(value, origin));
    } else {
      fail_at(ErrorKind::InvalidConfig, origin, value.line,
              "unknown key '" + key + "'");
    }
  }
  if (custom_wind) {
    std::sort(cfg.wind.categories.begin(), cfg.wind.categories.end());
  }

  cfg.validate();
  return cfg;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::MalformedFile, "cannot open: " + path);
  PipelineConfig cfg = parse(f, path);
  fs::path base = fs::path(path).parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && fs::path(p).is_relative()) p = (base / p).string();
  };
  resolve(cfg.cameras);
  resolve(cfg.cloud);
  resolve(cfg.masks);
  resolve(cfg.outdir);
  return cfg;
}

void write_config(const PipelineConfig& cfg, const std::string& path) {
  std::ofstream f(path);
  if (!f) fail(ErrorKind::IoError, "cannot open for writing: " + path);
  f << "cameras = \"" << cfg.cameras << "\"\n";
  f << "cloud = \"" << cfg.cloud << "\"\n";
  f << "masks = \"" << cfg.masks << "\"\n";
  f << "outdir = \"" << cfg.outdir << "\"\n";
  f << "depth_downsample = " << cfg.depth_downsample << "\n";
  if (cfg.depth_tolerance)
    f << "depth_tolerance = " << format_double(*cfg.depth_tolerance) << "\n";
  f << "gs = " << format_double(cfg.gs) << "\n";
  f << "min_cells = " << cfg.min_cells << "\n";
  f << "inlier_threshold = " << format_double(cfg.inlier_threshold) << "\n";
  f << "ransac_iters = " << cfg.ransac_iters << "\n";
  if (cfg.risk_threshold)
    f << "risk_threshold = " << format_double(*cfg.risk_threshold) << "\n";
  f << "heatmap_pixels_per_cell = " << cfg.heatmap_pixels_per_cell << "\n";
  f << "units = \"" << cfg.units << "\"\n";
  f << "classes = [";
  for (std::size_t i = 0; i < cfg.class_table.size(); ++i) {
    if (i) f << ", ";
    f << "\"" << cfg.class_table.names[i] << "\"";
  }
  f << "]\n";
  for (const auto& [cls, rho] : cfg.materials.density) {
    if (cls < 0 || cls >= static_cast<int>(cfg.class_table.size())) continue;
    f << "density." << cfg.class_table.names[cls] << " = " << format_double(rho)
      << "\n";
  }
  for (const auto& [cat, speed] : cfg.wind.categories)
    f << "wind." << cat << " = " << format_double(speed) << "\n";
  if (!f) fail(ErrorKind::IoError, "write failed: " + path);
}

}  // namespace debris

#include "debris/pipeline.hpp"

#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "debris/risk.hpp"
#include "debris/scene_io.hpp"

namespace debris {

namespace fs = std::filesystem;

void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  std::size_t workers = std::min<std::size_t>(std::max(threads, 1), n);
  if (workers <= 1) {
    fn(0, n);
    return;
  }
  std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr error;
  std::mutex error_mutex;
  for (std::size_t w = 0; w < workers; ++w) {
    std::size_t begin = std::min(w * chunk, n);
    std::size_t end = std::min(begin + chunk, n);
    pool.emplace_back([&, begin, end]() {
      try {
        fn(begin, end);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_seconds(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

fs::path depth_dir(const PipelineConfig& cfg) {
  return fs::path(cfg.outdir) / "depth";
}

double resolve_eps(const PipelineConfig& cfg, const Scene& scene) {
  if (cfg.depth_tolerance) return *cfg.depth_tolerance;
  double spacing = estimate_point_spacing(scene.cloud);
  return spacing > 0 ? 3.0 * spacing : 0.05;
}

}  // namespace

StageTiming run_depth(const PipelineConfig& cfg) {
  auto start = Clock::now();
  LoadedScene ls = parse_scene(cfg.cameras, cfg.cloud, cfg.masks,
                               cfg.class_table);
  fs::create_directories(depth_dir(cfg));
  const auto& cams = ls.scene.cameras;
  parallel_for(cams.size(), cfg.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      DepthMap dmap =
          build_depth_map(ls.scene.cloud, cams[i], cfg.depth_downsample);
      write_depth_map(dmap, (depth_dir(cfg) / (cams[i].camera_id + ".dmap")).string());
      write_depth_png(dmap, (depth_dir(cfg) / (cams[i].camera_id + ".png")).string());
    }
  });
  return {"depth", elapsed_seconds(start)};
}

StageTiming run_fuse(const PipelineConfig& cfg) {
  auto start = Clock::now();
  LoadedScene ls = parse_scene(cfg.cameras, cfg.cloud, cfg.masks, cfg.class_table);
  const auto& cams = ls.scene.cameras;

  std::vector<DepthMap> dmaps(cams.size());
  parallel_for(cams.size(), cfg.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      fs::path dpath = depth_dir(cfg) / (cams[i].camera_id + ".dmap");
      if (fs::exists(dpath)) {
        dmaps[i] = read_depth_map(dpath.string());
        dmaps[i].camera_id = cams[i].camera_id;
      } else {
        dmaps[i] = build_depth_map(ls.scene.cloud, cams[i], cfg.depth_downsample);
      }
    }
  });

  ProjectOptions opts;
  opts.eps = resolve_eps(cfg, ls.scene);
  opts.depth_aware = true;
  opts.threads = cfg.threads;
  SemanticCloud fused = project_labels(ls.scene, ls.masks, dmaps, opts);

  fs::create_directories(cfg.outdir);
  write_labeled_cloud(fused, (fs::path(cfg.outdir) / "fused.ply").string());

  std::vector<std::size_t> counts(ls.scene.class_table.size(), 0);
  for (std::uint8_t c : fused.fused_class) ++counts[c];
  std::ofstream csv((fs::path(cfg.outdir) / "class_counts.csv").string());
  if (!csv) fail(ErrorKind::IoError, "cannot write class_counts.csv");
  csv << "class,points\n";
  for (std::size_t c = 0; c < counts.size(); ++c)
    csv << ls.scene.class_table.names[c] << "," << counts[c] << "\n";

  return {"fuse", elapsed_seconds(start)};
}

StageTiming run_risk(const PipelineConfig& cfg) {
  auto start = Clock::now();
  SemanticCloud cloud =
      read_labeled_cloud((fs::path(cfg.outdir) / "fused.ply").string());
  if (cloud.points.empty())
    fail(ErrorKind::DegenerateGeometry, "fused cloud is empty");

  RansacOptions ransac;
  ransac.inlier_threshold = cfg.inlier_threshold;
  ransac.max_iters = cfg.ransac_iters;
  GroundPlane plane = register_ground(cloud, ransac);
  HeightGrid grid = resample(cloud, plane, cfg.gs, cfg.threads);
  std::vector<DebrisInstance> instances = cluster_instances(grid, cfg.min_cells);

  fs::path out(cfg.outdir);
  write_height_grid(grid, (out / "height.asc").string(),
                    (out / "height_class.asc").string());
  write_instances_csv(instances, cfg.class_table, (out / "instances.csv").string());

  std::vector<RiskMap> maps =
      build_risk_maps(grid, instances, cfg.materials, cfg.wind, cfg.class_table);
  HeatmapStyle style = heatmap_style(maps, cfg.heatmap_pixels_per_cell);
  for (const RiskMap& map : maps) {
    std::string suffix = "cat" + std::to_string(map.category);
    render_heatmap(map, style, cfg.risk_threshold, cfg.class_table,
                   (out / ("risk_" + suffix + ".png")).string(),
                   (out / ("flagged_" + suffix + ".csv")).string());
  }

  nlohmann::ordered_json summary;
  summary["units"] = cfg.units;
  if (cfg.units != "m")
    summary["units_warning"] =
        "world units are not meters; volumes and energies are in arbitrary units";
  summary["ground_plane"] = {{"normal", {plane.n.x(), plane.n.y(), plane.n.z()}},
                             {"offset", plane.d},
                             {"inlier_fraction", plane.inlier_fraction}};
  summary["grid"] = {{"cols", grid.cols},   {"rows", grid.rows}, {"cell_size", grid.gs},
                     {"origin_x", grid.x0}, {"origin_y", grid.y0}};
  summary["site_volume_m3"] = compute_total_volume(grid);
  summary["wind_categories"] = nlohmann::ordered_json::array();
  for (const RiskMap& map : maps)
    summary["wind_categories"].push_back(
        {{"category", map.category}, {"wind_speed_mps", map.wind_speed}});
  summary["instances"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const DebrisInstance& inst = instances[i];
    nlohmann::ordered_json j;
    j["id"] = inst.id;
    j["class"] = inst.class_index < static_cast<int>(cfg.class_table.size())
                     ? cfg.class_table.names[inst.class_index]
                     : std::to_string(inst.class_index);
    j["volume_m3"] = inst.volume;
    j["centroid"] = {inst.centroid_x, inst.centroid_y};
    j["area_m2"] = inst.area;
    nlohmann::ordered_json ke;
    for (const RiskMap& map : maps)
      ke["cat" + std::to_string(map.category)] = map.instance_ke[i];
    j["ke_joules"] = ke;
    summary["instances"].push_back(j);
  }
  std::ofstream jf((out / "summary.json").string());
  if (!jf) fail(ErrorKind::IoError, "cannot write summary.json");
  jf << summary.dump(2) << "\n";

  return {"risk", elapsed_seconds(start)};
}

std::vector<StageTiming> run_all(const PipelineConfig& cfg) {
  std::vector<StageTiming> timings;
  timings.push_back(run_depth(cfg));
  timings.push_back(run_fuse(cfg));
  timings.push_back(run_risk(cfg));
  return timings;
}

}  // namespace debris

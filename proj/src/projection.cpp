#include "debris/projection.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "debris/pipeline.hpp"

namespace debris {

std::optional<PixelCoord> project_point(const Eigen::Vector3d& p,
                                        const CameraPose& cam) {
  Eigen::Vector3d x = cam.R * p + cam.T;
  if (x.z() <= 0.0) return std::nullopt;
  PixelCoord pc;
  pc.u = cam.fx * x.x() / x.z() + cam.cx;
  pc.v = cam.fy * x.y() / x.z() + cam.cy;
  pc.depth = x.z();
  return pc;
}

DepthMap build_depth_map(std::span<const CloudPoint> cloud, const CameraPose& cam,
                         int downsample, int threads) {
  if (downsample < 1) fail(ErrorKind::DomainError, "downsample factor must be >= 1");
  DepthMap dmap;
  dmap.camera_id = cam.camera_id;
  dmap.downsample = downsample;
  dmap.grid_w = (cam.width + downsample - 1) / downsample;
  dmap.grid_h = (cam.height + downsample - 1) / downsample;
  dmap.values.assign(static_cast<std::size_t>(dmap.grid_w) * dmap.grid_h,
                     DepthMap::kEmpty);

  // local row-major copies of the pose keep the inner loop tight
  const double r00 = cam.R(0, 0), r01 = cam.R(0, 1), r02 = cam.R(0, 2);
  const double r10 = cam.R(1, 0), r11 = cam.R(1, 1), r12 = cam.R(1, 2);
  const double r20 = cam.R(2, 0), r21 = cam.R(2, 1), r22 = cam.R(2, 2);
  const double tx = cam.T.x(), ty = cam.T.y(), tz = cam.T.z();

  auto scan = [&](std::size_t begin, std::size_t end, std::vector<float>& grid) {
    for (std::size_t i = begin; i < end; ++i) {
      const CloudPoint& pt = cloud[i];
      double z = r20 * pt.x + r21 * pt.y + r22 * pt.z + tz;
      if (z <= 0.0) continue;
      double u = cam.fx * (r00 * pt.x + r01 * pt.y + r02 * pt.z + tx) / z + cam.cx;
      if (u < 0.0 || u >= cam.width) continue;
      double v = cam.fy * (r10 * pt.x + r11 * pt.y + r12 * pt.z + ty) / z + cam.cy;
      if (v < 0.0 || v >= cam.height) continue;
      std::size_t idx = (static_cast<std::size_t>(v) / downsample) * dmap.grid_w +
                        static_cast<std::size_t>(u) / downsample;
      float fz = static_cast<float>(z);
      if (fz < grid[idx]) grid[idx] = fz;
    }
  };

  if (threads <= 1) {
    scan(0, cloud.size(), dmap.values);
  } else {
    std::vector<std::vector<float>> partials(
        threads, std::vector<float>(dmap.values.size(), DepthMap::kEmpty));
    std::size_t chunk = (cloud.size() + threads - 1) / threads;
    parallel_for(static_cast<std::size_t>(threads), threads,
                 [&](std::size_t tb, std::size_t te) {
                   for (std::size_t t = tb; t < te; ++t) {
                     std::size_t b = std::min(t * chunk, cloud.size());
                     std::size_t e = std::min(b + chunk, cloud.size());
                     scan(b, e, partials[t]);
                   }
                 });
    for (const auto& part : partials)
      for (std::size_t i = 0; i < dmap.values.size(); ++i)
        dmap.values[i] = std::min(dmap.values[i], part[i]);
  }
  return dmap;
}

bool is_visible(const Eigen::Vector3d& p, const CameraPose& cam,
                const DepthMap& dmap, double eps) {
  auto pc = project_point(p, cam);
  if (!pc) return false;
  if (pc->u < 0.0 || pc->u >= cam.width || pc->v < 0.0 || pc->v >= cam.height)
    return false;
  float patch = dmap.at_patch(dmap.patch_x(pc->u), dmap.patch_y(pc->v));
  return pc->depth <= static_cast<double>(patch) + eps;
}

void fuse_votes(SemanticCloud& cloud) {
  const int nc = cloud.num_classes;
  cloud.fused_class.assign(cloud.size(), kBackgroundClass);
  cloud.support.assign(cloud.size(), 0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const std::uint32_t* row = &cloud.votes[i * nc];
    std::uint32_t total = 0;
    int best = kBackgroundClass;
    std::uint32_t best_count = 0;
    for (int c = 0; c < nc; ++c) {
      total += row[c];
      if (c == kBackgroundClass) continue;
      if (row[c] > best_count) {
        best_count = row[c];
        best = c;
      }
    }
    cloud.support[i] = total;
    cloud.fused_class[i] =
        best_count > 0 ? static_cast<std::uint8_t>(best)
                       : static_cast<std::uint8_t>(kBackgroundClass);
  }
}

SemanticCloud project_labels(const Scene& scene, std::span<const LabelMask> masks,
                             std::span<const DepthMap> dmaps,
                             const ProjectOptions& opts) {
  if (masks.size() != scene.cameras.size() || dmaps.size() != scene.cameras.size())
    fail(ErrorKind::DomainError, "need one mask and one depth map per camera");

  SemanticCloud out;
  out.points = scene.cloud;
  out.num_classes = std::max<int>(1, static_cast<int>(scene.class_table.size()));
  out.votes.assign(out.size() * out.num_classes, 0);

  const int nc = out.num_classes;
  for (std::size_t ci = 0; ci < scene.cameras.size(); ++ci) {
    const CameraPose& cam = scene.cameras[ci];
    const LabelMask& mask = masks[ci];
    const DepthMap& dmap = dmaps[ci];
    // each point owns its vote row, so the per-point pass is race-free
    parallel_for(out.size(), opts.threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        Eigen::Vector3d p = out.points[i].position();
        auto pc = project_point(p, cam);
        if (!pc) continue;
        if (pc->u < 0.0 || pc->u >= cam.width || pc->v < 0.0 || pc->v >= cam.height)
          continue;
        if (opts.depth_aware) {
          float patch = dmap.at_patch(dmap.patch_x(pc->u), dmap.patch_y(pc->v));
          if (pc->depth > static_cast<double>(patch) + opts.eps) continue;
        }
        int px = std::clamp(static_cast<int>(std::lround(pc->u)), 0, cam.width - 1);
        int py = std::clamp(static_cast<int>(std::lround(pc->v)), 0, cam.height - 1);
        int cls = mask.at(px, py);
        if (cls < nc) ++out.votes[i * nc + cls];
      }
    });
  }
  fuse_votes(out);
  return out;
}

namespace {

std::uint64_t cell_key(int ix, int iy, int iz) {
  auto q = [](int v) {
    return static_cast<std::uint64_t>(static_cast<std::uint32_t>(v) & 0x1fffff);
  };
  return q(ix) | (q(iy) << 21) | (q(iz) << 42);
}

}  // namespace

double estimate_point_spacing(std::span<const CloudPoint> cloud,
                              std::size_t max_sample) {
  if (cloud.size() < 2) return 0.0;

  std::vector<Eigen::Vector3d> sample;
  std::size_t stride = std::max<std::size_t>(1, cloud.size() / max_sample);
  for (std::size_t i = 0; i < cloud.size(); i += stride)
    sample.push_back(cloud[i].position());
  const std::size_t m = sample.size();
  if (m < 2) return 0.0;

  Eigen::Vector3d lo = sample[0], hi = sample[0];
  for (const auto& p : sample) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  Eigen::Vector3d ext = hi - lo;
  // characteristic spacing from the non-degenerate extents
  double measure = 1.0;
  int dims = 0;
  for (int k = 0; k < 3; ++k) {
    if (ext[k] > 1e-12) {
      measure *= ext[k];
      ++dims;
    }
  }
  double cell = dims > 0 ? std::pow(measure / static_cast<double>(m), 1.0 / dims) * 2.0
                         : 1.0;
  if (!(cell > 0) || !std::isfinite(cell)) cell = 1.0;

  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> grid;
  grid.reserve(m * 2);
  auto cell_of = [&](const Eigen::Vector3d& p, int& ix, int& iy, int& iz) {
    ix = static_cast<int>(std::floor((p.x() - lo.x()) / cell));
    iy = static_cast<int>(std::floor((p.y() - lo.y()) / cell));
    iz = static_cast<int>(std::floor((p.z() - lo.z()) / cell));
  };
  for (std::uint32_t i = 0; i < m; ++i) {
    int ix, iy, iz;
    cell_of(sample[i], ix, iy, iz);
    grid[cell_key(ix, iy, iz)].push_back(i);
  }

  std::vector<double> nn(m, 0.0);
  for (std::uint32_t i = 0; i < m; ++i) {
    int ix, iy, iz;
    cell_of(sample[i], ix, iy, iz);
    double best = std::numeric_limits<double>::infinity();
    for (int ring = 1; ring <= 64; ++ring) {
      int r = ring - 1;
      for (int dz = -r; dz <= r; ++dz)
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx) {
            // only visit the new shell
            if (r > 0 && std::abs(dx) != r && std::abs(dy) != r && std::abs(dz) != r)
              continue;
            auto it = grid.find(cell_key(ix + dx, iy + dy, iz + dz));
            if (it == grid.end()) continue;
            for (std::uint32_t j : it->second) {
              if (j == i) continue;
              double d2 = (sample[i] - sample[j]).squaredNorm();
              best = std::min(best, d2);
            }
          }
      // a hit in shell r is confirmed once all cells within distance r*cell
      // have been visited
      if (std::isfinite(best) && std::sqrt(best) <= r * cell) break;
    }
    nn[i] = std::isfinite(best) ? std::sqrt(best) : 0.0;
  }

  std::nth_element(nn.begin(), nn.begin() + m / 2, nn.end());
  return nn[m / 2];
}

}  // namespace debris

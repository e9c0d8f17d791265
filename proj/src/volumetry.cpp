#include "debris/volumetry.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>

#include "debris/pipeline.hpp"

namespace debris {

void GroundPlane::tangent_basis(Eigen::Vector3d& t1, Eigen::Vector3d& t2) const {
  int k = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(n[i]) < std::abs(n[k])) k = i;
  Eigen::Vector3d axis = Eigen::Vector3d::Zero();
  axis[k] = 1.0;
  t1 = (axis - axis.dot(n) * n).normalized();
  t2 = n.cross(t1);
}

namespace {

struct PlaneFit {
  Eigen::Vector3d n;
  double d;
};

/// Least-squares plane through a set of points (smallest covariance
/// eigenvector). Returns false when the points are degenerate.
bool fit_plane_lsq(const std::vector<Eigen::Vector3d>& pts, PlaneFit& fit) {
  if (pts.size() < 3) return false;
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : pts) {
    Eigen::Vector3d q = p - centroid;
    cov += q * q.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  if (es.info() != Eigen::Success) return false;
  // rank-deficient in-plane spread means the points are collinear
  if (es.eigenvalues()(1) < 1e-18) return false;
  fit.n = es.eigenvectors().col(0).normalized();
  fit.d = -fit.n.dot(centroid);
  return true;
}

}  // namespace

GroundPlane register_ground(const SemanticCloud& cloud, const RansacOptions& opts) {
  std::vector<Eigen::Vector3d> candidates;
  candidates.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (cloud.fused_class[i] == kBackgroundClass)
      candidates.push_back(cloud.points[i].position());
  if (candidates.size() < 3) {
    candidates.clear();
    for (std::size_t i = 0; i < cloud.size(); ++i)
      candidates.push_back(cloud.points[i].position());
  }
  if (candidates.size() < 3)
    fail(ErrorKind::DegenerateGeometry, "need at least 3 candidate ground points");

  const std::size_t n = candidates.size();
  auto count_inliers = [&](const Eigen::Vector3d& nrm, double d) {
    std::size_t count = 0;
    for (const auto& p : candidates)
      if (std::abs(nrm.dot(p) + d) <= opts.inlier_threshold) ++count;
    return count;
  };

  PlaneFit best{};
  std::size_t best_inliers = 0;
  bool have_best = false;

  if (n == 3) {
    Eigen::Vector3d nrm =
        (candidates[1] - candidates[0]).cross(candidates[2] - candidates[0]);
    if (nrm.norm() < 1e-12)
      fail(ErrorKind::DegenerateGeometry, "candidate ground points are collinear");
    best.n = nrm.normalized();
    best.d = -best.n.dot(candidates[0]);
    best_inliers = count_inliers(best.n, best.d);
    have_best = true;
  } else {
    std::mt19937_64 rng(opts.seed);
    for (int iter = 0; iter < opts.max_iters; ++iter) {
      std::size_t a = rng() % n, b = rng() % n, c = rng() % n;
      if (a == b || b == c || a == c) continue;
      Eigen::Vector3d nrm =
          (candidates[b] - candidates[a]).cross(candidates[c] - candidates[a]);
      double norm = nrm.norm();
      if (norm < 1e-12) continue;
      nrm /= norm;
      double d = -nrm.dot(candidates[a]);
      std::size_t inliers = count_inliers(nrm, d);
      if (inliers > best_inliers) {
        best_inliers = inliers;
        best = {nrm, d};
        have_best = true;
      }
    }
  }
  if (!have_best || best_inliers < 3)
    fail(ErrorKind::DegenerateGeometry, "no consensus plane found");

  // least-squares refinement over the inlier set, twice
  for (int pass = 0; pass < 2; ++pass) {
    std::vector<Eigen::Vector3d> inliers;
    for (const auto& p : candidates)
      if (std::abs(best.n.dot(p) + best.d) <= opts.inlier_threshold)
        inliers.push_back(p);
    PlaneFit refined;
    if (inliers.size() >= 3 && fit_plane_lsq(inliers, refined)) best = refined;
  }

  GroundPlane plane;
  plane.n = best.n;
  plane.d = best.d;
  plane.inlier_fraction =
      static_cast<double>(count_inliers(best.n, best.d)) / static_cast<double>(n);

  // orient toward the side holding the majority of debris points
  std::int64_t balance = 0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (cloud.fused_class[i] == kBackgroundClass) continue;
    double h = plane.signed_height(cloud.points[i].position());
    balance += h > 0 ? 1 : (h < 0 ? -1 : 0);
  }
  if (balance == 0) {
    // no debris: prefer the normal pointing up (+z, then +y, then +x)
    for (int k = 2; k >= 0; --k) {
      if (std::abs(plane.n[k]) > 1e-9) {
        balance = plane.n[k] > 0 ? 1 : -1;
        break;
      }
    }
  }
  if (balance < 0) {
    plane.n = -plane.n;
    plane.d = -plane.d;
  }
  return plane;
}

HeightGrid resample(const SemanticCloud& cloud, const GroundPlane& plane,
                    double gs, int threads) {
  if (!(gs > 0)) fail(ErrorKind::DomainError, "grid size must be positive");

  HeightGrid grid;
  grid.gs = gs;
  grid.plane = plane;
  plane.tangent_basis(grid.t1, grid.t2);

  // bounding rectangle of the non-background points in the plane frame
  bool any = false;
  double min_x = 0, max_x = 0, min_y = 0, max_y = 0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (cloud.fused_class[i] == kBackgroundClass) continue;
    Eigen::Vector3d p = cloud.points[i].position();
    double px = grid.t1.dot(p), py = grid.t2.dot(p);
    if (!any) {
      min_x = max_x = px;
      min_y = max_y = py;
      any = true;
    } else {
      min_x = std::min(min_x, px);
      max_x = std::max(max_x, px);
      min_y = std::min(min_y, py);
      max_y = std::max(max_y, py);
    }
  }
  if (!any) return grid;  // all background: empty grid, zero volume

  grid.x0 = min_x;
  grid.y0 = min_y;
  grid.cols = std::max(1, static_cast<int>(std::ceil((max_x - min_x) / gs)));
  grid.rows = std::max(1, static_cast<int>(std::ceil((max_y - min_y) / gs)));
  const std::size_t ncells = grid.cell_index(0, grid.rows - 1) + grid.cols;
  const int nc = cloud.num_classes;

  struct Partial {
    std::vector<float> z;
    std::vector<std::uint32_t> counts;  // ncells x num_classes
    std::vector<std::uint32_t> total;
  };
  int workers = std::max(1, threads);
  std::vector<Partial> partials(workers);
  for (auto& p : partials) {
    p.z.assign(ncells, 0.0f);
    p.counts.assign(ncells * nc, 0);
    p.total.assign(ncells, 0);
  }

  std::size_t chunk = (cloud.size() + workers - 1) / workers;
  parallel_for(static_cast<std::size_t>(workers), workers,
               [&](std::size_t tb, std::size_t te) {
                 for (std::size_t t = tb; t < te; ++t) {
                   Partial& part = partials[t];
                   std::size_t b = std::min(t * chunk, cloud.size());
                   std::size_t e = std::min(b + chunk, cloud.size());
                   for (std::size_t i = b; i < e; ++i) {
                     int cls = cloud.fused_class[i];
                     if (cls == kBackgroundClass) continue;
                     Eigen::Vector3d p = cloud.points[i].position();
                     int cx = std::clamp(
                         static_cast<int>(std::floor((grid.t1.dot(p) - grid.x0) / gs)),
                         0, grid.cols - 1);
                     int cy = std::clamp(
                         static_cast<int>(std::floor((grid.t2.dot(p) - grid.y0) / gs)),
                         0, grid.rows - 1);
                     std::size_t idx = grid.cell_index(cx, cy);
                     float h = static_cast<float>(
                         std::max(0.0, plane.signed_height(p)));
                     part.z[idx] = std::max(part.z[idx], h);
                     ++part.counts[idx * nc + cls];
                     ++part.total[idx];
                   }
                 }
               });

  grid.z.assign(ncells, 0.0f);
  grid.cell_class.assign(ncells, kBackgroundClass);
  grid.point_count.assign(ncells, 0);
  std::vector<std::uint32_t> counts(ncells * nc, 0);
  for (const auto& part : partials) {
    for (std::size_t i = 0; i < ncells; ++i) {
      grid.z[i] = std::max(grid.z[i], part.z[i]);
      grid.point_count[i] += part.total[i];
    }
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += part.counts[i];
  }
  for (std::size_t i = 0; i < ncells; ++i) {
    if (grid.point_count[i] == 0) continue;
    int best = kBackgroundClass;
    std::uint32_t best_count = 0;
    for (int c = 1; c < nc; ++c) {
      if (counts[i * nc + c] > best_count) {
        best_count = counts[i * nc + c];
        best = c;
      }
    }
    grid.cell_class[i] = static_cast<std::uint8_t>(best);
  }
  return grid;
}

double compute_volume(const HeightGrid& grid, std::span<const std::size_t> cells) {
  double sum = 0;
  for (std::size_t idx : cells) sum += grid.z[idx];
  return grid.gs * grid.gs * sum;
}

double compute_total_volume(const HeightGrid& grid) {
  double sum = 0;
  for (float z : grid.z) sum += z;
  return grid.gs * grid.gs * sum;
}

std::vector<DebrisInstance> cluster_instances(const HeightGrid& grid, int min_cells) {
  std::vector<DebrisInstance> out;
  if (grid.cols == 0 || grid.rows == 0) return out;

  std::vector<bool> seen(grid.cell_count(), false);
  std::vector<std::size_t> stack;
  for (int sy = 0; sy < grid.rows; ++sy) {
    for (int sx = 0; sx < grid.cols; ++sx) {
      std::size_t start = grid.cell_index(sx, sy);
      if (seen[start] || grid.point_count[start] == 0 ||
          grid.cell_class[start] == kBackgroundClass)
        continue;
      int cls = grid.cell_class[start];
      DebrisInstance inst;
      inst.class_index = cls;
      stack.assign(1, start);
      seen[start] = true;
      while (!stack.empty()) {
        std::size_t idx = stack.back();
        stack.pop_back();
        inst.cells.push_back(idx);
        int cx = static_cast<int>(idx % grid.cols);
        int cy = static_cast<int>(idx / grid.cols);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            int nx = cx + dx, ny = cy + dy;
            if (nx < 0 || nx >= grid.cols || ny < 0 || ny >= grid.rows) continue;
            std::size_t nidx = grid.cell_index(nx, ny);
            if (seen[nidx] || grid.point_count[nidx] == 0 ||
                grid.cell_class[nidx] != cls)
              continue;
            seen[nidx] = true;
            stack.push_back(nidx);
          }
        }
      }
      if (static_cast<int>(inst.cells.size()) < min_cells) continue;
      std::sort(inst.cells.begin(), inst.cells.end());
      inst.volume = compute_volume(grid, inst.cells);
      inst.area = static_cast<double>(inst.cells.size()) * grid.gs * grid.gs;
      double sx_sum = 0, sy_sum = 0;
      for (std::size_t idx : inst.cells) {
        sx_sum += grid.x0 + (static_cast<double>(idx % grid.cols) + 0.5) * grid.gs;
        sy_sum += grid.y0 + (static_cast<double>(idx / grid.cols) + 0.5) * grid.gs;
      }
      inst.centroid_x = sx_sum / static_cast<double>(inst.cells.size());
      inst.centroid_y = sy_sum / static_cast<double>(inst.cells.size());
      out.push_back(std::move(inst));
    }
  }

  std::sort(out.begin(), out.end(), [](const DebrisInstance& a, const DebrisInstance& b) {
    if (a.volume != b.volume) return a.volume > b.volume;
    if (a.class_index != b.class_index) return a.class_index < b.class_index;
    return a.cells.front() < b.cells.front();
  });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].id = static_cast<int>(i) + 1;
  return out;
}

}  // namespace debris

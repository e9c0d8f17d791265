#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "debris/config.hpp"

namespace debris {

struct StageTiming {
  std::string stage;
  double seconds = 0;
};

// Each stage reads its inputs from disk and writes its outputs under
// cfg.outdir, so stages are independently re-runnable and their composition
// is byte-identical to run_all.

/// Writes per-camera depth maps: depth/<id>.dmap and depth/<id>.png.
StageTiming run_depth(const PipelineConfig& cfg);

/// Depth-aware label fusion; writes fused.ply and class_counts.csv. Computes
/// depth maps inline when the depth stage has not run.
StageTiming run_fuse(const PipelineConfig& cfg);

/// Ground registration, resampling, clustering and risk maps. Writes
/// height.asc, height_class.asc, instances.csv, risk_cat{1..5}.png,
/// flagged_cat{1..5}.csv and summary.json.
StageTiming run_risk(const PipelineConfig& cfg);

std::vector<StageTiming> run_all(const PipelineConfig& cfg);

/// Simple fork-join helper: splits [0, n) into contiguous chunks.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace debris

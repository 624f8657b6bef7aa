#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "raypath/nn.hpp"
#include "raypath/sampler.hpp"
#include "raypath/scenes.hpp"

namespace raypath {

struct GridSpec {
  double x_min = 0.0, x_max = 0.0;
  double y_min = 0.0, y_max = 0.0;
  double cell_size = 1.0;
  double height = 1.5;  // RX plane above ground

  int nx() const { return static_cast<int>(std::lround((x_max - x_min) / cell_size)); }
  int ny() const { return static_cast<int>(std::lround((y_max - y_min) / cell_size)); }
  double cell_x(int ix) const { return x_min + (ix + 0.5) * cell_size; }
  double cell_y(int iy) const { return y_min + (iy + 0.5) * cell_size; }
  bool operator==(const GridSpec& o) const;
};

struct CoverageCell {
  double gain_linear = 0.0;  // sum of 1/length^2 over found paths
  int n_paths = 0;
};

struct CoverageGrid {
  GridSpec spec;
  std::vector<CoverageCell> cells;  // iy * nx + ix

  CoverageCell& at(int ix, int iy) { return cells[static_cast<std::size_t>(iy) * spec.nx() + ix]; }
  const CoverageCell& at(int ix, int iy) const {
    return cells[static_cast<std::size_t>(iy) * spec.nx() + ix];
  }
};

enum class CoverageSource { Exhaustive, Model };

struct CoverageOptions {
  CoverageSource source = CoverageSource::Exhaustive;
  int k_max = 1;
  int m = 10;  // model samples per interaction order per cell
  std::uint64_t seed = 0;
  std::uint64_t budget = kDefaultEnumerationBudget;
  int threads = 1;
  std::map<int, const FlowModel*> models;  // required per K for the model source
};

// Per-cell total path gain (unit reflection coefficients, inverse squared
// path length) on a horizontal receiver grid. The line-of-sight contribution
// never goes through the model; reflection orders 1..k_max come from either
// exhaustive enumeration or M de-duplicated validated model samples.
CoverageGrid coverage_map(const std::vector<Triangle>& geometry, const Vec3& tx,
                          const GridSpec& spec, const CoverageOptions& opts);

struct ResidualMaps {
  GridSpec spec;
  std::vector<double> rel;     // (G_gt - G_pred)/G_gt on dB-scale gains; NaN = undefined
  std::vector<double> rel_db;  // 10*log10(gt_linear/pred_linear); NaN = undefined
  double rmse_db = 0.0;        // RMS of rel_db over its defined cells
  int rmse_cells = 0;
};

// Throws GridMismatch when the two grids do not share a spec. Cells with a
// zero gain on either side are reported undefined and excluded from the RMSE.
ResidualMaps residual_maps(const CoverageGrid& gt, const CoverageGrid& pred);

struct BenchRow {
  std::size_t n = 0;  // actual triangle count
  int k = 0;
  std::string method;  // "exhaustive" or "model"
  int m = 0;           // 0 for exhaustive
  double median_seconds = 0.0;
  std::uint64_t validations = 0;
};

// Wall-clock medians for exhaustive enumerate+validate versus sampling M
// candidates from a trained model (canonical transform and encoding are
// per-query work and counted; checkpoint loading is not). One scene per
// target triangle count, shared by both methods.
std::vector<BenchRow> run_benchmark(const CanyonParams& family, const std::vector<int>& n_targets,
                                    const std::vector<int>& ks, const std::vector<int>& ms,
                                    int repeats, const std::map<int, const FlowModel*>& models,
                                    std::uint64_t seed,
                                    std::uint64_t budget = kDefaultEnumerationBudget,
                                    bool include_exhaustive = true);

// CSV encodings. Coverage: "x,y,gain_linear,gain_db,n_paths" with gain_db
// written as "undef" when gain_linear is 0; grid geometry rides in a comment
// so files can be read back for residual computation.
std::string coverage_csv(const CoverageGrid& grid, const std::string& cmdline_comment = "");
CoverageGrid coverage_from_csv(const std::string& text);
std::string residuals_csv(const ResidualMaps& maps, const std::string& cmdline_comment = "");
std::string benchmark_csv(const std::vector<BenchRow>& rows,
                          const std::string& cmdline_comment = "");

}  // namespace raypath

#include "raypath/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "raypath/errors.hpp"
#include "raypath/format.hpp"

namespace raypath {

namespace {

constexpr std::uint64_t kStreamCell = 21;
constexpr std::uint64_t kStreamBench = 22;

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return 0.0;
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Gains are summed over lexicographically sorted candidates so that equal
// path sets produce bitwise-equal totals for both sources.
double gain_of_candidates(const PreparedScene& ps, std::vector<PathCandidate> candidates,
                          int* n_paths) {
  std::sort(candidates.begin(), candidates.end());
  double gain = 0.0;
  for (const PathCandidate& c : candidates) {
    const auto path = trace_image_path(ps, c);
    if (!path) continue;  // cannot happen for validated candidates
    gain += 1.0 / (path->length * path->length);
    ++*n_paths;
  }
  return gain;
}

void compute_cell(const std::vector<Triangle>& geometry, const Vec3& tx, const GridSpec& spec,
                  const CoverageOptions& opts, int ix, int iy, CoverageCell& out, Rng& cell_rng) {
  Scene scene;
  scene.triangles = geometry;
  scene.tx = tx;
  scene.rx = Vec3{spec.cell_x(ix), spec.cell_y(iy), spec.height};
  const PreparedScene ps(scene);

  double gain = 0.0;
  int n_paths = 0;
  if (line_of_sight(ps)) {
    const double len = norm(scene.rx - scene.tx);
    gain += 1.0 / (len * len);
    ++n_paths;
  }

  for (int k = 1; k <= opts.k_max; ++k) {
    if (opts.source == CoverageSource::Exhaustive) {
      auto candidates = enumerate_valid_paths(ps, k, /*no_repeat=*/false, opts.budget);
      gain += gain_of_candidates(ps, std::move(candidates), &n_paths);
    } else {
      auto it = opts.models.find(k);
      if (it == opts.models.end() || it->second == nullptr) {
        throw ShapeMismatch("coverage_map: no model provided for K=" + std::to_string(k));
      }
      const FlowModel& model = *it->second;
      SampleOptions sample_opts;
      sample_opts.epsilon = 0.0;
      sample_opts.use_mask = true;
      sample_opts.use_distance_weights = false;

      const EncodedScene encoded(model, scene);
      std::unordered_set<PathCandidate, PathCandidateHash> unique;
      for (int j = 0; j < opts.m; ++j) {
        Rng rng = cell_rng.derive(static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(j));
        const Trajectory traj = sample_trajectory(model, encoded, sample_opts, rng);
        if (traj.reward == 1) unique.insert(traj.candidate);
      }
      std::vector<PathCandidate> candidates(unique.begin(), unique.end());
      gain += gain_of_candidates(ps, std::move(candidates), &n_paths);
    }
  }
  out.gain_linear = gain;
  out.n_paths = n_paths;
}

}  // namespace

bool GridSpec::operator==(const GridSpec& o) const {
  auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9; };
  return close(x_min, o.x_min) && close(x_max, o.x_max) && close(y_min, o.y_min) &&
         close(y_max, o.y_max) && close(cell_size, o.cell_size) && close(height, o.height);
}

CoverageGrid coverage_map(const std::vector<Triangle>& geometry, const Vec3& tx,
                          const GridSpec& spec, const CoverageOptions& opts) {
  CoverageGrid grid;
  grid.spec = spec;
  const int nx = spec.nx();
  const int ny = spec.ny();
  grid.cells.assign(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny), CoverageCell{});

  const Rng root = Rng::seeded(opts.seed);
  auto worker = [&](int begin, int end) {
    for (int idx = begin; idx < end; ++idx) {
      const int ix = idx % nx;
      const int iy = idx / nx;
      Rng cell_rng = root.derive(kStreamCell, static_cast<std::uint64_t>(idx));
      compute_cell(geometry, tx, spec, opts, ix, iy, grid.cells[static_cast<std::size_t>(idx)],
                   cell_rng);
    }
  };

  const int total = nx * ny;
  const int threads = std::max(1, opts.threads);
  if (threads == 1 || total < 2) {
    worker(0, total);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (total + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const int begin = t * chunk;
      const int end = std::min(total, begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(worker, begin, end);
    }
    for (auto& th : pool) th.join();
  }
  return grid;
}

ResidualMaps residual_maps(const CoverageGrid& gt, const CoverageGrid& pred) {
  if (!(gt.spec == pred.spec) || gt.cells.size() != pred.cells.size()) {
    throw GridMismatch("residual_maps: grids have different specs");
  }
  ResidualMaps maps;
  maps.spec = gt.spec;
  maps.rel.assign(gt.cells.size(), std::numeric_limits<double>::quiet_NaN());
  maps.rel_db.assign(gt.cells.size(), std::numeric_limits<double>::quiet_NaN());

  double sq_sum = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < gt.cells.size(); ++i) {
    const double g = gt.cells[i].gain_linear;
    const double p = pred.cells[i].gain_linear;
    if (g <= 0.0 || p <= 0.0) continue;  // undefined: no paths on one side
    const double g_db = 10.0 * std::log10(g);
    const double p_db = 10.0 * std::log10(p);
    const double rel_db = 10.0 * std::log10(g / p);
    maps.rel_db[i] = rel_db;
    sq_sum += rel_db * rel_db;
    ++count;
    if (g_db != 0.0) maps.rel[i] = (g_db - p_db) / g_db;
  }
  maps.rmse_db = count > 0 ? std::sqrt(sq_sum / count) : 0.0;
  maps.rmse_cells = count;
  return maps;
}

std::vector<BenchRow> run_benchmark(const CanyonParams& family, const std::vector<int>& n_targets,
                                    const std::vector<int>& ks, const std::vector<int>& ms,
                                    int repeats, const std::map<int, const FlowModel*>& models,
                                    std::uint64_t seed, std::uint64_t budget,
                                    bool include_exhaustive) {
  std::vector<BenchRow> rows;
  const Rng root = Rng::seeded(seed);
  using clock = std::chrono::steady_clock;

  for (std::size_t ni = 0; ni < n_targets.size(); ++ni) {
    CanyonParams params = family;
    params.n_buildings_per_side = std::max(1, (n_targets[ni] - 2 + 19) / 20);
    params.keep_min = params.keep_max = 1.0;
    params.include_ground = GroundMode::Always;
    Rng scene_rng = root.derive(kStreamBench, ni);
    const Scene scene = generate_nonempty_canyon(params, scene_rng);
    const PreparedScene ps(scene);
    const std::size_t n = scene.object_count();

    for (int k : ks) {
      if (include_exhaustive) {
        std::vector<double> times;
        for (int r = 0; r < repeats; ++r) {
          const auto t0 = clock::now();
          const auto valid = enumerate_valid_paths(ps, k, /*no_repeat=*/false, budget);
          const auto t1 = clock::now();
          times.push_back(std::chrono::duration<double>(t1 - t0).count());
          (void)valid;
        }
        rows.push_back(BenchRow{n, k, "exhaustive", 0, median(times),
                                candidate_count(n, k, /*no_repeat=*/false)});
      }

      auto it = models.find(k);
      if (it == models.end() || it->second == nullptr) continue;
      const FlowModel& model = *it->second;
      SampleOptions opts;
      opts.epsilon = 0.0;
      opts.use_mask = true;
      opts.use_distance_weights = false;

      for (int m : ms) {
        std::vector<double> times;
        for (int r = 0; r < repeats; ++r) {
          Rng rng = root.derive(kStreamBench, ni, static_cast<std::uint64_t>(1000 + r));
          const auto t0 = clock::now();
          // per-query work: canonical transform + encodings + M sampled and
          // validated candidates
          const EncodedScene encoded(model, scene);
          for (int j = 0; j < m; ++j) {
            const Trajectory traj = sample_trajectory(model, encoded, opts, rng);
            (void)traj;
          }
          const auto t1 = clock::now();
          times.push_back(std::chrono::duration<double>(t1 - t0).count());
        }
        rows.push_back(
            BenchRow{n, k, "model", m, median(times), static_cast<std::uint64_t>(m)});
      }
    }
  }
  return rows;
}

std::string coverage_csv(const CoverageGrid& grid, const std::string& cmdline_comment) {
  std::ostringstream out;
  if (!cmdline_comment.empty()) out << "# cmdline: " << cmdline_comment << "\n";
  out << "# grid: " << fmt_g17(grid.spec.x_min) << " " << fmt_g17(grid.spec.x_max) << " "
      << fmt_g17(grid.spec.y_min) << " " << fmt_g17(grid.spec.y_max) << " "
      << fmt_g17(grid.spec.cell_size) << " " << fmt_g17(grid.spec.height) << "\n";
  out << "x,y,gain_linear,gain_db,n_paths\n";
  const int nx = grid.spec.nx();
  const int ny = grid.spec.ny();
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      const CoverageCell& cell = grid.at(ix, iy);
      out << fmt_g17(grid.spec.cell_x(ix)) << "," << fmt_g17(grid.spec.cell_y(iy)) << ","
          << fmt_g17(cell.gain_linear) << ",";
      if (cell.gain_linear > 0.0) {
        out << fmt_g17(10.0 * std::log10(cell.gain_linear));
      } else {
        out << "undef";
      }
      out << "," << cell.n_paths << "\n";
    }
  }
  return out.str();
}

CoverageGrid coverage_from_csv(const std::string& text) {
  CoverageGrid grid;
  std::istringstream in(text);
  std::string line;
  bool have_spec = false;
  std::vector<CoverageCell> cells;
  while (std::getline(in, line)) {
    if (line.rfind("# grid:", 0) == 0) {
      std::istringstream ls(line.substr(7));
      if (!(ls >> grid.spec.x_min >> grid.spec.x_max >> grid.spec.y_min >> grid.spec.y_max >>
            grid.spec.cell_size >> grid.spec.height)) {
        throw ParseError("malformed '# grid:' comment", 0);
      }
      have_spec = true;
      continue;
    }
    if (line.empty() || line[0] == '#' || line.rfind("x,", 0) == 0) continue;
    std::istringstream ls(line);
    std::string tok;
    CoverageCell cell;
    double x, y;
    std::getline(ls, tok, ',');
    x = std::stod(tok);
    std::getline(ls, tok, ',');
    y = std::stod(tok);
    std::getline(ls, tok, ',');
    cell.gain_linear = std::stod(tok);
    std::getline(ls, tok, ',');  // gain_db or "undef"; derived, not stored
    std::getline(ls, tok, ',');
    cell.n_paths = std::stoi(tok);
    (void)x;
    (void)y;
    cells.push_back(cell);
  }
  if (!have_spec) throw ParseError("coverage CSV lacks the '# grid:' comment", 0);
  const std::size_t expected =
      static_cast<std::size_t>(grid.spec.nx()) * static_cast<std::size_t>(grid.spec.ny());
  if (cells.size() != expected) {
    throw ParseError("coverage CSV cell count does not match the grid comment", 0);
  }
  grid.cells = std::move(cells);
  return grid;
}

std::string residuals_csv(const ResidualMaps& maps, const std::string& cmdline_comment) {
  std::ostringstream out;
  if (!cmdline_comment.empty()) out << "# cmdline: " << cmdline_comment << "\n";
  out << "# rmse_db: " << fmt_g17(maps.rmse_db) << " over " << maps.rmse_cells << " cells\n";
  out << "x,y,rel,rel_db\n";
  const int nx = maps.spec.nx();
  const int ny = maps.spec.ny();
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      const std::size_t i = static_cast<std::size_t>(iy) * nx + ix;
      out << fmt_g17(maps.spec.cell_x(ix)) << "," << fmt_g17(maps.spec.cell_y(iy)) << ",";
      if (std::isnan(maps.rel[i])) {
        out << "undef";
      } else {
        out << fmt_g17(maps.rel[i]);
      }
      out << ",";
      if (std::isnan(maps.rel_db[i])) {
        out << "undef";
      } else {
        out << fmt_g17(maps.rel_db[i]);
      }
      out << "\n";
    }
  }
  return out.str();
}

std::string benchmark_csv(const std::vector<BenchRow>& rows, const std::string& cmdline_comment) {
  std::ostringstream out;
  if (!cmdline_comment.empty()) out << "# cmdline: " << cmdline_comment << "\n";
  out << "n,k,method,m,median_seconds,validations\n";
  for (const BenchRow& r : rows) {
    out << r.n << "," << r.k << "," << r.method << "," << r.m << "," << fmt_g17(r.median_seconds)
        << "," << r.validations << "\n";
  }
  return out.str();
}

}  // namespace raypath

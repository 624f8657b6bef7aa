#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "raypath/errors.hpp"
#include "raypath/eval.hpp"
#include "test_support.hpp"

using namespace raypath;
namespace rt = raypath::testing;

namespace {

GridSpec small_grid() {
  GridSpec g;
  g.x_min = -2;
  g.x_max = 2;
  g.y_min = -2;
  g.y_max = 2;
  g.cell_size = 2.0;
  g.height = 1.5;
  return g;
}

}  // namespace

TEST_CASE("free-space LOS gain: length 2 gives 0.25 linear, -6.0206 dB") {
  GridSpec g;
  g.x_min = -0.5;
  g.x_max = 0.5;
  g.y_min = -0.5;
  g.y_max = 0.5;
  g.cell_size = 1.0;
  g.height = 1.5;

  CoverageOptions opts;
  opts.source = CoverageSource::Exhaustive;
  opts.k_max = 0;

  // tx directly above the single cell center at distance 2
  const CoverageGrid grid = coverage_map({}, Vec3{0, 0, 3.5}, g, opts);
  REQUIRE(grid.cells.size() == 1);
  CHECK(grid.cells[0].gain_linear == doctest::Approx(0.25));
  CHECK(10.0 * std::log10(grid.cells[0].gain_linear) == doctest::Approx(-6.0206).epsilon(1e-4));
  CHECK(grid.cells[0].n_paths == 1);
}

TEST_CASE("coverage gains are additive over disjoint interaction orders") {
  const Scene scene = rt::corner_reflector_scene();
  CoverageOptions opts;
  opts.source = CoverageSource::Exhaustive;
  const GridSpec g = small_grid();

  opts.k_max = 2;
  const CoverageGrid both = coverage_map(scene.triangles, scene.tx, g, opts);
  opts.k_max = 1;
  const CoverageGrid first = coverage_map(scene.triangles, scene.tx, g, opts);

  // K=2-only contribution computed directly from the enumeration oracle
  for (int iy = 0; iy < g.ny(); ++iy) {
    for (int ix = 0; ix < g.nx(); ++ix) {
      Scene cell_scene = scene;
      cell_scene.rx = Vec3{g.cell_x(ix), g.cell_y(iy), g.height};
      const PreparedScene ps(cell_scene);
      double k2 = 0.0;
      for (const PathCandidate& c : enumerate_valid_paths(ps, 2)) {
        const auto path = trace_image_path(ps, c);
        REQUIRE(path.has_value());
        k2 += 1.0 / (path->length * path->length);
      }
      CHECK(both.at(ix, iy).gain_linear ==
            doctest::Approx(first.at(ix, iy).gain_linear + k2).epsilon(1e-12));
    }
  }
}

TEST_CASE("model coverage is a subset of exhaustive coverage") {
  const Scene scene = rt::parallel_walls_scene();
  ModelConfig cfg;
  cfg.d = 8;
  cfg.k = 1;
  Rng rng = Rng::seeded(3);
  const FlowModel model = make_flow_model(cfg, rng);  // uniform flows

  const GridSpec g = small_grid();
  CoverageOptions ex;
  ex.source = CoverageSource::Exhaustive;
  ex.k_max = 1;
  const CoverageGrid gt = coverage_map(scene.triangles, scene.tx, g, ex);

  CoverageOptions md;
  md.source = CoverageSource::Model;
  md.k_max = 1;
  md.m = 3;  // deliberately too few samples to find everything
  md.models[1] = &model;
  const CoverageGrid pred = coverage_map(scene.triangles, scene.tx, g, md);

  for (std::size_t i = 0; i < gt.cells.size(); ++i) {
    CHECK(pred.cells[i].gain_linear <= gt.cells[i].gain_linear);
    CHECK(pred.cells[i].n_paths <= gt.cells[i].n_paths);
  }

  SUBCASE("residuals of a subset prediction are nonnegative where defined") {
    const ResidualMaps maps = residual_maps(gt, pred);
    for (double v : maps.rel_db) {
      if (!std::isnan(v)) CHECK(v >= 0.0);
    }
    CHECK(maps.rmse_db >= 0.0);
  }
}

TEST_CASE("de-duplication: repeated samples of one path count once") {
  const Scene scene = rt::single_mirror_scene();
  ModelConfig cfg;
  cfg.d = 8;
  cfg.k = 1;
  Rng rng = Rng::seeded(5);
  const FlowModel model = make_flow_model(cfg, rng);

  GridSpec g;
  g.x_min = 0.5;
  g.x_max = 1.5;
  g.y_min = -0.5;
  g.y_max = 0.5;
  g.cell_size = 1.0;
  g.height = 1.0;

  CoverageOptions md;
  md.source = CoverageSource::Model;
  md.k_max = 1;
  md.m = 25;  // the single object gets sampled every time
  md.models[1] = &model;
  const CoverageGrid pred = coverage_map(scene.triangles, scene.tx, g, md);

  CoverageOptions ex;
  ex.source = CoverageSource::Exhaustive;
  ex.k_max = 1;
  const CoverageGrid gt = coverage_map(scene.triangles, scene.tx, g, ex);

  REQUIRE(pred.cells.size() == 1);
  CHECK(pred.cells[0].n_paths == gt.cells[0].n_paths);
  CHECK(pred.cells[0].gain_linear == doctest::Approx(gt.cells[0].gain_linear));
}

TEST_CASE("residual_maps identities and undefined handling") {
  GridSpec g = small_grid();
  CoverageGrid a;
  a.spec = g;
  a.cells.assign(4, CoverageCell{});
  a.cells[0].gain_linear = 0.25;
  a.cells[1].gain_linear = 0.5;
  a.cells[2].gain_linear = 0.0;  // undefined in gt
  a.cells[3].gain_linear = 0.125;

  SUBCASE("pred == gt gives all-zero residuals") {
    const ResidualMaps maps = residual_maps(a, a);
    CHECK(maps.rmse_db == doctest::Approx(0.0));
    CHECK(maps.rel[0] == doctest::Approx(0.0));
    CHECK(maps.rel_db[0] == doctest::Approx(0.0));
    CHECK(std::isnan(maps.rel[2]));
  }
  SUBCASE("worked example: gt 0.25, pred 0.20 -> 0.969 dB") {
    CoverageGrid b = a;
    b.cells[0].gain_linear = 0.20;
    const ResidualMaps maps = residual_maps(a, b);
    CHECK(maps.rel_db[0] == doctest::Approx(10.0 * std::log10(1.25)).epsilon(1e-9));
    CHECK(maps.rel_db[0] == doctest::Approx(0.969).epsilon(1e-3));
  }
  SUBCASE("pred == 0 marks the cell undefined and excludes it from rmse") {
    CoverageGrid b = a;
    b.cells[3].gain_linear = 0.0;
    const ResidualMaps maps = residual_maps(a, b);
    CHECK(std::isnan(maps.rel_db[3]));
    CHECK(maps.rmse_cells == 2);
  }
  SUBCASE("mismatched grids are rejected") {
    CoverageGrid b = a;
    b.spec.cell_size = 1.0;
    b.cells.assign(16, CoverageCell{});
    CHECK_THROWS_AS(residual_maps(a, b), GridMismatch);
  }
}

TEST_CASE("coverage csv round-trip") {
  const Scene scene = rt::corner_reflector_scene();
  CoverageOptions opts;
  opts.source = CoverageSource::Exhaustive;
  opts.k_max = 1;
  const CoverageGrid grid = coverage_map(scene.triangles, scene.tx, small_grid(), opts);
  const std::string text = coverage_csv(grid, "test");
  CHECK(text.find("# cmdline: test") == 0);
  CHECK(text.find("x,y,gain_linear,gain_db,n_paths") != std::string::npos);

  const CoverageGrid back = coverage_from_csv(text);
  REQUIRE(back.cells.size() == grid.cells.size());
  for (std::size_t i = 0; i < grid.cells.size(); ++i) {
    CHECK(back.cells[i].gain_linear == grid.cells[i].gain_linear);
    CHECK(back.cells[i].n_paths == grid.cells[i].n_paths);
  }
}

TEST_CASE("zero-gain cells serialize as undef") {
  CoverageGrid grid;
  grid.spec = small_grid();
  grid.cells.assign(4, CoverageCell{});
  grid.cells[1].gain_linear = 0.5;
  const std::string text = coverage_csv(grid);
  CHECK(text.find(",undef,") != std::string::npos);
}

TEST_CASE("benchmark rows: counts and monotone workload") {
  CanyonParams family;
  family.n_buildings_per_side = 1;
  const auto rows = run_benchmark(family, {40, 80}, {1, 2}, {}, 3, {}, 7);
  REQUIRE(rows.size() == 4);
  for (const BenchRow& r : rows) {
    CHECK(r.method == "exhaustive");
    CHECK(r.validations == candidate_count(r.n, r.k, false));
    CHECK(r.median_seconds >= 0.0);
  }
  // exhaustive median time is nondecreasing in n at fixed k (same k rows)
  CHECK(rows[0].n < rows[2].n);
  CHECK(rows[2].median_seconds >= rows[0].median_seconds * 0.2);  // noisy lower bound
}

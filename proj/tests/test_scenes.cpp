#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "raypath/errors.hpp"
#include "raypath/scenes.hpp"

using namespace raypath;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("keep fraction 1.0 keeps every building") {
  CanyonParams p;
  p.n_buildings_per_side = 4;
  p.keep_min = p.keep_max = 1.0;
  p.include_ground = GroundMode::Always;
  Rng rng = Rng::seeded(3);
  const Scene scene = generate_canyon(p, rng);
  CHECK(scene.object_count() == 8 * 10 + 2);
  for (std::size_t i = 0; i < scene.triangles.size(); ++i) {
    CHECK(scene.triangles[i].id == static_cast<int>(i));
    CHECK(triangle_area(scene.triangles[i]) > 1e-12);
  }
}

TEST_CASE("keep fraction 0.5 removes about half the buildings") {
  CanyonParams p;
  p.n_buildings_per_side = 5;
  p.keep_min = p.keep_max = 0.5;
  p.include_ground = GroundMode::Always;
  Rng root = Rng::seeded(17);
  double kept = 0.0;
  const int scenes = 10000;
  for (int i = 0; i < scenes; ++i) {
    Rng rng = root.derive(1, static_cast<std::uint64_t>(i));
    const Scene s = generate_canyon(p, rng);
    kept += static_cast<double>((s.object_count() - 2) / 10) / 10.0;
  }
  CHECK(kept / scenes == doctest::Approx(0.5).epsilon(0.04));
}

TEST_CASE("canyon region constrains tx/rx placement") {
  CanyonParams p;
  p.sampling_region = SamplingRegion::Canyon;
  Rng root = Rng::seeded(5);
  for (int i = 0; i < 1000; ++i) {
    Rng rng = root.derive(2, static_cast<std::uint64_t>(i));
    const Scene s = generate_canyon(p, rng);
    for (const Vec3* e : {&s.tx, &s.rx}) {
      CHECK(e->x >= 0.0);
      CHECK(e->x <= p.street_length());
      CHECK(std::abs(e->y) <= p.street_width / 2.0);
    }
    CHECK(s.tx.z >= p.tx_height_min);
    CHECK(s.tx.z <= p.tx_height_max);
    CHECK(s.rx.z >= p.rx_height_min);
    CHECK(s.rx.z <= p.rx_height_max);
  }
}

TEST_CASE("buildings never intrude into the street volume") {
  CanyonParams p;
  Rng root = Rng::seeded(23);
  for (int i = 0; i < 200; ++i) {
    Rng rng = root.derive(3, static_cast<std::uint64_t>(i));
    const Scene s = generate_canyon(p, rng);
    for (std::size_t t = 0; t + 2 < s.triangles.size(); ++t) {  // all but the ground quad
      for (const Vec3* v : {&s.triangles[t].v0, &s.triangles[t].v1, &s.triangles[t].v2}) {
        CHECK(std::abs(v->y) >= p.street_width / 2.0 - 1e-9);
      }
    }
  }
}

TEST_CASE("same seed reproduces the same scene byte for byte") {
  CanyonParams p;
  p.include_ground = GroundMode::Random;
  Rng a = Rng::seeded(99);
  Rng b = Rng::seeded(99);
  const std::string obj_a = scene_to_obj(generate_canyon(p, a));
  const std::string obj_b = scene_to_obj(generate_canyon(p, b));
  CHECK(obj_a == obj_b);
}

TEST_CASE("scene_stats: valid fraction decays with interaction order") {
  CanyonParams p;
  p.n_buildings_per_side = 2;
  const SceneStats stats = scene_stats(p, 30, 2, /*no_repeat=*/false, 7);
  REQUIRE(stats.rows.size() == 3);
  CHECK(stats.rows[0].k == 0);
  CHECK(stats.rows[0].mean_candidates == doctest::Approx(1.0));
  CHECK(stats.rows[0].valid_fraction == doctest::Approx(1.0));  // canyon region: clear street
  CHECK(stats.rows[1].valid_fraction > stats.rows[2].valid_fraction);
  for (const auto& row : stats.rows) {
    CHECK(row.valid_fraction >= 0.0);
    CHECK(row.valid_fraction <= 1.0);
  }
}

TEST_CASE("scene files round-trip exactly") {
  CanyonParams p;
  Rng rng = Rng::seeded(31);
  const Scene scene = generate_canyon(p, rng);
  const std::string path = temp_path("raypath_roundtrip.obj");
  write_scene(scene, path);
  const Scene loaded = read_scene(path);
  REQUIRE(loaded.object_count() == scene.object_count());
  CHECK(loaded.tx == scene.tx);
  CHECK(loaded.rx == scene.rx);
  for (std::size_t i = 0; i < scene.triangles.size(); ++i) {
    CHECK(loaded.triangles[i].v0 == scene.triangles[i].v0);
    CHECK(loaded.triangles[i].v1 == scene.triangles[i].v1);
    CHECK(loaded.triangles[i].v2 == scene.triangles[i].v2);
    CHECK(loaded.triangles[i].id == scene.triangles[i].id);
  }
  std::remove(path.c_str());
}

TEST_CASE("scene file parse errors") {
  SUBCASE("quad faces are rejected") {
    const std::string text =
        "# tx 0 0 1\n# rx 1 0 1\nv 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3 4\n";
    CHECK_THROWS_AS(scene_from_obj(text), NonTriangleFace);
  }
  SUBCASE("missing tx directive") {
    const std::string text = "# rx 1 0 1\nv 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n";
    CHECK_THROWS_AS(scene_from_obj(text), ParseError);
  }
  SUBCASE("face index out of range") {
    const std::string text = "# tx 0 0 1\n# rx 1 0 1\nv 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n";
    CHECK_THROWS_AS(scene_from_obj(text), ParseError);
  }
  SUBCASE("duplicate rx directive") {
    const std::string text = "# tx 0 0 1\n# rx 1 0 1\n# rx 2 0 1\n";
    CHECK_THROWS_AS(scene_from_obj(text), ParseError);
  }
  SUBCASE("parse errors carry the line number") {
    try {
      scene_from_obj("# tx 0 0 1\n# rx 1 0 1\nv 0 0 0\nv broken\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line_number == 4);
    }
  }
  SUBCASE("missing file raises IoError") {
    CHECK_THROWS_AS(read_scene("/definitely/not/there.obj"), IoError);
  }
}

TEST_CASE("inverted parameter ranges are rejected") {
  CanyonParams p;
  p.keep_min = 0.9;
  p.keep_max = 0.5;
  CHECK_THROWS_AS(p.check(), BadFlag);
}

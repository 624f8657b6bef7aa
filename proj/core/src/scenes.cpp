#include "raypath/scenes.hpp"

#include <fstream>
#include <sstream>

#include "raypath/errors.hpp"
#include "raypath/format.hpp"

namespace raypath {

namespace {

struct Box {
  double x0, x1, y0, y1, z1;  // z spans [0, z1]

  bool contains(const Vec3& p) const {
    return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1 && p.z >= 0.0 && p.z <= z1;
  }
};

void emit_quad(std::vector<Triangle>& tris, const Vec3& a, const Vec3& b, const Vec3& c,
               const Vec3& d) {
  const int id = static_cast<int>(tris.size());
  tris.push_back(Triangle{a, b, c, id});
  tris.push_back(Triangle{a, c, d, id + 1});
}

// 5 visible faces (4 walls + roof), 10 triangles; the bottom face is never
// illuminated and is omitted.
void emit_box(std::vector<Triangle>& tris, const Box& b) {
  const Vec3 p000{b.x0, b.y0, 0.0}, p100{b.x1, b.y0, 0.0}, p110{b.x1, b.y1, 0.0},
      p010{b.x0, b.y1, 0.0};
  const Vec3 p001{b.x0, b.y0, b.z1}, p101{b.x1, b.y0, b.z1}, p111{b.x1, b.y1, b.z1},
      p011{b.x0, b.y1, b.z1};
  emit_quad(tris, p000, p100, p101, p001);  // y = y0 wall
  emit_quad(tris, p100, p110, p111, p101);  // x = x1 wall
  emit_quad(tris, p110, p010, p011, p111);  // y = y1 wall
  emit_quad(tris, p010, p000, p001, p011);  // x = x0 wall
  emit_quad(tris, p001, p101, p111, p011);  // roof
}

}  // namespace

void CanyonParams::check() const {
  auto ordered = [](double lo, double hi) { return lo <= hi && lo >= 0.0; };
  if (n_buildings_per_side < 0) throw BadFlag("n_buildings_per_side must be >= 0");
  if (street_width <= 0.0) throw BadFlag("street_width must be positive");
  if (!ordered(footprint_len_min, footprint_len_max) || footprint_len_min <= 0.0)
    throw BadFlag("footprint length range is inverted or nonpositive");
  if (!ordered(footprint_depth_min, footprint_depth_max) || footprint_depth_min <= 0.0)
    throw BadFlag("footprint depth range is inverted or nonpositive");
  if (!ordered(height_min, height_max) || height_min <= 0.0)
    throw BadFlag("height range is inverted or nonpositive");
  if (!(keep_min <= keep_max && keep_min >= 0.0 && keep_max <= 1.0))
    throw BadFlag("keep fraction range is inverted or outside [0,1]");
  if (!ordered(tx_height_min, tx_height_max)) throw BadFlag("tx height range is inverted");
  if (!ordered(rx_height_min, rx_height_max)) throw BadFlag("rx height range is inverted");
}

Scene generate_canyon(const CanyonParams& params, Rng& rng, bool reject_tx_rx_inside) {
  params.check();
  Scene scene;
  std::vector<Box> boxes;

  const double keep_p = rng.uniform(params.keep_min, params.keep_max);
  const bool ground =
      params.include_ground == GroundMode::Always ? true : rng.bernoulli(0.5);

  const double slot = params.slot_length();
  for (int side = 0; side < 2; ++side) {
    for (int i = 0; i < params.n_buildings_per_side; ++i) {
      if (!rng.bernoulli(keep_p)) continue;
      const double len = rng.uniform(params.footprint_len_min, params.footprint_len_max);
      const double depth = rng.uniform(params.footprint_depth_min, params.footprint_depth_max);
      const double height = rng.uniform(params.height_min, params.height_max);
      const double jitter = rng.uniform() * (slot - len);
      const double x0 = i * slot + jitter;
      Box b;
      b.x0 = x0;
      b.x1 = x0 + len;
      if (side == 0) {
        b.y0 = params.street_width / 2.0;
        b.y1 = b.y0 + depth;
      } else {
        b.y1 = -params.street_width / 2.0;
        b.y0 = b.y1 - depth;
      }
      b.z1 = height;
      boxes.push_back(b);
      emit_box(scene.triangles, b);
    }
  }

  const double half_extent_y =
      params.street_width / 2.0 + params.footprint_depth_max + params.margin;
  if (ground) {
    const Vec3 a{-params.margin, -half_extent_y, 0.0};
    const Vec3 b{params.street_length() + params.margin, -half_extent_y, 0.0};
    const Vec3 c{params.street_length() + params.margin, half_extent_y, 0.0};
    const Vec3 d{-params.margin, half_extent_y, 0.0};
    emit_quad(scene.triangles, a, b, c, d);
  }

  auto draw_endpoint = [&](double h_min, double h_max) {
    Vec3 p;
    if (params.sampling_region == SamplingRegion::Canyon) {
      p.x = rng.uniform(0.0, params.street_length());
      p.y = rng.uniform(-params.street_width / 2.0, params.street_width / 2.0);
    } else {
      p.x = rng.uniform(-params.margin, params.street_length() + params.margin);
      p.y = rng.uniform(-half_extent_y, half_extent_y);
    }
    p.z = rng.uniform(h_min, h_max);
    return p;
  };
  auto inside_any = [&](const Vec3& p) {
    for (const Box& b : boxes) {
      if (b.contains(p)) return true;
    }
    return false;
  };

  scene.tx = draw_endpoint(params.tx_height_min, params.tx_height_max);
  scene.rx = draw_endpoint(params.rx_height_min, params.rx_height_max);
  if (reject_tx_rx_inside) {
    while (inside_any(scene.tx)) scene.tx = draw_endpoint(params.tx_height_min, params.tx_height_max);
    while (inside_any(scene.rx)) scene.rx = draw_endpoint(params.rx_height_min, params.rx_height_max);
  }
  return scene;
}

Scene generate_nonempty_canyon(const CanyonParams& params, Rng& rng, bool reject_tx_rx_inside) {
  Scene scene = generate_canyon(params, rng, reject_tx_rx_inside);
  std::uint64_t retry = 0;
  while (scene.triangles.empty()) {
    Rng sub = rng.derive(0x5ce9e5ULL, ++retry);
    scene = generate_canyon(params, sub, reject_tx_rx_inside);
  }
  return scene;
}

SceneStats scene_stats(const CanyonParams& params, int n_scenes, int k_max, bool no_repeat,
                       std::uint64_t seed, std::uint64_t budget) {
  SceneStats stats;
  stats.rows.resize(static_cast<std::size_t>(k_max) + 1);
  for (int k = 0; k <= k_max; ++k) stats.rows[static_cast<std::size_t>(k)].k = k;

  std::vector<double> total_candidates(static_cast<std::size_t>(k_max) + 1, 0.0);
  std::vector<double> total_valid(static_cast<std::size_t>(k_max) + 1, 0.0);

  Rng root = Rng::seeded(seed);
  for (int s = 0; s < n_scenes; ++s) {
    Rng scene_rng = root.derive(0x5ce2eULL, static_cast<std::uint64_t>(s));
    const Scene scene = generate_canyon(params, scene_rng);
    const PreparedScene ps(scene);
    total_candidates[0] += 1.0;
    total_valid[0] += line_of_sight(ps);
    for (int k = 1; k <= k_max; ++k) {
      const std::uint64_t count = candidate_count(scene.object_count(), k, no_repeat);
      total_candidates[static_cast<std::size_t>(k)] += static_cast<double>(count);
      const auto valid = enumerate_valid_paths(ps, k, no_repeat, budget);
      total_valid[static_cast<std::size_t>(k)] += static_cast<double>(valid.size());
    }
  }

  for (int k = 0; k <= k_max; ++k) {
    auto& row = stats.rows[static_cast<std::size_t>(k)];
    row.mean_candidates = n_scenes > 0 ? total_candidates[static_cast<std::size_t>(k)] / n_scenes : 0.0;
    row.valid_fraction = total_candidates[static_cast<std::size_t>(k)] > 0.0
                             ? total_valid[static_cast<std::size_t>(k)] /
                                   total_candidates[static_cast<std::size_t>(k)]
                             : 0.0;
  }
  return stats;
}

std::string scene_stats_csv(const SceneStats& stats, const std::string& cmdline_comment) {
  std::ostringstream out;
  if (!cmdline_comment.empty()) out << "# cmdline: " << cmdline_comment << "\n";
  out << "k,mean_candidates,valid_fraction\n";
  for (const auto& row : stats.rows) {
    out << row.k << "," << fmt_g17(row.mean_candidates) << "," << fmt_g17(row.valid_fraction)
        << "\n";
  }
  return out.str();
}

std::string scene_to_obj(const Scene& scene) {
  std::ostringstream out;
  out << "# raypath scene\n";
  out << "# tx " << fmt_g17(scene.tx.x) << " " << fmt_g17(scene.tx.y) << " " << fmt_g17(scene.tx.z)
      << "\n";
  out << "# rx " << fmt_g17(scene.rx.x) << " " << fmt_g17(scene.rx.y) << " " << fmt_g17(scene.rx.z)
      << "\n";
  for (const Triangle& t : scene.triangles) {
    for (const Vec3* v : {&t.v0, &t.v1, &t.v2}) {
      out << "v " << fmt_g17(v->x) << " " << fmt_g17(v->y) << " " << fmt_g17(v->z) << "\n";
    }
  }
  for (std::size_t i = 0; i < scene.triangles.size(); ++i) {
    out << "f " << 3 * i + 1 << " " << 3 * i + 2 << " " << 3 * i + 3 << "\n";
  }
  return out.str();
}

void write_scene(const Scene& scene, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << scene_to_obj(scene);
  if (!out) throw IoError("failed writing " + path);
}

Scene scene_from_obj(const std::string& text) {
  Scene scene;
  std::vector<Vec3> vertices;
  bool have_tx = false, have_rx = false;

  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    if (tok == "#") {
      std::string directive;
      if (!(ls >> directive)) continue;
      if (directive == "tx" || directive == "rx") {
        Vec3 p;
        if (!(ls >> p.x >> p.y >> p.z)) {
          throw ParseError("malformed '# " + directive + "' directive", line_no);
        }
        bool& seen = directive == "tx" ? have_tx : have_rx;
        if (seen) throw ParseError("duplicate '# " + directive + "' directive", line_no);
        seen = true;
        (directive == "tx" ? scene.tx : scene.rx) = p;
      }
      continue;
    }
    if (tok == "v") {
      Vec3 p;
      if (!(ls >> p.x >> p.y >> p.z)) throw ParseError("malformed vertex", line_no);
      vertices.push_back(p);
    } else if (tok == "f") {
      long i = 0, j = 0, k = 0;
      if (!(ls >> i >> j >> k)) throw ParseError("malformed face", line_no);
      long extra;
      if (ls >> extra) throw NonTriangleFace("face with more than 3 vertices", line_no);
      auto fetch = [&](long idx) -> const Vec3& {
        if (idx < 1 || static_cast<std::size_t>(idx) > vertices.size()) {
          throw ParseError("face index " + std::to_string(idx) + " out of range", line_no);
        }
        return vertices[static_cast<std::size_t>(idx - 1)];
      };
      const int id = static_cast<int>(scene.triangles.size());
      scene.triangles.push_back(Triangle{fetch(i), fetch(j), fetch(k), id});
    } else {
      throw ParseError("unsupported token '" + tok + "'", line_no);
    }
  }
  if (!have_tx) throw ParseError("missing '# tx' directive", line_no);
  if (!have_rx) throw ParseError("missing '# rx' directive", line_no);
  return scene;
}

Scene read_scene(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path + " for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return scene_from_obj(buf.str());
}

}  // namespace raypath

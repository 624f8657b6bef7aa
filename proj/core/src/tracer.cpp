#include "raypath/tracer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "raypath/errors.hpp"

namespace raypath {

namespace {

constexpr double kParallelEps = 1e-12;

// Barycentric coordinates of a point already known to lie on the triangle's
// plane. Returns min(alpha, beta, gamma); >= 0 means inside the closed
// triangle.
double barycentric_margin(const PreparedTriangle& pt, const Vec3& p) {
  const Vec3 vp = p - pt.v0;
  const double d20 = dot(vp, pt.e1);
  const double d21 = dot(vp, pt.e2);
  const double beta = (pt.d11 * d20 - pt.d01 * d21) * pt.inv_denom;
  const double gamma = (pt.d00 * d21 - pt.d01 * d20) * pt.inv_denom;
  return std::min({beta, gamma, 1.0 - beta - gamma});
}

PreparedTriangle prepare(const Triangle& t) {
  PreparedTriangle pt;
  pt.v0 = t.v0;
  pt.e1 = t.v1 - t.v0;
  pt.e2 = t.v2 - t.v0;
  pt.normal = normalized(cross(pt.e1, pt.e2));
  pt.centroid = triangle_centroid(t);
  pt.d00 = dot(pt.e1, pt.e1);
  pt.d01 = dot(pt.e1, pt.e2);
  pt.d11 = dot(pt.e2, pt.e2);
  pt.inv_denom = 1.0 / (pt.d00 * pt.d11 - pt.d01 * pt.d01);
  return pt;
}

// Moller-Trumbore for the segment a + t*(b-a), t in (t0, t1); closed triangle.
bool segment_hits_triangle(const PreparedTriangle& pt, const Vec3& a, const Vec3& ab, double t0,
                           double t1) {
  const Vec3 pvec = cross(ab, pt.e2);
  const double det = dot(pt.e1, pvec);
  if (std::abs(det) < kParallelEps) return false;
  const double inv_det = 1.0 / det;
  const Vec3 tvec = a - pt.v0;
  const double u = dot(tvec, pvec) * inv_det;
  if (u < 0.0 || u > 1.0) return false;
  const Vec3 qvec = cross(tvec, pt.e1);
  const double v = dot(ab, qvec) * inv_det;
  if (v < 0.0 || u + v > 1.0) return false;
  const double t = dot(pt.e2, qvec) * inv_det;
  return t > t0 && t < t1;
}

Vec3 mirror_point(const Vec3& p, const Vec3& plane_point, const Vec3& unit_normal) {
  return p - 2.0 * dot(p - plane_point, unit_normal) * unit_normal;
}

// Back-trace core shared by trace / validate / enumerate. `images` holds the
// forward images of tx (images[0] = tx, images[j] = mirrored across the
// first j candidate planes). Fills path points and length on success.
bool back_trace(const PreparedScene& ps, const std::int32_t* seq, int k,
                const std::vector<Vec3>& images, RayPath& out) {
  const Scene& scene = *ps.scene;
  out.points.assign(static_cast<std::size_t>(k) + 2, Vec3{});
  out.points.front() = scene.tx;
  out.points.back() = scene.rx;

  Vec3 endpoint = scene.rx;
  for (int j = k; j >= 1; --j) {
    const PreparedTriangle& pt = ps.tris[static_cast<std::size_t>(seq[j - 1])];
    const Vec3 dir = endpoint - images[static_cast<std::size_t>(j)];
    const double denom = dot(pt.normal, dir);
    if (std::abs(denom) < kParallelEps) return false;
    const double t = dot(pt.normal, pt.v0 - images[static_cast<std::size_t>(j)]) / denom;
    if (t <= 0.0 || t >= 1.0) return false;
    const Vec3 p = images[static_cast<std::size_t>(j)] + t * dir;
    if (barycentric_margin(pt, p) < 0.0) return false;
    out.points[static_cast<std::size_t>(j)] = p;
    endpoint = p;
  }

  // two-sided reflectivity: previous and next point of every reflection must
  // sit strictly on the same side of the reflecting plane
  for (int j = 1; j <= k; ++j) {
    const PreparedTriangle& pt = ps.tris[static_cast<std::size_t>(seq[j - 1])];
    const double sa = dot(pt.normal, out.points[static_cast<std::size_t>(j - 1)] - pt.v0);
    const double sb = dot(pt.normal, out.points[static_cast<std::size_t>(j + 1)] - pt.v0);
    if (!(sa * sb > 0.0)) return false;
  }

  // degenerate pass-through guard: consecutive repetitions of one plane make
  // the back-trace collapse a segment to (numerically) zero length
  for (std::size_t i = 0; i + 1 < out.points.size(); ++i) {
    if (norm(out.points[i + 1] - out.points[i]) <= ps.eps_hit) return false;
  }

  double len = 0.0;
  for (std::size_t i = 0; i + 1 < out.points.size(); ++i) {
    len += norm(out.points[i + 1] - out.points[i]);
  }
  out.length = len;
  return true;
}

bool segment_clear(const PreparedScene& ps, const Vec3& a, const Vec3& b, int ignore_a,
                   int ignore_b) {
  return !is_occluded(ps, a, b, ignore_a, ignore_b);
}

bool path_unobstructed(const PreparedScene& ps, const std::int32_t* seq, int k,
                       const RayPath& path) {
  for (int i = 0; i <= k; ++i) {
    const int ign_a = (i >= 1) ? seq[i - 1] : -1;
    const int ign_b = (i <= k - 1) ? seq[i] : -1;
    if (!segment_clear(ps, path.points[static_cast<std::size_t>(i)],
                       path.points[static_cast<std::size_t>(i + 1)], ign_a, ign_b)) {
      return false;
    }
  }
  return true;
}

}  // namespace

double scene_diameter(const Scene& scene) {
  Vec3 lo = scene.tx, hi = scene.tx;
  auto grow = [&](const Vec3& p) {
    lo.x = std::min(lo.x, p.x);
    lo.y = std::min(lo.y, p.y);
    lo.z = std::min(lo.z, p.z);
    hi.x = std::max(hi.x, p.x);
    hi.y = std::max(hi.y, p.y);
    hi.z = std::max(hi.z, p.z);
  };
  grow(scene.rx);
  for (const Triangle& t : scene.triangles) {
    grow(t.v0);
    grow(t.v1);
    grow(t.v2);
  }
  return norm(hi - lo);
}

PreparedScene::PreparedScene(const Scene& s) : scene(&s) {
  tris.reserve(s.triangles.size());
  for (const Triangle& t : s.triangles) tris.push_back(prepare(t));
  diameter = scene_diameter(s);
  eps_hit = 1e-6 * diameter;
}

std::optional<Hit> ray_triangle_intersect(const Vec3& origin, const Vec3& dir,
                                          const Triangle& tri, double t_min) {
  const Vec3 e1 = tri.v1 - tri.v0;
  const Vec3 e2 = tri.v2 - tri.v0;
  const Vec3 pvec = cross(dir, e2);
  const double det = dot(e1, pvec);
  if (std::abs(det) < kParallelEps) return std::nullopt;
  const double inv_det = 1.0 / det;
  const Vec3 tvec = origin - tri.v0;
  const double u = dot(tvec, pvec) * inv_det;
  if (u < 0.0 || u > 1.0) return std::nullopt;
  const Vec3 qvec = cross(tvec, e1);
  const double v = dot(dir, qvec) * inv_det;
  if (v < 0.0 || u + v > 1.0) return std::nullopt;
  const double t = dot(e2, qvec) * inv_det;
  if (t <= t_min) return std::nullopt;
  return Hit{t, origin + t * dir};
}

Vec3 mirror_across_plane(const Vec3& p, const Triangle& tri) {
  return mirror_point(p, tri.v0, triangle_normal(tri));
}

std::optional<RayPath> trace_image_path(const Scene& scene, const PathCandidate& candidate) {
  return trace_image_path(PreparedScene(scene), candidate);
}

std::optional<RayPath> trace_image_path(const PreparedScene& ps, const PathCandidate& candidate) {
  const int k = candidate.order();
  if (!candidate.complete()) return std::nullopt;
  std::vector<Vec3> images(static_cast<std::size_t>(k) + 1);
  images[0] = ps.scene->tx;
  for (int j = 0; j < k; ++j) {
    const PreparedTriangle& pt = ps.tris[static_cast<std::size_t>(candidate.sequence[j])];
    images[static_cast<std::size_t>(j + 1)] =
        mirror_point(images[static_cast<std::size_t>(j)], pt.v0, pt.normal);
  }
  RayPath path;
  if (!back_trace(ps, candidate.sequence.data(), k, images, path)) return std::nullopt;
  return path;
}

bool is_occluded(const Scene& scene, const Vec3& a, const Vec3& b,
                 const std::unordered_set<int>& ignore) {
  const PreparedScene ps(scene);
  const Vec3 ab = b - a;
  const double len = norm(ab);
  const double eps_t = ps.eps_hit / len;
  for (std::size_t i = 0; i < ps.tris.size(); ++i) {
    if (ignore.count(scene.triangles[i].id)) continue;
    if (segment_hits_triangle(ps.tris[i], a, ab, eps_t, 1.0 - eps_t)) return true;
  }
  return false;
}

bool is_occluded(const PreparedScene& ps, const Vec3& a, const Vec3& b, int ignore_a,
                 int ignore_b) {
  const Vec3 ab = b - a;
  const double len = norm(ab);
  const double eps_t = ps.eps_hit / len;
  const std::size_t n = ps.tris.size();
  for (std::size_t i = 0; i < n; ++i) {
    const int id = ps.scene->triangles[i].id;
    if (id == ignore_a || id == ignore_b) continue;
    if (segment_hits_triangle(ps.tris[i], a, ab, eps_t, 1.0 - eps_t)) return true;
  }
  return false;
}

ValidationResult validate(const Scene& scene, const PathCandidate& candidate) {
  return validate(PreparedScene(scene), candidate);
}

ValidationResult validate(const PreparedScene& ps, const PathCandidate& candidate) {
  auto path = trace_image_path(ps, candidate);
  if (!path) return {};
  if (!path_unobstructed(ps, candidate.sequence.data(), candidate.order(), *path)) return {};
  return {1, std::move(path)};
}

int line_of_sight(const Scene& scene) { return line_of_sight(PreparedScene(scene)); }

int line_of_sight(const PreparedScene& ps) {
  return is_occluded(ps, ps.scene->tx, ps.scene->rx, -1, -1) ? 0 : 1;
}

std::uint64_t candidate_count(std::size_t n_objects, int k, bool no_repeat) {
  if (n_objects == 0) return 0;
  const long double n = static_cast<long double>(n_objects);
  long double total = n;
  for (int i = 1; i < k; ++i) total *= no_repeat ? (n - 1.0L) : n;
  if (total > static_cast<long double>(std::numeric_limits<std::uint64_t>::max())) {
    return std::numeric_limits<std::uint64_t>::max();
  }
  return static_cast<std::uint64_t>(total);
}

std::vector<PathCandidate> enumerate_valid_paths(const Scene& scene, int k, bool no_repeat,
                                                 std::uint64_t budget) {
  return enumerate_valid_paths(PreparedScene(scene), k, no_repeat, budget);
}

std::vector<PathCandidate> enumerate_valid_paths(const PreparedScene& ps, int k, bool no_repeat,
                                                 std::uint64_t budget) {
  const std::size_t n = ps.tris.size();
  const std::uint64_t total = candidate_count(n, k, no_repeat);
  if (total > budget) {
    throw BudgetExceeded("enumerate_valid_paths: " + std::to_string(total) +
                         " candidates exceed the configured cap of " + std::to_string(budget));
  }
  std::vector<PathCandidate> valid;
  if (n == 0 || k < 1) return valid;

  // DFS over prefixes so forward images are shared between candidates that
  // differ only in their tails.
  std::vector<std::int32_t> seq(static_cast<std::size_t>(k), -1);
  std::vector<Vec3> images(static_cast<std::size_t>(k) + 1);
  images[0] = ps.scene->tx;
  RayPath scratch;

  auto dfs = [&](auto&& self, int depth) -> void {
    for (std::size_t i = 0; i < n; ++i) {
      if (no_repeat && depth > 0 &&
          seq[static_cast<std::size_t>(depth - 1)] == static_cast<std::int32_t>(i)) {
        continue;
      }
      seq[static_cast<std::size_t>(depth)] = static_cast<std::int32_t>(i);
      const PreparedTriangle& pt = ps.tris[i];
      images[static_cast<std::size_t>(depth + 1)] =
          mirror_point(images[static_cast<std::size_t>(depth)], pt.v0, pt.normal);
      if (depth + 1 == k) {
        if (back_trace(ps, seq.data(), k, images, scratch) &&
            path_unobstructed(ps, seq.data(), k, scratch)) {
          valid.push_back(PathCandidate{seq});
        }
      } else {
        self(self, depth + 1);
      }
    }
    seq[static_cast<std::size_t>(depth)] = -1;
  };
  dfs(dfs, 0);
  return valid;
}

double reflection_law_residual(const Scene& scene, const PathCandidate& candidate,
                               const RayPath& path) {
  double worst = 0.0;
  for (int j = 1; j <= candidate.order(); ++j) {
    const Triangle& tri = scene.triangles[static_cast<std::size_t>(candidate.sequence[j - 1])];
    const Vec3 n = triangle_normal(tri);
    const Vec3 in_dir = normalized(path.points[static_cast<std::size_t>(j)] -
                                   path.points[static_cast<std::size_t>(j - 1)]);
    const Vec3 out_dir = normalized(path.points[static_cast<std::size_t>(j + 1)] -
                                    path.points[static_cast<std::size_t>(j)]);
    const double cos_in = std::clamp(std::abs(dot(in_dir, n)), -1.0, 1.0);
    const double cos_out = std::clamp(std::abs(dot(out_dir, n)), -1.0, 1.0);
    worst = std::max(worst, std::abs(std::acos(cos_in) - std::acos(cos_out)));
  }
  return worst;
}

}  // namespace raypath

#pragma once

#include <cstdint>
#include <optional>
#include <unordered_set>
#include <vector>

#include "raypath/geometry.hpp"

namespace raypath {

struct Triangle {
  Vec3 v0, v1, v2;
  int id = 0;  // object index in [0, N)
};

inline Vec3 triangle_normal(const Triangle& t) {
  return normalized(cross(t.v1 - t.v0, t.v2 - t.v0));
}
inline Vec3 triangle_centroid(const Triangle& t) { return (t.v0 + t.v1 + t.v2) / 3.0; }
inline double triangle_area(const Triangle& t) {
  return 0.5 * norm(cross(t.v1 - t.v0, t.v2 - t.v0));
}

struct Scene {
  std::vector<Triangle> triangles;
  Vec3 tx, rx;

  std::size_t object_count() const { return triangles.size(); }
};

// Bounding-box diagonal over all vertices plus tx/rx; |tx-rx| for an empty
// scene. Used to scale the occlusion epsilon and distance floors.
double scene_diameter(const Scene& scene);

// Ordered object-index sequence; -1 marks slots not chosen yet. Once a -1
// appears all later entries must be -1.
struct PathCandidate {
  std::vector<std::int32_t> sequence;

  static PathCandidate empty(int k) { return PathCandidate{std::vector<std::int32_t>(k, -1)}; }
  int order() const { return static_cast<int>(sequence.size()); }
  int chosen_count() const {
    int n = 0;
    while (n < order() && sequence[n] >= 0) ++n;
    return n;
  }
  bool complete() const { return chosen_count() == order(); }
  bool prefix_complete() const {
    bool seen_hole = false;
    for (std::int32_t v : sequence) {
      if (v < 0) {
        seen_hole = true;
      } else if (seen_hole) {
        return false;
      }
    }
    return true;
  }
  bool operator==(const PathCandidate& o) const { return sequence == o.sequence; }
  bool operator<(const PathCandidate& o) const { return sequence < o.sequence; }
};

struct PathCandidateHash {
  std::size_t operator()(const PathCandidate& c) const {
    std::size_t h = 0x9e3779b97f4a7c15ULL ^ c.sequence.size();
    for (std::int32_t v : c.sequence) {
      h ^= static_cast<std::size_t>(v) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
  }
};

// Geometric realization of a complete candidate: tx, K interaction points, rx.
struct RayPath {
  std::vector<Vec3> points;
  double length = 0.0;
};

struct Hit {
  double t;
  Vec3 point;
};

// Moller-Trumbore against a closed triangle (boundary counts as a hit).
// `dir` must be unit length; returns the hit with t > t_min, or nothing.
std::optional<Hit> ray_triangle_intersect(const Vec3& origin, const Vec3& dir,
                                          const Triangle& tri, double t_min = 1e-9);

// Reflection of p across the supporting plane of tri.
Vec3 mirror_across_plane(const Vec3& p, const Triangle& tri);

// Precomputed per-scene data for the hot tracing paths (plane equations,
// centroids, occlusion epsilon). Pure views; does not own the scene.
struct PreparedTriangle {
  Vec3 v0, e1, e2;      // v0 plus edge vectors v1-v0, v2-v0
  Vec3 normal;          // unit
  Vec3 centroid;
  double d00, d01, d11, inv_denom;  // barycentric precomputation
};

struct PreparedScene {
  const Scene* scene = nullptr;
  std::vector<PreparedTriangle> tris;
  double diameter = 0.0;
  double eps_hit = 0.0;  // 1e-6 * diameter

  explicit PreparedScene(const Scene& s);
};

// Image-method solve for a complete candidate. Mirrors tx forward across the
// candidate planes, then back-traces segment/plane intersections from rx.
// Succeeds only if every interaction point lies in its closed triangle and
// incident/outgoing points sit strictly on the same side of each reflecting
// plane (triangles are two-sided). Occlusion is not checked here.
std::optional<RayPath> trace_image_path(const Scene& scene, const PathCandidate& candidate);
std::optional<RayPath> trace_image_path(const PreparedScene& ps, const PathCandidate& candidate);

// True iff any triangle not in `ignore` crosses the open segment (a, b);
// hits within eps_hit (meters) of either endpoint do not count.
bool is_occluded(const Scene& scene, const Vec3& a, const Vec3& b,
                 const std::unordered_set<int>& ignore = {});
bool is_occluded(const PreparedScene& ps, const Vec3& a, const Vec3& b, int ignore_a, int ignore_b);

struct ValidationResult {
  int reward = 0;  // 1 iff geometrically valid and unobstructed
  std::optional<RayPath> path;
};

// Binary reward: image-method trace succeeds and every segment is clear of
// obstructions (the triangles interacting at a segment's endpoints are
// exempt from that segment's occlusion test).
ValidationResult validate(const Scene& scene, const PathCandidate& candidate);
ValidationResult validate(const PreparedScene& ps, const PathCandidate& candidate);

// 1 iff the direct tx->rx segment is unobstructed.
int line_of_sight(const Scene& scene);
int line_of_sight(const PreparedScene& ps);

inline constexpr std::uint64_t kDefaultEnumerationBudget = 5'000'000;

std::uint64_t candidate_count(std::size_t n_objects, int k, bool no_repeat);

// All reward-1 candidates of interaction order k, in lexicographic order.
// no_repeat skips sequences with consecutive equal entries. Throws
// BudgetExceeded when the candidate count exceeds `budget`.
std::vector<PathCandidate> enumerate_valid_paths(const Scene& scene, int k, bool no_repeat = false,
                                                 std::uint64_t budget = kDefaultEnumerationBudget);
std::vector<PathCandidate> enumerate_valid_paths(const PreparedScene& ps, int k,
                                                 bool no_repeat = false,
                                                 std::uint64_t budget = kDefaultEnumerationBudget);

// Largest angular deviation from the specular reflection law over the
// interior points of a realized path, in radians.
double reflection_law_residual(const Scene& scene, const PathCandidate& candidate,
                               const RayPath& path);

}  // namespace raypath

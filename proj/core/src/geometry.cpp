#include "raypath/geometry.hpp"

#include <algorithm>

#include "raypath/errors.hpp"

namespace raypath {

CanonicalFrame canonical_frame(const Vec3& tx, const Vec3& rx) {
  const Vec3 link = rx - tx;
  const double s = norm(link);
  if (s <= 1e-12) {
    throw CoincidentEndpoints("canonical_frame: tx and rx coincide (distance <= 1e-12 m)");
  }
  const Vec3 w = link / s;
  const Vec3 e_z{0.0, 0.0, 1.0};
  Vec3 u;
  const Vec3 w_cross_ez = cross(w, e_z);
  const double c = norm(w_cross_ez);
  if (c > 1e-9) {
    u = w_cross_ez / c;
  } else {
    // vertical link: pick a fixed lateral axis and re-orthogonalize so the
    // basis stays orthonormal even when w is only approximately +-e_z
    u = Vec3{1.0, 0.0, 0.0};
    u = normalized(u - dot(u, w) * w);
  }
  const Vec3 v = cross(w, u);
  return CanonicalFrame{{u, v, w}, s, tx};
}

Vec3 to_canonical(const CanonicalFrame& frame, const Vec3& p) {
  const Vec3 q = (p - frame.origin) / frame.scale;
  return {dot(frame.basis[0], q), dot(frame.basis[1], q), dot(frame.basis[2], q)};
}

std::vector<Vec3> to_canonical(const CanonicalFrame& frame, const std::vector<Vec3>& points) {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const Vec3& p : points) out.push_back(to_canonical(frame, p));
  return out;
}

double orthonormality_defect(const CanonicalFrame& frame) {
  double worst = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      const double g = dot(frame.basis[i], frame.basis[j]) - (i == j ? 1.0 : 0.0);
      worst = std::max(worst, std::abs(g));
    }
  }
  return worst;
}

}  // namespace raypath

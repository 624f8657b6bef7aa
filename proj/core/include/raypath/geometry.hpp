#pragma once

#include <array>
#include <cmath>
#include <vector>

namespace raypath {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm2(const Vec3& v) { return dot(v, v); }
inline double norm(const Vec3& v) { return std::sqrt(norm2(v)); }
inline Vec3 normalized(const Vec3& v) { return v / norm(v); }

inline bool is_finite(const Vec3& v) {
  return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

// TX-origin, link-scaled, azimuth-fixed frame. Rows of `basis` are the local
// axes u, v, w; mapping a world point p gives basis * ((p - origin) / scale),
// which sends TX to (0,0,0) and RX to (0,0,1).
struct CanonicalFrame {
  std::array<Vec3, 3> basis;  // rows u, v, w
  double scale = 1.0;         // link distance |rx - tx|, meters
  Vec3 origin;                // = tx
};

// Builds the canonical frame for a TX->RX link. w is aligned with rx - tx and
// u is horizontal (perpendicular to the global vertical e_z) whenever the
// link is not vertical. For near-vertical links (|w x e_z| <= 1e-9) a fixed
// fallback u = (1,0,0) is used, re-orthogonalized against w.
// Throws CoincidentEndpoints when |rx - tx| <= 1e-12.
CanonicalFrame canonical_frame(const Vec3& tx, const Vec3& rx);

Vec3 to_canonical(const CanonicalFrame& frame, const Vec3& p);
std::vector<Vec3> to_canonical(const CanonicalFrame& frame, const std::vector<Vec3>& points);

// max |R R^T - I| entry; frames constructed above keep this <= 1e-9
double orthonormality_defect(const CanonicalFrame& frame);

}  // namespace raypath

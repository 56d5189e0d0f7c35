#pragma once

#include <algorithm>
#include <utility>

#include "skylink/common.hpp"

namespace skylink {

// Axis-aligned rectangle on the ground plane.
struct Rect {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  friend bool operator==(const Rect&, const Rect&) = default;

  bool contains(double x, double y) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
  }
};

// Slab test of the closed segment a->b against the closed box
// [r.x_min, r.x_max] x [r.y_min, r.y_max] x [0, height].
inline bool segment_intersects_box(const Vec3& a, const Vec3& b, const Rect& r,
                                   double height) {
  double t0 = 0.0;
  double t1 = 1.0;
  const Vec3 d = b - a;
  auto clip = [&](double origin, double dir, double lo, double hi) {
    if (dir == 0.0) return origin >= lo && origin <= hi;
    double ta = (lo - origin) / dir;
    double tb = (hi - origin) / dir;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    return t0 <= t1;
  };
  return clip(a.x, d.x, r.x_min, r.x_max) && clip(a.y, d.y, r.y_min, r.y_max) &&
         clip(a.z, d.z, 0.0, height);
}

}  // namespace skylink

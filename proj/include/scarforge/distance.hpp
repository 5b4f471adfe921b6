#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "scarforge/grid.hpp"

namespace scarforge {
namespace detail {

// Felzenszwalb-Huttenlocher 1-D squared distance transform, with anisotropic
// sample step. f holds squared distances on entry.
inline void edt_1d(std::vector<double>& f, double step) {
  const int n = static_cast<int>(f.size());
  if (n == 0) return;
  static thread_local std::vector<int> v;
  static thread_local std::vector<double> z, d;
  v.assign(static_cast<std::size_t>(n), 0);
  z.assign(static_cast<std::size_t>(n + 1), 0.0);
  d.assign(static_cast<std::size_t>(n), 0.0);
  const double s2 = step * step;
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s;
    while (true) {
      const int p = v[static_cast<std::size_t>(k)];
      s = ((f[static_cast<std::size_t>(q)] + s2 * q * q) - (f[static_cast<std::size_t>(p)] + s2 * p * p)) /
          (2.0 * s2 * (q - p));
      if (s <= z[static_cast<std::size_t>(k)]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    z[static_cast<std::size_t>(k)] = s;
    z[static_cast<std::size_t>(k + 1)] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[static_cast<std::size_t>(k + 1)] < q) ++k;
    const int p = v[static_cast<std::size_t>(k)];
    d[static_cast<std::size_t>(q)] = s2 * (q - p) * (q - p) + f[static_cast<std::size_t>(p)];
  }
  std::copy(d.begin(), d.end(), f.begin());
}

inline void edt_pass(std::vector<double>& sq, const Index3& dims, const Vec3& spacing, int axis) {
  const std::size_t sy = static_cast<std::size_t>(dims[0]);
  const std::size_t sz = static_cast<std::size_t>(dims[0]) * dims[1];
  const std::size_t stride = axis == 0 ? 1 : (axis == 1 ? sy : sz);
  const int n = dims[axis];
  const int d0 = axis == 0 ? dims[1] : dims[0];
  const int d1 = axis == 2 ? dims[1] : dims[2];
  const std::size_t step0 = axis == 0 ? sy : 1;
  const std::size_t step1 = axis == 2 ? sy : sz;
  std::vector<double> line(static_cast<std::size_t>(n));
  for (int b = 0; b < d1; ++b) {
    for (int a = 0; a < d0; ++a) {
      const std::size_t base = a * step0 + b * step1;
      for (int i = 0; i < n; ++i) line[static_cast<std::size_t>(i)] = sq[base + i * stride];
      edt_1d(line, spacing[axis]);
      for (int i = 0; i < n; ++i) sq[base + i * stride] = line[static_cast<std::size_t>(i)];
    }
  }
}

// Squared Euclidean distance (mm^2) to the nearest foreground voxel center.
inline std::vector<double> squared_edt(const Mask3& m) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> sq(m.voxel_count());
  for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = m.data[i] ? 0.0 : inf;
  for (int axis = 0; axis < 3; ++axis) edt_pass(sq, m.dims, m.spacing, axis);
  return sq;
}

}  // namespace detail

// Signed Euclidean distance (mm): positive outside the mask, negative inside,
// optionally clamped to +-cap_mm to keep far-field values bounded.
inline Volume3 signed_distance(const Mask3& m, double cap_mm = 0.0) {
  Mask3 inv = m;
  for (auto& v : inv.data) v = v ? 0 : 1;
  const auto d_out = detail::squared_edt(m);    // distance to foreground
  const auto d_in = detail::squared_edt(inv);   // distance to background
  Volume3 sdt;
  sdt.dims = m.dims;
  sdt.spacing = m.spacing;
  sdt.origin = m.origin;
  sdt.orientation = m.orientation;
  sdt.data.resize(m.voxel_count());
  for (std::size_t i = 0; i < sdt.data.size(); ++i) {
    double d = m.data[i] ? -std::sqrt(d_in[i]) : std::sqrt(d_out[i]);
    if (cap_mm > 0.0) d = std::clamp(d, -cap_mm, cap_mm);
    sdt.data[i] = static_cast<float>(d);
  }
  return sdt;
}

}  // namespace scarforge

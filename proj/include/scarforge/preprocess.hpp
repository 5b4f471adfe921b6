#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <type_traits>

#include "scarforge/grid.hpp"

namespace scarforge {

enum class Interp { Nearest, Trilinear };

namespace detail {

// Stored index -> canonical index under orientation o.
inline void to_canonical_index(const AxisOrientation& o, const Index3& dims, int s0, int s1,
                               int s2, Index3& c) {
  const int s[3] = {s0, s1, s2};
  for (int a = 0; a < 3; ++a) {
    c[static_cast<std::size_t>(o.axis[a])] = o.flip[a] ? dims[a] - 1 - s[a] : s[a];
  }
}

}  // namespace detail

// Permutes/flips voxel data so the stored orientation becomes `target`.
// Geometry (dims, spacing) is permuted accordingly; reorienting back to the
// original orientation restores the input exactly.
template <typename T>
Grid3<T> reorient(const Grid3<T>& v, const AxisOrientation& target) {
  if (!v.orientation.is_permutation() || !target.is_permutation()) {
    fail(ErrorCode::InvalidArgument, "reorient: invalid orientation code");
  }
  if (v.orientation == target) return v;

  // Canonical dims/spacing are shared by both layouts.
  Index3 cdims;
  Vec3 cspacing;
  for (int a = 0; a < 3; ++a) {
    cdims[static_cast<std::size_t>(v.orientation.axis[a])] = v.dims[a];
    cspacing[static_cast<std::size_t>(v.orientation.axis[a])] = v.spacing[a];
  }
  Grid3<T> out;
  out.orientation = target;
  out.origin = v.origin;
  for (int a = 0; a < 3; ++a) {
    out.dims[a] = cdims[static_cast<std::size_t>(target.axis[a])];
    out.spacing[a] = cspacing[static_cast<std::size_t>(target.axis[a])];
  }
  out.data.resize(v.voxel_count());
  Index3 c;
  for (int k = 0; k < out.dims[2]; ++k) {
    for (int j = 0; j < out.dims[1]; ++j) {
      for (int i = 0; i < out.dims[0]; ++i) {
        detail::to_canonical_index(target, out.dims, i, j, k, c);
        // Map canonical index back into the source layout.
        int s[3];
        for (int a = 0; a < 3; ++a) {
          const int ca = c[static_cast<std::size_t>(v.orientation.axis[a])];
          s[a] = v.orientation.flip[a] ? v.dims[a] - 1 - ca : ca;
        }
        out.at(i, j, k) = v.at(s[0], s[1], s[2]);
      }
    }
  }
  return out;
}

// Resamples onto a grid with the requested spacing, preserving physical
// extent within one voxel. Integral grids (masks, labels) accept nearest only.
template <typename T>
Grid3<T> resample(const Grid3<T>& v, const Vec3& new_spacing, Interp interp) {
  for (double s : new_spacing) {
    if (!(s > 0.0)) fail(ErrorCode::InvalidArgument, "resample: spacing must be > 0");
  }
  if constexpr (std::is_integral_v<T>) {
    if (interp == Interp::Trilinear) {
      fail(ErrorCode::InvalidArgument, "resample: trilinear not valid for mask/label grids");
    }
  }
  Grid3<T> out;
  out.orientation = v.orientation;
  out.origin = v.origin;
  out.spacing = new_spacing;
  for (int a = 0; a < 3; ++a) {
    const double extent = (v.dims[a] - 1) * v.spacing[a];
    out.dims[a] = std::max(1, static_cast<int>(std::floor(extent / new_spacing[a] + 1e-9)) + 1);
  }
  out.data.resize(out.voxel_count());
  const double rx = new_spacing[0] / v.spacing[0];
  const double ry = new_spacing[1] / v.spacing[1];
  const double rz = new_spacing[2] / v.spacing[2];
  for (int k = 0; k < out.dims[2]; ++k) {
    const double ck = std::min<double>(k * rz, v.dims[2] - 1);
    for (int j = 0; j < out.dims[1]; ++j) {
      const double cj = std::min<double>(j * ry, v.dims[1] - 1);
      for (int i = 0; i < out.dims[0]; ++i) {
        const double ci = std::min<double>(i * rx, v.dims[0] - 1);
        if constexpr (std::is_same_v<T, float>) {
          if (interp == Interp::Trilinear) {
            out.at(i, j, k) = static_cast<float>(sample_trilinear(v, ci, cj, ck));
            continue;
          }
        }
        out.at(i, j, k) = v.at(static_cast<int>(std::lround(ci)), static_cast<int>(std::lround(cj)),
                               static_cast<int>(std::lround(ck)));
      }
    }
  }
  return out;
}

template <typename T>
struct CropResult {
  Grid3<T> grid;
  Index3 offset;  // lower corner of the crop in the source grid
};

// Crops to the mask's tight bounding box dilated by `margin_voxels`, clamped
// to the volume bounds. The offset allows exact paste-back.
template <typename T>
CropResult<T> crop_to_bbox(const Grid3<T>& v, const Mask3& m, int margin_voxels) {
  if (v.dims != m.dims) fail(ErrorCode::GeometryMismatch, "crop_to_bbox: dims differ");
  Index3 lo{v.dims[0], v.dims[1], v.dims[2]};
  Index3 hi{-1, -1, -1};
  for (int k = 0; k < m.dims[2]; ++k) {
    for (int j = 0; j < m.dims[1]; ++j) {
      for (int i = 0; i < m.dims[0]; ++i) {
        if (!m.at(i, j, k)) continue;
        lo[0] = std::min(lo[0], i);
        lo[1] = std::min(lo[1], j);
        lo[2] = std::min(lo[2], k);
        hi[0] = std::max(hi[0], i);
        hi[1] = std::max(hi[1], j);
        hi[2] = std::max(hi[2], k);
      }
    }
  }
  if (hi[0] < 0) fail(ErrorCode::EmptyMask, "crop_to_bbox: mask is empty");
  for (int a = 0; a < 3; ++a) {
    lo[a] = std::max(0, lo[a] - margin_voxels);
    hi[a] = std::min(v.dims[a] - 1, hi[a] + margin_voxels);
  }
  CropResult<T> r;
  r.offset = lo;
  r.grid.dims = {hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1};
  r.grid.spacing = v.spacing;
  r.grid.orientation = v.orientation;
  r.grid.origin = {v.origin[0] + lo[0] * v.spacing[0], v.origin[1] + lo[1] * v.spacing[1],
                   v.origin[2] + lo[2] * v.spacing[2]};
  r.grid.data.resize(r.grid.voxel_count());
  for (int k = 0; k < r.grid.dims[2]; ++k) {
    for (int j = 0; j < r.grid.dims[1]; ++j) {
      for (int i = 0; i < r.grid.dims[0]; ++i) {
        r.grid.at(i, j, k) = v.at(lo[0] + i, lo[1] + j, lo[2] + k);
      }
    }
  }
  return r;
}

template <typename T>
void paste_from_bbox(Grid3<T>& dst, const Grid3<T>& crop, const Index3& offset) {
  for (int k = 0; k < crop.dims[2]; ++k) {
    for (int j = 0; j < crop.dims[1]; ++j) {
      for (int i = 0; i < crop.dims[0]; ++i) {
        dst.at(offset[0] + i, offset[1] + j, offset[2] + k) = crop.at(i, j, k);
      }
    }
  }
}

// Linear min->lo, max->hi; a constant image maps to the midpoint.
inline Volume3 rescale_intensity(const Volume3& v, double lo = -1.0, double hi = 1.0) {
  Volume3 out = v;
  if (v.data.empty()) return out;
  float mn = v.data[0], mx = v.data[0];
  for (float x : v.data) {
    mn = std::min(mn, x);
    mx = std::max(mx, x);
  }
  if (mn == mx) {
    const float mid = static_cast<float>(0.5 * (lo + hi));
    std::fill(out.data.begin(), out.data.end(), mid);
    return out;
  }
  const double scale = (hi - lo) / (static_cast<double>(mx) - mn);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = static_cast<float>(lo + (static_cast<double>(v.data[i]) - mn) * scale);
  }
  return out;
}

// Zero mean, unit population std; a constant image maps to all zeros.
inline Volume3 zscore_normalize(const Volume3& v) {
  Volume3 out = v;
  const std::size_t n = v.data.size();
  if (n == 0) return out;
  double mean = 0.0;
  for (float x : v.data) mean += x;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (float x : v.data) {
    const double d = x - mean;
    var += d * d;
  }
  var /= static_cast<double>(n);
  if (var == 0.0) {
    std::fill(out.data.begin(), out.data.end(), 0.f);
    return out;
  }
  const double inv_std = 1.0 / std::sqrt(var);
  for (std::size_t i = 0; i < n; ++i) {
    out.data[i] = static_cast<float>((v.data[i] - mean) * inv_std);
  }
  return out;
}

}  // namespace scarforge

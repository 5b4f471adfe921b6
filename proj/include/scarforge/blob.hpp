#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "scarforge/errors.hpp"
#include "scarforge/filter.hpp"
#include "scarforge/grid.hpp"
#include "scarforge/rng.hpp"

namespace scarforge {

namespace detail {

// Ranks voxels by field value, highest first, with linear-index tie-break so
// quantile selection is a total order.
inline std::vector<std::size_t> descending_order(const std::vector<float>& vals) {
  std::vector<std::size_t> order(vals.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return vals[a] > vals[b]; });
  return order;
}

inline Mask3 select_top(const Volume3& field, const std::vector<std::size_t>& order, std::size_t k) {
  Mask3 m;
  m.dims = field.dims;
  m.spacing = field.spacing;
  m.origin = field.origin;
  m.orientation = field.orientation;
  m.data.assign(field.voxel_count(), 0);
  if (k > m.data.size()) k = m.data.size();
  for (std::size_t r = 0; r < k; ++r) m.data[order[r]] = 1;
  return m;
}

}  // namespace detail

// Continuous blob field: anisotropically smoothed white noise (z-scored)
// plus a quadratic radial envelope that concentrates mass in an ellipsoid
// whose axes follow the anisotropy ratios. The envelope is what gives
// thresholded blobs a global elongation along high-anisotropy axes; pure
// stationary texture spreads foreground evenly across the block and its
// second moments stay isotropic no matter how the correlation lengths are
// set.
inline Volume3 blob_field(const Index3& dims, const Vec3& anisotropy, Rng& rng,
                          double sigma_base = 2.0, double envelope_gain = 2.0) {
  for (double a : anisotropy) {
    if (!(a >= 1.0)) fail(ErrorCode::InvalidArgument, "blob_field: anisotropy components must be >= 1");
  }
  Volume3 f;
  f.dims = dims;
  f.spacing = {1.0, 1.0, 1.0};
  f.origin = {0.0, 0.0, 0.0};
  f.data.resize(f.voxel_count());
  for (auto& v : f.data) v = static_cast<float>(rng.normal());

  f = gaussian_smooth(f, Vec3{sigma_base * anisotropy[0], sigma_base * anisotropy[1],
                              sigma_base * anisotropy[2]});

  double mean = 0.0;
  for (float v : f.data) mean += v;
  mean /= static_cast<double>(f.data.size());
  double var = 0.0;
  for (float v : f.data) var += (v - mean) * (v - mean);
  var /= static_cast<double>(f.data.size());
  const double inv_std = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;

  const double geomean = std::cbrt(anisotropy[0] * anisotropy[1] * anisotropy[2]);
  Vec3 radius;
  Vec3 center;
  for (int a = 0; a < 3; ++a) {
    radius[static_cast<std::size_t>(a)] =
        0.5 * dims[static_cast<std::size_t>(a)] * anisotropy[static_cast<std::size_t>(a)] / geomean;
    center[static_cast<std::size_t>(a)] = 0.5 * (dims[static_cast<std::size_t>(a)] - 1);
  }
  std::size_t idx = 0;
  for (int k = 0; k < dims[2]; ++k) {
    const double dz = (k - center[2]) / radius[2];
    for (int j = 0; j < dims[1]; ++j) {
      const double dy = (j - center[1]) / radius[1];
      for (int i = 0; i < dims[0]; ++i, ++idx) {
        const double dx = (i - center[0]) / radius[0];
        const double env = 1.0 - (dx * dx + dy * dy + dz * dz);
        f.data[idx] = static_cast<float>((f.data[idx] - mean) * inv_std + envelope_gain * env);
      }
    }
  }
  return f;
}

// Exact-quantile threshold: exactly round(fraction * N) voxels become
// foreground, chosen by field rank.
inline Mask3 threshold_quantile(const Volume3& field, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    fail(ErrorCode::InvalidArgument, "threshold_quantile: fraction must be in [0, 1]");
  }
  const auto order = detail::descending_order(field.data);
  const auto k = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(field.voxel_count())));
  return detail::select_top(field, order, k);
}

inline Mask3 generate_blob(const Index3& dims, double porosity, const Vec3& anisotropy, Rng& rng) {
  if (!(porosity > 0.0 && porosity <= 1.0)) {
    fail(ErrorCode::InvalidArgument, "generate_blob: porosity must be in (0, 1]");
  }
  const Volume3 f = blob_field(dims, anisotropy, rng);
  return threshold_quantile(f, porosity);
}

}  // namespace scarforge

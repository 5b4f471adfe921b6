#pragma once

#include <cmath>
#include <vector>

#include "scarforge/errors.hpp"
#include "scarforge/grid.hpp"

namespace scarforge {
namespace detail {

struct BinMap {
  float lo = 0.f;
  double scale = 0.0;  // 0 for constant images: everything lands in bin 0
  int bins = 1;

  int bin(float v) const {
    if (scale == 0.0) return 0;
    int b = static_cast<int>((static_cast<double>(v) - lo) * scale);
    if (b < 0) b = 0;
    if (b >= bins) b = bins - 1;
    return b;
  }
};

inline BinMap make_bin_map(const Volume3& v, int bins) {
  float mn = v.data[0], mx = v.data[0];
  for (float x : v.data) {
    mn = std::min(mn, x);
    mx = std::max(mx, x);
  }
  BinMap m;
  m.lo = mn;
  m.bins = bins;
  m.scale = mx > mn ? static_cast<double>(bins) / (static_cast<double>(mx) - mn) : 0.0;
  return m;
}

}  // namespace detail

// Mutual information in nats from a dense joint histogram with per-image
// min/max bin edges (no Parzen smoothing).
inline double mutual_information(const Volume3& a, const Volume3& b, int bins = 32) {
  if (a.dims != b.dims) fail(ErrorCode::GeometryMismatch, "mutual_information: dims differ");
  if (bins < 2) fail(ErrorCode::InvalidArgument, "mutual_information: bins must be >= 2");
  const auto ma = detail::make_bin_map(a, bins);
  const auto mb = detail::make_bin_map(b, bins);
  std::vector<double> joint(static_cast<std::size_t>(bins) * bins, 0.0);
  const std::size_t n = a.data.size();
  for (std::size_t i = 0; i < n; ++i) {
    joint[static_cast<std::size_t>(ma.bin(a.data[i])) * bins + mb.bin(b.data[i])] += 1.0;
  }
  std::vector<double> pa(static_cast<std::size_t>(bins), 0.0), pb(static_cast<std::size_t>(bins), 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int i = 0; i < bins; ++i) {
    for (int j = 0; j < bins; ++j) {
      const double p = joint[static_cast<std::size_t>(i) * bins + j] * inv_n;
      joint[static_cast<std::size_t>(i) * bins + j] = p;
      pa[static_cast<std::size_t>(i)] += p;
      pb[static_cast<std::size_t>(j)] += p;
    }
  }
  double mi = 0.0;
  for (int i = 0; i < bins; ++i) {
    for (int j = 0; j < bins; ++j) {
      const double p = joint[static_cast<std::size_t>(i) * bins + j];
      if (p > 0.0) mi += p * std::log(p / (pa[static_cast<std::size_t>(i)] * pb[static_cast<std::size_t>(j)]));
    }
  }
  return std::max(0.0, mi);
}

// Marginal (Shannon) entropy in nats over the same binning as MI.
inline double histogram_entropy(const Volume3& a, int bins = 32) {
  if (bins < 2) fail(ErrorCode::InvalidArgument, "histogram_entropy: bins must be >= 2");
  const auto ma = detail::make_bin_map(a, bins);
  std::vector<double> pa(static_cast<std::size_t>(bins), 0.0);
  for (float x : a.data) pa[static_cast<std::size_t>(ma.bin(x))] += 1.0;
  const double inv_n = 1.0 / static_cast<double>(a.data.size());
  double h = 0.0;
  for (double c : pa) {
    const double p = c * inv_n;
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

}  // namespace scarforge

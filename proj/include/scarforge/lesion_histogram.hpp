#pragma once

#include <cmath>
#include <vector>

#include "scarforge/errors.hpp"
#include "scarforge/grid.hpp"

namespace scarforge {

// Normalized intensity histogram over a lesion region, carried as an opaque
// conditioning payload for noise predictors.
struct LesionHistogram {
  std::vector<double> edges;   // bin count + 1 monotone edges
  std::vector<double> masses;  // nonnegative, sums to 1

  std::size_t bins() const { return masses.size(); }
};

inline LesionHistogram lesion_histogram(const Volume3& v, const Mask3& m, int bins = 32) {
  require_same_dims2(v, m, "lesion_histogram");
  if (bins < 1) fail(ErrorCode::InvalidArgument, "lesion_histogram: bins must be >= 1");

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  std::size_t count = 0;
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    if (!m.data[i]) continue;
    lo = std::min(lo, static_cast<double>(v.data[i]));
    hi = std::max(hi, static_cast<double>(v.data[i]));
    ++count;
  }
  if (count == 0) fail(ErrorCode::EmptyMask, "lesion_histogram: mask is empty");

  LesionHistogram h;
  if (lo == hi) {
    h.edges = {lo, hi};
    h.masses = {1.0};
    return h;
  }
  h.edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int b = 0; b <= bins; ++b) {
    h.edges[static_cast<std::size_t>(b)] = lo + (hi - lo) * static_cast<double>(b) / bins;
  }
  h.masses.assign(static_cast<std::size_t>(bins), 0.0);
  const double scale = bins / (hi - lo);
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    if (!m.data[i]) continue;
    auto b = static_cast<int>((static_cast<double>(v.data[i]) - lo) * scale);
    if (b >= bins) b = bins - 1;
    if (b < 0) b = 0;
    h.masses[static_cast<std::size_t>(b)] += 1.0;
  }
  for (auto& mass : h.masses) mass /= static_cast<double>(count);
  return h;
}

}  // namespace scarforge

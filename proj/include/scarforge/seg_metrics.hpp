#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "scarforge/aha.hpp"
#include "scarforge/errors.hpp"
#include "scarforge/grid.hpp"

namespace scarforge {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
};

namespace detail {

template <typename T>
void require_same_geometry(const Grid3<T>& a, const Grid3<T>& b, const char* where) {
  if (!a.same_geometry(b)) fail(ErrorCode::GeometryMismatch, std::string(where) + ": geometry differs");
}

}  // namespace detail

inline ConfusionCounts confusion(const Mask3& pred, const Mask3& gt) {
  detail::require_same_geometry(pred, gt, "confusion");
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const bool p = pred.data[i] != 0;
    const bool g = gt.data[i] != 0;
    if (p && g) {
      ++c.tp;
    } else if (p && !g) {
      ++c.fp;
    } else if (!p && g) {
      ++c.fn;
    } else {
      ++c.tn;
    }
  }
  return c;
}

// Degenerate-denominator conventions: empty prediction and empty ground
// truth count as vacuous success (1.0); a nonempty side against an empty one
// scores 0.
inline double dice(const ConfusionCounts& c) {
  const auto denom = 2 * c.tp + c.fp + c.fn;
  if (denom == 0) return 1.0;
  return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

inline double precision(const ConfusionCounts& c) {
  if (c.tp + c.fp == 0) return c.fn == 0 ? 1.0 : 0.0;
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
}

inline double sensitivity(const ConfusionCounts& c) {
  if (c.tp + c.fn == 0) return c.fp == 0 ? 1.0 : 0.0;
  return static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
}

inline double specificity(const ConfusionCounts& c) {
  if (c.tn + c.fp == 0) return 1.0;  // no true negatives to reject, vacuously specific
  return static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
}

namespace detail {

inline void require_probabilities(const Volume3& p, const char* where) {
  for (float v : p.data) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      fail(ErrorCode::InvalidArgument, std::string(where) + ": probabilities must lie in [0, 1]");
    }
  }
}

}  // namespace detail

// 1 - (2*sum(p*g) + eps) / (sum(p) + sum(g) + eps)
inline double soft_dice_loss(const Volume3& p, const Mask3& gt, double eps = 1e-5) {
  require_same_dims2(p, gt, "soft_dice_loss");
  detail::require_probabilities(p, "soft_dice_loss");
  double inter = 0.0, sum_p = 0.0, sum_g = 0.0;
  for (std::size_t i = 0; i < p.data.size(); ++i) {
    const double pv = p.data[i];
    const double gv = gt.data[i] ? 1.0 : 0.0;
    inter += pv * gv;
    sum_p += pv;
    sum_g += gv;
  }
  return 1.0 - (2.0 * inter + eps) / (sum_p + sum_g + eps);
}

// -mean[w_fg*g*log(p) + w_bg*(1-g)*log(1-p)], probabilities clamped to
// [delta, 1-delta] before the logs.
inline double weighted_cross_entropy(const Volume3& p, const Mask3& gt, double w_fg, double w_bg,
                                     double delta = 1e-7) {
  require_same_dims2(p, gt, "weighted_cross_entropy");
  detail::require_probabilities(p, "weighted_cross_entropy");
  if (!(w_fg > 0.0 && w_bg > 0.0)) {
    fail(ErrorCode::InvalidArgument, "weighted_cross_entropy: weights must be > 0");
  }
  if (!(delta > 0.0 && delta < 0.5)) {
    fail(ErrorCode::InvalidArgument, "weighted_cross_entropy: delta must be in (0, 0.5)");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < p.data.size(); ++i) {
    double pv = p.data[i];
    pv = std::min(1.0 - delta, std::max(delta, pv));
    if (gt.data[i]) {
      sum += w_fg * std::log(pv);
    } else {
      sum += w_bg * std::log(1.0 - pv);
    }
  }
  return -sum / static_cast<double>(p.data.size());
}

// Per-case class-imbalance weight: background count over foreground count.
// An all-background case has nothing to weight; falls back to 1.
inline double balanced_fg_weight(const Mask3& gt) {
  const std::size_t fg = foreground_count(gt);
  if (fg == 0) return 1.0;
  return static_cast<double>(gt.voxel_count() - fg) / static_cast<double>(fg);
}

struct SegLossParams {
  double w_fg = 0.0;  // <= 0 means balance from the ground truth per case
  double w_bg = 1.0;
  double dice_eps = 1e-5;
  double wce_delta = 1e-7;
};

inline double seg_loss(const Volume3& p, const Mask3& gt, const SegLossParams& params = {}) {
  const double w_fg = params.w_fg > 0.0 ? params.w_fg : balanced_fg_weight(gt);
  return soft_dice_loss(p, gt, params.dice_eps) +
         weighted_cross_entropy(p, gt, w_fg, params.w_bg, params.wce_delta);
}

inline double volume_ml(const Mask3& m) {
  return static_cast<double>(foreground_count(m)) * voxel_volume_mm3(m.spacing) / 1000.0;
}

struct VolumeStats {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

inline VolumeStats cohort_volume_stats(const std::vector<double>& volumes) {
  if (volumes.empty()) fail(ErrorCode::InvalidArgument, "cohort_volume_stats: empty cohort");
  VolumeStats s;
  for (double v : volumes) s.mean += v;
  s.mean /= static_cast<double>(volumes.size());
  double var = 0.0;
  for (double v : volumes) var += (v - s.mean) * (v - s.mean);
  var /= static_cast<double>(volumes.size());
  s.stddev = std::sqrt(var);
  return s;
}

inline VolumeStats cohort_volume_stats(const std::vector<Mask3>& masks) {
  std::vector<double> volumes;
  volumes.reserve(masks.size());
  for (const auto& m : masks) volumes.push_back(volume_ml(m));
  return cohort_volume_stats(volumes);
}

// Signed per-segment difference pred - gt.
inline BullseyeTable bullseye_diff(const BullseyeTable& pred, const BullseyeTable& gt) {
  BullseyeTable d;
  for (std::size_t i = 0; i < d.values.size(); ++i) d.values[i] = pred.values[i] - gt.values[i];
  d.outside = pred.outside - gt.outside;
  return d;
}

}  // namespace scarforge

#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "scarforge/errors.hpp"
#include "scarforge/grid.hpp"
#include "scarforge/mi.hpp"
#include "scarforge/preprocess.hpp"

namespace scarforge {

using Mat3 = std::array<std::array<double, 3>, 3>;

// Rigid transform: p -> R(p - center) + center + translation, with R the
// Euler rotation Rz(az)*Ry(ay)*Rx(ax). All lengths in mm, angles in radians.
struct RigidTransform {
  Vec3 angles{0.0, 0.0, 0.0};       // (ax, ay, az)
  Vec3 translation{0.0, 0.0, 0.0};  // mm
  Vec3 center{0.0, 0.0, 0.0};       // rotation center, mm

  Mat3 rotation() const {
    const double ca = std::cos(angles[0]), sa = std::sin(angles[0]);
    const double cb = std::cos(angles[1]), sb = std::sin(angles[1]);
    const double cg = std::cos(angles[2]), sg = std::sin(angles[2]);
    return Mat3{{{cg * cb, cg * sb * sa - sg * ca, cg * sb * ca + sg * sa},
                 {sg * cb, sg * sb * sa + cg * ca, sg * sb * ca - cg * sa},
                 {-sb, cb * sa, cb * ca}}};
  }

  Vec3 apply(const Vec3& p) const {
    const Mat3 r = rotation();
    Vec3 q;
    for (int i = 0; i < 3; ++i) {
      q[i] = center[i] + translation[i];
      for (int j = 0; j < 3; ++j) q[i] += r[i][j] * (p[j] - center[j]);
    }
    return q;
  }
};

namespace detail {

inline Vec3 euler_from_matrix(const Mat3& r) {
  // Inverse of Rz*Ry*Rx; the gimbal branch (|r20| ~ 1) pins az to 0.
  const double sy = -r[2][0];
  if (std::abs(sy) < 1.0 - 1e-12) {
    return {std::atan2(r[2][1], r[2][2]), std::asin(sy), std::atan2(r[1][0], r[0][0])};
  }
  const double ay = sy > 0 ? M_PI / 2.0 : -M_PI / 2.0;
  return {std::atan2(-r[0][1], r[1][1]), ay, 0.0};
}

inline Mat3 matmul(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
    }
  }
  return c;
}

inline Mat3 transpose(const Mat3& a) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) c[i][j] = a[j][i];
  }
  return c;
}

inline Vec3 matvec(const Mat3& r, const Vec3& v) {
  return {r[0][0] * v[0] + r[0][1] * v[1] + r[0][2] * v[2],
          r[1][0] * v[0] + r[1][1] * v[1] + r[1][2] * v[2],
          r[2][0] * v[0] + r[2][1] * v[1] + r[2][2] * v[2]};
}

// (R, o) with T(p) = R p + o.
inline void to_affine(const RigidTransform& t, Mat3& r, Vec3& o) {
  r = t.rotation();
  const Vec3 rc = matvec(r, t.center);
  for (int i = 0; i < 3; ++i) o[i] = t.center[i] + t.translation[i] - rc[i];
}

inline RigidTransform from_affine(const Mat3& r, const Vec3& o, const Vec3& center) {
  RigidTransform t;
  t.angles = euler_from_matrix(r);
  t.center = center;
  const Vec3 rc = matvec(r, center);
  for (int i = 0; i < 3; ++i) t.translation[i] = o[i] + rc[i] - center[i];
  return t;
}

}  // namespace detail

// compose(a, b)(p) == a(b(p)); the result keeps a's center.
inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  Mat3 ra, rb;
  Vec3 oa, ob;
  detail::to_affine(a, ra, oa);
  detail::to_affine(b, rb, ob);
  const Mat3 r = detail::matmul(ra, rb);
  Vec3 o = detail::matvec(ra, ob);
  for (int i = 0; i < 3; ++i) o[i] += oa[i];
  return detail::from_affine(r, o, a.center);
}

inline RigidTransform inverse(const RigidTransform& t) {
  Mat3 r;
  Vec3 o;
  detail::to_affine(t, r, o);
  const Mat3 rt = detail::transpose(r);
  Vec3 oi = detail::matvec(rt, o);
  for (auto& v : oi) v = -v;
  return detail::from_affine(rt, oi, t.center);
}

// Resamples v through the transform: out(x) = v(T(x)). Out-of-domain -> fill.
inline Volume3 warp(const Volume3& v, const RigidTransform& t, Interp interp = Interp::Trilinear,
                    float fill = 0.f) {
  Volume3 out = v;
  Mat3 r;
  Vec3 o;
  detail::to_affine(t, r, o);
  for (int k = 0; k < v.dims[2]; ++k) {
    for (int j = 0; j < v.dims[1]; ++j) {
      for (int i = 0; i < v.dims[0]; ++i) {
        const Vec3 p = v.position(i, j, k);
        const Vec3 q = {r[0][0] * p[0] + r[0][1] * p[1] + r[0][2] * p[2] + o[0],
                        r[1][0] * p[0] + r[1][1] * p[1] + r[1][2] * p[2] + o[1],
                        r[2][0] * p[0] + r[2][1] * p[1] + r[2][2] * p[2] + o[2]};
        const double ci = (q[0] - v.origin[0]) / v.spacing[0];
        const double cj = (q[1] - v.origin[1]) / v.spacing[1];
        const double ck = (q[2] - v.origin[2]) / v.spacing[2];
        out.at(i, j, k) = interp == Interp::Trilinear
                              ? static_cast<float>(sample_trilinear(v, ci, cj, ck, fill))
                              : v.sample_nearest(ci, cj, ck, fill);
      }
    }
  }
  return out;
}

// Masks always warp with nearest neighbour.
inline Mask3 warp(const Mask3& m, const RigidTransform& t) {
  Mask3 out = m;
  Mat3 r;
  Vec3 o;
  detail::to_affine(t, r, o);
  for (int k = 0; k < m.dims[2]; ++k) {
    for (int j = 0; j < m.dims[1]; ++j) {
      for (int i = 0; i < m.dims[0]; ++i) {
        const Vec3 p = m.position(i, j, k);
        const Vec3 q = {r[0][0] * p[0] + r[0][1] * p[1] + r[0][2] * p[2] + o[0],
                        r[1][0] * p[0] + r[1][1] * p[1] + r[1][2] * p[2] + o[1],
                        r[2][0] * p[0] + r[2][1] * p[1] + r[2][2] * p[2] + o[2]};
        out.at(i, j, k) = m.sample_nearest((q[0] - m.origin[0]) / m.spacing[0],
                                           (q[1] - m.origin[1]) / m.spacing[1],
                                           (q[2] - m.origin[2]) / m.spacing[2], 0);
      }
    }
  }
  return out;
}

struct RigidConfig {
  int bins = 32;
  int levels = 3;                 // pyramid shrink factors 2^(levels-1) .. 1
  double initial_rot_step = 0.05;  // rad
  double initial_trans_step_voxels = 2.0;
  double min_rot_step = 0.002;
  double min_trans_step_voxels = 0.05;
  int max_sweeps_per_level = 200;
};

struct RigidResult {
  RigidTransform transform;
  double initial_mi = 0.0;
  double final_mi = 0.0;
};

namespace detail {

// MI over the overlap region: histogram accumulated only where the warped
// sample falls inside the moving domain. Bin edges are fixed per image.
inline double mi_under_transform(const Volume3& fixed, const Volume3& moving,
                                 const BinMap& fixed_bins, const BinMap& moving_bins,
                                 const RigidTransform& t, int bins) {
  Mat3 r;
  Vec3 o;
  to_affine(t, r, o);
  std::vector<double> joint(static_cast<std::size_t>(bins) * bins, 0.0);
  double count = 0.0;
  for (int k = 0; k < fixed.dims[2]; ++k) {
    for (int j = 0; j < fixed.dims[1]; ++j) {
      for (int i = 0; i < fixed.dims[0]; ++i) {
        const Vec3 p = fixed.position(i, j, k);
        const Vec3 q = {r[0][0] * p[0] + r[0][1] * p[1] + r[0][2] * p[2] + o[0],
                        r[1][0] * p[0] + r[1][1] * p[1] + r[1][2] * p[2] + o[1],
                        r[2][0] * p[0] + r[2][1] * p[1] + r[2][2] * p[2] + o[2]};
        const double ci = (q[0] - moving.origin[0]) / moving.spacing[0];
        const double cj = (q[1] - moving.origin[1]) / moving.spacing[1];
        const double ck = (q[2] - moving.origin[2]) / moving.spacing[2];
        if (ci < 0.0 || cj < 0.0 || ck < 0.0 || ci > moving.dims[0] - 1 ||
            cj > moving.dims[1] - 1 || ck > moving.dims[2] - 1) {
          continue;
        }
        const double mv = sample_trilinear(moving, ci, cj, ck);
        joint[static_cast<std::size_t>(fixed_bins.bin(fixed.at(i, j, k))) * bins +
              moving_bins.bin(static_cast<float>(mv))] += 1.0;
        count += 1.0;
      }
    }
  }
  if (count == 0.0) return -1.0;  // no overlap: worst possible objective
  std::vector<double> pa(static_cast<std::size_t>(bins), 0.0), pb(static_cast<std::size_t>(bins), 0.0);
  for (int a = 0; a < bins; ++a) {
    for (int b = 0; b < bins; ++b) {
      const double p = joint[static_cast<std::size_t>(a) * bins + b] / count;
      joint[static_cast<std::size_t>(a) * bins + b] = p;
      pa[static_cast<std::size_t>(a)] += p;
      pb[static_cast<std::size_t>(b)] += p;
    }
  }
  double mi = 0.0;
  for (int a = 0; a < bins; ++a) {
    for (int b = 0; b < bins; ++b) {
      const double p = joint[static_cast<std::size_t>(a) * bins + b];
      if (p > 0.0) mi += p * std::log(p / (pa[static_cast<std::size_t>(a)] * pb[static_cast<std::size_t>(b)]));
    }
  }
  if (!std::isfinite(mi)) fail(ErrorCode::Divergence, "rigid_register: non-finite objective");
  return mi;
}

inline bool physical_overlap(const Volume3& a, const Volume3& b) {
  for (int ax = 0; ax < 3; ++ax) {
    const double a0 = a.origin[ax], a1 = a.origin[ax] + (a.dims[ax] - 1) * a.spacing[ax];
    const double b0 = b.origin[ax], b1 = b.origin[ax] + (b.dims[ax] - 1) * b.spacing[ax];
    if (a1 < b0 || b1 < a0) return false;
  }
  return true;
}

}  // namespace detail

// Derivative-free rigid registration maximizing mutual information: greedy
// coordinate/pattern search over 6 parameters with a multiresolution warm
// start. Deterministic for a given start point.
inline RigidResult rigid_register(const Volume3& fixed, const Volume3& moving,
                                  const RigidConfig& cfg = {},
                                  const RigidTransform* init = nullptr) {
  if (!detail::physical_overlap(fixed, moving)) {
    fail(ErrorCode::NoOverlap, "rigid_register: physical extents do not overlap");
  }
  RigidTransform t;
  if (init) t = *init;
  t.center = fixed.physical_center();

  const auto moving_bins_full = detail::make_bin_map(moving, cfg.bins);

  RigidResult result;
  bool have_initial = false;

  for (int level = cfg.levels - 1; level >= 0; --level) {
    const int shrink = 1 << level;
    Volume3 f_l = fixed, m_l = moving;
    if (shrink > 1) {
      const Vec3 sp_f = {fixed.spacing[0] * shrink, fixed.spacing[1] * shrink, fixed.spacing[2] * shrink};
      const Vec3 sp_m = {moving.spacing[0] * shrink, moving.spacing[1] * shrink, moving.spacing[2] * shrink};
      if (std::min({fixed.dims[0], fixed.dims[1], fixed.dims[2]}) / shrink < 8) continue;
      f_l = resample(fixed, sp_f, Interp::Trilinear);
      m_l = resample(moving, sp_m, Interp::Trilinear);
    }
    const auto fb = detail::make_bin_map(f_l, cfg.bins);
    auto objective = [&](const RigidTransform& tr) {
      return detail::mi_under_transform(f_l, m_l, fb, moving_bins_full, tr, cfg.bins);
    };

    double best = objective(t);
    if (!have_initial) {
      result.initial_mi = best;
      have_initial = true;
    }
    const double vox = std::min({f_l.spacing[0], f_l.spacing[1], f_l.spacing[2]});
    double rot_step = cfg.initial_rot_step;
    double trans_step = cfg.initial_trans_step_voxels * vox;
    const double min_trans = cfg.min_trans_step_voxels *
                             std::min({fixed.spacing[0], fixed.spacing[1], fixed.spacing[2]});

    for (int sweep = 0; sweep < cfg.max_sweeps_per_level; ++sweep) {
      bool improved = false;
      for (int p = 0; p < 6; ++p) {
        const double step = p < 3 ? rot_step : trans_step;
        for (double dir : {+1.0, -1.0}) {
          RigidTransform cand = t;
          if (p < 3) {
            cand.angles[static_cast<std::size_t>(p)] += dir * step;
          } else {
            cand.translation[static_cast<std::size_t>(p - 3)] += dir * step;
          }
          const double mi = objective(cand);
          if (mi > best + 1e-12) {
            best = mi;
            t = cand;
            improved = true;
          }
        }
      }
      if (!improved) {
        rot_step *= 0.5;
        trans_step *= 0.5;
        if (rot_step < cfg.min_rot_step && trans_step < min_trans) break;
      }
    }
    result.final_mi = best;
  }
  result.transform = t;
  return result;
}

}  // namespace scarforge

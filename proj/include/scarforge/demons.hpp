#pragma once

#include <cmath>
#include <vector>

#include "scarforge/errors.hpp"
#include "scarforge/filter.hpp"
#include "scarforge/grid.hpp"
#include "scarforge/preprocess.hpp"
#include "scarforge/rigid.hpp"

namespace scarforge {

struct DemonsParams {
  std::vector<int> iterations{40, 30, 20};  // coarsest level first
  int levels = 3;
  double sigma_update_voxels = 1.0;
  double sigma_total_voxels = 1.5;
  double max_step_voxels = 1.25;

  void validate() const {
    if (levels < 1) fail(ErrorCode::InvalidArgument, "demons: levels must be >= 1");
    if (iterations.empty()) fail(ErrorCode::InvalidArgument, "demons: iterations list empty");
    for (int it : iterations) {
      if (it < 0) fail(ErrorCode::InvalidArgument, "demons: negative iteration count");
    }
    if (!(sigma_update_voxels >= 0.0) || !(sigma_total_voxels >= 0.0)) {
      fail(ErrorCode::InvalidArgument, "demons: smoothing sigmas must be >= 0");
    }
    if (!(max_step_voxels > 0.0)) {
      fail(ErrorCode::InvalidArgument, "demons: max step must be positive");
    }
  }
};

namespace detail {

struct FieldComponents {
  Volume3 x, y, z;  // displacement in mm on the fixed grid
};

inline FieldComponents zero_field_like(const Volume3& ref) {
  FieldComponents f;
  for (Volume3* c : {&f.x, &f.y, &f.z}) {
    c->dims = ref.dims;
    c->spacing = ref.spacing;
    c->origin = ref.origin;
    c->orientation = ref.orientation;
    c->data.assign(ref.voxel_count(), 0.f);
  }
  return f;
}

inline Volume3 warp_with_components(const Volume3& v, const FieldComponents& f) {
  Volume3 out = v;
  for (int k = 0; k < v.dims[2]; ++k) {
    for (int j = 0; j < v.dims[1]; ++j) {
      for (int i = 0; i < v.dims[0]; ++i) {
        const std::size_t idx = v.index(i, j, k);
        const double ci = i + f.x.data[idx] / v.spacing[0];
        const double cj = j + f.y.data[idx] / v.spacing[1];
        const double ck = k + f.z.data[idx] / v.spacing[2];
        out.data[idx] = static_cast<float>(sample_trilinear(v, ci, cj, ck));
      }
    }
  }
  return out;
}

inline double mse(const Volume3& a, const Volume3& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.data.size());
}

}  // namespace detail

// Fast symmetric-forces demons: the update force at each voxel uses the mean
// gradient of fixed and warped-moving, normalized ITK-style, clamped to the
// max step, then Gaussian-regularized (fluid on the update, elastic on the
// total field). Runs on a coarse-to-fine pyramid.
inline DisplacementField demons_register(const Volume3& fixed, const Volume3& moving,
                                         const DemonsParams& params = {}) {
  params.validate();
  if (fixed.dims != moving.dims) {
    fail(ErrorCode::GeometryMismatch, "demons_register: dims differ (resample first)");
  }

  detail::FieldComponents field;
  bool field_ready = false;
  std::vector<Vec3f> grad_fixed, grad_warp;

  for (int level = params.levels - 1; level >= 0; --level) {
    const int shrink = 1 << level;
    Volume3 f_l = fixed, m_l = moving;
    if (shrink > 1) {
      if (std::min({fixed.dims[0], fixed.dims[1], fixed.dims[2]}) / shrink < 4) continue;
      const Vec3 sp = {fixed.spacing[0] * shrink, fixed.spacing[1] * shrink, fixed.spacing[2] * shrink};
      f_l = resample(fixed, sp, Interp::Trilinear);
      m_l = resample(moving, sp, Interp::Trilinear);
    }
    if (!field_ready) {
      field = detail::zero_field_like(f_l);
      field_ready = true;
    } else {
      // Vectors are in mm, so upsampling only changes the sample grid.
      field.x = resample(field.x, f_l.spacing, Interp::Trilinear);
      field.y = resample(field.y, f_l.spacing, Interp::Trilinear);
      field.z = resample(field.z, f_l.spacing, Interp::Trilinear);
      for (Volume3* c : {&field.x, &field.y, &field.z}) {
        if (c->dims != f_l.dims) {
          // Resampling can land one voxel short of the target grid; clamp-pad.
          Volume3 fit = f_l;
          for (int k = 0; k < f_l.dims[2]; ++k) {
            for (int j = 0; j < f_l.dims[1]; ++j) {
              for (int i = 0; i < f_l.dims[0]; ++i) {
                fit.at(i, j, k) = c->at(std::min(i, c->dims[0] - 1), std::min(j, c->dims[1] - 1),
                                        std::min(k, c->dims[2] - 1));
              }
            }
          }
          *c = fit;
        }
      }
    }

    const std::size_t level_index = static_cast<std::size_t>(params.levels - 1 - level);
    const int iters = level_index < params.iterations.size()
                          ? params.iterations[level_index]
                          : params.iterations.back();
    const double min_sp = std::min({f_l.spacing[0], f_l.spacing[1], f_l.spacing[2]});
    const double max_step_mm = params.max_step_voxels * min_sp;
    const double k_norm = (f_l.spacing[0] * f_l.spacing[0] + f_l.spacing[1] * f_l.spacing[1] +
                           f_l.spacing[2] * f_l.spacing[2]) /
                          3.0;
    gradient(f_l, grad_fixed);

    Volume3 ux = f_l, uy = f_l, uz = f_l;  // update buffers
    for (int it = 0; it < iters; ++it) {
      const Volume3 warped = detail::warp_with_components(m_l, field);
      gradient(warped, grad_warp);
      for (std::size_t idx = 0; idx < f_l.data.size(); ++idx) {
        const double diff = static_cast<double>(f_l.data[idx]) - warped.data[idx];
        const double jx = 0.5 * (grad_fixed[idx][0] + grad_warp[idx][0]);
        const double jy = 0.5 * (grad_fixed[idx][1] + grad_warp[idx][1]);
        const double jz = 0.5 * (grad_fixed[idx][2] + grad_warp[idx][2]);
        const double denom = jx * jx + jy * jy + jz * jz + diff * diff / k_norm;
        double sx = 0.0, sy = 0.0, sz = 0.0;
        if (denom > 1e-12) {
          const double g = diff / denom;
          sx = g * jx;
          sy = g * jy;
          sz = g * jz;
          const double mag = std::sqrt(sx * sx + sy * sy + sz * sz);
          if (mag > max_step_mm) {
            const double s = max_step_mm / mag;
            sx *= s;
            sy *= s;
            sz *= s;
          }
        }
        ux.data[idx] = static_cast<float>(sx);
        uy.data[idx] = static_cast<float>(sy);
        uz.data[idx] = static_cast<float>(sz);
      }
      if (params.sigma_update_voxels > 0.0) {
        const Vec3 s_upd{params.sigma_update_voxels, params.sigma_update_voxels,
                         params.sigma_update_voxels};
        ux = gaussian_smooth(ux, s_upd);
        uy = gaussian_smooth(uy, s_upd);
        uz = gaussian_smooth(uz, s_upd);
      }
      for (std::size_t idx = 0; idx < f_l.data.size(); ++idx) {
        field.x.data[idx] += ux.data[idx];
        field.y.data[idx] += uy.data[idx];
        field.z.data[idx] += uz.data[idx];
      }
      if (params.sigma_total_voxels > 0.0) {
        const Vec3 s_tot{params.sigma_total_voxels, params.sigma_total_voxels,
                         params.sigma_total_voxels};
        field.x = gaussian_smooth(field.x, s_tot);
        field.y = gaussian_smooth(field.y, s_tot);
        field.z = gaussian_smooth(field.z, s_tot);
      }
      for (std::size_t idx = 0; idx < f_l.data.size(); ++idx) {
        if (!std::isfinite(field.x.data[idx]) || !std::isfinite(field.y.data[idx]) ||
            !std::isfinite(field.z.data[idx])) {
          fail(ErrorCode::Divergence, "demons_register: non-finite update");
        }
      }
    }
  }
  if (!field_ready) field = detail::zero_field_like(fixed);

  // The regularized field can only be claimed as an improvement if warping
  // with it beats the unwarped MSE; otherwise fall back to the zero field.
  const Volume3 warped_final = detail::warp_with_components(moving, field);
  if (detail::mse(fixed, warped_final) > detail::mse(fixed, moving)) {
    field = detail::zero_field_like(fixed);
  }

  DisplacementField out;
  out.dims = fixed.dims;
  out.spacing = fixed.spacing;
  out.origin = fixed.origin;
  out.data.resize(fixed.voxel_count());
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = {field.x.data[i], field.y.data[i], field.z.data[i]};
  }
  return out;
}

// out(x) = v(x + u(x)); the field lives on v's grid.
inline Volume3 warp(const Volume3& v, const DisplacementField& u, Interp interp = Interp::Trilinear) {
  if (v.dims != u.dims) fail(ErrorCode::GeometryMismatch, "warp: field dims differ from image");
  Volume3 out = v;
  for (int k = 0; k < v.dims[2]; ++k) {
    for (int j = 0; j < v.dims[1]; ++j) {
      for (int i = 0; i < v.dims[0]; ++i) {
        const std::size_t idx = v.index(i, j, k);
        const double ci = i + u.data[idx][0] / v.spacing[0];
        const double cj = j + u.data[idx][1] / v.spacing[1];
        const double ck = k + u.data[idx][2] / v.spacing[2];
        out.data[idx] = interp == Interp::Trilinear
                            ? static_cast<float>(sample_trilinear(v, ci, cj, ck))
                            : v.sample_nearest(ci, cj, ck);
      }
    }
  }
  return out;
}

inline Mask3 warp(const Mask3& m, const DisplacementField& u) {
  if (m.dims != u.dims) fail(ErrorCode::GeometryMismatch, "warp: field dims differ from mask");
  Mask3 out = m;
  for (int k = 0; k < m.dims[2]; ++k) {
    for (int j = 0; j < m.dims[1]; ++j) {
      for (int i = 0; i < m.dims[0]; ++i) {
        const std::size_t idx = m.index(i, j, k);
        out.data[idx] = m.sample_nearest(i + u.data[idx][0] / m.spacing[0],
                                         j + u.data[idx][1] / m.spacing[1],
                                         k + u.data[idx][2] / m.spacing[2], 0);
      }
    }
  }
  return out;
}

}  // namespace scarforge

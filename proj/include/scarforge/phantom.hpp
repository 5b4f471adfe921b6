#pragma once

#include <cmath>
#include <cstdint>

#include "scarforge/aha.hpp"
#include "scarforge/errors.hpp"
#include "scarforge/grid.hpp"
#include "scarforge/preprocess.hpp"
#include "scarforge/rng.hpp"

namespace scarforge {

// Geometry knobs for the bundled annulus phantom, all as fractions of the
// volume extent so one parameter set scales across grid sizes.
struct PhantomParams {
  double outer_radius_frac = 0.38;  // of the smaller x/y physical half-extent
  double wall_frac = 0.42;          // wall thickness relative to the outer radius
  double apex_frac = 0.10;          // z fraction where the myocardium starts
  double cap_frac = 0.20;           // solid apex cap up to this z fraction
  double base_frac = 0.92;          // z fraction where the myocardium ends
};

struct AnnulusPhantom {
  Mask3 myo;
  LabelVolume labels;
  Volume3 image;
};

// Thick-walled cylinder with a solid apex cap, the long axis along +z, plus
// an analytic AHA partition and a smooth textured image. Fully deterministic;
// every test and CLI example can run from it with no external data.
inline AnnulusPhantom make_annulus_phantom(const Index3& dims, const Vec3& spacing,
                                           double rv_insertion_angle = 0.0,
                                           const RingSplits& splits = {},
                                           const PhantomParams& params = {}) {
  for (int d : dims) {
    if (d < 8) fail(ErrorCode::InvalidArgument, "make_annulus_phantom: dims must be >= 8");
  }
  AnnulusPhantom ph;
  ph.myo.dims = dims;
  ph.myo.spacing = spacing;
  ph.myo.origin = {0.0, 0.0, 0.0};
  ph.myo.data.assign(ph.myo.voxel_count(), 0);

  const double ex = (dims[0] - 1) * spacing[0];
  const double ey = (dims[1] - 1) * spacing[1];
  const double ez = (dims[2] - 1) * spacing[2];
  const double cx = 0.5 * ex;
  const double cy = 0.5 * ey;
  const double r_out = params.outer_radius_frac * std::min(cx, cy) * 2.0;
  const double r_in = r_out * (1.0 - params.wall_frac);
  const double z_lo = params.apex_frac * ez;
  const double z_cap = params.cap_frac * ez;
  const double z_hi = params.base_frac * ez;

  for (int k = 0; k < dims[2]; ++k) {
    const double z = k * spacing[2];
    if (z < z_lo || z > z_hi) continue;
    const bool solid = z <= z_cap;
    for (int j = 0; j < dims[1]; ++j) {
      const double dy = j * spacing[1] - cy;
      for (int i = 0; i < dims[0]; ++i) {
        const double dx = i * spacing[0] - cx;
        const double r = std::sqrt(dx * dx + dy * dy);
        if (r > r_out) continue;
        if (solid || r >= r_in) ph.myo.at(i, j, k) = 1;
      }
    }
  }

  ph.labels = analytic_partition(ph.myo, Vec3{0.0, 0.0, 1.0}, rv_insertion_angle, splits);

  ph.image.dims = dims;
  ph.image.spacing = spacing;
  ph.image.origin = ph.myo.origin;
  ph.image.data.resize(ph.image.voxel_count());
  for (int k = 0; k < dims[2]; ++k) {
    const double z = k * spacing[2];
    for (int j = 0; j < dims[1]; ++j) {
      const double y = j * spacing[1];
      for (int i = 0; i < dims[0]; ++i) {
        const double x = i * spacing[0];
        double v = 0.15 * (ez > 0 ? z / ez : 0.0);
        v += 0.08 * std::sin(2.0 * M_PI * x / 19.0) * std::sin(2.0 * M_PI * y / 23.0);
        if (ph.myo.at(i, j, k)) v += 1.0;
        ph.image.at(i, j, k) = static_cast<float>(v);
      }
    }
  }
  return ph;
}

// Sum of randomly placed anisotropic Gaussian bumps. Smooth everywhere with
// gradients across the whole domain, which is what the intensity-driven
// registration tests need.
inline Volume3 smooth_blob_phantom(const Index3& dims, const Vec3& spacing, int n_blobs,
                                   std::uint64_t seed) {
  if (n_blobs < 1) fail(ErrorCode::InvalidArgument, "smooth_blob_phantom: n_blobs must be >= 1");
  Rng rng(seed);
  struct Bump {
    double cx, cy, cz, wx, wy, wz, amp;
  };
  std::vector<Bump> bumps;
  bumps.reserve(static_cast<std::size_t>(n_blobs));
  const double ex = (dims[0] - 1) * spacing[0];
  const double ey = (dims[1] - 1) * spacing[1];
  const double ez = (dims[2] - 1) * spacing[2];
  const double wmin = 0.06 * std::max({ex, ey, ez});
  const double wmax = 0.18 * std::max({ex, ey, ez});
  for (int b = 0; b < n_blobs; ++b) {
    Bump bump;
    bump.cx = rng.uniform(0.0, ex);
    bump.cy = rng.uniform(0.0, ey);
    bump.cz = rng.uniform(0.0, ez);
    bump.wx = rng.uniform(wmin, wmax);
    bump.wy = rng.uniform(wmin, wmax);
    bump.wz = rng.uniform(wmin, wmax);
    bump.amp = rng.uniform(0.4, 1.0) * (rng.uniform() < 0.3 ? -1.0 : 1.0);
    bumps.push_back(bump);
  }
  Volume3 out;
  out.dims = dims;
  out.spacing = spacing;
  out.origin = {0.0, 0.0, 0.0};
  out.data.resize(out.voxel_count());
  for (int k = 0; k < dims[2]; ++k) {
    const double z = k * spacing[2];
    for (int j = 0; j < dims[1]; ++j) {
      const double y = j * spacing[1];
      for (int i = 0; i < dims[0]; ++i) {
        const double x = i * spacing[0];
        double v = 0.0;
        for (const auto& b : bumps) {
          const double dx = (x - b.cx) / b.wx;
          const double dy = (y - b.cy) / b.wy;
          const double dz = (z - b.cz) / b.wz;
          v += b.amp * std::exp(-0.5 * (dx * dx + dy * dy + dz * dz));
        }
        out.at(i, j, k) = static_cast<float>(v);
      }
    }
  }
  return out;
}

// Z-scored smoothed white noise. Unlike the blob phantom this has intensity
// gradients pointing in all directions at essentially every voxel, so
// deformable registration can also recover motion tangential to any one
// isophote. Correlation length is set by sigma (in voxels).
inline Volume3 speckle_phantom(const Index3& dims, const Vec3& spacing, double sigma_voxels,
                               std::uint64_t seed) {
  if (!(sigma_voxels > 0.0))
    fail(ErrorCode::InvalidArgument, "speckle_phantom: sigma must be > 0");
  Volume3 v;
  v.dims = dims;
  v.spacing = spacing;
  v.origin = {0.0, 0.0, 0.0};
  v.data.resize(v.voxel_count());
  Rng rng(seed);
  for (auto& x : v.data) x = static_cast<float>(rng.normal());
  v = gaussian_smooth(v, sigma_voxels);
  return zscore_normalize(v);
}

namespace detail {

// Raised-cosine ramp: 0 at the border, 1 once `margin` voxels inside.
inline double border_taper(int i, int n, int margin) {
  const double d = std::min(i, n - 1 - i);
  if (d >= margin) return 1.0;
  return 0.5 - 0.5 * std::cos(M_PI * d / margin);
}

}  // namespace detail

// Smooth sinusoidal displacement field (amplitude in voxels, stored in mm),
// tapered to zero near the volume border so warps never pull from outside
// the domain.
inline DisplacementField sinusoid_field(const Index3& dims, const Vec3& spacing,
                                        double amplitude_voxels, double period_voxels,
                                        int taper_margin_voxels = 8) {
  if (!(period_voxels > 0.0)) fail(ErrorCode::InvalidArgument, "sinusoid_field: period must be > 0");
  DisplacementField f;
  f.dims = dims;
  f.spacing = spacing;
  f.origin = {0.0, 0.0, 0.0};
  f.data.resize(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
  const double w = 2.0 * M_PI / period_voxels;
  std::size_t idx = 0;
  for (int k = 0; k < dims[2]; ++k) {
    for (int j = 0; j < dims[1]; ++j) {
      for (int i = 0; i < dims[0]; ++i, ++idx) {
        const double taper = detail::border_taper(i, dims[0], taper_margin_voxels) *
                             detail::border_taper(j, dims[1], taper_margin_voxels) *
                             detail::border_taper(k, dims[2], taper_margin_voxels);
        const double a = amplitude_voxels * taper;
        f.data[idx] = {static_cast<float>(a * std::sin(w * j) * spacing[0]),
                       static_cast<float>(a * std::sin(w * k) * spacing[1]),
                       static_cast<float>(a * std::sin(w * i) * spacing[2])};
      }
    }
  }
  return f;
}

}  // namespace scarforge

#pragma once

#include <cmath>
#include <vector>

#include "scarforge/grid.hpp"

namespace scarforge {
namespace detail {

inline std::vector<double> gaussian_kernel(double sigma_voxels) {
  if (sigma_voxels <= 0.0) return {1.0};
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma_voxels)));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double w = std::exp(-0.5 * (i * i) / (sigma_voxels * sigma_voxels));
    k[static_cast<std::size_t>(i + radius)] = w;
    sum += w;
  }
  for (auto& w : k) w /= sum;
  return k;
}

// 1-D convolution along `axis` with clamped (zero-flux) borders.
inline void convolve_axis(std::vector<float>& data, const Index3& dims, int axis,
                          const std::vector<double>& kernel) {
  if (kernel.size() == 1) return;
  const int radius = static_cast<int>(kernel.size() / 2);
  const int n = dims[axis];
  const std::size_t sx = 1;
  const std::size_t sy = static_cast<std::size_t>(dims[0]);
  const std::size_t sz = static_cast<std::size_t>(dims[0]) * dims[1];
  const std::size_t stride = axis == 0 ? sx : (axis == 1 ? sy : sz);
  std::vector<float> line(static_cast<std::size_t>(n));

  const int d0 = axis == 0 ? dims[1] : dims[0];
  const int d1 = axis == 2 ? dims[1] : dims[2];
  const std::size_t step0 = axis == 0 ? sy : sx;
  const std::size_t step1 = axis == 2 ? sy : sz;
  for (int b = 0; b < d1; ++b) {
    for (int a = 0; a < d0; ++a) {
      const std::size_t base = a * step0 + b * step1;
      for (int i = 0; i < n; ++i) line[static_cast<std::size_t>(i)] = data[base + i * stride];
      for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int t = -radius; t <= radius; ++t) {
          int s = i + t;
          if (s < 0) s = 0;
          if (s >= n) s = n - 1;
          acc += kernel[static_cast<std::size_t>(t + radius)] * line[static_cast<std::size_t>(s)];
        }
        data[base + i * stride] = static_cast<float>(acc);
      }
    }
  }
}

}  // namespace detail

// Separable Gaussian smoothing with per-axis sigma in voxel units.
inline Volume3 gaussian_smooth(const Volume3& v, const Vec3& sigma_voxels) {
  Volume3 out = v;
  for (int axis = 0; axis < 3; ++axis) {
    detail::convolve_axis(out.data, out.dims, axis, detail::gaussian_kernel(sigma_voxels[axis]));
  }
  return out;
}

inline Volume3 gaussian_smooth(const Volume3& v, double sigma_voxels) {
  return gaussian_smooth(v, Vec3{sigma_voxels, sigma_voxels, sigma_voxels});
}

// Central-difference gradient in physical units (per mm), clamped at borders.
inline void gradient(const Volume3& v, std::vector<Vec3f>& grad) {
  grad.resize(v.voxel_count());
  const double ix = 1.0 / v.spacing[0], iy = 1.0 / v.spacing[1], iz = 1.0 / v.spacing[2];
  for (int k = 0; k < v.dims[2]; ++k) {
    const int kp = std::min(k + 1, v.dims[2] - 1), km = std::max(k - 1, 0);
    for (int j = 0; j < v.dims[1]; ++j) {
      const int jp = std::min(j + 1, v.dims[1] - 1), jm = std::max(j - 1, 0);
      for (int i = 0; i < v.dims[0]; ++i) {
        const int ip = std::min(i + 1, v.dims[0] - 1), im = std::max(i - 1, 0);
        Vec3f& g = grad[v.index(i, j, k)];
        g[0] = static_cast<float>((v.at(ip, j, k) - v.at(im, j, k)) * ix / (ip - im ? ip - im : 1));
        g[1] = static_cast<float>((v.at(i, jp, k) - v.at(i, jm, k)) * iy / (jp - jm ? jp - jm : 1));
        g[2] = static_cast<float>((v.at(i, j, kp) - v.at(i, j, km)) * iz / (kp - km ? kp - km : 1));
      }
    }
  }
}

}  // namespace scarforge

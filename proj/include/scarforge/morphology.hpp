#pragma once

#include <algorithm>
#include <vector>

#include "scarforge/errors.hpp"
#include "scarforge/grid.hpp"

namespace scarforge {
namespace detail {

// Separable 1-D erosion (min filter) with radius r; outside counts as background.
inline void erode_axis(std::vector<std::uint8_t>& data, const Index3& dims, int axis, int r) {
  const std::size_t sy = static_cast<std::size_t>(dims[0]);
  const std::size_t sz = static_cast<std::size_t>(dims[0]) * dims[1];
  const std::size_t stride = axis == 0 ? 1 : (axis == 1 ? sy : sz);
  const int n = dims[axis];
  const int d0 = axis == 0 ? dims[1] : dims[0];
  const int d1 = axis == 2 ? dims[1] : dims[2];
  const std::size_t step0 = axis == 0 ? sy : 1;
  const std::size_t step1 = axis == 2 ? sy : sz;
  std::vector<std::uint8_t> line(static_cast<std::size_t>(n));
  for (int b = 0; b < d1; ++b) {
    for (int a = 0; a < d0; ++a) {
      const std::size_t base = a * step0 + b * step1;
      for (int i = 0; i < n; ++i) line[static_cast<std::size_t>(i)] = data[base + i * stride];
      for (int i = 0; i < n; ++i) {
        std::uint8_t v = 1;
        for (int t = -r; t <= r; ++t) {
          const int s = i + t;
          if (s < 0 || s >= n || !line[static_cast<std::size_t>(s)]) {
            v = 0;
            break;
          }
        }
        data[base + i * stride] = v;
      }
    }
  }
}

}  // namespace detail

// Morphological erosion by a k^3 cubic structuring element, k odd in {1,3,5,7}.
inline Mask3 erode(const Mask3& m, int k) {
  if (k != 1 && k != 3 && k != 5 && k != 7) {
    fail(ErrorCode::InvalidArgument, "erode: kernel size must be odd in {1,3,5,7}");
  }
  if (k == 1) return m;
  Mask3 out = m;
  const int r = (k - 1) / 2;
  for (int axis = 0; axis < 3; ++axis) detail::erode_axis(out.data, out.dims, axis, r);
  return out;
}

// Connected-component labels (0 stays 0); connectivity 6 or 26.
inline std::vector<int> label_components(const Mask3& m, int connectivity, int* count_out = nullptr) {
  std::vector<int> labels(m.voxel_count(), 0);
  std::vector<std::size_t> stack;
  int next = 0;
  const int nx = m.dims[0], ny = m.dims[1], nz = m.dims[2];
  auto push_neighbors = [&](std::size_t idx) {
    const int i = static_cast<int>(idx % nx);
    const int j = static_cast<int>((idx / nx) % ny);
    const int k = static_cast<int>(idx / (static_cast<std::size_t>(nx) * ny));
    for (int dk = -1; dk <= 1; ++dk) {
      for (int dj = -1; dj <= 1; ++dj) {
        for (int di = -1; di <= 1; ++di) {
          if (di == 0 && dj == 0 && dk == 0) continue;
          if (connectivity == 6 && std::abs(di) + std::abs(dj) + std::abs(dk) != 1) continue;
          const int ii = i + di, jj = j + dj, kk = k + dk;
          if (ii < 0 || jj < 0 || kk < 0 || ii >= nx || jj >= ny || kk >= nz) continue;
          const std::size_t nidx = m.index(ii, jj, kk);
          if (m.data[nidx] && labels[nidx] == 0) {
            labels[nidx] = next;
            stack.push_back(nidx);
          }
        }
      }
    }
  };
  for (std::size_t idx = 0; idx < m.data.size(); ++idx) {
    if (!m.data[idx] || labels[idx] != 0) continue;
    ++next;
    labels[idx] = next;
    stack.push_back(idx);
    while (!stack.empty()) {
      const std::size_t cur = stack.back();
      stack.pop_back();
      push_neighbors(cur);
    }
  }
  if (count_out) *count_out = next;
  return labels;
}

// Fills 6-connected background cavities that do not touch the volume border.
inline Mask3 fill_holes(const Mask3& m) {
  Mask3 bg = m;
  for (auto& v : bg.data) v = v ? 0 : 1;
  // Flood the border-connected background; everything else is a hole.
  std::vector<std::uint8_t> outside(m.voxel_count(), 0);
  std::vector<std::size_t> stack;
  const int nx = m.dims[0], ny = m.dims[1], nz = m.dims[2];
  auto try_push = [&](int i, int j, int k) {
    if (i < 0 || j < 0 || k < 0 || i >= nx || j >= ny || k >= nz) return;
    const std::size_t idx = m.index(i, j, k);
    if (bg.data[idx] && !outside[idx]) {
      outside[idx] = 1;
      stack.push_back(idx);
    }
  };
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        if (i == 0 || j == 0 || k == 0 || i == nx - 1 || j == ny - 1 || k == nz - 1) try_push(i, j, k);
      }
    }
  }
  while (!stack.empty()) {
    const std::size_t idx = stack.back();
    stack.pop_back();
    const int i = static_cast<int>(idx % nx);
    const int j = static_cast<int>((idx / nx) % ny);
    const int k = static_cast<int>(idx / (static_cast<std::size_t>(nx) * ny));
    try_push(i - 1, j, k);
    try_push(i + 1, j, k);
    try_push(i, j - 1, k);
    try_push(i, j + 1, k);
    try_push(i, j, k - 1);
    try_push(i, j, k + 1);
  }
  Mask3 out = m;
  for (std::size_t idx = 0; idx < out.data.size(); ++idx) {
    if (!m.data[idx] && !outside[idx]) out.data[idx] = 1;
  }
  return out;
}

// Removes 26-connected foreground components with fewer than min_voxels voxels.
inline Mask3 remove_small_components(const Mask3& m, std::size_t min_voxels) {
  if (min_voxels <= 1) return m;
  int count = 0;
  const auto labels = label_components(m, 26, &count);
  std::vector<std::size_t> sizes(static_cast<std::size_t>(count) + 1, 0);
  for (int l : labels) sizes[static_cast<std::size_t>(l)]++;
  Mask3 out = m;
  for (std::size_t idx = 0; idx < out.data.size(); ++idx) {
    if (out.data[idx] && sizes[static_cast<std::size_t>(labels[idx])] < min_voxels) out.data[idx] = 0;
  }
  return out;
}

inline Mask3 mask_and(const Mask3& a, const Mask3& b) {
  require_same_dims(a, b, "mask_and");
  Mask3 out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = a.data[i] && b.data[i];
  return out;
}

inline Mask3 mask_or(const Mask3& a, const Mask3& b) {
  require_same_dims(a, b, "mask_or");
  Mask3 out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = a.data[i] || b.data[i];
  return out;
}

}  // namespace scarforge

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "scarforge/errors.hpp"

namespace scarforge {

using Index3 = std::array<int, 3>;
using Vec3 = std::array<double, 3>;
using Vec3f = std::array<float, 3>;

// Axis orientation as a permutation plus per-axis flips: stored axis `a` runs
// along canonical axis `axis[a]`, reversed when `flip[a]` is set.
struct AxisOrientation {
  std::array<int, 3> axis{0, 1, 2};
  std::array<bool, 3> flip{false, false, false};

  bool operator==(const AxisOrientation&) const = default;

  bool is_permutation() const {
    std::array<int, 3> seen{0, 0, 0};
    for (int a : axis) {
      if (a < 0 || a > 2) return false;
      seen[static_cast<std::size_t>(a)]++;
    }
    return seen[0] == 1 && seen[1] == 1 && seen[2] == 1;
  }
};

// Regular 3-D voxel grid over scalar type T. Voxel (i,j,k) sits at
// origin + (i*sx, j*sy, k*sz) mm; data is stored x-fastest.
template <typename T>
struct Grid3 {
  Index3 dims{0, 0, 0};
  Vec3 spacing{1.0, 1.0, 1.0};
  Vec3 origin{0.0, 0.0, 0.0};
  AxisOrientation orientation{};
  std::vector<T> data;

  Grid3() = default;
  Grid3(Index3 d, Vec3 s, T fill = T{}) : dims(d), spacing(s) {
    data.assign(voxel_count(), fill);
  }

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
  }

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(k));
  }

  T& at(int i, int j, int k) { return data[index(i, j, k)]; }
  const T& at(int i, int j, int k) const { return data[index(i, j, k)]; }

  bool contains(int i, int j, int k) const {
    return i >= 0 && j >= 0 && k >= 0 && i < dims[0] && j < dims[1] && k < dims[2];
  }

  Vec3 position(int i, int j, int k) const {
    return {origin[0] + i * spacing[0], origin[1] + j * spacing[1], origin[2] + k * spacing[2]};
  }

  Vec3 physical_center() const {
    return {origin[0] + 0.5 * (dims[0] - 1) * spacing[0],
            origin[1] + 0.5 * (dims[1] - 1) * spacing[1],
            origin[2] + 0.5 * (dims[2] - 1) * spacing[2]};
  }

  bool same_geometry(const Grid3& other) const {
    return dims == other.dims && spacing == other.spacing && origin == other.origin &&
           orientation == other.orientation;
  }

  bool same_dims(const Grid3& other) const { return dims == other.dims; }

  // Continuous-index sample with nearest-neighbour lookup; out of bounds -> fill.
  T sample_nearest(double ci, double cj, double ck, T fill = T{}) const {
    const int i = static_cast<int>(std::lround(ci));
    const int j = static_cast<int>(std::lround(cj));
    const int k = static_cast<int>(std::lround(ck));
    if (!contains(i, j, k)) return fill;
    return at(i, j, k);
  }
};

using Volume3 = Grid3<float>;
using Mask3 = Grid3<std::uint8_t>;
using LabelVolume = Grid3<std::int32_t>;

// Per-voxel displacement vectors in mm, on the fixed image's grid.
struct DisplacementField {
  Index3 dims{0, 0, 0};
  Vec3 spacing{1.0, 1.0, 1.0};
  Vec3 origin{0.0, 0.0, 0.0};
  std::vector<Vec3f> data;

  DisplacementField() = default;
  DisplacementField(Index3 d, Vec3 s) : dims(d), spacing(s) {
    data.assign(static_cast<std::size_t>(d[0]) * d[1] * d[2], Vec3f{0.f, 0.f, 0.f});
  }

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(k));
  }
  Vec3f& at(int i, int j, int k) { return data[index(i, j, k)]; }
  const Vec3f& at(int i, int j, int k) const { return data[index(i, j, k)]; }
};

// Trilinear sample at a continuous voxel index; out of bounds -> fill.
inline double sample_trilinear(const Volume3& v, double ci, double cj, double ck,
                               double fill = 0.0) {
  if (ci < 0.0 || cj < 0.0 || ck < 0.0 || ci > v.dims[0] - 1 || cj > v.dims[1] - 1 ||
      ck > v.dims[2] - 1) {
    return fill;
  }
  int i0 = static_cast<int>(ci);
  int j0 = static_cast<int>(cj);
  int k0 = static_cast<int>(ck);
  if (i0 == v.dims[0] - 1) i0--;
  if (j0 == v.dims[1] - 1) j0--;
  if (k0 == v.dims[2] - 1) k0--;
  if (v.dims[0] == 1) i0 = 0;
  if (v.dims[1] == 1) j0 = 0;
  if (v.dims[2] == 1) k0 = 0;
  const double fx = ci - i0, fy = cj - j0, fz = ck - k0;
  const int i1 = std::min(i0 + 1, v.dims[0] - 1);
  const int j1 = std::min(j0 + 1, v.dims[1] - 1);
  const int k1 = std::min(k0 + 1, v.dims[2] - 1);
  const double c000 = v.at(i0, j0, k0), c100 = v.at(i1, j0, k0);
  const double c010 = v.at(i0, j1, k0), c110 = v.at(i1, j1, k0);
  const double c001 = v.at(i0, j0, k1), c101 = v.at(i1, j0, k1);
  const double c011 = v.at(i0, j1, k1), c111 = v.at(i1, j1, k1);
  const double c00 = c000 + (c100 - c000) * fx;
  const double c10 = c010 + (c110 - c010) * fx;
  const double c01 = c001 + (c101 - c001) * fx;
  const double c11 = c011 + (c111 - c011) * fx;
  const double c0 = c00 + (c10 - c00) * fy;
  const double c1 = c01 + (c11 - c01) * fy;
  return c0 + (c1 - c0) * fz;
}

template <typename T>
void require_same_dims(const Grid3<T>& a, const Grid3<T>& b, const char* where) {
  if (!a.same_dims(b)) fail(ErrorCode::GeometryMismatch, std::string(where) + ": dims differ");
}

template <typename A, typename B>
void require_same_dims2(const Grid3<A>& a, const Grid3<B>& b, const char* where) {
  if (a.dims != b.dims) fail(ErrorCode::GeometryMismatch, std::string(where) + ": dims differ");
}

inline std::size_t foreground_count(const Mask3& m) {
  std::size_t n = 0;
  for (auto v : m.data) n += (v != 0);
  return n;
}

inline double voxel_volume_mm3(const Vec3& spacing) {
  return spacing[0] * spacing[1] * spacing[2];
}

}  // namespace scarforge

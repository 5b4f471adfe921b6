#pragma once

#include <array>
#include <cmath>
#include <set>
#include <vector>

#include "scarforge/errors.hpp"
#include "scarforge/grid.hpp"

namespace scarforge {

enum class Ring { Basal, Mid, Apical, Apex };

inline Ring ring_of_segment(int seg) {
  if (seg >= 1 && seg <= 6) return Ring::Basal;
  if (seg >= 7 && seg <= 12) return Ring::Mid;
  if (seg >= 13 && seg <= 16) return Ring::Apical;
  if (seg == 17) return Ring::Apex;
  fail(ErrorCode::OutOfRange, "segment id must be in 1..17");
}

inline const char* segment_name(int seg) {
  static const char* names[18] = {"Background",
                                  "Basal Anterior",
                                  "Basal Anteroseptal",
                                  "Basal Inferoseptal",
                                  "Basal Inferior",
                                  "Basal Inferolateral",
                                  "Basal Anterolateral",
                                  "Mid Anterior",
                                  "Mid Anteroseptal",
                                  "Mid Inferoseptal",
                                  "Mid Inferior",
                                  "Mid Inferolateral",
                                  "Mid Anterolateral",
                                  "Apical Anterior",
                                  "Apical Septal",
                                  "Apical Inferior",
                                  "Apical Lateral",
                                  "Apex"};
  if (seg < 0 || seg > 17) fail(ErrorCode::OutOfRange, "segment id must be in 0..17");
  return names[seg];
}

namespace detail {

// Fixed 17-segment adjacency: within-ring cycles, basal<->mid radial pairs
// i<->i+6, the mid<->apical sector overlaps of the 60/90 degree layout, and
// the apex touching all apical segments.
inline std::array<std::set<int>, 18> build_adjacency() {
  std::array<std::set<int>, 18> adj;
  auto link = [&](int a, int b) {
    adj[static_cast<std::size_t>(a)].insert(b);
    adj[static_cast<std::size_t>(b)].insert(a);
  };
  for (int i = 1; i <= 6; ++i) link(i, i % 6 + 1);
  for (int i = 7; i <= 12; ++i) link(i, (i - 6) % 6 + 7);
  for (int i = 13; i <= 16; ++i) link(i, (i - 12) % 4 + 13);
  for (int i = 1; i <= 6; ++i) link(i, i + 6);
  link(7, 13);
  link(12, 13);
  link(8, 14);
  link(9, 14);
  link(9, 15);
  link(10, 15);
  link(11, 16);
  link(12, 16);
  for (int i = 13; i <= 16; ++i) link(i, 17);
  return adj;
}

}  // namespace detail

inline const std::set<int>& adjacency(int seg_id) {
  static const auto table = detail::build_adjacency();
  if (seg_id < 1 || seg_id > 17) fail(ErrorCode::OutOfRange, "adjacency: segment id must be in 1..17");
  return table[static_cast<std::size_t>(seg_id)];
}

// 17-segment LV myocardium atlas: labeled template plus the fixed adjacency
// relation and per-segment bookkeeping.
class AhaAtlas {
 public:
  explicit AhaAtlas(LabelVolume labels) : labels_(std::move(labels)) {
    counts_.fill(0);
    for (auto v : labels_.data) {
      if (v < 0 || v > 17) fail(ErrorCode::OutOfRange, "atlas labels must be in 0..17");
      counts_[static_cast<std::size_t>(v)]++;
    }
  }

  const LabelVolume& labels() const { return labels_; }
  std::size_t segment_voxels(int seg) const {
    if (seg < 0 || seg > 17) fail(ErrorCode::OutOfRange, "segment id must be in 0..17");
    return counts_[static_cast<std::size_t>(seg)];
  }
  bool segment_present(int seg) const { return segment_voxels(seg) > 0; }
  double segment_volume_ml(int seg) const {
    return static_cast<double>(segment_voxels(seg)) * voxel_volume_mm3(labels_.spacing) / 1000.0;
  }

  Mask3 segment_mask(int seg) const {
    if (seg < 1 || seg > 17) fail(ErrorCode::OutOfRange, "segment id must be in 1..17");
    Mask3 m;
    m.dims = labels_.dims;
    m.spacing = labels_.spacing;
    m.origin = labels_.origin;
    m.orientation = labels_.orientation;
    m.data.resize(labels_.voxel_count());
    for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = labels_.data[i] == seg;
    return m;
  }

  Mask3 myocardium_mask() const {
    Mask3 m;
    m.dims = labels_.dims;
    m.spacing = labels_.spacing;
    m.origin = labels_.origin;
    m.orientation = labels_.orientation;
    m.data.resize(labels_.voxel_count());
    for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = labels_.data[i] != 0;
    return m;
  }

 private:
  LabelVolume labels_;
  std::array<std::size_t, 18> counts_{};
};

inline AhaAtlas load_atlas(LabelVolume labels) { return AhaAtlas(std::move(labels)); }

// Fractions along the long axis measured apex (0) -> base (1). A voxel falls
// in the apex cap below `apex_cap`, the apical ring below `mid_apical`, the
// mid ring below `basal_mid`, and the basal ring above it.
struct RingSplits {
  double basal_mid = 2.0 / 3.0;
  double mid_apical = 1.0 / 3.0;
  double apex_cap = 1.0 / 9.0;
};

namespace detail {

// Boundary values go to the lower-numbered sector.
inline int angular_sector(double theta, double width, int sectors) {
  double q = theta / width;
  int s = static_cast<int>(std::floor(q));
  if (q == std::floor(q) && s > 0) s -= 1;
  if (s >= sectors) s = sectors - 1;
  if (s < 0) s = 0;
  return s;
}

}  // namespace detail

// Partitions a myocardium mask into the 17 segments analytically: 60-degree
// sectors for the basal and mid rings, 90-degree sectors for the apical ring,
// and an apex cap, all measured around `long_axis` (unit vector pointing from
// apex to base) starting at `rv_insertion_angle`.
inline LabelVolume analytic_partition(const Mask3& myo, const Vec3& long_axis,
                                      double rv_insertion_angle, const RingSplits& splits = {}) {
  const double axis_norm = std::sqrt(long_axis[0] * long_axis[0] + long_axis[1] * long_axis[1] +
                                     long_axis[2] * long_axis[2]);
  if (std::abs(axis_norm - 1.0) > 1e-6) {
    fail(ErrorCode::InvalidArgument, "analytic_partition: long_axis must be unit norm");
  }
  if (foreground_count(myo) == 0) fail(ErrorCode::EmptyMask, "analytic_partition: empty myocardium");

  // Orthonormal frame (e1, e2, axis); e1 deterministic from the axis.
  Vec3 ref = std::abs(long_axis[0]) < 0.9 ? Vec3{1.0, 0.0, 0.0} : Vec3{0.0, 1.0, 0.0};
  const double d = ref[0] * long_axis[0] + ref[1] * long_axis[1] + ref[2] * long_axis[2];
  Vec3 e1{ref[0] - d * long_axis[0], ref[1] - d * long_axis[1], ref[2] - d * long_axis[2]};
  const double e1n = std::sqrt(e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]);
  for (auto& v : e1) v /= e1n;
  const Vec3 e2{long_axis[1] * e1[2] - long_axis[2] * e1[1],
                long_axis[2] * e1[0] - long_axis[0] * e1[2],
                long_axis[0] * e1[1] - long_axis[1] * e1[0]};

  // Centroid and axial extent of the myocardium.
  Vec3 centroid{0.0, 0.0, 0.0};
  std::size_t n = 0;
  for (int k = 0; k < myo.dims[2]; ++k) {
    for (int j = 0; j < myo.dims[1]; ++j) {
      for (int i = 0; i < myo.dims[0]; ++i) {
        if (!myo.at(i, j, k)) continue;
        const Vec3 p = myo.position(i, j, k);
        centroid[0] += p[0];
        centroid[1] += p[1];
        centroid[2] += p[2];
        ++n;
      }
    }
  }
  for (auto& v : centroid) v /= static_cast<double>(n);

  double a_min = std::numeric_limits<double>::infinity();
  double a_max = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < myo.dims[2]; ++k) {
    for (int j = 0; j < myo.dims[1]; ++j) {
      for (int i = 0; i < myo.dims[0]; ++i) {
        if (!myo.at(i, j, k)) continue;
        const Vec3 p = myo.position(i, j, k);
        const double a = (p[0] - centroid[0]) * long_axis[0] + (p[1] - centroid[1]) * long_axis[1] +
                         (p[2] - centroid[2]) * long_axis[2];
        a_min = std::min(a_min, a);
        a_max = std::max(a_max, a);
      }
    }
  }
  const double extent = a_max > a_min ? a_max - a_min : 1.0;
  const double two_pi = 2.0 * M_PI;

  LabelVolume out;
  out.dims = myo.dims;
  out.spacing = myo.spacing;
  out.origin = myo.origin;
  out.orientation = myo.orientation;
  out.data.assign(myo.voxel_count(), 0);
  for (int k = 0; k < myo.dims[2]; ++k) {
    for (int j = 0; j < myo.dims[1]; ++j) {
      for (int i = 0; i < myo.dims[0]; ++i) {
        if (!myo.at(i, j, k)) continue;
        const Vec3 p = myo.position(i, j, k);
        const Vec3 r{p[0] - centroid[0], p[1] - centroid[1], p[2] - centroid[2]};
        const double a = r[0] * long_axis[0] + r[1] * long_axis[1] + r[2] * long_axis[2];
        const double t = (a - a_min) / extent;
        int label;
        if (t < splits.apex_cap) {
          label = 17;
        } else {
          const double u1 = r[0] * e1[0] + r[1] * e1[1] + r[2] * e1[2];
          const double u2 = r[0] * e2[0] + r[1] * e2[1] + r[2] * e2[2];
          double theta = std::atan2(u2, u1) - rv_insertion_angle;
          theta = std::fmod(theta, two_pi);
          if (theta < 0.0) theta += two_pi;
          if (t >= splits.basal_mid) {
            label = 1 + detail::angular_sector(theta, M_PI / 3.0, 6);
          } else if (t >= splits.mid_apical) {
            label = 7 + detail::angular_sector(theta, M_PI / 3.0, 6);
          } else {
            label = 13 + detail::angular_sector(theta, M_PI / 2.0, 4);
          }
        }
        out.at(i, j, k) = label;
      }
    }
  }
  return out;
}

// Per-segment scalar table for bull's-eye reporting.
struct BullseyeTable {
  std::array<double, 17> values{};  // index s-1 holds segment s
  double outside = 0.0;             // scar voxels carrying atlas label 0

  double total() const {
    double t = 0.0;
    for (double v : values) t += v;
    return t;
  }
};

// Scar volume (mL) per AHA segment; scar voxels outside the labeled
// myocardium are reported in `outside`.
inline BullseyeTable segment_volumes(const Mask3& scar, const AhaAtlas& atlas) {
  const LabelVolume& labels = atlas.labels();
  if (scar.dims != labels.dims) fail(ErrorCode::GeometryMismatch, "segment_volumes: dims differ");
  std::array<std::size_t, 18> counts{};
  for (std::size_t i = 0; i < scar.data.size(); ++i) {
    if (scar.data[i]) counts[static_cast<std::size_t>(labels.data[i])]++;
  }
  const double ml = voxel_volume_mm3(scar.spacing) / 1000.0;
  BullseyeTable t;
  for (int s = 1; s <= 17; ++s) t.values[static_cast<std::size_t>(s - 1)] = counts[static_cast<std::size_t>(s)] * ml;
  t.outside = counts[0] * ml;
  return t;
}

}  // namespace scarforge

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "scarforge/aha.hpp"
#include "scarforge/blob.hpp"
#include "scarforge/demons.hpp"
#include "scarforge/distance.hpp"
#include "scarforge/errors.hpp"
#include "scarforge/filter.hpp"
#include "scarforge/grid.hpp"
#include "scarforge/morphology.hpp"
#include "scarforge/preprocess.hpp"
#include "scarforge/rigid.hpp"
#include "scarforge/rng.hpp"

namespace scarforge {

struct ScarSpec {
  int n_regions = 1;
  std::vector<Ring> allowed_rings{Ring::Basal, Ring::Mid, Ring::Apical, Ring::Apex};
  double volume_min_ml = 2.0;
  double volume_max_ml = 40.0;
  Vec3 anisotropy{1.0, 1.0, 1.0};
  double porosity_min = 0.3;
  double porosity_max = 0.8;
  std::vector<int> kernels{1, 3};
  std::uint64_t seed = 0;

  void validate() const {
    if (n_regions < 1) fail(ErrorCode::InvalidArgument, "ScarSpec: n_regions must be >= 1");
    if (n_regions > 17) fail(ErrorCode::InvalidArgument, "ScarSpec: n_regions must be <= 17");
    if (allowed_rings.empty()) fail(ErrorCode::InvalidArgument, "ScarSpec: allowed_rings empty");
    if (!(volume_min_ml > 0.0 && volume_min_ml <= volume_max_ml)) {
      fail(ErrorCode::InvalidArgument, "ScarSpec: need 0 < volume_min_ml <= volume_max_ml");
    }
    if (!(porosity_min > 0.0 && porosity_min <= porosity_max && porosity_max <= 1.0)) {
      fail(ErrorCode::InvalidArgument, "ScarSpec: need 0 < porosity_min <= porosity_max <= 1");
    }
    for (double a : anisotropy) {
      if (!(a >= 1.0)) fail(ErrorCode::InvalidArgument, "ScarSpec: anisotropy components must be >= 1");
    }
    if (kernels.empty()) fail(ErrorCode::InvalidArgument, "ScarSpec: kernel list empty");
    for (int k : kernels) {
      if (k != 1 && k != 3 && k != 5 && k != 7) {
        fail(ErrorCode::InvalidArgument, "ScarSpec: kernels must be odd and in {1,3,5,7}");
      }
    }
  }
};

struct RegionRecord {
  int segment = 0;
  double requested_ml = 0.0;  // after the 95% segment-volume cap
  double achieved_ml = 0.0;
  double porosity = 0.0;  // tuned quantile actually used
  int kernel = 1;
  bool capped = false;
};

struct GeneratedScar {
  Mask3 mask;
  std::vector<RegionRecord> regions;
  std::uint64_t seed = 0;
};

inline bool ring_allowed(const ScarSpec& spec, Ring r) {
  return std::find(spec.allowed_rings.begin(), spec.allowed_rings.end(), r) !=
         spec.allowed_rings.end();
}

// Random connected growth over the AHA adjacency graph, restricted to
// segments that are present in the atlas and whose ring is allowed. Starts
// are drawn only from components large enough to hold n_regions, so a grown
// set never dead-ends.
inline std::vector<int> select_regions(const AhaAtlas& atlas, const ScarSpec& spec, Rng& rng) {
  spec.validate();
  std::vector<int> allowed;
  for (int s = 1; s <= 17; ++s) {
    if (atlas.segment_present(s) && ring_allowed(spec, ring_of_segment(s))) allowed.push_back(s);
  }
  const auto n = static_cast<std::size_t>(spec.n_regions);
  if (allowed.size() < n) {
    fail(ErrorCode::Unsatisfiable, "select_regions: fewer allowed segments than n_regions");
  }

  // Component sizes of the allowed-induced subgraph.
  std::array<int, 18> comp{};
  comp.fill(-1);
  std::vector<std::size_t> comp_size;
  for (int s : allowed) {
    if (comp[static_cast<std::size_t>(s)] >= 0) continue;
    const int id = static_cast<int>(comp_size.size());
    std::size_t size = 0;
    std::vector<int> stack{s};
    comp[static_cast<std::size_t>(s)] = id;
    while (!stack.empty()) {
      const int cur = stack.back();
      stack.pop_back();
      ++size;
      for (int nb : adjacency(cur)) {
        if (comp[static_cast<std::size_t>(nb)] >= 0) continue;
        if (std::find(allowed.begin(), allowed.end(), nb) == allowed.end()) continue;
        comp[static_cast<std::size_t>(nb)] = id;
        stack.push_back(nb);
      }
    }
    comp_size.push_back(size);
  }
  std::vector<int> starts;
  for (int s : allowed) {
    if (comp_size[static_cast<std::size_t>(comp[static_cast<std::size_t>(s)])] >= n) starts.push_back(s);
  }
  if (starts.empty()) {
    fail(ErrorCode::Unsatisfiable, "select_regions: no connected set of the requested size exists");
  }

  std::vector<int> chosen{starts[rng.uniform_int(starts.size())]};
  std::vector<int> frontier;
  auto extend_frontier = [&](int s) {
    for (int nb : adjacency(s)) {
      if (std::find(allowed.begin(), allowed.end(), nb) == allowed.end()) continue;
      if (std::find(chosen.begin(), chosen.end(), nb) != chosen.end()) continue;
      if (std::find(frontier.begin(), frontier.end(), nb) != frontier.end()) continue;
      frontier.insert(std::upper_bound(frontier.begin(), frontier.end(), nb), nb);
    }
  };
  extend_frontier(chosen[0]);
  while (chosen.size() < n) {
    const auto pick = rng.uniform_int(frontier.size());
    const int s = frontier[pick];
    frontier.erase(frontier.begin() + static_cast<std::ptrdiff_t>(pick));
    chosen.push_back(s);
    extend_frontier(s);
  }
  return chosen;
}

struct SampledVolume {
  double ml = 0.0;
  bool capped = false;
};

// Uniform per-region targets on [volume_min, volume_max], capped at 95% of
// the segment's myocardial volume.
inline std::vector<SampledVolume> sample_volumes(const AhaAtlas& atlas, const std::vector<int>& regions,
                                                 const ScarSpec& spec, Rng& rng) {
  std::vector<SampledVolume> out;
  out.reserve(regions.size());
  for (int seg : regions) {
    SampledVolume sv;
    sv.ml = rng.uniform(spec.volume_min_ml, spec.volume_max_ml);
    const double cap = 0.95 * atlas.segment_volume_ml(seg);
    if (sv.ml > cap) {
      sv.ml = cap;
      sv.capped = true;
    }
    out.push_back(sv);
  }
  return out;
}

struct PlacedRegion {
  Mask3 mask;
  double achieved_ml = 0.0;
  double porosity = 0.0;
  int kernel = 1;
};

// Grows a textured blob over the segment's padded bounding box and tunes the
// threshold quantile by bisection until the eroded, segment-clipped volume
// lands within 15% of the target. Empty or badly undershooting attempts get
// fresh noise, up to five tries.
inline PlacedRegion place_region_scar(const AhaAtlas& atlas, int segment, double target_ml,
                                      const ScarSpec& spec, Rng& rng) {
  spec.validate();
  Mask3 seg_mask = atlas.segment_mask(segment);
  if (foreground_count(seg_mask) == 0) {
    fail(ErrorCode::EmptyMask, "place_region_scar: segment " + std::to_string(segment) + " empty");
  }
  const double vox_ml = voxel_volume_mm3(seg_mask.spacing) / 1000.0;
  if (target_ml < vox_ml) {
    fail(ErrorCode::InvalidArgument, "place_region_scar: target below one voxel's volume");
  }

  const int kernel = spec.kernels[rng.uniform_int(spec.kernels.size())];
  const int margin = kernel / 2 + 2;
  const CropResult<std::uint8_t> box = crop_to_bbox(seg_mask, seg_mask, margin);
  const Mask3& seg_box = box.grid;
  const std::size_t n_box = seg_box.voxel_count();
  const double tol = 0.15 * target_ml;
  const double p0 = rng.uniform(spec.porosity_min, spec.porosity_max);

  Mask3 best_mask;
  double best_ml = -1.0;
  double best_q = 0.0;
  for (int attempt = 0; attempt < 5; ++attempt) {
    const Volume3 field = blob_field(seg_box.dims, spec.anisotropy, rng);
    const auto order = detail::descending_order(field.data);
    auto evaluate = [&](double q) {
      const auto k = static_cast<std::size_t>(std::llround(q * static_cast<double>(n_box)));
      Mask3 m = detail::select_top(field, order, k);
      m = erode(m, kernel);
      m = mask_and(m, seg_box);
      const double ml = static_cast<double>(foreground_count(m)) * vox_ml;
      return std::pair<Mask3, double>(std::move(m), ml);
    };

    double lo = 0.0, hi = 1.0, q = p0;
    double attempt_best_ml = -1.0;
    Mask3 attempt_best_mask;
    double attempt_best_q = 0.0;
    for (int iter = 0; iter < 20; ++iter) {
      auto [m, ml] = evaluate(q);
      if (attempt_best_ml < 0.0 || std::abs(ml - target_ml) < std::abs(attempt_best_ml - target_ml)) {
        attempt_best_ml = ml;
        attempt_best_mask = std::move(m);
        attempt_best_q = q;
      }
      if (std::abs(ml - target_ml) <= tol) break;
      if (ml < target_ml) {
        lo = q;
      } else {
        hi = q;
      }
      q = 0.5 * (lo + hi);
    }
    if (best_ml < 0.0 || std::abs(attempt_best_ml - target_ml) < std::abs(best_ml - target_ml)) {
      best_ml = attempt_best_ml;
      best_mask = std::move(attempt_best_mask);
      best_q = attempt_best_q;
    }
    if (best_ml >= 0.1 * target_ml) break;
  }
  if (best_ml < 0.1 * target_ml) {
    fail(ErrorCode::Unsatisfiable,
         "place_region_scar: could not reach 10% of the target volume after retries");
  }

  PlacedRegion out;
  out.mask.dims = seg_mask.dims;
  out.mask.spacing = seg_mask.spacing;
  out.mask.origin = seg_mask.origin;
  out.mask.orientation = seg_mask.orientation;
  out.mask.data.assign(seg_mask.voxel_count(), 0);
  paste_from_bbox(out.mask, best_mask, box.offset);
  out.achieved_ml = best_ml;
  out.porosity = best_q;
  out.kernel = kernel;
  return out;
}

// Hole fill, Gaussian smoothing of the indicator re-thresholded at 0.5,
// small-component removal, then an optional re-clip to the myocardium. All
// work happens on a padded bounding box; every step is local, so the result
// matches the full-grid computation. At the default sigma of 0.5 the
// smooth-and-threshold step maps its own output to itself, so reapplying
// postprocess is a no-op; larger sigmas keep eroding convex boundary and do
// not stabilize after one pass.
inline Mask3 postprocess(const Mask3& m, const Mask3* myo = nullptr, double sigma_voxels = 0.5,
                         std::size_t min_component_voxels = 8) {
  if (myo != nullptr) require_same_dims(m, *myo, "postprocess");
  if (foreground_count(m) == 0) return m;

  const int margin = static_cast<int>(std::ceil(3.0 * std::max(0.0, sigma_voxels))) + 2;
  const CropResult<std::uint8_t> crop = crop_to_bbox(m, m, margin);
  Mask3 box = fill_holes(crop.grid);
  if (sigma_voxels > 0.0) {
    Volume3 ind;
    ind.dims = box.dims;
    ind.spacing = box.spacing;
    ind.origin = box.origin;
    ind.orientation = box.orientation;
    ind.data.resize(box.voxel_count());
    for (std::size_t i = 0; i < ind.data.size(); ++i) ind.data[i] = box.data[i] ? 1.0f : 0.0f;
    ind = gaussian_smooth(ind, sigma_voxels);
    for (std::size_t i = 0; i < ind.data.size(); ++i) box.data[i] = ind.data[i] > 0.5f;
  }
  box = remove_small_components(box, min_component_voxels);

  Mask3 out;
  out.dims = m.dims;
  out.spacing = m.spacing;
  out.origin = m.origin;
  out.orientation = m.orientation;
  out.data.assign(m.voxel_count(), 0);
  paste_from_bbox(out, box, crop.offset);
  if (myo != nullptr) out = mask_and(out, *myo);
  return out;
}

// End-to-end mask synthesis in template space: select connected regions,
// sample per-region volumes, place textured blobs, merge, postprocess.
// Deterministic in (spec, seed) because every stage draws from its own
// derived stream.
inline GeneratedScar generate_scar_mask(const AhaAtlas& atlas, const Mask3& myo_template,
                                        const ScarSpec& spec, double postprocess_sigma = 0.5,
                                        std::size_t min_component_voxels = 8) {
  spec.validate();
  require_same_dims2(myo_template, atlas.labels(), "generate_scar_mask");

  Rng select_rng = Rng::stream(spec.seed, 1);
  Rng volume_rng = Rng::stream(spec.seed, 2);
  const std::vector<int> regions = select_regions(atlas, spec, select_rng);
  const std::vector<SampledVolume> volumes = sample_volumes(atlas, regions, spec, volume_rng);

  GeneratedScar result;
  result.seed = spec.seed;
  Mask3 merged;
  merged.dims = myo_template.dims;
  merged.spacing = myo_template.spacing;
  merged.origin = myo_template.origin;
  merged.orientation = myo_template.orientation;
  merged.data.assign(myo_template.voxel_count(), 0);
  for (std::size_t i = 0; i < regions.size(); ++i) {
    Rng region_rng = Rng::stream(spec.seed, 16 + i);
    PlacedRegion placed = place_region_scar(atlas, regions[i], volumes[i].ml, spec, region_rng);
    Mask3 clipped = mask_and(placed.mask, myo_template);
    merged = mask_or(merged, clipped);
    RegionRecord rec;
    rec.segment = regions[i];
    rec.requested_ml = volumes[i].ml;
    rec.achieved_ml = placed.achieved_ml;
    rec.porosity = placed.porosity;
    rec.kernel = placed.kernel;
    rec.capped = volumes[i].capped;
    result.regions.push_back(rec);
  }
  result.mask = postprocess(merged, &myo_template, postprocess_sigma, min_component_voxels);
  return result;
}

enum class WarpOrder { DemonsThenRigid, RigidThenDemons };

// Carries a generated scar from template space to a subject's anatomy:
// demons between the signed-distance transforms of the two myocardium masks,
// then a rigid mutual-information refinement (or the reverse order when
// asked). The composed map is applied to the scar with nearest-neighbor
// sampling and the result clipped to the subject myocardium.
inline Mask3 to_subject_space(const Mask3& scar, const Mask3& myo_template, const Mask3& myo_subject,
                              const Mask3* existing_scar = nullptr,
                              WarpOrder order = WarpOrder::DemonsThenRigid,
                              const DemonsParams& demons_params = {}, const RigidConfig& rigid_cfg = {}) {
  require_same_dims(scar, myo_template, "to_subject_space");
  require_same_dims(myo_template, myo_subject, "to_subject_space");
  if (existing_scar != nullptr) require_same_dims(*existing_scar, myo_subject, "to_subject_space");
  if (foreground_count(myo_template) == 0 || foreground_count(myo_subject) == 0) {
    fail(ErrorCode::EmptyMask, "to_subject_space: empty myocardium mask");
  }

  constexpr double kSdtCapMm = 20.0;
  const Volume3 sdt_t = signed_distance(myo_template, kSdtCapMm);
  const Volume3 sdt_s = signed_distance(myo_subject, kSdtCapMm);

  Mask3 warped;
  if (order == WarpOrder::DemonsThenRigid) {
    const DisplacementField field = demons_register(sdt_s, sdt_t, demons_params);
    const Volume3 warped_sdt = warp(sdt_t, field, Interp::Trilinear);
    const RigidResult rigid = rigid_register(sdt_s, warped_sdt, rigid_cfg);
    warped = warp(warp(scar, field), rigid.transform);
  } else {
    const RigidResult rigid = rigid_register(sdt_s, sdt_t, rigid_cfg);
    const Volume3 warped_sdt = warp(sdt_t, rigid.transform, Interp::Trilinear);
    const DisplacementField field = demons_register(sdt_s, warped_sdt, demons_params);
    warped = warp(warp(scar, rigid.transform), field);
  }

  Mask3 out = mask_and(warped, myo_subject);
  if (foreground_count(out) == 0) {
    fail(ErrorCode::EmptyMask, "to_subject_space: scar empty after warping");
  }
  if (existing_scar != nullptr) out = mask_or(out, *existing_scar);
  return out;
}

}  // namespace scarforge

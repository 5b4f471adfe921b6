#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <queue>
#include <set>

#include "test_util.hpp"

using namespace scarforge;

namespace {

// Synthetic atlas with one box-shaped segment of an exact volume, for the
// cap / volume-targeting cases.
LabelVolume box_segment_labels(int segment, const Index3& dims, const Index3& lo,
                               const Index3& box) {
  LabelVolume labels;
  labels.dims = dims;
  labels.spacing = {1.0, 1.0, 1.0};
  labels.data.assign(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], 0);
  for (int k = lo[2]; k < lo[2] + box[2]; ++k)
    for (int j = lo[1]; j < lo[1] + box[1]; ++j)
      for (int i = lo[0]; i < lo[0] + box[0]; ++i) labels.at(i, j, k) = segment;
  return labels;
}

bool connected_in_adjacency(const std::vector<int>& segs) {
  if (segs.empty()) return false;
  const std::set<int> pool(segs.begin(), segs.end());
  std::set<int> visited{segs[0]};
  std::queue<int> frontier;
  frontier.push(segs[0]);
  while (!frontier.empty()) {
    const int s = frontier.front();
    frontier.pop();
    for (int t : adjacency(s)) {
      if (pool.count(t) && visited.insert(t).second) frontier.push(t);
    }
  }
  return visited.size() == pool.size();
}

std::array<double, 3> mask_centroid(const Mask3& m) {
  double cx = 0.0, cy = 0.0, cz = 0.0;
  std::size_t n = 0;
  for (int k = 0; k < m.dims[2]; ++k)
    for (int j = 0; j < m.dims[1]; ++j)
      for (int i = 0; i < m.dims[0]; ++i) {
        if (!m.at(i, j, k)) continue;
        cx += i;
        cy += j;
        cz += k;
        ++n;
      }
  return {cx / static_cast<double>(n), cy / static_cast<double>(n), cz / static_cast<double>(n)};
}

}  // namespace

TEST_CASE("single-region selection picks an allowed segment", "[maskgen]") {
  const AnnulusPhantom ph = make_annulus_phantom({64, 64, 64}, {1.0, 1.0, 1.0});
  const AhaAtlas atlas = load_atlas(ph.labels);
  ScarSpec spec;
  spec.allowed_rings = {Ring::Mid};
  Rng rng(3);
  const std::vector<int> segs = select_regions(atlas, spec, rng);
  REQUIRE(segs.size() == 1);
  CHECK(segs[0] >= 7);
  CHECK(segs[0] <= 12);
  CHECK(atlas.segment_present(segs[0]));
}

TEST_CASE("multi-region selections are always connected", "[maskgen]") {
  const AnnulusPhantom ph = make_annulus_phantom({64, 64, 64}, {1.0, 1.0, 1.0});
  const AhaAtlas atlas = load_atlas(ph.labels);
  ScarSpec spec;
  spec.n_regions = 3;
  int violations = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    Rng rng(seed);
    const std::vector<int> segs = select_regions(atlas, spec, rng);
    REQUIRE(segs.size() == 3);
    if (!connected_in_adjacency(segs)) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("selection fails when the allowed rings cannot host the regions", "[maskgen]") {
  const AnnulusPhantom ph = make_annulus_phantom({64, 64, 64}, {1.0, 1.0, 1.0});
  const AhaAtlas atlas = load_atlas(ph.labels);
  ScarSpec spec;
  spec.n_regions = 2;
  spec.allowed_rings = {Ring::Apex};  // one segment only
  Rng rng(0);
  CHECK_THROWS_AS(select_regions(atlas, spec, rng), Error);
}

TEST_CASE("a degenerate volume range draws a constant", "[maskgen]") {
  const AnnulusPhantom ph = make_annulus_phantom({64, 64, 64}, {1.0, 1.0, 1.0});
  const AhaAtlas atlas = load_atlas(ph.labels);
  ScarSpec spec;
  spec.volume_min_ml = 2.0;
  spec.volume_max_ml = 2.0;
  Rng rng(1);
  const auto volumes = sample_volumes(atlas, {8, 9, 10}, spec, rng);
  for (const auto& v : volumes) {
    REQUIRE(v.ml == 2.0);
    REQUIRE_FALSE(v.capped);
  }
}

TEST_CASE("volume draws are uniform over the requested range", "[maskgen]") {
  // A huge fake segment so the cap never engages.
  const LabelVolume labels = box_segment_labels(8, {60, 60, 60}, {0, 0, 0}, {60, 60, 60});
  const AhaAtlas atlas = load_atlas(labels);
  ScarSpec spec;
  spec.volume_min_ml = 1.0;
  spec.volume_max_ml = 5.0;
  Rng rng(17);
  const int n = 10000;
  std::vector<double> draws;
  draws.reserve(n);
  for (int i = 0; i < n; ++i) draws.push_back(sample_volumes(atlas, {8}, spec, rng)[0].ml);
  const double mean = std::accumulate(draws.begin(), draws.end(), 0.0) / n;
  CHECK(std::abs(mean - 3.0) < 0.1);

  // Kolmogorov-Smirnov statistic against the uniform CDF.
  std::sort(draws.begin(), draws.end());
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    const double cdf = (draws[static_cast<std::size_t>(i)] - 1.0) / 4.0;
    ks = std::max(ks, std::abs(cdf - (i + 1.0) / n));
    ks = std::max(ks, std::abs(cdf - static_cast<double>(i) / n));
  }
  CHECK(ks < 0.02);
}

TEST_CASE("requests beyond the segment volume are capped and flagged", "[maskgen]") {
  // 10000 voxels at 1 mm^3 = 10 mL.
  const LabelVolume labels = box_segment_labels(8, {40, 40, 40}, {5, 5, 5}, {20, 25, 20});
  const AhaAtlas atlas = load_atlas(labels);
  REQUIRE(atlas.segment_volume_ml(8) == 10.0);
  ScarSpec spec;
  spec.volume_min_ml = 50.0;
  spec.volume_max_ml = 50.0;
  Rng rng(2);
  const auto volumes = sample_volumes(atlas, {8}, spec, rng);
  CHECK(volumes[0].ml == 9.5);
  CHECK(volumes[0].capped);
}

TEST_CASE("porosity one fills the whole block", "[maskgen]") {
  Rng rng(5);
  const Mask3 b = generate_blob({16, 16, 16}, 1.0, {1.0, 1.0, 1.0}, rng);
  CHECK(foreground_count(b) == b.data.size());
}

TEST_CASE("realized porosity tracks the request", "[maskgen]") {
  Rng rng(6);
  const Mask3 b = generate_blob({64, 64, 64}, 0.3, {1.0, 1.0, 1.0}, rng);
  const double frac = static_cast<double>(foreground_count(b)) / static_cast<double>(b.data.size());
  CHECK(frac >= 0.28);
  CHECK(frac <= 0.32);
}

TEST_CASE("anisotropy elongates the blob texture", "[maskgen]") {
  Rng rng(7);
  const Mask3 b = generate_blob({64, 64, 64}, 0.3, {4.0, 1.0, 1.0}, rng);
  // Second moments about the foreground centroid (inertia-tensor oracle).
  const auto c = mask_centroid(b);
  double sxx = 0.0, syy = 0.0;
  std::size_t n = 0;
  for (int k = 0; k < 64; ++k)
    for (int j = 0; j < 64; ++j)
      for (int i = 0; i < 64; ++i) {
        if (!b.at(i, j, k)) continue;
        sxx += (i - c[0]) * (i - c[0]);
        syy += (j - c[1]) * (j - c[1]);
        ++n;
      }
  CHECK(sxx / static_cast<double>(n) >= 2.0 * (syy / static_cast<double>(n)));
}

TEST_CASE("erosion with a unit kernel is the identity", "[maskgen]") {
  const Mask3 m = testutil::random_mask({12, 12, 12}, 8, 0.4);
  CHECK(erode(m, 1).data == m.data);
}

TEST_CASE("erosion shrinks a cube by the kernel radius", "[maskgen]") {
  Mask3 m = testutil::make_mask({9, 9, 9}, {1.0, 1.0, 1.0});
  for (int k = 2; k < 7; ++k)
    for (int j = 2; j < 7; ++j)
      for (int i = 2; i < 7; ++i) m.at(i, j, k) = 1;  // 5^3 cube
  const Mask3 e = erode(m, 3);
  CHECK(foreground_count(e) == 27);  // 3^3 survives
  for (int k = 3; k < 6; ++k)
    for (int j = 3; j < 6; ++j)
      for (int i = 3; i < 6; ++i) REQUIRE(e.at(i, j, k) == 1);
}

TEST_CASE("eroding a thin sheet empties it", "[maskgen]") {
  Mask3 m = testutil::make_mask({9, 9, 9}, {1.0, 1.0, 1.0});
  for (int j = 0; j < 9; ++j)
    for (int i = 0; i < 9; ++i) m.at(i, j, 4) = 1;
  CHECK(foreground_count(erode(m, 3)) == 0);
}

TEST_CASE("saturated placement covers the whole segment", "[maskgen]") {
  const LabelVolume labels = box_segment_labels(9, {24, 24, 24}, {6, 6, 6}, {12, 12, 12});
  const AhaAtlas atlas = load_atlas(labels);
  ScarSpec spec;
  spec.porosity_min = 1.0;
  spec.porosity_max = 1.0;
  spec.kernels = {1};
  Rng rng(9);
  const PlacedRegion placed = place_region_scar(atlas, 9, atlas.segment_volume_ml(9), spec, rng);
  CHECK(placed.mask.data == atlas.segment_mask(9).data);
}

TEST_CASE("placement hits the volume target within tolerance", "[maskgen]") {
  const LabelVolume labels = box_segment_labels(8, {40, 40, 40}, {5, 5, 5}, {20, 25, 20});
  const AhaAtlas atlas = load_atlas(labels);
  ScarSpec spec;
  Rng rng(7);
  const PlacedRegion placed = place_region_scar(atlas, 8, 1.0, spec, rng);
  CHECK(placed.achieved_ml >= 0.85);
  CHECK(placed.achieved_ml <= 1.15);
  const Mask3 seg = atlas.segment_mask(8);
  for (std::size_t i = 0; i < placed.mask.data.size(); ++i) {
    if (placed.mask.data[i]) REQUIRE(seg.data[i] == 1);
  }
}

TEST_CASE("sub-voxel volume targets are rejected", "[maskgen]") {
  const LabelVolume labels = box_segment_labels(8, {24, 24, 24}, {4, 4, 4}, {10, 10, 10});
  const AhaAtlas atlas = load_atlas(labels);
  ScarSpec spec;
  Rng rng(3);
  CHECK_THROWS_AS(place_region_scar(atlas, 8, 0.0001, spec, rng), Error);
}

TEST_CASE("postprocess fills enclosed cavities", "[maskgen]") {
  Mask3 m = testutil::make_mask({15, 15, 15}, {1.0, 1.0, 1.0});
  for (int k = 4; k < 11; ++k)
    for (int j = 4; j < 11; ++j)
      for (int i = 4; i < 11; ++i) {
        const bool shell = i == 4 || i == 10 || j == 4 || j == 10 || k == 4 || k == 10;
        if (shell) m.at(i, j, k) = 1;
      }
  const Mask3 p = postprocess(m, nullptr, 0.5, 1);
  for (int k = 5; k < 10; ++k)
    for (int j = 5; j < 10; ++j)
      for (int i = 5; i < 10; ++i) REQUIRE(p.at(i, j, k) == 1);
}

TEST_CASE("postprocess drops far-away specks", "[maskgen]") {
  Mask3 m = testutil::make_mask({24, 24, 24}, {1.0, 1.0, 1.0});
  for (int k = 4; k < 8; ++k)
    for (int j = 4; j < 8; ++j)
      for (int i = 4; i < 8; ++i) m.at(i, j, k) = 1;  // main blob, 64 voxels
  m.at(20, 20, 20) = 1;                               // isolated voxel 10+ away
  const Mask3 p = postprocess(m, nullptr, 0.5, 5);
  CHECK(p.at(20, 20, 20) == 0);
  CHECK(foreground_count(p) > 0);
}

TEST_CASE("postprocess is idempotent", "[maskgen]") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const Mask3 m = generate_blob({24, 24, 24}, 0.4, {1.0, 1.0, 1.0}, rng);
    const Mask3 once = postprocess(m);
    const Mask3 twice = postprocess(once);
    REQUIRE(twice.data == once.data);
  }
}

TEST_CASE("identical specs produce bit-identical masks", "[maskgen]") {
  const AnnulusPhantom ph = make_annulus_phantom({64, 64, 64}, {1.0, 1.0, 1.0});
  const AhaAtlas atlas = load_atlas(ph.labels);
  ScarSpec spec;
  spec.seed = 12345;
  spec.n_regions = 2;
  const GeneratedScar a = generate_scar_mask(atlas, ph.myo, spec);
  const GeneratedScar b = generate_scar_mask(atlas, ph.myo, spec);
  CHECK(a.mask.data == b.mask.data);
  REQUIRE(a.regions.size() == b.regions.size());
  for (std::size_t i = 0; i < a.regions.size(); ++i) {
    REQUIRE(a.regions[i].segment == b.regions[i].segment);
    REQUIRE(a.regions[i].achieved_ml == b.regions[i].achieved_ml);
  }
}

TEST_CASE("scar lands in the selected segments with little bleed", "[maskgen]") {
  const AnnulusPhantom ph = make_annulus_phantom({96, 96, 96}, {1.0, 1.0, 1.0});
  const AhaAtlas atlas = load_atlas(ph.labels);
  ScarSpec spec;
  spec.seed = 77;
  spec.n_regions = 2;
  const GeneratedScar g = generate_scar_mask(atlas, ph.myo, spec);
  std::set<int> selected;
  for (const auto& r : g.regions) selected.insert(r.segment);
  REQUIRE(selected.size() == 2);
  std::size_t inside = 0, outside = 0;
  for (std::size_t i = 0; i < g.mask.data.size(); ++i) {
    if (!g.mask.data[i]) continue;
    if (selected.count(ph.labels.data[i])) {
      ++inside;
    } else {
      ++outside;
    }
  }
  CHECK(inside > 0);
  // Smoothing may bleed across segment borders, but only marginally.
  CHECK(static_cast<double>(outside) < 0.02 * static_cast<double>(inside + outside));
}

TEST_CASE("generated masks stay inside the myocardium", "[maskgen]") {
  const AnnulusPhantom ph = make_annulus_phantom({64, 64, 64}, {1.0, 1.0, 1.0});
  const AhaAtlas atlas = load_atlas(ph.labels);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ScarSpec spec;
    spec.seed = seed;
    spec.n_regions = 1 + static_cast<int>(seed % 3);
    const GeneratedScar g = generate_scar_mask(atlas, ph.myo, spec);
    for (std::size_t i = 0; i < g.mask.data.size(); ++i) {
      if (g.mask.data[i]) REQUIRE(ph.myo.data[i] == 1);
    }
  }
}

TEST_CASE("selection does not collapse onto a few segments", "[maskgen]") {
  const AnnulusPhantom ph = make_annulus_phantom({64, 64, 64}, {1.0, 1.0, 1.0});
  const AhaAtlas atlas = load_atlas(ph.labels);
  std::set<int> seen;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    ScarSpec spec;
    spec.seed = seed;
    Rng rng = Rng::stream(spec.seed, 1);
    for (int s : select_regions(atlas, spec, rng)) seen.insert(s);
  }
  CHECK(seen.size() >= 12);
}

TEST_CASE("subject mapping is stable when anatomies coincide", "[maskgen]") {
  const AnnulusPhantom ph = make_annulus_phantom({64, 64, 64}, {1.0, 1.0, 1.0});
  const AhaAtlas atlas = load_atlas(ph.labels);
  ScarSpec spec;
  spec.seed = 3;
  const GeneratedScar g = generate_scar_mask(atlas, ph.myo, spec);
  const Mask3 warped = to_subject_space(g.mask, ph.myo, ph.myo);
  CHECK(dice(confusion(warped, g.mask)) > 0.95);
}

TEST_CASE("subject mapping follows a translated anatomy", "[maskgen]") {
  const AnnulusPhantom ph = make_annulus_phantom({64, 64, 64}, {1.0, 1.0, 1.0});
  const AhaAtlas atlas = load_atlas(ph.labels);
  ScarSpec spec;
  spec.seed = 4;
  const GeneratedScar g = generate_scar_mask(atlas, ph.myo, spec);
  Mask3 myo_subject = testutil::make_mask({64, 64, 64}, {1.0, 1.0, 1.0});
  for (int k = 0; k < 64; ++k)
    for (int j = 0; j < 64; ++j)
      for (int i = 4; i < 64; ++i) myo_subject.at(i, j, k) = ph.myo.at(i - 4, j, k);
  const Mask3 warped = to_subject_space(g.mask, ph.myo, myo_subject);
  const auto c0 = mask_centroid(g.mask);
  const auto c1 = mask_centroid(warped);
  CHECK(std::abs(c1[0] - c0[0] - 4.0) < 0.75);
  CHECK(std::abs(c1[1] - c0[1]) < 0.75);
  CHECK(std::abs(c1[2] - c0[2]) < 0.75);
}

TEST_CASE("an existing scar is kept exactly under the union contract", "[maskgen]") {
  const AnnulusPhantom ph = make_annulus_phantom({64, 64, 64}, {1.0, 1.0, 1.0});
  const AhaAtlas atlas = load_atlas(ph.labels);
  ScarSpec spec;
  spec.seed = 5;
  const GeneratedScar g = generate_scar_mask(atlas, ph.myo, spec);
  ScarSpec spec2;
  spec2.seed = 6;
  const GeneratedScar other = generate_scar_mask(atlas, ph.myo, spec2);
  const Mask3 warped = to_subject_space(g.mask, ph.myo, ph.myo, &other.mask);
  for (std::size_t i = 0; i < other.mask.data.size(); ++i) {
    if (other.mask.data[i]) REQUIRE(warped.data[i] == 1);
  }
}

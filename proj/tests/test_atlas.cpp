#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <queue>
#include <set>

#include "test_util.hpp"

using namespace scarforge;

namespace {

// Independent per-voxel sector oracle for an axis-aligned annulus with long
// axis +z: centroid and axial extent computed afresh, angle by plain atan2.
LabelVolume partition_oracle(const Mask3& myo, double rv_angle, const RingSplits& splits) {
  double cx = 0.0, cy = 0.0, cz = 0.0;
  std::size_t n = 0;
  for (int k = 0; k < myo.dims[2]; ++k)
    for (int j = 0; j < myo.dims[1]; ++j)
      for (int i = 0; i < myo.dims[0]; ++i) {
        if (!myo.at(i, j, k)) continue;
        cx += myo.position(i, j, k)[0];
        cy += myo.position(i, j, k)[1];
        cz += myo.position(i, j, k)[2];
        ++n;
      }
  cx /= static_cast<double>(n);
  cy /= static_cast<double>(n);
  cz /= static_cast<double>(n);
  double zmin = 1e300, zmax = -1e300;
  for (int k = 0; k < myo.dims[2]; ++k)
    for (int j = 0; j < myo.dims[1]; ++j)
      for (int i = 0; i < myo.dims[0]; ++i) {
        if (!myo.at(i, j, k)) continue;
        const double z = myo.position(i, j, k)[2] - cz;
        zmin = std::min(zmin, z);
        zmax = std::max(zmax, z);
      }
  const double extent = zmax - zmin;

  auto sector = [](double theta, double width, int nsec) {
    double q = theta / width;
    int s = static_cast<int>(std::floor(q));
    if (q == std::floor(q) && s > 0) s -= 1;  // boundary to the lower sector
    return std::min(std::max(s, 0), nsec - 1);
  };

  LabelVolume out;
  out.dims = myo.dims;
  out.spacing = myo.spacing;
  out.origin = myo.origin;
  out.data.assign(myo.voxel_count(), 0);
  for (int k = 0; k < myo.dims[2]; ++k)
    for (int j = 0; j < myo.dims[1]; ++j)
      for (int i = 0; i < myo.dims[0]; ++i) {
        if (!myo.at(i, j, k)) continue;
        const Vec3 p = myo.position(i, j, k);
        const double t = (p[2] - cz - zmin) / extent;
        int label;
        if (t < splits.apex_cap) {
          label = 17;
        } else {
          double theta = std::atan2(p[1] - cy, p[0] - cx) - rv_angle;
          theta = std::fmod(theta, 2.0 * M_PI);
          if (theta < 0.0) theta += 2.0 * M_PI;
          if (t >= splits.basal_mid) {
            label = 1 + sector(theta, M_PI / 3.0, 6);
          } else if (t >= splits.mid_apical) {
            label = 7 + sector(theta, M_PI / 3.0, 6);
          } else {
            label = 13 + sector(theta, M_PI / 2.0, 4);
          }
        }
        out.at(i, j, k) = label;
      }
  return out;
}

}  // namespace

TEST_CASE("a fully labeled annulus loads with all 17 segments present", "[atlas]") {
  const AnnulusPhantom ph = make_annulus_phantom({64, 64, 64}, {1.0, 1.0, 1.0});
  const AhaAtlas atlas = load_atlas(ph.labels);
  for (int s = 1; s <= 17; ++s) {
    INFO("segment " << s);
    REQUIRE(atlas.segment_present(s));
  }
}

TEST_CASE("labels outside 0..17 are rejected", "[atlas]") {
  LabelVolume labels;
  labels.dims = {2, 2, 2};
  labels.spacing = {1.0, 1.0, 1.0};
  labels.data.assign(8, 0);
  labels.data[3] = 18;
  CHECK_THROWS_AS(load_atlas(labels), Error);
}

TEST_CASE("partitioning then loading reproduces the segment voxel sets", "[atlas]") {
  const AnnulusPhantom ph = make_annulus_phantom({64, 64, 64}, {1.0, 1.0, 1.0});
  const LabelVolume repartition = analytic_partition(ph.myo, {0.0, 0.0, 1.0}, 0.0);
  const AhaAtlas original = load_atlas(ph.labels);
  const AhaAtlas redone = load_atlas(repartition);
  for (int s = 1; s <= 17; ++s) {
    REQUIRE(original.segment_mask(s).data == redone.segment_mask(s).data);
  }
}

TEST_CASE("analytic partition agrees with the per-voxel angle oracle", "[atlas]") {
  const AnnulusPhantom ph = make_annulus_phantom({64, 64, 64}, {1.0, 1.0, 1.0});
  const LabelVolume got = analytic_partition(ph.myo, {0.0, 0.0, 1.0}, 0.0);
  const LabelVolume want = partition_oracle(ph.myo, 0.0, RingSplits{});
  std::size_t disagreements = 0;
  for (std::size_t i = 0; i < got.data.size(); ++i) {
    if (got.data[i] != want.data[i]) ++disagreements;
  }
  CHECK(disagreements == 0);
}

TEST_CASE("sector boundaries go to the lower-numbered segment", "[atlas]") {
  const double w = M_PI / 3.0;
  CHECK(detail::angular_sector(0.0, w, 6) == 0);      // start of sector 1
  CHECK(detail::angular_sector(w, w, 6) == 0);        // 60 degrees: still sector 1
  CHECK(detail::angular_sector(2.0 * w, w, 6) == 1);  // 120 degrees: sector 2
  CHECK(detail::angular_sector(w * 1.5, w, 6) == 1);  // interior of sector 2
  CHECK(detail::angular_sector(6.0 * w - 1e-9, w, 6) == 5);
}

TEST_CASE("an all-apical split uses only the apical labels", "[atlas]") {
  const AnnulusPhantom ph = make_annulus_phantom({48, 48, 48}, {1.0, 1.0, 1.0});
  RingSplits splits;
  splits.basal_mid = 1.1;   // nothing reaches the basal band
  splits.mid_apical = 1.1;  // nor the mid band
  const LabelVolume labels = analytic_partition(ph.myo, {0.0, 0.0, 1.0}, 0.0, splits);
  std::set<int> seen;
  for (auto v : labels.data) {
    if (v != 0) seen.insert(v);
  }
  for (int v : seen) {
    REQUIRE(v >= 13);
    REQUIRE(v <= 17);
  }
}

TEST_CASE("every myocardium voxel gets exactly one label", "[atlas]") {
  const AnnulusPhantom ph = make_annulus_phantom({48, 48, 48}, {1.3, 1.3, 1.3});
  const LabelVolume labels = analytic_partition(ph.myo, {0.0, 0.0, 1.0}, 0.7);
  for (std::size_t i = 0; i < labels.data.size(); ++i) {
    if (ph.myo.data[i]) {
      REQUIRE(labels.data[i] >= 1);
      REQUIRE(labels.data[i] <= 17);
    } else {
      REQUIRE(labels.data[i] == 0);
    }
  }
}

TEST_CASE("the apex neighbors exactly the four apical segments", "[atlas]") {
  CHECK(adjacency(17) == std::set<int>{13, 14, 15, 16});
}

TEST_CASE("segment 1 touches its ring neighbors and its radial partner", "[atlas]") {
  const std::set<int>& a = adjacency(1);
  CHECK(a.count(2) == 1);
  CHECK(a.count(6) == 1);
  CHECK(a.count(7) == 1);
}

TEST_CASE("adjacency is symmetric and the graph is connected", "[atlas]") {
  for (int i = 1; i <= 17; ++i) {
    for (int j : adjacency(i)) {
      INFO("edge " << i << " <-> " << j);
      REQUIRE(adjacency(j).count(i) == 1);
    }
  }
  std::set<int> visited;
  std::queue<int> frontier;
  frontier.push(1);
  visited.insert(1);
  while (!frontier.empty()) {
    const int s = frontier.front();
    frontier.pop();
    for (int t : adjacency(s)) {
      if (visited.insert(t).second) frontier.push(t);
    }
  }
  CHECK(visited.size() == 17);
}

TEST_CASE("adjacency rejects out-of-range segment ids", "[atlas]") {
  CHECK_THROWS_AS(adjacency(0), Error);
  CHECK_THROWS_AS(adjacency(18), Error);
}

TEST_CASE("segment volumes match a counting oracle", "[atlas]") {
  // 500 voxels of segment 8 at 2 mm^3 per voxel is exactly one milliliter.
  LabelVolume labels;
  labels.dims = {10, 10, 10};
  labels.spacing = {1.0, 1.0, 2.0};
  labels.data.assign(1000, 0);
  for (int i = 0; i < 500; ++i) labels.data[static_cast<std::size_t>(i)] = 8;
  const AhaAtlas atlas = load_atlas(labels);
  Mask3 scar = testutil::make_mask({10, 10, 10}, {1.0, 1.0, 2.0});
  for (int i = 0; i < 500; ++i) scar.data[static_cast<std::size_t>(i)] = 1;
  const BullseyeTable t = segment_volumes(scar, atlas);
  CHECK(t.values[7] == 1.0);
  for (int s = 1; s <= 17; ++s) {
    if (s != 8) REQUIRE(t.values[static_cast<std::size_t>(s - 1)] == 0.0);
  }
  CHECK(t.outside == 0.0);
}

TEST_CASE("an empty scar has an all-zero bullseye table", "[atlas]") {
  const AnnulusPhantom ph = make_annulus_phantom({32, 32, 32}, {1.0, 1.0, 1.0});
  const AhaAtlas atlas = load_atlas(ph.labels);
  const Mask3 scar = testutil::make_mask({32, 32, 32}, {1.0, 1.0, 1.0});
  const BullseyeTable t = segment_volumes(scar, atlas);
  for (double v : t.values) REQUIRE(v == 0.0);
  CHECK(t.outside == 0.0);
  CHECK(t.total() == 0.0);
}

TEST_CASE("scar spanning two segments equally splits the volume", "[atlas]") {
  LabelVolume labels;
  labels.dims = {8, 8, 8};
  labels.spacing = {1.0, 1.0, 1.0};
  labels.data.assign(512, 0);
  for (int i = 0; i < 200; ++i) labels.data[static_cast<std::size_t>(i)] = 7;
  for (int i = 200; i < 400; ++i) labels.data[static_cast<std::size_t>(i)] = 13;
  const AhaAtlas atlas = load_atlas(labels);
  Mask3 scar = testutil::make_mask({8, 8, 8}, {1.0, 1.0, 1.0});
  for (int i = 100; i < 300; ++i) scar.data[static_cast<std::size_t>(i)] = 1;  // 100 voxels in each
  const BullseyeTable t = segment_volumes(scar, atlas);
  CHECK(t.values[6] == t.values[12]);
  CHECK(t.values[6] > 0.0);
  CHECK(t.total() + t.outside == volume_ml(scar));
}

TEST_CASE("segment volumes conserve the total voxel count", "[atlas]") {
  const AnnulusPhantom ph = make_annulus_phantom({48, 48, 48}, {1.0, 1.0, 1.0});
  const AhaAtlas atlas = load_atlas(ph.labels);
  const Mask3 scar = testutil::random_mask({48, 48, 48}, 31, 0.1);
  const BullseyeTable t = segment_volumes(scar, atlas);

  // Integer-count oracle per label.
  std::array<std::size_t, 18> counts{};
  for (std::size_t i = 0; i < scar.data.size(); ++i) {
    if (scar.data[i]) counts[static_cast<std::size_t>(ph.labels.data[i])]++;
  }
  std::size_t sum = 0;
  for (std::size_t c : counts) sum += c;
  REQUIRE(sum == foreground_count(scar));
  const double vml = 1.0 / 1000.0;  // 1 mm^3 voxels
  for (int s = 1; s <= 17; ++s) {
    REQUIRE(t.values[static_cast<std::size_t>(s - 1)] ==
            static_cast<double>(counts[static_cast<std::size_t>(s)]) * vml);
  }
  REQUIRE(t.outside == static_cast<double>(counts[0]) * vml);
}

TEST_CASE("bullseye csv and svg for the zero table are stable", "[atlas]") {
  const auto dir = testutil::make_temp_dir("bullseye");
  BullseyeTable t{};
  bullseye_csv(t, (dir / "t.csv").string());
  const auto csv_bytes = testutil::read_bytes(dir / "t.csv");
  const std::string csv(csv_bytes.begin(), csv_bytes.end());
  // 17 zero-valued segment rows plus header and the outside row.
  std::size_t zero_rows = 0;
  std::istringstream lines(csv);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.find(",0.00") != std::string::npos) ++zero_rows;
  }
  CHECK(zero_rows == 18);

  bullseye_svg(t, (dir / "a.svg").string());
  bullseye_svg(t, (dir / "b.svg").string());
  CHECK(testutil::read_bytes(dir / "a.svg") == testutil::read_bytes(dir / "b.svg"));
}

TEST_CASE("the bullseye svg shows per-segment values", "[atlas]") {
  const auto dir = testutil::make_temp_dir("bullseye_vals");
  BullseyeTable t{};
  t.values[7] = 1.0;  // segment 8
  bullseye_svg(t, (dir / "t.svg").string());
  const auto bytes = testutil::read_bytes(dir / "t.svg");
  const std::string svg(bytes.begin(), bytes.end());
  CHECK(svg.find("id=\"seg8\"") != std::string::npos);
  CHECK(svg.find("1.00") != std::string::npos);
}

TEST_CASE("segment names follow the standard nomenclature", "[atlas]") {
  CHECK(std::string(segment_name(0)) == "Background");
  CHECK(std::string(segment_name(1)) == "Basal Anterior");
  CHECK(std::string(segment_name(17)) == "Apex");
  CHECK_THROWS_AS(segment_name(18), Error);
}

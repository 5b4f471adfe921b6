// Confusion-matrix metrics, differentiable segmentation losses, scar volume
// accounting, and bull's-eye difference tables.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "scarforge/bullseye.hpp"
#include "scarforge/rng.hpp"
#include "scarforge/seg_metrics.hpp"

#include "test_util.hpp"

using namespace scarforge;
using testutil::make_mask;
using testutil::make_volume;
using testutil::random_mask;

TEST_CASE("confusion on identical masks", "[metrics]") {
  const Index3 dims{8, 8, 8};
  Mask3 a = make_mask(dims, {1, 1, 1}, 0);
  for (int i = 0; i < 8; ++i) a.at(i, 3, 3) = 1;
  const ConfusionCounts c = confusion(a, a);
  CHECK(c.tp == 8);
  CHECK(c.fp == 0);
  CHECK(c.fn == 0);
  CHECK(c.tn == 8 * 8 * 8 - 8);
  CHECK(c.total() == a.voxel_count());
}

TEST_CASE("confusion with an empty prediction counts misses", "[metrics]") {
  const Index3 dims{6, 6, 6};
  const Mask3 pred = make_mask(dims, {1, 1, 1}, 0);
  Mask3 gt = make_mask(dims, {1, 1, 1}, 0);
  for (int i = 0; i < 5; ++i) gt.at(i, 0, 0) = 1;
  const ConfusionCounts c = confusion(pred, gt);
  CHECK(c.tp == 0);
  CHECK(c.fp == 0);
  CHECK(c.fn == 5);
  CHECK(c.tn == 6 * 6 * 6 - 5);
}

TEST_CASE("confusion matches a brute-force recount on random masks", "[metrics]") {
  const Index3 dims{32, 32, 32};
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const Mask3 pred = random_mask(dims, seed, 0.3);
    const Mask3 gt = random_mask(dims, seed + 100, 0.3);
    const ConfusionCounts c = confusion(pred, gt);

    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (int k = 0; k < dims[2]; ++k)
      for (int j = 0; j < dims[1]; ++j)
        for (int i = 0; i < dims[0]; ++i) {
          const bool p = pred.at(i, j, k) != 0;
          const bool g = gt.at(i, j, k) != 0;
          tp += p && g;
          fp += p && !g;
          fn += !p && g;
          tn += !p && !g;
        }
    CHECK(c.tp == tp);
    CHECK(c.fp == fp);
    CHECK(c.fn == fn);
    CHECK(c.tn == tn);
  }
}

TEST_CASE("confusion rejects mismatched geometry", "[metrics]") {
  Mask3 a = make_mask({4, 4, 4}, {1, 1, 1}, 0);
  Mask3 b = make_mask({4, 4, 4}, {1, 1, 2}, 0);
  CHECK_THROWS_AS(confusion(a, b), Error);
}

TEST_CASE("dice spot values", "[metrics]") {
  const Index3 dims{8, 8, 8};
  Mask3 a = make_mask(dims, {1, 1, 1}, 0);
  for (int i = 0; i < 8; ++i) a.at(i, 1, 1) = 1;
  CHECK(dice(confusion(a, a)) == 1.0);

  Mask3 b = make_mask(dims, {1, 1, 1}, 0);
  for (int i = 0; i < 8; ++i) b.at(i, 5, 5) = 1;
  CHECK(dice(confusion(a, b)) == 0.0);  // disjoint

  // |A| = |B| = 8 with overlap 4: dice = 2*4 / 16 = 0.5.
  Mask3 shifted = make_mask(dims, {1, 1, 1}, 0);
  for (int i = 4; i < 8; ++i) shifted.at(i, 1, 1) = 1;  // 4 shared with a
  for (int i = 0; i < 4; ++i) shifted.at(i, 6, 6) = 1;  // 4 elsewhere
  CHECK(dice(confusion(shifted, a)) == Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("degenerate masks follow the documented conventions", "[metrics]") {
  const Index3 dims{5, 5, 5};
  const Mask3 empty = make_mask(dims, {1, 1, 1}, 0);
  Mask3 some = make_mask(dims, {1, 1, 1}, 0);
  some.at(2, 2, 2) = 1;

  const ConfusionCounts both_empty = confusion(empty, empty);
  CHECK(dice(both_empty) == 1.0);
  CHECK(precision(both_empty) == 1.0);
  CHECK(sensitivity(both_empty) == 1.0);
  CHECK(specificity(both_empty) == 1.0);

  const ConfusionCounts missed = confusion(empty, some);
  CHECK(dice(missed) == 0.0);
  CHECK(precision(missed) == 0.0);
  CHECK(sensitivity(missed) == 0.0);

  const ConfusionCounts hallucinated = confusion(some, empty);
  CHECK(dice(hallucinated) == 0.0);
  CHECK(precision(hallucinated) == 0.0);
  CHECK(sensitivity(hallucinated) == 0.0);

  const Mask3 full = make_mask(dims, {1, 1, 1}, 1);
  CHECK(specificity(confusion(full, full)) == 1.0);  // tn + fp == 0, vacuous
}

TEST_CASE("metrics stay in [0, 1] and dice equals the F1 identity", "[metrics]") {
  const Index3 dims{16, 16, 16};
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const Mask3 pred = random_mask(dims, 900 + seed, 0.25);
    const Mask3 gt = random_mask(dims, 950 + seed, 0.25);
    const ConfusionCounts c = confusion(pred, gt);
    const double d = dice(c), p = precision(c), s = sensitivity(c), sp = specificity(c);
    for (double v : {d, p, s, sp}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    if (p + s > 0.0) {
      CHECK(d == Catch::Approx(2.0 * p * s / (p + s)).epsilon(1e-12));
    }
  }
}

TEST_CASE("soft dice loss on exact hard predictions", "[metrics]") {
  const Index3 dims{10, 10, 10};
  const Mask3 gt = random_mask(dims, 61, 0.3);
  Volume3 p = make_volume(dims, {1, 1, 1}, 0.f);
  for (std::size_t i = 0; i < gt.data.size(); ++i) p.data[i] = gt.data[i] ? 1.f : 0.f;
  CHECK(soft_dice_loss(p, gt) == Catch::Approx(0.0).margin(1e-5));

  Volume3 inv = p;
  for (auto& v : inv.data) v = 1.f - v;
  CHECK(soft_dice_loss(inv, gt) == Catch::Approx(1.0).margin(1e-3));
}

TEST_CASE("soft dice loss closed form for a uniform half prediction", "[metrics]") {
  const Index3 dims{8, 8, 8};
  const double n = 8.0 * 8 * 8;
  Mask3 gt = make_mask(dims, {1, 1, 1}, 0);
  for (std::size_t i = 0; i < gt.data.size() / 2; ++i) gt.data[i] = 1;  // half foreground
  const Volume3 p = make_volume(dims, {1, 1, 1}, 0.5f);
  const double eps = 1e-5;
  // inter = n/4, sum_p = n/2, sum_g = n/2.
  const double expect = 1.0 - (2.0 * n / 4 + eps) / (n + eps);
  CHECK(soft_dice_loss(p, gt, eps) == Catch::Approx(expect).epsilon(1e-9));
}

TEST_CASE("soft dice loss approaches 1 - dice as eps shrinks", "[metrics]") {
  const Index3 dims{12, 12, 12};
  const Mask3 pred_mask = random_mask(dims, 71, 0.3);
  const Mask3 gt = random_mask(dims, 72, 0.3);
  Volume3 p = make_volume(dims, {1, 1, 1}, 0.f);
  for (std::size_t i = 0; i < p.data.size(); ++i) p.data[i] = pred_mask.data[i] ? 1.f : 0.f;
  const double hard = dice(confusion(pred_mask, gt));
  CHECK(soft_dice_loss(p, gt, 1e-8) == Catch::Approx(1.0 - hard).margin(1e-9));
}

TEST_CASE("soft dice loss rejects values outside [0, 1]", "[metrics]") {
  const Index3 dims{4, 4, 4};
  const Mask3 gt = make_mask(dims, {1, 1, 1}, 1);
  Volume3 p = make_volume(dims, {1, 1, 1}, 0.5f);
  p.data[7] = 1.5f;
  CHECK_THROWS_AS(soft_dice_loss(p, gt), Error);
  p.data[7] = -0.1f;
  CHECK_THROWS_AS(soft_dice_loss(p, gt), Error);
  p.data[7] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(soft_dice_loss(p, gt), Error);
}

TEST_CASE("weighted cross entropy equals ln 2 at p = 0.5", "[metrics]") {
  const Index3 dims{8, 8, 8};
  const Mask3 gt = random_mask(dims, 81, 0.4);
  const Volume3 p = make_volume(dims, {1, 1, 1}, 0.5f);
  CHECK(weighted_cross_entropy(p, gt, 1.0, 1.0) == Catch::Approx(std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("weighted cross entropy is near zero for a sharp correct prediction", "[metrics]") {
  const Index3 dims{8, 8, 8};
  const Mask3 gt = random_mask(dims, 82, 0.4);
  Volume3 p = make_volume(dims, {1, 1, 1}, 0.f);
  for (std::size_t i = 0; i < p.data.size(); ++i) p.data[i] = gt.data[i] ? 1.f : 0.f;
  CHECK(weighted_cross_entropy(p, gt, 1.0, 1.0) == Catch::Approx(0.0).margin(1e-6));
}

TEST_CASE("weighted cross entropy matches a two-term oracle and scales with w_fg",
          "[metrics]") {
  const Index3 dims{10, 10, 10};
  const Mask3 gt = random_mask(dims, 83, 0.35);
  Volume3 p = make_volume(dims, {1, 1, 1}, 0.f);
  Rng rng(84);
  for (auto& v : p.data) v = static_cast<float>(rng.uniform());

  const double delta = 1e-7;
  double fg_term = 0.0, bg_term = 0.0;
  for (std::size_t i = 0; i < p.data.size(); ++i) {
    const double pv = std::min(1.0 - delta, std::max(delta, static_cast<double>(p.data[i])));
    if (gt.data[i]) {
      fg_term += -std::log(pv);
    } else {
      bg_term += -std::log(1.0 - pv);
    }
  }
  const double n = static_cast<double>(p.data.size());
  const double w1 = weighted_cross_entropy(p, gt, 1.0, 1.0, delta);
  const double w2 = weighted_cross_entropy(p, gt, 2.0, 1.0, delta);
  CHECK(w1 == Catch::Approx((fg_term + bg_term) / n).epsilon(1e-12));
  CHECK(w2 == Catch::Approx((2.0 * fg_term + bg_term) / n).epsilon(1e-12));
  CHECK(w2 - w1 == Catch::Approx(fg_term / n).epsilon(1e-9));
}

TEST_CASE("weighted cross entropy validates weights and delta", "[metrics]") {
  const Index3 dims{4, 4, 4};
  const Mask3 gt = make_mask(dims, {1, 1, 1}, 1);
  const Volume3 p = make_volume(dims, {1, 1, 1}, 0.5f);
  CHECK_THROWS_AS(weighted_cross_entropy(p, gt, 0.0, 1.0), Error);
  CHECK_THROWS_AS(weighted_cross_entropy(p, gt, 1.0, -1.0), Error);
  CHECK_THROWS_AS(weighted_cross_entropy(p, gt, 1.0, 1.0, 0.0), Error);
  CHECK_THROWS_AS(weighted_cross_entropy(p, gt, 1.0, 1.0, 0.5), Error);
}

TEST_CASE("seg_loss is the sum of its two terms", "[metrics]") {
  const Index3 dims{10, 10, 10};
  const Mask3 gt = random_mask(dims, 91, 0.3);
  Volume3 p = make_volume(dims, {1, 1, 1}, 0.f);
  Rng rng(92);
  for (auto& v : p.data) v = static_cast<float>(rng.uniform());

  SegLossParams params;
  params.w_fg = 3.0;
  const double expect = soft_dice_loss(p, gt, params.dice_eps) +
                        weighted_cross_entropy(p, gt, 3.0, params.w_bg, params.wce_delta);
  CHECK(seg_loss(p, gt, params) == expect);

  // Default w_fg balances classes from the ground truth.
  SegLossParams balanced;
  const double w = balanced_fg_weight(gt);
  const double expect2 = soft_dice_loss(p, gt, balanced.dice_eps) +
                         weighted_cross_entropy(p, gt, w, balanced.w_bg, balanced.wce_delta);
  CHECK(seg_loss(p, gt, balanced) == expect2);
}

TEST_CASE("seg_loss is near zero for a perfect prediction and grows as it degrades",
          "[metrics]") {
  const Index3 dims{12, 12, 12};
  const Mask3 gt = random_mask(dims, 93, 0.3);
  Volume3 perfect = make_volume(dims, {1, 1, 1}, 0.f);
  for (std::size_t i = 0; i < perfect.data.size(); ++i) perfect.data[i] = gt.data[i] ? 1.f : 0.f;
  Volume3 blurred = perfect;
  for (auto& v : blurred.data) v = 0.7f * v + 0.15f;
  const Volume3 flat = make_volume(dims, {1, 1, 1}, 0.5f);

  const double l0 = seg_loss(perfect, gt);
  const double l1 = seg_loss(blurred, gt);
  const double l2 = seg_loss(flat, gt);
  CHECK(l0 == Catch::Approx(0.0).margin(1e-4));
  CHECK(l0 < l1);
  CHECK(l1 < l2);
}

TEST_CASE("volume_ml spot values", "[metrics]") {
  Mask3 cube = make_mask({10, 10, 10}, {1, 1, 1}, 1);
  CHECK(volume_ml(cube) == Catch::Approx(1.0).epsilon(1e-12));  // 1000 voxels at 1 mm^3

  const Mask3 empty = make_mask({10, 10, 10}, {1, 1, 1}, 0);
  CHECK(volume_ml(empty) == 0.0);

  // 59 voxels at 1.25 x 1.25 x 10 mm = 59 * 15.625 mm^3 = 0.921875 mL, exact
  // in binary floating point.
  Mask3 slab = make_mask({8, 8, 8}, {1.25, 1.25, 10.0}, 0);
  int placed = 0;
  for (int k = 0; k < 8 && placed < 59; ++k)
    for (int j = 0; j < 8 && placed < 59; ++j)
      for (int i = 0; i < 8 && placed < 59; ++i) {
        slab.at(i, j, k) = 1;
        ++placed;
      }
  CHECK(volume_ml(slab) == 0.921875);
}

TEST_CASE("volume_ml is additive over disjoint masks", "[metrics]") {
  const Index3 dims{16, 16, 16};
  Mask3 a = random_mask(dims, 95, 0.2);
  Mask3 b = random_mask(dims, 96, 0.2);
  for (std::size_t i = 0; i < b.data.size(); ++i) {
    if (a.data[i]) b.data[i] = 0;  // force disjoint
  }
  Mask3 u = a;
  for (std::size_t i = 0; i < u.data.size(); ++i) u.data[i] = a.data[i] || b.data[i];
  CHECK(volume_ml(u) == Catch::Approx(volume_ml(a) + volume_ml(b)).epsilon(1e-12));
}

TEST_CASE("cohort volume statistics", "[metrics]") {
  const VolumeStats single = cohort_volume_stats(std::vector<double>{4.5});
  CHECK(single.mean == 4.5);
  CHECK(single.stddev == 0.0);

  const VolumeStats pair = cohort_volume_stats(std::vector<double>{1.0, 3.0});
  CHECK(pair.mean == 2.0);
  CHECK(pair.stddev == 1.0);  // population std

  CHECK_THROWS_AS(cohort_volume_stats(std::vector<double>{}), Error);

  Rng rng(97);
  std::vector<double> volumes(10000);
  for (auto& v : volumes) v = 2.0 + 38.0 * rng.uniform();
  const VolumeStats big = cohort_volume_stats(volumes);
  CHECK(big.mean == Catch::Approx(21.0).margin(0.5));
  CHECK(big.stddev == Catch::Approx(38.0 / std::sqrt(12.0)).margin(0.5));
}

TEST_CASE("cohort volume statistics accept masks directly", "[metrics]") {
  Mask3 a = make_mask({10, 10, 10}, {1, 1, 1}, 1);    // 1.0 mL
  Mask3 b = make_mask({10, 10, 10}, {1, 1, 1}, 0);    // 0.0 mL
  const VolumeStats s = cohort_volume_stats(std::vector<Mask3>{a, b});
  CHECK(s.mean == Catch::Approx(0.5).epsilon(1e-12));
  CHECK(s.stddev == Catch::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("bullseye_diff of a table with itself is zero", "[metrics]") {
  BullseyeTable t;
  Rng rng(98);
  for (auto& v : t.values) v = rng.uniform() * 10.0;
  t.outside = 0.25;
  const BullseyeTable d = bullseye_diff(t, t);
  for (double v : d.values) CHECK(v == 0.0);
  CHECK(d.outside == 0.0);
}

TEST_CASE("bullseye_diff isolates a single perturbed segment", "[metrics]") {
  BullseyeTable gt;
  Rng rng(99);
  for (auto& v : gt.values) v = rng.uniform() * 5.0;
  BullseyeTable pred = gt;
  pred.values[8] += 1.0;  // segment 9
  const BullseyeTable d = bullseye_diff(pred, gt);
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    if (i == 8) {
      CHECK(d.values[i] == Catch::Approx(1.0).epsilon(1e-12));
    } else {
      CHECK(d.values[i] == 0.0);
    }
  }
}

TEST_CASE("bullseye_diff matches an element-wise oracle", "[metrics]") {
  BullseyeTable pred, gt;
  Rng rng(100);
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    pred.values[i] = rng.normal();
    gt.values[i] = rng.normal();
  }
  pred.outside = rng.normal();
  gt.outside = rng.normal();
  const BullseyeTable d = bullseye_diff(pred, gt);
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    CHECK(d.values[i] == pred.values[i] - gt.values[i]);
  }
  CHECK(d.outside == pred.outside - gt.outside);
}

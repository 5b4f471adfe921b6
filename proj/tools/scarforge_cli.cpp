// scarforge command-line pipeline.
//
// Subcommands: phantom, genmask, synth, register, eval, convert.
// Exit codes: 0 success, 1 configuration/validation error, 2 partial data
// error (some cases failed, unmatched ids, audit failure). Every generating
// command takes a mandatory --seed and is bit-deterministic across reruns
// and thread counts.

#include <algorithm>
#include <array>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "scarforge/scarforge.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitPartial = 2;

// Thrown for failures that map to the partial-data exit code rather than the
// configuration exit code.
struct PartialError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Config file support: JSON object whose keys are long option names. Options
// given on the command line win; file values fill in the rest.
json load_config_or_empty(const std::string& path) {
  if (path.empty()) return json::object();
  json j = scarforge::load_json(path);
  if (!j.is_object()) {
    scarforge::fail(scarforge::ErrorCode::MalformedHeader, "config must be a JSON object: " + path);
  }
  return j;
}

template <typename T>
void cfg(const json& j, const CLI::App& app, const std::string& key, T& var) {
  const CLI::Option* opt = app.get_option("--" + key);
  if (opt->count() > 0) return;  // explicit flag wins
  if (j.contains(key)) var = j.at(key).get<T>();
}

int thread_count(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("SCARFORGE_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

scarforge::Index3 to_index3(const std::vector<int>& v, const char* what) {
  if (v.size() != 3) {
    scarforge::fail(scarforge::ErrorCode::InvalidArgument, std::string(what) + ": need 3 values");
  }
  return {v[0], v[1], v[2]};
}

scarforge::Vec3 to_vec3(const std::vector<double>& v, const char* what) {
  if (v.size() != 3) {
    scarforge::fail(scarforge::ErrorCode::InvalidArgument, std::string(what) + ": need 3 values");
  }
  return {v[0], v[1], v[2]};
}

// All outputs are written atomically: to a sibling temp file, then renamed.
template <typename WriteFn>
void atomic_write(const fs::path& target, WriteFn&& write_to) {
  const fs::path tmp = target.string() + ".tmp";
  write_to(tmp.string());
  fs::rename(tmp, target);
}

void write_text(const fs::path& target, const std::string& text) {
  atomic_write(target, [&](const std::string& tmp) {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) scarforge::fail(scarforge::ErrorCode::IoFailure, "cannot open " + tmp);
    out << text;
    if (!out) scarforge::fail(scarforge::ErrorCode::IoFailure, "write failed for " + tmp);
  });
}

scarforge::Mask3 myo_from_labels(const scarforge::LabelVolume& labels) {
  scarforge::Mask3 m;
  m.dims = labels.dims;
  m.spacing = labels.spacing;
  m.origin = labels.origin;
  m.orientation = labels.orientation;
  m.data.resize(labels.data.size());
  for (std::size_t i = 0; i < labels.data.size(); ++i) m.data[i] = labels.data[i] > 0 ? 1 : 0;
  return m;
}

// ---------------------------------------------------------------------------
// phantom

int cmd_phantom(const std::string& config_path, CLI::App& app, std::string kind, std::string out_dir,
                std::vector<int> dims_v, std::vector<double> spacing_v, double rv_angle,
                double sigma, int n_blobs, std::uint64_t seed) {
  const json j = load_config_or_empty(config_path);
  cfg(j, app, "kind", kind);
  cfg(j, app, "out", out_dir);
  cfg(j, app, "dims", dims_v);
  cfg(j, app, "spacing", spacing_v);
  cfg(j, app, "rv-angle", rv_angle);
  cfg(j, app, "sigma", sigma);
  cfg(j, app, "n-blobs", n_blobs);
  cfg(j, app, "seed", seed);

  const scarforge::Index3 dims = to_index3(dims_v, "--dims");
  const scarforge::Vec3 spacing = to_vec3(spacing_v, "--spacing");
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  if (kind == "annulus") {
    scarforge::AnnulusPhantom ph = scarforge::make_annulus_phantom(dims, spacing, rv_angle);
    atomic_write(dir / "image.nrrd", [&](const std::string& p) { scarforge::save_nrrd(ph.image, p); });
    atomic_write(dir / "labels.nrrd", [&](const std::string& p) { scarforge::save_nrrd(ph.labels, p); });
    atomic_write(dir / "myo.nrrd", [&](const std::string& p) { scarforge::save_nrrd(ph.myo, p); });
    std::printf("phantom: wrote image.nrrd, labels.nrrd, myo.nrrd to %s\n", out_dir.c_str());
  } else if (kind == "speckle") {
    scarforge::Volume3 v = scarforge::speckle_phantom(dims, spacing, sigma, seed);
    atomic_write(dir / "image.nrrd", [&](const std::string& p) { scarforge::save_nrrd(v, p); });
    std::printf("phantom: wrote image.nrrd to %s\n", out_dir.c_str());
  } else if (kind == "blobs") {
    scarforge::Volume3 v = scarforge::smooth_blob_phantom(dims, spacing, n_blobs, seed);
    atomic_write(dir / "image.nrrd", [&](const std::string& p) { scarforge::save_nrrd(v, p); });
    std::printf("phantom: wrote image.nrrd to %s\n", out_dir.c_str());
  } else {
    scarforge::fail(scarforge::ErrorCode::InvalidArgument, "unknown phantom kind: " + kind);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// genmask

struct GenmaskCase {
  int index = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::vector<scarforge::RegionRecord> regions;
};

int cmd_genmask(const std::string& config_path, CLI::App& app, std::string labels_path,
                std::string myo_path, std::string out_dir, int n, std::uint64_t seed, int regions,
                std::vector<double> vol_range, std::vector<double> porosity_range,
                std::vector<double> anisotropy_v, std::vector<std::string> rings,
                bool exclude_apex, std::vector<int> kernels, double sigma, int min_component,
                int threads_flag) {
  const json j = load_config_or_empty(config_path);
  cfg(j, app, "labels", labels_path);
  cfg(j, app, "myo", myo_path);
  cfg(j, app, "out", out_dir);
  cfg(j, app, "n", n);
  cfg(j, app, "regions", regions);
  cfg(j, app, "volume-ml", vol_range);
  cfg(j, app, "porosity", porosity_range);
  cfg(j, app, "anisotropy", anisotropy_v);
  cfg(j, app, "rings", rings);
  cfg(j, app, "kernels", kernels);
  cfg(j, app, "sigma", sigma);
  cfg(j, app, "min-component", min_component);

  scarforge::ScarSpec spec;
  spec.n_regions = regions;
  if (vol_range.size() != 2 || porosity_range.size() != 2) {
    scarforge::fail(scarforge::ErrorCode::InvalidArgument,
                    "--volume-ml and --porosity take exactly two values (min max)");
  }
  spec.volume_min_ml = vol_range[0];
  spec.volume_max_ml = vol_range[1];
  spec.porosity_min = porosity_range[0];
  spec.porosity_max = porosity_range[1];
  spec.anisotropy = to_vec3(anisotropy_v, "--anisotropy");
  if (!rings.empty()) {
    spec.allowed_rings.clear();
    for (const auto& r : rings) spec.allowed_rings.push_back(scarforge::ring_from_name(r));
  }
  if (exclude_apex) {
    std::erase(spec.allowed_rings, scarforge::Ring::Apex);
    if (spec.allowed_rings.empty()) {
      scarforge::fail(scarforge::ErrorCode::InvalidArgument,
                      "--exclude-apex removed the only allowed ring");
    }
  }
  if (!kernels.empty()) spec.kernels = kernels;
  spec.validate();
  if (n < 1) scarforge::fail(scarforge::ErrorCode::InvalidArgument, "--n must be >= 1");

  const scarforge::LabelVolume labels = scarforge::load_nrrd<std::int32_t>(labels_path);
  const scarforge::AhaAtlas atlas = scarforge::load_atlas(labels);
  const scarforge::Mask3 myo =
      myo_path.empty() ? myo_from_labels(labels) : scarforge::load_mask(myo_path);

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  std::vector<GenmaskCase> cases(static_cast<std::size_t>(n));

  // Per-case worker. Cases are fully independent: each derives its own seed
  // from (base seed, index), so results do not depend on the thread count.
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      GenmaskCase& c = cases[static_cast<std::size_t>(i)];
      c.index = i;
      c.seed = scarforge::derive_seed(seed, static_cast<std::uint64_t>(i));
      try {
        scarforge::ScarSpec case_spec = spec;
        case_spec.seed = c.seed;
        const scarforge::GeneratedScar g =
            scarforge::generate_scar_mask(atlas, myo, case_spec, sigma,
                                          static_cast<std::size_t>(min_component));
        char name[32];
        std::snprintf(name, sizeof name, "mask_%04d", i);
        atomic_write(dir / (std::string(name) + ".nrrd"),
                     [&](const std::string& p) { scarforge::save_nrrd(g.mask, p); });
        atomic_write(dir / (std::string(name) + ".json"), [&](const std::string& p) {
          scarforge::save_json(scarforge::scar_sidecar(g), p);
        });
        c.regions = g.regions;
        c.ok = true;
      } catch (const scarforge::Error& e) {
        c.error = e.what();
      }
    }
  };
  const int threads = thread_count(threads_flag);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // Manifest rows in case order, successful cases only.
  std::ostringstream manifest;
  manifest << "case_id,seed,region_index,segment,requested_ml,achieved_ml,porosity,kernel,capped\n";
  int failed = 0;
  for (const auto& c : cases) {
    if (!c.ok) {
      ++failed;
      std::fprintf(stderr, "genmask: case %d (seed %llu) failed: %s\n", c.index,
                   static_cast<unsigned long long>(c.seed), c.error.c_str());
      continue;
    }
    char id[32];
    std::snprintf(id, sizeof id, "mask_%04d", c.index);
    for (std::size_t r = 0; r < c.regions.size(); ++r) {
      const auto& reg = c.regions[r];
      char row[256];
      std::snprintf(row, sizeof row, "%s,%llu,%zu,%d,%.6f,%.6f,%.6f,%d,%d\n", id,
                    static_cast<unsigned long long>(c.seed), r, reg.segment, reg.requested_ml,
                    reg.achieved_ml, reg.porosity, reg.kernel, reg.capped ? 1 : 0);
      manifest << row;
    }
  }
  write_text(dir / "manifest.csv", manifest.str());
  std::printf("genmask: %d/%d cases written to %s\n", n - failed, n, out_dir.c_str());
  return failed == 0 ? kExitOk : kExitPartial;
}

// ---------------------------------------------------------------------------
// synth

int cmd_synth(const std::string& config_path, CLI::App& app, std::string image_path,
              std::string mask_path, std::string out_path, std::uint64_t seed, int steps,
              double beta_start, double beta_end, std::string predictor_kind,
              std::string target_path, std::string exchange_dir, bool deterministic,
              std::string hist_image_path, std::string hist_mask_path, int hist_bins) {
  const json j = load_config_or_empty(config_path);
  cfg(j, app, "image", image_path);
  cfg(j, app, "mask", mask_path);
  cfg(j, app, "out", out_path);
  cfg(j, app, "steps", steps);
  cfg(j, app, "beta-start", beta_start);
  cfg(j, app, "beta-end", beta_end);
  cfg(j, app, "predictor", predictor_kind);
  cfg(j, app, "target", target_path);
  cfg(j, app, "exchange-dir", exchange_dir);
  cfg(j, app, "hist-bins", hist_bins);

  const scarforge::Volume3 image = scarforge::load_nrrd<float>(image_path);
  const scarforge::Mask3 mask = scarforge::load_mask(mask_path);
  const scarforge::NoiseSchedule sched = scarforge::make_schedule(steps, beta_start, beta_end);

  scarforge::LesionHistogram hist;
  const scarforge::LesionHistogram* hist_ptr = nullptr;
  if (!hist_image_path.empty()) {
    if (hist_mask_path.empty()) {
      scarforge::fail(scarforge::ErrorCode::InvalidArgument, "--hist-image requires --hist-mask");
    }
    const scarforge::Volume3 hv = scarforge::load_nrrd<float>(hist_image_path);
    const scarforge::Mask3 hm = scarforge::load_mask(hist_mask_path);
    hist = scarforge::lesion_histogram(hv, hm, hist_bins);
    hist_ptr = &hist;
  }

  std::unique_ptr<scarforge::NoisePredictor> predictor;
  scarforge::Volume3 target;
  if (predictor_kind == "stub") {
    predictor = std::make_unique<scarforge::HashPredictor>(scarforge::derive_seed(seed, 9001));
  } else if (predictor_kind == "oracle") {
    if (target_path.empty()) {
      scarforge::fail(scarforge::ErrorCode::InvalidArgument, "--predictor oracle requires --target");
    }
    target = scarforge::load_nrrd<float>(target_path);
    predictor = std::make_unique<scarforge::OraclePredictor>(target, sched);
  } else if (predictor_kind == "external") {
    if (exchange_dir.empty()) {
      scarforge::fail(scarforge::ErrorCode::InvalidArgument,
                      "--predictor external requires --exchange-dir");
    }
    predictor = std::make_unique<scarforge::FileExchangePredictor>(exchange_dir);
  } else {
    scarforge::fail(scarforge::ErrorCode::InvalidArgument, "unknown predictor: " + predictor_kind);
  }

  scarforge::Rng rng(seed);
  scarforge::Volume3 out;
  try {
    out = scarforge::synthesize(image, mask, *predictor, sched, hist_ptr, rng, deterministic);
  } catch (const scarforge::Error& e) {
    if (e.code() == scarforge::ErrorCode::PredictorFailure ||
        e.code() == scarforge::ErrorCode::NonFinite) {
      throw PartialError(e.what());
    }
    throw;
  }

  // Background audit, run unconditionally: every voxel outside the mask must
  // be bit-equal to the input.
  std::size_t bg = 0, mismatched = 0;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (mask.data[i]) continue;
    ++bg;
    if (std::memcmp(&out.data[i], &image.data[i], sizeof(float)) != 0) ++mismatched;
  }
  if (fs::path(out_path).has_parent_path()) fs::create_directories(fs::path(out_path).parent_path());
  atomic_write(out_path, [&](const std::string& p) { scarforge::save_nrrd(out, p); });

  if (mismatched == 0) {
    std::printf("background audit: PASS (%zu background voxels bit-equal)\n", bg);
  } else {
    std::printf("background audit: FAIL (%zu of %zu background voxels differ)\n", mismatched, bg);
  }
  if (predictor_kind == "oracle") {
    double mae = 0.0;
    std::size_t nfg = 0;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
      if (!mask.data[i]) continue;
      mae += std::abs(static_cast<double>(out.data[i]) - target.data[i]);
      ++nfg;
    }
    std::printf("scar-region MAE vs target: %.3e over %zu voxels\n", nfg ? mae / nfg : 0.0, nfg);
  }
  std::printf("synth: wrote %s\n", out_path.c_str());
  if (mismatched != 0) throw PartialError("background audit failed");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// register

// Resamples moving onto fixed's spacing, then center-pads/crops to fixed's
// dims so the demons grid matches exactly.
scarforge::Volume3 conform_to(const scarforge::Volume3& moving, const scarforge::Volume3& fixed) {
  scarforge::Volume3 r = scarforge::resample(moving, fixed.spacing, scarforge::Interp::Trilinear);
  scarforge::Volume3 out;
  out.dims = fixed.dims;
  out.spacing = fixed.spacing;
  out.origin = fixed.origin;
  out.data.assign(out.voxel_count(), 0.0f);
  const scarforge::Index3 off = {(r.dims[0] - fixed.dims[0]) / 2, (r.dims[1] - fixed.dims[1]) / 2,
                                 (r.dims[2] - fixed.dims[2]) / 2};
  for (int k = 0; k < fixed.dims[2]; ++k) {
    for (int jj = 0; jj < fixed.dims[1]; ++jj) {
      for (int i = 0; i < fixed.dims[0]; ++i) {
        const int si = i + off[0], sj = jj + off[1], sk = k + off[2];
        if (si < 0 || sj < 0 || sk < 0 || si >= r.dims[0] || sj >= r.dims[1] || sk >= r.dims[2])
          continue;
        out.at(i, jj, k) = r.at(si, sj, sk);
      }
    }
  }
  return out;
}

double mean_squared_error(const scarforge::Volume3& a, const scarforge::Volume3& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    s += d * d;
  }
  return s / static_cast<double>(a.data.size());
}

int cmd_register(const std::string& config_path, CLI::App& app, std::string fixed_path,
                 std::string moving_path, std::string mode, std::string out_dir, bool resample_flag,
                 std::vector<int> iterations, double sigma_update, double sigma_total,
                 double max_step, int bins) {
  const json j = load_config_or_empty(config_path);
  cfg(j, app, "fixed", fixed_path);
  cfg(j, app, "moving", moving_path);
  cfg(j, app, "mode", mode);
  cfg(j, app, "out", out_dir);
  cfg(j, app, "iterations", iterations);
  cfg(j, app, "sigma-update", sigma_update);
  cfg(j, app, "sigma-total", sigma_total);
  cfg(j, app, "max-step", max_step);
  cfg(j, app, "bins", bins);

  if (mode != "rigid" && mode != "demons" && mode != "both") {
    scarforge::fail(scarforge::ErrorCode::InvalidArgument, "--mode must be rigid|demons|both");
  }
  const scarforge::Volume3 fixed = scarforge::load_nrrd<float>(fixed_path);
  scarforge::Volume3 moving = scarforge::load_nrrd<float>(moving_path);

  const bool needs_demons = mode != "rigid";
  if (needs_demons && moving.dims != fixed.dims) {
    if (!resample_flag) {
      scarforge::fail(scarforge::ErrorCode::InvalidArgument,
                      "demons needs matching grids; pass --resample to conform the moving image");
    }
    moving = conform_to(moving, fixed);
  }

  scarforge::DemonsParams dp;
  if (!iterations.empty()) {
    dp.iterations = iterations;
    dp.levels = static_cast<int>(iterations.size());
  }
  dp.sigma_update_voxels = sigma_update;
  dp.sigma_total_voxels = sigma_total;
  dp.max_step_voxels = max_step;
  scarforge::RigidConfig rc;
  rc.bins = bins;

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  scarforge::Volume3 warped = moving;

  if (mode == "rigid" || mode == "both") {
    const scarforge::RigidResult res = scarforge::rigid_register(fixed, warped, rc);
    std::printf("rigid: MI %.6f -> %.6f\n", res.initial_mi, res.final_mi);
    json tj = res.transform;
    atomic_write(dir / "transform.json",
                 [&](const std::string& p) { scarforge::save_json(tj, p); });
    warped = scarforge::warp(warped, res.transform, scarforge::Interp::Trilinear);
  }
  if (mode == "demons" || mode == "both") {
    if (warped.dims != fixed.dims) {
      // "both" on mismatched grids: the rigid warp already resampled onto the
      // fixed grid, so this only triggers for degenerate inputs.
      scarforge::fail(scarforge::ErrorCode::InvalidArgument, "demons needs matching grids");
    }
    const double pre = mean_squared_error(fixed, warped);
    const scarforge::DisplacementField field = scarforge::demons_register(fixed, warped, dp);
    warped = scarforge::warp(warped, field, scarforge::Interp::Trilinear);
    std::printf("demons: MSE %.6f -> %.6f\n", pre, mean_squared_error(fixed, warped));
    atomic_write(dir / "field.nrrd", [&](const std::string& p) { scarforge::save_field(field, p); });
  }
  atomic_write(dir / "warped.nrrd", [&](const std::string& p) { scarforge::save_nrrd(warped, p); });
  std::printf("register: wrote outputs to %s\n", out_dir.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

std::map<std::string, fs::path> nrrd_cases(const std::string& dir) {
  std::map<std::string, fs::path> out;
  if (!fs::is_directory(dir)) {
    scarforge::fail(scarforge::ErrorCode::FileMissing, "not a directory: " + dir);
  }
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".nrrd") {
      out.emplace(e.path().stem().string(), e.path());
    }
  }
  return out;
}

int cmd_eval(const std::string& config_path, CLI::App& app, std::string pred_dir,
             std::string gt_dir, std::string labels_path, std::string out_dir) {
  const json j = load_config_or_empty(config_path);
  cfg(j, app, "pred", pred_dir);
  cfg(j, app, "gt", gt_dir);
  cfg(j, app, "labels", labels_path);
  cfg(j, app, "out", out_dir);

  const scarforge::LabelVolume labels = scarforge::load_nrrd<std::int32_t>(labels_path);
  const scarforge::AhaAtlas atlas = scarforge::load_atlas(labels);

  const auto preds = nrrd_cases(pred_dir);
  const auto gts = nrrd_cases(gt_dir);
  std::vector<std::string> unmatched;
  for (const auto& [id, p] : preds)
    if (!gts.count(id)) unmatched.push_back(id);
  for (const auto& [id, p] : gts)
    if (!preds.count(id)) unmatched.push_back(id);
  std::sort(unmatched.begin(), unmatched.end());
  for (const auto& id : unmatched) std::fprintf(stderr, "eval: unmatched case: %s\n", id.c_str());

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);

  std::ostringstream csv;
  csv << "case_id,dice,precision,sensitivity,specificity,volume_ml\n";
  scarforge::ConfusionCounts pooled;
  std::vector<double> dices, precisions, sensitivities, specificities;
  std::vector<double> pred_vols, gt_vols;
  scarforge::BullseyeTable pred_table{}, gt_table{};
  int n_cases = 0;

  for (const auto& [id, pred_path] : preds) {
    auto git = gts.find(id);
    if (git == gts.end()) continue;
    const scarforge::Mask3 pred = scarforge::load_mask(pred_path.string());
    const scarforge::Mask3 gt = scarforge::load_mask(git->second.string());
    const scarforge::ConfusionCounts c = scarforge::confusion(pred, gt);
    pooled.tp += c.tp;
    pooled.fp += c.fp;
    pooled.fn += c.fn;
    pooled.tn += c.tn;
    const double d = scarforge::dice(c);
    const double p = scarforge::precision(c);
    const double s = scarforge::sensitivity(c);
    const double sp = scarforge::specificity(c);
    const double vol = scarforge::volume_ml(pred);
    dices.push_back(d);
    precisions.push_back(p);
    sensitivities.push_back(s);
    specificities.push_back(sp);
    pred_vols.push_back(vol);
    gt_vols.push_back(scarforge::volume_ml(gt));
    char row[256];
    std::snprintf(row, sizeof row, "%s,%.6f,%.6f,%.6f,%.6f,%.6f\n", id.c_str(), d, p, s, sp, vol);
    csv << row;

    const scarforge::BullseyeTable pt = scarforge::segment_volumes(pred, atlas);
    const scarforge::BullseyeTable gtt = scarforge::segment_volumes(gt, atlas);
    for (int seg = 0; seg < 17; ++seg) {
      pred_table.values[static_cast<std::size_t>(seg)] += pt.values[static_cast<std::size_t>(seg)];
      gt_table.values[static_cast<std::size_t>(seg)] += gtt.values[static_cast<std::size_t>(seg)];
    }
    pred_table.outside += pt.outside;
    gt_table.outside += gtt.outside;
    ++n_cases;
  }
  if (n_cases == 0) {
    scarforge::fail(scarforge::ErrorCode::InvalidArgument, "eval: no matching case ids");
  }

  write_text(dir / "metrics.csv", csv.str());

  // Cohort summary: per-case means (the default aggregation) plus the pooled
  // voxel counts so both conventions are available.
  const scarforge::VolumeStats pred_stats = scarforge::cohort_volume_stats(pred_vols);
  const scarforge::VolumeStats gt_stats = scarforge::cohort_volume_stats(gt_vols);
  auto mean_std = [](const std::vector<double>& v) {
    const scarforge::VolumeStats s = scarforge::cohort_volume_stats(v);
    return json{{"mean", s.mean}, {"std", s.stddev}};
  };
  json cohort = {
      {"n_cases", n_cases},
      {"per_case", {{"dice", mean_std(dices)},
                    {"precision", mean_std(precisions)},
                    {"sensitivity", mean_std(sensitivities)},
                    {"specificity", mean_std(specificities)}}},
      {"pooled", {{"dice", scarforge::dice(pooled)},
                  {"precision", scarforge::precision(pooled)},
                  {"sensitivity", scarforge::sensitivity(pooled)},
                  {"specificity", scarforge::specificity(pooled)}}},
      {"volume_ml", {{"pred", {{"mean", pred_stats.mean}, {"std", pred_stats.stddev}}},
                     {"gt", {{"mean", gt_stats.mean}, {"std", gt_stats.stddev}}}}},
  };
  atomic_write(dir / "cohort.json", [&](const std::string& p) { scarforge::save_json(cohort, p); });

  const scarforge::BullseyeTable diff = scarforge::bullseye_diff(pred_table, gt_table);
  atomic_write(dir / "bullseye_pred.csv",
               [&](const std::string& p) { scarforge::bullseye_csv(pred_table, p); });
  atomic_write(dir / "bullseye_gt.csv",
               [&](const std::string& p) { scarforge::bullseye_csv(gt_table, p); });
  atomic_write(dir / "bullseye_diff.csv",
               [&](const std::string& p) { scarforge::bullseye_csv(diff, p); });
  atomic_write(dir / "bullseye_pred.svg",
               [&](const std::string& p) { scarforge::bullseye_svg(pred_table, p); });
  atomic_write(dir / "bullseye_gt.svg",
               [&](const std::string& p) { scarforge::bullseye_svg(gt_table, p); });
  atomic_write(dir / "bullseye_diff.svg",
               [&](const std::string& p) { scarforge::bullseye_svg(diff, p); });

  std::printf("eval: %d cases, outputs in %s\n", n_cases, out_dir.c_str());
  if (!unmatched.empty()) throw PartialError("unmatched case ids");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// convert

int cmd_convert(const std::string& config_path, CLI::App& app, std::string in_path,
                std::string out_path, std::vector<double> to_spacing, bool nearest,
                std::vector<double> rescale_range, bool zscore, std::vector<std::string> flips,
                std::vector<int> permute) {
  const json j = load_config_or_empty(config_path);
  cfg(j, app, "in", in_path);
  cfg(j, app, "out", out_path);
  cfg(j, app, "to-spacing", to_spacing);
  cfg(j, app, "rescale", rescale_range);
  cfg(j, app, "flip", flips);
  cfg(j, app, "permute", permute);

  scarforge::AnyGrid grid = scarforge::load_nrrd_any(in_path);
  const bool is_volume = std::holds_alternative<scarforge::Volume3>(grid);
  if ((!rescale_range.empty() || zscore) && !is_volume) {
    scarforge::fail(scarforge::ErrorCode::InvalidArgument,
                    "intensity operations need a float volume input");
  }

  if (!permute.empty()) {
    if (permute.size() != 3) {
      scarforge::fail(scarforge::ErrorCode::InvalidArgument, "--permute takes 3 axis indices");
    }
    std::array<int, 3> sorted{permute[0], permute[1], permute[2]};
    std::sort(sorted.begin(), sorted.end());
    if (sorted != std::array<int, 3>{0, 1, 2}) {
      scarforge::fail(scarforge::ErrorCode::InvalidArgument,
                      "--permute must name axes 0, 1 and 2 exactly once");
    }
  }
  for (const auto& f : flips) {
    if (f != "x" && f != "y" && f != "z") {
      scarforge::fail(scarforge::ErrorCode::InvalidArgument, "--flip takes x, y or z");
    }
  }
  const bool reorient_requested = !permute.empty() || !flips.empty();

  std::visit(
      [&](auto& g) {
        using G = std::decay_t<decltype(g)>;
        if (reorient_requested) {
          // Flips and permutations are relative to the file's stored layout,
          // so flipping the same axis twice round-trips exactly.
          scarforge::AxisOrientation target = g.orientation;
          if (!permute.empty()) {
            for (std::size_t a = 0; a < 3; ++a) {
              const auto p = static_cast<std::size_t>(permute[a]);
              target.axis[a] = g.orientation.axis[p];
              target.flip[a] = g.orientation.flip[p];
            }
          }
          for (const auto& f : flips) {
            const std::size_t ax = f == "x" ? 0 : (f == "y" ? 1 : 2);
            target.flip[ax] = !target.flip[ax];
          }
          g = scarforge::reorient(g, target);
        }
        if (!to_spacing.empty()) {
          const scarforge::Vec3 sp = to_vec3(to_spacing, "--to-spacing");
          const bool integral = !std::is_same_v<G, scarforge::Volume3>;
          g = scarforge::resample(g, sp,
                                  (nearest || integral) ? scarforge::Interp::Nearest
                                                        : scarforge::Interp::Trilinear);
        }
        if constexpr (std::is_same_v<G, scarforge::Volume3>) {
          if (!rescale_range.empty()) {
            if (rescale_range.size() != 2) {
              scarforge::fail(scarforge::ErrorCode::InvalidArgument, "--rescale takes lo hi");
            }
            g = scarforge::rescale_intensity(g, rescale_range[0], rescale_range[1]);
          }
          if (zscore) g = scarforge::zscore_normalize(g);
        }
        if (fs::path(out_path).has_parent_path()) {
          fs::create_directories(fs::path(out_path).parent_path());
        }
        atomic_write(out_path, [&](const std::string& p) { scarforge::save_nrrd(g, p); });
      },
      grid);
  std::printf("convert: wrote %s\n", out_path.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scarforge: volumetric scar synthesis and evaluation pipeline"};
  app.require_subcommand(1);

  // phantom
  auto* ph = app.add_subcommand("phantom", "write bundled synthetic phantom volumes");
  std::string ph_config, ph_kind = "annulus", ph_out;
  std::vector<int> ph_dims = {96, 96, 96};
  std::vector<double> ph_spacing = {1.0, 1.0, 1.0};
  double ph_rv = 0.0, ph_sigma = 2.0;
  int ph_nblobs = 40;
  std::uint64_t ph_seed = 0;
  ph->add_option("--config", ph_config, "JSON config file (flags win)");
  ph->add_option("--kind", ph_kind, "annulus|speckle|blobs");
  ph->add_option("--out", ph_out, "output directory")->required();
  ph->add_option("--dims", ph_dims, "grid dims")->expected(3);
  ph->add_option("--spacing", ph_spacing, "voxel spacing mm")->expected(3);
  ph->add_option("--rv-angle", ph_rv, "RV insertion angle, rad (annulus)");
  ph->add_option("--sigma", ph_sigma, "speckle correlation length, voxels");
  ph->add_option("--n-blobs", ph_nblobs, "bump count (blobs)");
  ph->add_option("--seed", ph_seed, "seed (speckle/blobs)");

  // genmask
  auto* gm = app.add_subcommand("genmask", "generate scar masks on a template anatomy");
  std::string gm_config, gm_labels, gm_myo, gm_out;
  int gm_n = 1, gm_regions = 1, gm_min_component = 8, gm_threads = 0;
  std::uint64_t gm_seed = 0;
  std::vector<double> gm_vol = {2.0, 40.0}, gm_por = {0.3, 0.8}, gm_aniso = {1.0, 1.0, 1.0};
  std::vector<std::string> gm_rings;
  std::vector<int> gm_kernels;
  bool gm_exclude_apex = false;
  double gm_sigma = 0.5;
  gm->add_option("--config", gm_config, "JSON config file (flags win)");
  gm->add_option("--labels", gm_labels, "atlas label NRRD")->required();
  gm->add_option("--myo", gm_myo, "myocardium mask NRRD (default: labels > 0)");
  gm->add_option("--out", gm_out, "output directory")->required();
  gm->add_option("--n", gm_n, "number of masks");
  gm->add_option("--seed", gm_seed, "base seed")->required();
  gm->add_option("--regions", gm_regions, "regions per mask");
  gm->add_option("--volume-ml", gm_vol, "volume range, mL")->expected(2);
  gm->add_option("--porosity", gm_por, "porosity range")->expected(2);
  gm->add_option("--anisotropy", gm_aniso, "per-axis anisotropy")->expected(3);
  gm->add_option("--rings", gm_rings, "allowed rings (basal mid apical apex)");
  gm->add_flag("--exclude-apex", gm_exclude_apex, "never place scar in the apex segment");
  gm->add_option("--kernels", gm_kernels, "erosion kernel sizes (odd)");
  gm->add_option("--sigma", gm_sigma, "postprocess smoothing sigma, voxels");
  gm->add_option("--min-component", gm_min_component, "minimum surviving component, voxels");
  gm->add_option("--threads", gm_threads, "worker threads (or SCARFORGE_THREADS)");

  // synth
  auto* sy = app.add_subcommand("synth", "masked diffusion synthesis");
  std::string sy_config, sy_image, sy_mask, sy_out, sy_pred = "stub", sy_target, sy_exchange;
  std::string sy_hist_image, sy_hist_mask;
  std::uint64_t sy_seed = 0;
  int sy_steps = 1000, sy_hist_bins = 32;
  double sy_b1 = 1e-4, sy_bT = 0.02;
  bool sy_det = false;
  sy->add_option("--config", sy_config, "JSON config file (flags win)");
  sy->add_option("--image", sy_image, "input image NRRD")->required();
  sy->add_option("--mask", sy_mask, "scar mask NRRD")->required();
  sy->add_option("--out", sy_out, "output NRRD")->required();
  sy->add_option("--seed", sy_seed, "sampling seed")->required();
  sy->add_option("--steps", sy_steps, "diffusion steps T");
  sy->add_option("--beta-start", sy_b1, "schedule beta_1");
  sy->add_option("--beta-end", sy_bT, "schedule beta_T");
  sy->add_option("--predictor", sy_pred, "stub|oracle|external");
  sy->add_option("--target", sy_target, "target texture NRRD (oracle)");
  sy->add_option("--exchange-dir", sy_exchange, "file-exchange directory (external)");
  sy->add_flag("--deterministic", sy_det, "variance-0 stepping");
  sy->add_option("--hist-image", sy_hist_image, "reference image for lesion histogram");
  sy->add_option("--hist-mask", sy_hist_mask, "reference mask for lesion histogram");
  sy->add_option("--hist-bins", sy_hist_bins, "histogram bins");

  // register
  auto* rg = app.add_subcommand("register", "rigid / demons registration");
  std::string rg_config, rg_fixed, rg_moving, rg_mode = "rigid", rg_out;
  bool rg_resample = false;
  std::vector<int> rg_iters;
  double rg_su = 1.0, rg_st = 1.5, rg_ms = 1.25;
  int rg_bins = 32;
  rg->add_option("--config", rg_config, "JSON config file (flags win)");
  rg->add_option("--fixed", rg_fixed, "fixed image NRRD")->required();
  rg->add_option("--moving", rg_moving, "moving image NRRD")->required();
  rg->add_option("--mode", rg_mode, "rigid|demons|both");
  rg->add_option("--out", rg_out, "output directory")->required();
  rg->add_flag("--resample", rg_resample, "conform moving grid to fixed before demons");
  rg->add_option("--iterations", rg_iters, "demons iterations per level, coarse first");
  rg->add_option("--sigma-update", rg_su, "demons update smoothing, voxels");
  rg->add_option("--sigma-total", rg_st, "demons total-field smoothing, voxels");
  rg->add_option("--max-step", rg_ms, "demons max step, voxels");
  rg->add_option("--bins", rg_bins, "MI histogram bins");

  // eval
  auto* ev = app.add_subcommand("eval", "cohort evaluation with bull's-eye reports");
  std::string ev_config, ev_pred, ev_gt, ev_labels, ev_out;
  ev->add_option("--config", ev_config, "JSON config file (flags win)");
  ev->add_option("--pred", ev_pred, "predicted mask directory")->required();
  ev->add_option("--gt", ev_gt, "ground-truth mask directory")->required();
  ev->add_option("--labels", ev_labels, "atlas label NRRD")->required();
  ev->add_option("--out", ev_out, "output directory")->required();

  // convert
  auto* cv = app.add_subcommand("convert", "geometry / intensity transforms on one NRRD");
  std::string cv_config, cv_in, cv_out;
  std::vector<double> cv_spacing, cv_rescale;
  std::vector<std::string> cv_flips;
  std::vector<int> cv_permute;
  bool cv_nearest = false, cv_zscore = false;
  cv->add_option("--config", cv_config, "JSON config file (flags win)");
  cv->add_option("--in", cv_in, "input NRRD")->required();
  cv->add_option("--out", cv_out, "output NRRD")->required();
  cv->add_option("--to-spacing", cv_spacing, "resample to spacing, mm")->expected(3);
  cv->add_flag("--nearest", cv_nearest, "nearest-neighbor resampling");
  cv->add_option("--rescale", cv_rescale, "rescale intensities to [lo, hi]")->expected(2);
  cv->add_flag("--zscore", cv_zscore, "z-score normalize");
  cv->add_option("--flip", cv_flips, "flip an axis (x, y or z); repeatable");
  cv->add_option("--permute", cv_permute, "axis permutation, e.g. 1 0 2")->expected(3);

  CLI11_PARSE(app, argc, argv);

  try {
    if (ph->parsed()) {
      return cmd_phantom(ph_config, *ph, ph_kind, ph_out, ph_dims, ph_spacing, ph_rv, ph_sigma,
                         ph_nblobs, ph_seed);
    }
    if (gm->parsed()) {
      return cmd_genmask(gm_config, *gm, gm_labels, gm_myo, gm_out, gm_n, gm_seed, gm_regions,
                         gm_vol, gm_por, gm_aniso, gm_rings, gm_exclude_apex, gm_kernels, gm_sigma,
                         gm_min_component, gm_threads);
    }
    if (sy->parsed()) {
      return cmd_synth(sy_config, *sy, sy_image, sy_mask, sy_out, sy_seed, sy_steps, sy_b1, sy_bT,
                       sy_pred, sy_target, sy_exchange, sy_det, sy_hist_image, sy_hist_mask,
                       sy_hist_bins);
    }
    if (rg->parsed()) {
      return cmd_register(rg_config, *rg, rg_fixed, rg_moving, rg_mode, rg_out, rg_resample,
                          rg_iters, rg_su, rg_st, rg_ms, rg_bins);
    }
    if (ev->parsed()) {
      return cmd_eval(ev_config, *ev, ev_pred, ev_gt, ev_labels, ev_out);
    }
    if (cv->parsed()) {
      return cmd_convert(cv_config, *cv, cv_in, cv_out, cv_spacing, cv_nearest, cv_rescale,
                         cv_zscore, cv_flips, cv_permute);
    }
  } catch (const PartialError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitPartial;
  } catch (const scarforge::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
  return kExitOk;
}

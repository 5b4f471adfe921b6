#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>

#include "scarforge/errors.hpp"
#include "scarforge/grid.hpp"
#include "scarforge/lesion_histogram.hpp"
#include "scarforge/nrrd.hpp"
#include "scarforge/rng.hpp"
#include "scarforge/schedule.hpp"

namespace scarforge {

// Noise-prediction contract: map a noisy volume at time step t (optionally
// conditioned on a lesion histogram) to predicted noise of identical dims.
// Trained networks live behind this interface; the library itself only
// ships stubs and the algebraic oracle.
class NoisePredictor {
 public:
  virtual ~NoisePredictor() = default;
  virtual Volume3 predict(const Volume3& x_t, int t, const LesionHistogram* h) = 0;
};

class ZeroPredictor final : public NoisePredictor {
 public:
  Volume3 predict(const Volume3& x_t, int, const LesionHistogram*) override {
    Volume3 out = x_t;
    std::fill(out.data.begin(), out.data.end(), 0.f);
    return out;
  }
};

class ConstantPredictor final : public NoisePredictor {
 public:
  explicit ConstantPredictor(float value) : value_(value) {}
  Volume3 predict(const Volume3& x_t, int, const LesionHistogram*) override {
    Volume3 out = x_t;
    std::fill(out.data.begin(), out.data.end(), value_);
    return out;
  }

 private:
  float value_;
};

// Stateless pseudo-noise stub: the prediction at a voxel depends only on
// (seed, t, linear index), so it is reproducible without carrying a
// generator through the sampling loop.
class HashPredictor final : public NoisePredictor {
 public:
  explicit HashPredictor(std::uint64_t seed) : seed_(seed) {}
  Volume3 predict(const Volume3& x_t, int t, const LesionHistogram*) override {
    Volume3 out = x_t;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
      std::uint64_t z = seed_ ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(t) + 1));
      z ^= 0xbf58476d1ce4e5b9ULL * (static_cast<std::uint64_t>(i) + 1);
      z ^= z >> 30;
      z *= 0xbf58476d1ce4e5b9ULL;
      z ^= z >> 27;
      z *= 0x94d049bb133111ebULL;
      z ^= z >> 31;
      // Map to roughly standard-normal via a pair of uniforms (Irwin-Hall
      // style sum keeps the stub cheap; exact normality is irrelevant here).
      const double u1 = static_cast<double>(z >> 11) * 0x1.0p-53;
      const double u2 = static_cast<double>((z * 0x2545f4914f6cdd1dULL) >> 11) * 0x1.0p-53;
      out.data[i] = static_cast<float>((u1 + u2 - 1.0) * 2.449489742783178);
    }
    return out;
  }

 private:
  std::uint64_t seed_;
};

// Given the target scar texture x*, returns the exact noise implied by the
// forward process at step t: eps = (x_t - sqrt(abar_t) x*) / sqrt(1-abar_t).
// Ancestral stepping with this predictor converges to x* exactly.
class OraclePredictor final : public NoisePredictor {
 public:
  OraclePredictor(Volume3 target, NoiseSchedule schedule)
      : target_(std::move(target)), schedule_(std::move(schedule)) {}

  Volume3 predict(const Volume3& x_t, int t, const LesionHistogram*) override {
    if (t < 1 || t > schedule_.T) {
      fail(ErrorCode::OutOfRange, "OraclePredictor: t must be in [1, T]");
    }
    require_same_dims(x_t, target_, "OraclePredictor");
    const double abar = schedule_.alpha_bar_at(t);
    const double sa = std::sqrt(abar);
    const double inv_s1ma = 1.0 / std::sqrt(1.0 - abar);
    Volume3 out = x_t;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
      out.data[i] = static_cast<float>((x_t.data[i] - sa * target_.data[i]) * inv_s1ma);
    }
    return out;
  }

 private:
  Volume3 target_;
  NoiseSchedule schedule_;
};

// File-exchange stub for plugging in an out-of-process network: each call
// writes <dir>/x_<t>.nrrd, then expects <dir>/eps_<t>.nrrd to exist (placed
// there by the external process ahead of time or by a watcher).
class FileExchangePredictor final : public NoisePredictor {
 public:
  explicit FileExchangePredictor(std::string dir) : dir_(std::move(dir)) {}

  Volume3 predict(const Volume3& x_t, int t, const LesionHistogram*) override {
    namespace fs = std::filesystem;
    const fs::path in = fs::path(dir_) / ("x_" + std::to_string(t) + ".nrrd");
    const fs::path out = fs::path(dir_) / ("eps_" + std::to_string(t) + ".nrrd");
    save_nrrd(x_t, in.string());
    if (!fs::exists(out)) {
      fail(ErrorCode::PredictorFailure,
           "FileExchangePredictor: missing response " + out.string());
    }
    Volume3 eps = load_nrrd<float>(out.string());
    require_same_dims(eps, x_t, "FileExchangePredictor");
    return eps;
  }

 private:
  std::string dir_;
};

}  // namespace scarforge

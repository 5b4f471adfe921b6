#pragma once

#include <cmath>
#include <string>

#include "scarforge/errors.hpp"
#include "scarforge/grid.hpp"
#include "scarforge/lesion_histogram.hpp"
#include "scarforge/predictor.hpp"
#include "scarforge/rng.hpp"
#include "scarforge/schedule.hpp"

namespace scarforge {

// x_t = sqrt(abar_t) x0 + sqrt(1-abar_t) eps. t=0 returns x0 unchanged (not
// recomputed through the formula: 1*x0 + 0*eps could flip the sign bit of
// negative zeros, and callers rely on bit-exact background copies).
inline Volume3 forward_diffuse(const Volume3& x0, int t, const Volume3& eps,
                               const NoiseSchedule& sched) {
  sched.check_step(t);
  if (t == 0) return x0;
  require_same_dims(x0, eps, "forward_diffuse");
  const double abar = sched.alpha_bar_at(t);
  const double sa = std::sqrt(abar);
  const double se = std::sqrt(1.0 - abar);
  Volume3 out = x0;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = static_cast<float>(sa * x0.data[i] + se * eps.data[i]);
  }
  return out;
}

enum class LossReduction { Sum, MeanOverMask };

// Squared L2 norm of the mask-restricted residual. Voxels outside the mask
// never enter the accumulation, so perturbing the prediction there cannot
// change the result even in the last bit.
inline double scar_focused_loss(const Volume3& eps, const Volume3& eps_hat, const Mask3& mask,
                                LossReduction reduction = LossReduction::Sum) {
  require_same_dims(eps, eps_hat, "scar_focused_loss");
  require_same_dims2(eps, mask, "scar_focused_loss");
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < mask.data.size(); ++i) {
    if (!mask.data[i]) continue;
    const double r = static_cast<double>(eps.data[i]) - static_cast<double>(eps_hat.data[i]);
    sum += r * r;
    ++count;
  }
  if (reduction == LossReduction::MeanOverMask) {
    return count > 0 ? sum / static_cast<double>(count) : 0.0;
  }
  return sum;
}

// Voxel-wise select: mask -> o, else x_noised. A pure copy, no arithmetic,
// so the unmasked half is bit-identical to x_noised.
inline Volume3 reverse_blend(const Volume3& o, const Volume3& x_noised, const Mask3& mask) {
  require_same_dims(o, x_noised, "reverse_blend");
  require_same_dims2(o, mask, "reverse_blend");
  Volume3 out = x_noised;
  for (std::size_t i = 0; i < mask.data.size(); ++i) {
    if (mask.data[i]) out.data[i] = o.data[i];
  }
  return out;
}

namespace detail {

// One ancestral DDPM step: posterior mean from the noise prediction, plus
// beta-tilde variance noise for t > 1 unless running deterministically.
inline Volume3 ancestral_step(const Volume3& x_t, const Volume3& eps_hat, int t,
                              const NoiseSchedule& sched, Rng& rng, bool deterministic) {
  const double beta = sched.beta_at(t);
  const double abar_t = sched.alpha_bar_at(t);
  const double abar_prev = sched.alpha_bar_at(t - 1);
  const double inv_sqrt_alpha = 1.0 / std::sqrt(1.0 - beta);
  const double coeff = beta / std::sqrt(1.0 - abar_t);
  const bool add_noise = t > 1 && !deterministic;
  const double sigma = add_noise ? std::sqrt((1.0 - abar_prev) / (1.0 - abar_t) * beta) : 0.0;

  Volume3 out = x_t;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    double v = inv_sqrt_alpha * (x_t.data[i] - coeff * eps_hat.data[i]);
    if (add_noise) v += sigma * rng.normal();
    out.data[i] = static_cast<float>(v);
  }
  return out;
}

inline void require_finite(const Volume3& v, const std::string& stage, int t) {
  for (float x : v.data) {
    if (!std::isfinite(x)) {
      fail(ErrorCode::NonFinite, "synthesize: non-finite value in " + stage + " at step t=" +
                                     std::to_string(t));
    }
  }
}

inline Volume3 gaussian_volume_like(const Volume3& ref, Rng& rng) {
  Volume3 out = ref;
  for (auto& v : out.data) v = static_cast<float>(rng.normal());
  return out;
}

}  // namespace detail

// Mask-blended reverse diffusion. Each step denoises the current estimate
// inside the mask and refreshes the background from the forward-diffused
// clean image; the final blend happens at t=0 where forward diffusion is the
// identity, which makes background preservation exact by construction rather
// than approximate.
inline Volume3 synthesize(const Volume3& x_clean, const Mask3& mask, NoisePredictor& predictor,
                          const NoiseSchedule& sched, const LesionHistogram* h, Rng& rng,
                          bool deterministic = false) {
  require_same_dims2(x_clean, mask, "synthesize");
  if (sched.T < 1) fail(ErrorCode::InvalidArgument, "synthesize: schedule has no steps");

  Volume3 x_hat = detail::gaussian_volume_like(x_clean, rng);
  for (int t = sched.T; t >= 1; --t) {
    Volume3 eps_hat = predictor.predict(x_hat, t, h);
    if (eps_hat.dims != x_hat.dims) {
      fail(ErrorCode::PredictorFailure, "synthesize: predictor output dims mismatch at t=" +
                                            std::to_string(t));
    }
    detail::require_finite(eps_hat, "predictor output", t);
    Volume3 o = detail::ancestral_step(x_hat, eps_hat, t, sched, rng, deterministic);
    detail::require_finite(o, "ancestral step", t);

    Volume3 x_prev;
    if (t - 1 == 0) {
      x_prev = x_clean;
    } else {
      const Volume3 eps = detail::gaussian_volume_like(x_clean, rng);
      x_prev = forward_diffuse(x_clean, t - 1, eps, sched);
    }
    x_hat = reverse_blend(o, x_prev, mask);
  }
  return x_hat;
}

}  // namespace scarforge

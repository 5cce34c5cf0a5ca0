#pragma once

#include <functional>
#include <optional>

#include "ldc/rng.hpp"
#include "ldc/tensor.hpp"

namespace ldc {

struct FeaturePyramid;

// Per-step diffusion tables: beta_t, alpha_t = 1 - beta_t and the running
// product alpha_bar_t. alpha_bar is strictly decreasing and stays in (0,1].
struct NoiseSchedule {
    int num_steps = 0;
    std::vector<double> betas;
    std::vector<double> alphas;
    std::vector<double> alpha_bars;

    double snr(int t) const { return alpha_bars[t] / (1.0 - alpha_bars[t]); }
};

// Linear beta interpolation between beta_start and beta_end (inclusive).
NoiseSchedule build_schedule(int num_steps, double beta_start, double beta_end);

// z_t = sqrt(alpha_bar_t) * z0 + sqrt(1 - alpha_bar_t) * eps
Tensor forward_diffuse(const Tensor& z0, int t, const Tensor& eps, const NoiseSchedule& schedule);

// z0_hat = (z_t - sqrt(1 - alpha_bar_t) * eps_hat) / sqrt(alpha_bar_t)
// Errors out when sqrt(alpha_bar_t) falls below 1e-8 (near-singular inversion).
Tensor predict_z0(const Tensor& z_t, const Tensor& eps_hat, int t, const NoiseSchedule& schedule);

// Noise-prediction callable: (z_t, t, class id or nullopt, adapter features or null).
using DenoiseFn = std::function<Tensor(const Tensor&, int, const std::optional<int>&,
                                       const FeaturePyramid*)>;

// Plain DDPM ancestral sampling from seeded Gaussian z_T down to z_0, using the
// posterior-mean update with variance beta_tilde. Deterministic given
// (seed, denoiser, condition). No noise is added on the final step.
Tensor ancestral_sample(const DenoiseFn& denoiser, int channels, int height, int width,
                        const NoiseSchedule& schedule, uint64_t seed,
                        const std::optional<int>& class_id = std::nullopt,
                        const FeaturePyramid* features = nullptr);

}  // namespace ldc

#include "ldc/schedule.hpp"

#include <cmath>

namespace ldc {

NoiseSchedule build_schedule(int num_steps, double beta_start, double beta_end) {
    if (num_steps < 1) {
        throw std::invalid_argument("build_schedule: num_steps must be >= 1");
    }
    if (!(beta_start > 0.0) || !(beta_end < 1.0) || beta_start > beta_end) {
        throw std::invalid_argument("build_schedule: need 0 < beta_start <= beta_end < 1");
    }
    NoiseSchedule s;
    s.num_steps = num_steps;
    s.betas.resize(num_steps);
    s.alphas.resize(num_steps);
    s.alpha_bars.resize(num_steps);
    double running = 1.0;
    for (int t = 0; t < num_steps; t++) {
        double frac = num_steps == 1 ? 0.0 : static_cast<double>(t) / (num_steps - 1);
        s.betas[t] = beta_start + (beta_end - beta_start) * frac;
        s.alphas[t] = 1.0 - s.betas[t];
        running *= s.alphas[t];
        s.alpha_bars[t] = running;
    }
    return s;
}

static void check_step(int t, const NoiseSchedule& schedule, const char* what) {
    if (t < 0 || t >= schedule.num_steps) {
        throw std::invalid_argument(std::string(what) + ": step index out of range");
    }
}

Tensor forward_diffuse(const Tensor& z0, int t, const Tensor& eps, const NoiseSchedule& schedule) {
    check_same_shape(z0, eps, "forward_diffuse");
    check_step(t, schedule, "forward_diffuse");
    const double ab = schedule.alpha_bars[t];
    const double a = std::sqrt(ab);
    const double b = std::sqrt(1.0 - ab);
    Tensor z_t(z0.c, z0.h, z0.w);
    for (size_t i = 0; i < z0.size(); i++) {
        z_t.data[i] = a * z0.data[i] + b * eps.data[i];
    }
    return z_t;
}

Tensor predict_z0(const Tensor& z_t, const Tensor& eps_hat, int t, const NoiseSchedule& schedule) {
    check_same_shape(z_t, eps_hat, "predict_z0");
    check_step(t, schedule, "predict_z0");
    const double ab = schedule.alpha_bars[t];
    const double a = std::sqrt(ab);
    if (a < 1e-8) {
        throw std::invalid_argument("predict_z0: sqrt(alpha_bar) below numeric floor 1e-8");
    }
    const double b = std::sqrt(1.0 - ab);
    Tensor z0(z_t.c, z_t.h, z_t.w);
    for (size_t i = 0; i < z_t.size(); i++) {
        z0.data[i] = (z_t.data[i] - b * eps_hat.data[i]) / a;
    }
    return z0;
}

Tensor ancestral_sample(const DenoiseFn& denoiser, int channels, int height, int width,
                        const NoiseSchedule& schedule, uint64_t seed,
                        const std::optional<int>& class_id, const FeaturePyramid* features) {
    Rng rng(seed);
    Tensor z(channels, height, width);
    for (double& v : z.data) v = rng.normal();

    for (int t = schedule.num_steps - 1; t >= 0; t--) {
        const Tensor eps_hat = denoiser(z, t, class_id, features);
        check_same_shape(z, eps_hat, "ancestral_sample: denoiser output");
        const double beta = schedule.betas[t];
        const double alpha = schedule.alphas[t];
        const double ab = schedule.alpha_bars[t];
        const double ab_prev = t > 0 ? schedule.alpha_bars[t - 1] : 1.0;
        const double mean_scale = 1.0 / std::sqrt(alpha);
        const double eps_scale = beta / std::sqrt(1.0 - ab);
        // beta_tilde: posterior variance of q(z_{t-1} | z_t, z_0)
        const double sigma = t > 0 ? std::sqrt((1.0 - ab_prev) / (1.0 - ab) * beta) : 0.0;
        for (size_t i = 0; i < z.size(); i++) {
            double mean = mean_scale * (z.data[i] - eps_scale * eps_hat.data[i]);
            z.data[i] = t > 0 ? mean + sigma * rng.normal() : mean;
        }
    }
    return z;
}

}  // namespace ldc

#pragma once

#include "ldc/mask.hpp"
#include "ldc/tensor.hpp"

namespace ldc {

enum class FilterKind { sobel, laplace };

FilterKind filter_kind_from_string(const std::string& s);
std::string filter_kind_to_string(FilterKind kind);

struct LossReport {
    double l_diff = 0.0;
    double l_sim = 0.0;
    double l_total = 0.0;
    double lambda = 0.0;
};

// mean squared error over all elements
double loss_diff(const Tensor& eps, const Tensor& eps_hat);

// d loss_diff / d eps_hat
Tensor loss_diff_grad(const Tensor& eps, const Tensor& eps_hat);

// Per-channel 3x3 correlation with replicate padding. Sobel stacks the
// horizontal and vertical responses per channel (out channels = 2*C,
// ordered [x_0, y_0, x_1, y_1, ...]); Laplace keeps C channels.
Tensor latent_filter(const Tensor& z, FilterKind kind);

// Masked MSE between filtered z0 and z0_hat. The mask is the ROI downsampled
// to latent resolution (block-majority rule); it broadcasts over filter
// channels and the result averages over masked elements. Empty mask -> 0.
double loss_sim(const Tensor& z0, const Tensor& z0_hat, const Tensor& latent_mask,
                FilterKind kind);
double loss_sim(const Tensor& z0, const Tensor& z0_hat, const RoiMask& mask, FilterKind kind);

// d loss_sim / d z0_hat (adjoint of the filter applied to the masked residual)
Tensor loss_sim_grad(const Tensor& z0, const Tensor& z0_hat, const Tensor& latent_mask,
                     FilterKind kind);

// l_diff + lambda * l_sim
double loss_total(double l_diff, double l_sim, double lambda);

LossReport make_loss_report(double l_diff, double l_sim, double lambda);

}  // namespace ldc

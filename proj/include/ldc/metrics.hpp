#pragma once

#include <string>
#include <vector>

#include "ldc/mask.hpp"
#include "ldc/tensor.hpp"

namespace ldc {

// Whether the Gaussian filter runs before or after the factor-8 decimation.
enum class DownsampleOrder { filter_then_stride, stride_then_filter };

// Factor-8 edge-map downsampling with a normalized 11x11 Gaussian (sigma 5),
// replicate padding, samples taken at indices 0, 8, 16, ... Output is a
// (1,H/8,W/8) grid with values in [0,1].
Tensor gaussian_downsample(const Tensor& edges,
                           DownsampleOrder order = DownsampleOrder::filter_then_stride);

// Mean over masked downsampled cells of (D(e_gt) - D(e_gen))^2. The mask is
// resampled to the 1/8 grid with the block-majority rule; it must not be
// empty there.
double dmse_in(const Tensor& e_gt, const Tensor& e_gen, const RoiMask& mask,
               DownsampleOrder order = DownsampleOrder::filter_then_stride);

// Mean over unmasked downsampled cells of (1 - D(e_gen))^2; the mask must not
// cover the whole grid.
double dmse_out(const Tensor& e_gen, const RoiMask& mask,
                DownsampleOrder order = DownsampleOrder::filter_then_stride);

struct DmseReport {
    std::string sample_id;
    double dmse_in = 0.0;
    double dmse_out = 0.0;
    long mask_area = 0;          // pixel count of the full-resolution mask
    bool in_defined = true;      // false when the downsampled mask is empty
    bool out_defined = true;     // false when the downsampled mask is full
};

// Computes both metrics, flagging the undefined sides (empty or full mask on
// the downsampled grid) instead of erroring.
DmseReport make_dmse_report(const std::string& sample_id, const Tensor& e_gt, const Tensor& e_gen,
                            const RoiMask& mask,
                            DownsampleOrder order = DownsampleOrder::filter_then_stride);

struct DmseAggregate {
    double in_mean = 0.0, in_std = 0.0;
    double out_mean = 0.0, out_std = 0.0;
    int in_count = 0, out_count = 0;
};

// Population mean and sample standard deviation per metric, skipping entries
// flagged undefined. A single report yields std = 0.
DmseAggregate aggregate(const std::vector<DmseReport>& reports);

}  // namespace ldc

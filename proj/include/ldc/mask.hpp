#pragma once

#include <utility>
#include <vector>

#include "ldc/rng.hpp"
#include "ldc/tensor.hpp"

namespace ldc {

// Binary ROI mask plus its per-level downsampled pyramid. The pyramid is
// derived state: rebuild it (build_pyramid) after editing data.
struct RoiMask {
    Tensor data;                  // (1,H,W), strictly binary
    std::vector<Tensor> pyramid;  // one binary grid per feature level

    RoiMask() = default;
    explicit RoiMask(Tensor d) : data(std::move(d)) {}

    double area() const { return data.sum(); }

    void build_pyramid(const std::vector<std::pair<int, int>>& level_dims);
};

// Block-majority pooling of a binary map to each requested (h_i, w_i); ties
// (exactly half the block covered) round to 1. Level dims must divide the
// pixel dims.
std::vector<Tensor> downsample_mask(const RoiMask& mask,
                                    const std::vector<std::pair<int, int>>& level_dims);

// Random axis-aligned rectangle (or union of up to max_rects rectangles) with
// area >= min_area_fraction * H * W. Resamples until the bound is met.
RoiMask sample_roi_mask(Rng& rng, int height, int width, double min_area_fraction,
                        int max_rects = 1);

}  // namespace ldc

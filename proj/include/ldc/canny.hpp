#pragma once

#include "ldc/tensor.hpp"

namespace ldc {

// Canny pipeline: Gaussian smoothing, Sobel gradients, non-maximum
// suppression, double-threshold hysteresis. Output is a strictly binary
// (1,H,W) map with the source image's spatial dims.
//
// Gradient magnitude is normalized so a unit intensity step produces
// magnitude 1.0; thresholds therefore live on the [0,1] intensity scale.
Tensor extract_edges(const Tensor& image, double low_threshold = 0.1,
                     double high_threshold = 0.2, double smooth_sigma = 1.4);

}  // namespace ldc

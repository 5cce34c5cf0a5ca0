#pragma once

#include <string>

#include "ldc/png_io.hpp"
#include "ldc/tensor.hpp"

namespace ldc {

// Images are (3,H,W) tensors with values in [0,1] and H,W divisible by 8.
void check_image(const Tensor& image);

// BT.601 luma, (3,H,W) -> (1,H,W)
Tensor to_gray(const Tensor& image);

Tensor clamp01(Tensor t);

// 8-bit PNG round-trips. Tensors use [0,1]; binary maps are stored as 0/255.
void save_image_png(const std::string& path, const Tensor& image);
Tensor load_image_png(const std::string& path);

void save_binary_png(const std::string& path, const Tensor& map);
Tensor load_binary_png(const std::string& path);

}  // namespace ldc

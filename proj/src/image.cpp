#include "ldc/image.hpp"

#include <algorithm>
#include <cmath>

namespace ldc {

void check_image(const Tensor& image) {
    if (image.c != 3) throw std::invalid_argument("image must have 3 channels");
    if (image.h % 8 != 0 || image.w % 8 != 0) {
        throw std::invalid_argument("image dims must be divisible by 8, got " + image.shape_str());
    }
}

Tensor to_gray(const Tensor& image) {
    if (image.c != 3) throw std::invalid_argument("to_gray: expected 3 channels");
    Tensor g(1, image.h, image.w);
    const size_t n = static_cast<size_t>(image.h) * image.w;
    for (size_t i = 0; i < n; i++) {
        g.data[i] = 0.299 * image.data[i] + 0.587 * image.data[n + i] + 0.114 * image.data[2 * n + i];
    }
    return g;
}

Tensor clamp01(Tensor t) {
    for (double& v : t.data) v = std::clamp(v, 0.0, 1.0);
    return t;
}

static uint8_t to_u8(double v) {
    return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void save_image_png(const std::string& path, const Tensor& image) {
    if (image.c != 3) throw std::invalid_argument("save_image_png: expected 3 channels");
    PngImage png;
    png.width = image.w;
    png.height = image.h;
    png.channels = 3;
    png.pixels.resize(static_cast<size_t>(image.w) * image.h * 3);
    const size_t n = static_cast<size_t>(image.h) * image.w;
    for (size_t i = 0; i < n; i++) {
        png.pixels[i * 3 + 0] = to_u8(image.data[i]);
        png.pixels[i * 3 + 1] = to_u8(image.data[n + i]);
        png.pixels[i * 3 + 2] = to_u8(image.data[2 * n + i]);
    }
    write_png(path, png);
}

Tensor load_image_png(const std::string& path) {
    PngImage png = read_png(path);
    Tensor image(3, png.height, png.width);
    const size_t n = static_cast<size_t>(png.height) * png.width;
    for (size_t i = 0; i < n; i++) {
        if (png.channels == 3) {
            image.data[i] = png.pixels[i * 3 + 0] / 255.0;
            image.data[n + i] = png.pixels[i * 3 + 1] / 255.0;
            image.data[2 * n + i] = png.pixels[i * 3 + 2] / 255.0;
        } else {
            double v = png.pixels[i] / 255.0;
            image.data[i] = image.data[n + i] = image.data[2 * n + i] = v;
        }
    }
    return image;
}

void save_binary_png(const std::string& path, const Tensor& map) {
    if (map.c != 1) throw std::invalid_argument("save_binary_png: expected 1 channel");
    PngImage png;
    png.width = map.w;
    png.height = map.h;
    png.channels = 1;
    png.pixels.resize(map.size());
    for (size_t i = 0; i < map.size(); i++) {
        png.pixels[i] = map.data[i] != 0.0 ? 255 : 0;
    }
    write_png(path, png);
}

Tensor load_binary_png(const std::string& path) {
    PngImage png = read_png(path);
    Tensor map(1, png.height, png.width);
    const size_t n = static_cast<size_t>(png.height) * png.width;
    for (size_t i = 0; i < n; i++) {
        // gray or rgb input: threshold the first channel at half scale
        map.data[i] = png.pixels[i * png.channels] >= 128 ? 1.0 : 0.0;
    }
    return map;
}

}  // namespace ldc

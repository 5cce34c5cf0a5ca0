#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ldc {

// Minimal 8-bit PNG codec backed by zlib. Grayscale (channels=1) and RGB
// (channels=3) only, no interlacing. Row-major, top-left origin.
struct PngImage {
    int width = 0;
    int height = 0;
    int channels = 0;  // 1 or 3
    std::vector<uint8_t> pixels;  // height * width * channels
};

void write_png(const std::string& path, const PngImage& image);
PngImage read_png(const std::string& path);

}  // namespace ldc

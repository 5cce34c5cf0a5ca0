#include "ldc/canny.hpp"

#include <cmath>
#include <vector>

#include "ldc/image.hpp"

namespace ldc {

namespace {

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

// separable Gaussian blur with replicate borders
Tensor gaussian_blur(const Tensor& gray, double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; i++) {
        kernel[i + radius] = std::exp(-(i * i) / (2.0 * sigma * sigma));
        sum += kernel[i + radius];
    }
    for (double& k : kernel) k /= sum;

    const int h = gray.h, w = gray.w;
    Tensor tmp(1, h, w), out(1, h, w);
    for (int y = 0; y < h; y++) {
        for (int x = 0; x < w; x++) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; i++) {
                acc += kernel[i + radius] * gray.at(0, y, clampi(x + i, 0, w - 1));
            }
            tmp.at(0, y, x) = acc;
        }
    }
    for (int y = 0; y < h; y++) {
        for (int x = 0; x < w; x++) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; i++) {
                acc += kernel[i + radius] * tmp.at(0, clampi(y + i, 0, h - 1), x);
            }
            out.at(0, y, x) = acc;
        }
    }
    return out;
}

}  // namespace

Tensor extract_edges(const Tensor& image, double low_threshold, double high_threshold,
                     double smooth_sigma) {
    if (low_threshold < 0.0 || low_threshold > high_threshold) {
        throw std::invalid_argument("extract_edges: need 0 <= low <= high");
    }
    Tensor gray = image.c == 1 ? image : to_gray(image);
    if (smooth_sigma > 0.0) gray = gaussian_blur(gray, smooth_sigma);

    const int h = gray.h, w = gray.w;
    Tensor mag(1, h, w);
    std::vector<uint8_t> dir(static_cast<size_t>(h) * w, 0);  // 0,45,90,135 quantized as 0..3

    // Sobel with replicate borders; /4 so a unit step gives magnitude 1
    for (int y = 0; y < h; y++) {
        const int ym = clampi(y - 1, 0, h - 1), yp = clampi(y + 1, 0, h - 1);
        for (int x = 0; x < w; x++) {
            const int xm = clampi(x - 1, 0, w - 1), xp = clampi(x + 1, 0, w - 1);
            double gx = (gray.at(0, ym, xp) + 2.0 * gray.at(0, y, xp) + gray.at(0, yp, xp)) -
                        (gray.at(0, ym, xm) + 2.0 * gray.at(0, y, xm) + gray.at(0, yp, xm));
            double gy = (gray.at(0, yp, xm) + 2.0 * gray.at(0, yp, x) + gray.at(0, yp, xp)) -
                        (gray.at(0, ym, xm) + 2.0 * gray.at(0, ym, x) + gray.at(0, ym, xp));
            mag.at(0, y, x) = std::sqrt(gx * gx + gy * gy) / 4.0;

            double angle = std::atan2(gy, gx) * 180.0 / M_PI;
            if (angle < 0.0) angle += 180.0;
            uint8_t d;
            if (angle < 22.5 || angle >= 157.5) d = 0;        // horizontal gradient
            else if (angle < 67.5) d = 1;                     // 45
            else if (angle < 112.5) d = 2;                    // vertical gradient
            else d = 3;                                       // 135
            dir[static_cast<size_t>(y) * w + x] = d;
        }
    }

    // non-maximum suppression along the gradient direction; ties keep the
    // earlier pixel in scan order so a symmetric step yields one column
    Tensor thin(1, h, w);
    for (int y = 0; y < h; y++) {
        for (int x = 0; x < w; x++) {
            double m = mag.at(0, y, x);
            if (m == 0.0) continue;
            int dx1 = 0, dy1 = 0;
            switch (dir[static_cast<size_t>(y) * w + x]) {
                case 0: dx1 = 1; dy1 = 0; break;
                case 1: dx1 = 1; dy1 = -1; break;
                case 2: dx1 = 0; dy1 = 1; break;
                case 3: dx1 = 1; dy1 = 1; break;
            }
            double prev = mag.at(0, clampi(y - dy1, 0, h - 1), clampi(x - dx1, 0, w - 1));
            double next = mag.at(0, clampi(y + dy1, 0, h - 1), clampi(x + dx1, 0, w - 1));
            if (m >= prev && m > next) thin.at(0, y, x) = m;
        }
    }

    // hysteresis: seed from strong pixels, grow through weak ones (8-connected)
    Tensor edges(1, h, w);
    std::vector<std::pair<int, int>> stack;
    for (int y = 0; y < h; y++) {
        for (int x = 0; x < w; x++) {
            if (thin.at(0, y, x) > 0.0 && thin.at(0, y, x) >= high_threshold &&
                edges.at(0, y, x) == 0.0) {
                edges.at(0, y, x) = 1.0;
                stack.emplace_back(y, x);
                while (!stack.empty()) {
                    auto [cy, cx] = stack.back();
                    stack.pop_back();
                    for (int oy = -1; oy <= 1; oy++) {
                        for (int ox = -1; ox <= 1; ox++) {
                            int ny = cy + oy, nx = cx + ox;
                            if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                            if (edges.at(0, ny, nx) == 0.0 && thin.at(0, ny, nx) > 0.0 &&
                                thin.at(0, ny, nx) >= low_threshold) {
                                edges.at(0, ny, nx) = 1.0;
                                stack.emplace_back(ny, nx);
                            }
                        }
                    }
                }
            }
        }
    }
    return edges;
}

}  // namespace ldc

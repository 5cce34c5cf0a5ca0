#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ldc {

// Dense (channels, height, width) grid of doubles, row-major within each channel.
// Used for images (3,H,W), latents (C,H/f,W/f), edge maps and masks (1,H,W).
struct Tensor {
    int c = 0;
    int h = 0;
    int w = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(int c_, int h_, int w_, double fill = 0.0)
        : c(c_), h(h_), w(w_), data(static_cast<size_t>(c_) * h_ * w_, fill) {
        if (c_ <= 0 || h_ <= 0 || w_ <= 0) {
            throw std::invalid_argument("Tensor: dimensions must be positive");
        }
    }

    size_t size() const { return data.size(); }

    double& at(int ci, int yi, int xi) {
        return data[(static_cast<size_t>(ci) * h + yi) * w + xi];
    }
    double at(int ci, int yi, int xi) const {
        return data[(static_cast<size_t>(ci) * h + yi) * w + xi];
    }

    // channel plane start offset
    size_t plane(int ci) const { return static_cast<size_t>(ci) * h * w; }

    bool same_shape(const Tensor& o) const { return c == o.c && h == o.h && w == o.w; }

    std::string shape_str() const {
        return "(" + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + ")";
    }

    bool all_finite() const {
        for (double v : data) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    bool is_binary() const {
        for (double v : data) {
            if (v != 0.0 && v != 1.0) return false;
        }
        return true;
    }

    double sum() const {
        double s = 0.0;
        for (double v : data) s += v;
        return s;
    }

    double max_abs_diff(const Tensor& o) const {
        if (!same_shape(o)) throw std::invalid_argument("max_abs_diff: shape mismatch");
        double m = 0.0;
        for (size_t i = 0; i < data.size(); i++) {
            m = std::max(m, std::fabs(data[i] - o.data[i]));
        }
        return m;
    }
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(what) + ": shape mismatch " + a.shape_str() +
                                    " vs " + b.shape_str());
    }
}

}  // namespace ldc

#include "ldc/mask.hpp"

namespace ldc {

std::vector<Tensor> downsample_mask(const RoiMask& mask,
                                    const std::vector<std::pair<int, int>>& level_dims) {
    const Tensor& m = mask.data;
    std::vector<Tensor> pyramid;
    pyramid.reserve(level_dims.size());
    for (auto [lh, lw] : level_dims) {
        if (lh <= 0 || lw <= 0 || m.h % lh != 0 || m.w % lw != 0) {
            throw std::invalid_argument("downsample_mask: level dims must divide pixel dims");
        }
        const int by = m.h / lh, bx = m.w / lw;
        const int block = by * bx;
        Tensor level(1, lh, lw);
        for (int y = 0; y < lh; y++) {
            for (int x = 0; x < lw; x++) {
                int ones = 0;
                for (int i = 0; i < by; i++) {
                    for (int j = 0; j < bx; j++) {
                        ones += m.at(0, y * by + i, x * bx + j) != 0.0 ? 1 : 0;
                    }
                }
                level.at(0, y, x) = 2 * ones >= block ? 1.0 : 0.0;
            }
        }
        pyramid.push_back(std::move(level));
    }
    return pyramid;
}

void RoiMask::build_pyramid(const std::vector<std::pair<int, int>>& level_dims) {
    pyramid = downsample_mask(*this, level_dims);
}

RoiMask sample_roi_mask(Rng& rng, int height, int width, double min_area_fraction,
                        int max_rects) {
    if (!(min_area_fraction > 0.0) || min_area_fraction > 1.0) {
        throw std::invalid_argument("sample_roi_mask: min_area_fraction must be in (0,1]");
    }
    if (max_rects < 1 || max_rects > 3) {
        throw std::invalid_argument("sample_roi_mask: max_rects must be in [1,3]");
    }
    const double min_area = min_area_fraction * height * width;
    Tensor m(1, height, width);
    for (;;) {
        const int rects = max_rects == 1 ? 1 : 1 + rng.uniform_int(max_rects);
        if (rects == 1) {
            // single rectangle: reject on dims alone before rasterizing
            int rw = 1 + rng.uniform_int(width);
            int rh = 1 + rng.uniform_int(height);
            if (static_cast<double>(rw) * rh < min_area) continue;
            int x0 = rng.uniform_int(width - rw + 1);
            int y0 = rng.uniform_int(height - rh + 1);
            for (int y = y0; y < y0 + rh; y++) {
                for (int x = x0; x < x0 + rw; x++) m.at(0, y, x) = 1.0;
            }
            break;
        }
        std::fill(m.data.begin(), m.data.end(), 0.0);
        for (int r = 0; r < rects; r++) {
            int rw = 1 + rng.uniform_int(width);
            int rh = 1 + rng.uniform_int(height);
            int x0 = rng.uniform_int(width - rw + 1);
            int y0 = rng.uniform_int(height - rh + 1);
            for (int y = y0; y < y0 + rh; y++) {
                for (int x = x0; x < x0 + rw; x++) m.at(0, y, x) = 1.0;
            }
        }
        if (m.sum() >= min_area) break;
    }
    return RoiMask(std::move(m));
}

}  // namespace ldc

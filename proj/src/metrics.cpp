#include "ldc/metrics.hpp"

#include <cmath>

namespace ldc {

namespace {

constexpr int kFactor = 8;
constexpr int kKernel = 11;
constexpr int kRadius = kKernel / 2;
constexpr double kSigma = 5.0;

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

const std::vector<double>& gaussian_kernel() {
    static const std::vector<double> kernel = [] {
        std::vector<double> k(kKernel * kKernel);
        double sum = 0.0;
        for (int i = -kRadius; i <= kRadius; i++) {
            for (int j = -kRadius; j <= kRadius; j++) {
                double v = std::exp(-(i * i + j * j) / (2.0 * kSigma * kSigma));
                k[(i + kRadius) * kKernel + (j + kRadius)] = v;
                sum += v;
            }
        }
        for (double& v : k) v /= sum;
        return k;
    }();
    return kernel;
}

double filtered_at(const Tensor& m, int cy, int cx) {
    const auto& k = gaussian_kernel();
    double acc = 0.0;
    for (int i = -kRadius; i <= kRadius; i++) {
        const int sy = clampi(cy + i, 0, m.h - 1);
        for (int j = -kRadius; j <= kRadius; j++) {
            acc += k[(i + kRadius) * kKernel + (j + kRadius)] * m.at(0, sy, clampi(cx + j, 0, m.w - 1));
        }
    }
    return acc;
}

void check_edges(const Tensor& edges, const char* what) {
    if (edges.c != 1) throw std::invalid_argument(std::string(what) + ": expected 1 channel");
    if (edges.h % kFactor != 0 || edges.w % kFactor != 0) {
        throw std::invalid_argument(std::string(what) + ": dims must be divisible by 8");
    }
}

}  // namespace

Tensor gaussian_downsample(const Tensor& edges, DownsampleOrder order) {
    check_edges(edges, "gaussian_downsample");
    const int oh = edges.h / kFactor, ow = edges.w / kFactor;
    Tensor out(1, oh, ow);
    if (order == DownsampleOrder::filter_then_stride) {
        for (int y = 0; y < oh; y++) {
            for (int x = 0; x < ow; x++) {
                out.at(0, y, x) = filtered_at(edges, y * kFactor, x * kFactor);
            }
        }
    } else {
        // decimate first, then filter the coarse grid
        Tensor coarse(1, oh, ow);
        for (int y = 0; y < oh; y++) {
            for (int x = 0; x < ow; x++) {
                coarse.at(0, y, x) = edges.at(0, y * kFactor, x * kFactor);
            }
        }
        for (int y = 0; y < oh; y++) {
            for (int x = 0; x < ow; x++) {
                out.at(0, y, x) = filtered_at(coarse, y, x);
            }
        }
    }
    return out;
}

double dmse_in(const Tensor& e_gt, const Tensor& e_gen, const RoiMask& mask,
               DownsampleOrder order) {
    check_same_shape(e_gt, e_gen, "dmse_in");
    check_same_shape(e_gt, mask.data, "dmse_in: mask");
    const Tensor dg = gaussian_downsample(e_gt, order);
    const Tensor dn = gaussian_downsample(e_gen, order);
    const Tensor m = downsample_mask(mask, {{dg.h, dg.w}})[0];
    const double ones = m.sum();
    if (ones == 0.0) throw std::invalid_argument("dmse_in: mask is empty on the downsampled grid");
    double acc = 0.0;
    for (size_t i = 0; i < m.size(); i++) {
        if (m.data[i] == 0.0) continue;
        const double d = dg.data[i] - dn.data[i];
        acc += d * d;
    }
    return acc / ones;
}

double dmse_out(const Tensor& e_gen, const RoiMask& mask, DownsampleOrder order) {
    check_same_shape(e_gen, mask.data, "dmse_out: mask");
    const Tensor dn = gaussian_downsample(e_gen, order);
    const Tensor m = downsample_mask(mask, {{dn.h, dn.w}})[0];
    const double zeros = static_cast<double>(m.size()) - m.sum();
    if (zeros == 0.0) throw std::invalid_argument("dmse_out: mask covers the whole grid");
    double acc = 0.0;
    for (size_t i = 0; i < m.size(); i++) {
        if (m.data[i] != 0.0) continue;
        const double d = 1.0 - dn.data[i];
        acc += d * d;
    }
    return acc / zeros;
}

DmseReport make_dmse_report(const std::string& sample_id, const Tensor& e_gt, const Tensor& e_gen,
                            const RoiMask& mask, DownsampleOrder order) {
    DmseReport r;
    r.sample_id = sample_id;
    r.mask_area = static_cast<long>(mask.area());
    const Tensor m = downsample_mask(mask, {{e_gen.h / kFactor, e_gen.w / kFactor}})[0];
    const double ones = m.sum();
    r.in_defined = ones > 0.0;
    r.out_defined = ones < static_cast<double>(m.size());
    if (r.in_defined) r.dmse_in = dmse_in(e_gt, e_gen, mask, order);
    if (r.out_defined) r.dmse_out = dmse_out(e_gen, mask, order);
    return r;
}

DmseAggregate aggregate(const std::vector<DmseReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("aggregate: empty report list");
    DmseAggregate a;
    double in_sum = 0.0, out_sum = 0.0;
    for (const auto& r : reports) {
        if (r.in_defined) {
            in_sum += r.dmse_in;
            a.in_count++;
        }
        if (r.out_defined) {
            out_sum += r.dmse_out;
            a.out_count++;
        }
    }
    a.in_mean = a.in_count > 0 ? in_sum / a.in_count : 0.0;
    a.out_mean = a.out_count > 0 ? out_sum / a.out_count : 0.0;
    double in_sq = 0.0, out_sq = 0.0;
    for (const auto& r : reports) {
        if (r.in_defined) in_sq += (r.dmse_in - a.in_mean) * (r.dmse_in - a.in_mean);
        if (r.out_defined) out_sq += (r.dmse_out - a.out_mean) * (r.dmse_out - a.out_mean);
    }
    a.in_std = a.in_count > 1 ? std::sqrt(in_sq / (a.in_count - 1)) : 0.0;
    a.out_std = a.out_count > 1 ? std::sqrt(out_sq / (a.out_count - 1)) : 0.0;
    return a;
}

}  // namespace ldc

#include "ldc/nn.hpp"

#include <cmath>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ldc::nn {

namespace {

constexpr int kOmpMinWork = 1 << 14;  // skip thread spawn for tiny products

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

namespace {

// dot product with four independent accumulators; the fixed summation order
// keeps results deterministic while breaking the FMA latency chain
inline double dot4(const double* a, const double* b, int k) {
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    int p = 0;
    for (; p + 4 <= k; p += 4) {
        a0 += a[p] * b[p];
        a1 += a[p + 1] * b[p + 1];
        a2 += a[p + 2] * b[p + 2];
        a3 += a[p + 3] * b[p + 3];
    }
    for (; p < k; p++) a0 += a[p] * b[p];
    return (a0 + a1) + (a2 + a3);
}

}  // namespace

void gemm_nn(int m, int n, int k, const double* a, const double* b, double* c) {
    if (n == 1) {
        for (int i = 0; i < m; i++) {
            c[i] += dot4(a + static_cast<size_t>(i) * k, b, k);
        }
        return;
    }
    if (n <= 16) {
        // register accumulation, p unrolled x2 for independent FMA chains
        for (int i = 0; i < m; i++) {
            const double* ai = a + static_cast<size_t>(i) * k;
            double acc0[16] = {0}, acc1[16] = {0};
            int p = 0;
            for (; p + 2 <= k; p += 2) {
                const double av0 = ai[p], av1 = ai[p + 1];
                const double* bp0 = b + static_cast<size_t>(p) * n;
                const double* bp1 = bp0 + n;
                for (int j = 0; j < n; j++) {
                    acc0[j] += av0 * bp0[j];
                    acc1[j] += av1 * bp1[j];
                }
            }
            if (p < k) {
                const double av = ai[p];
                const double* bp = b + static_cast<size_t>(p) * n;
                for (int j = 0; j < n; j++) acc0[j] += av * bp[j];
            }
            double* ci = c + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; j++) ci[j] += acc0[j] + acc1[j];
        }
        return;
    }
    const bool par = static_cast<long>(m) * n * k >= kOmpMinWork;
#pragma omp parallel for schedule(static) if (par)
    for (int i = 0; i < m; i++) {
        double* ci = c + static_cast<size_t>(i) * n;
        const double* ai = a + static_cast<size_t>(i) * k;
        for (int p = 0; p < k; p++) {
            const double av = ai[p];
            if (av == 0.0) continue;
            const double* bp = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; j++) ci[j] += av * bp[j];
        }
    }
}

void gemm_nt(int m, int n, int k, const double* a, const double* b, double* c) {
    if (k == 1) {
        for (int i = 0; i < m; i++) {
            const double av = a[i];
            double* ci = c + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; j++) ci[j] += av * b[j];
        }
        return;
    }
    const bool par = static_cast<long>(m) * n * k >= kOmpMinWork;
#pragma omp parallel for schedule(static) if (par)
    for (int i = 0; i < m; i++) {
        double* ci = c + static_cast<size_t>(i) * n;
        const double* ai = a + static_cast<size_t>(i) * k;
        for (int j = 0; j < n; j++) {
            ci[j] += dot4(ai, b + static_cast<size_t>(j) * k, k);
        }
    }
}

void gemm_tn(int m, int n, int k, const double* a, const double* b, double* c) {
    if (n == 1) {
        for (int p = 0; p < k; p++) {
            const double* ap = a + static_cast<size_t>(p) * m;
            const double bv = b[p];
            for (int i = 0; i < m; i++) c[i] += ap[i] * bv;
        }
        return;
    }
    if (static_cast<long>(m) * n <= 8192) {
        // C fits comfortably in cache: stream A rows with k outermost
        for (int p = 0; p < k; p++) {
            const double* ap = a + static_cast<size_t>(p) * m;
            const double* bp = b + static_cast<size_t>(p) * n;
            for (int i = 0; i < m; i++) {
                const double av = ap[i];
                double* ci = c + static_cast<size_t>(i) * n;
                for (int j = 0; j < n; j++) ci[j] += av * bp[j];
            }
        }
        return;
    }
    const bool par = static_cast<long>(m) * n * k >= kOmpMinWork;
#pragma omp parallel for schedule(static) if (par)
    for (int i = 0; i < m; i++) {
        double* ci = c + static_cast<size_t>(i) * n;
        for (int p = 0; p < k; p++) {
            const double av = a[static_cast<size_t>(p) * m + i];
            if (av == 0.0) continue;
            const double* bp = b + static_cast<size_t>(p) * n;
            for (int j = 0; j < n; j++) ci[j] += av * bp[j];
        }
    }
}

/*--------------------------------- Conv2d ---------------------------------*/

void Conv2d::init(const std::string& name, int in_c_, int out_c_, int k_, int stride_, Rng& rng,
                  bool zero_init) {
    in_c = in_c_;
    out_c = out_c_;
    k = k_;
    stride = stride_;
    weight.name = name + ".weight";
    bias.name = name + ".bias";
    weight.init_size(static_cast<size_t>(out_c) * in_c * k * k);
    bias.init_size(static_cast<size_t>(out_c));
    if (!zero_init) {
        const double std = std::sqrt(2.0 / (static_cast<double>(in_c) * k * k));
        for (double& w : weight.v) w = rng.normal() * std;
    }
}

namespace {

// one row of a 3x3 correlation: dst += taps of src at x-1, x, x+1
inline void row_taps(double* dst, const double* src, double wl, double wc, double wr, int wd) {
    dst[0] += wc * src[0] + wr * src[1];
    for (int xx = 1; xx < wd - 1; xx++) {
        dst[xx] += wl * src[xx - 1] + wc * src[xx] + wr * src[xx + 1];
    }
    dst[wd - 1] += wl * src[wd - 2] + wc * src[wd - 1];
}

// direct 3x3 stride-1 zero-pad convolution with fused row taps; used at image
// resolution where im2col traffic would dominate
void conv3x3_forward(const Tensor& x, const std::vector<double>& w, const std::vector<double>& b,
                     Tensor& y) {
    const int h = x.h, wd = x.w, in_c = x.c, out_c = y.c;
#pragma omp parallel for schedule(static) if (static_cast<long>(out_c) * in_c * h * wd >= (1 << 15))
    for (int oc = 0; oc < out_c; oc++) {
        double* yp = y.data.data() + static_cast<size_t>(oc) * h * wd;
        std::fill(yp, yp + static_cast<size_t>(h) * wd, b[oc]);
        for (int ic = 0; ic < in_c; ic++) {
            const double* xc = x.data.data() + static_cast<size_t>(ic) * h * wd;
            const double* wk = w.data() + (static_cast<size_t>(oc) * in_c + ic) * 9;
            for (int yy = 0; yy < h; yy++) {
                double* dst = yp + static_cast<size_t>(yy) * wd;
                for (int dy = -1; dy <= 1; dy++) {
                    const int sy = yy + dy;
                    if (sy < 0 || sy >= h) continue;
                    const double* src = xc + static_cast<size_t>(sy) * wd;
                    const double* t = wk + (dy + 1) * 3;
                    row_taps(dst, src, t[0], t[1], t[2], wd);
                }
            }
        }
    }
}

// gradients of the direct 3x3 path: dx via the flipped kernel, dW by row dots
void conv3x3_backward(const Tensor& x, const Tensor& dy, const std::vector<double>& w,
                      std::vector<double>* dw, std::vector<double>* db, Tensor& dx) {
    const int h = x.h, wd = x.w, in_c = x.c, out_c = dy.c;
    const bool par = static_cast<long>(out_c) * in_c * h * wd >= (1 << 15);
    if (dw) {
#pragma omp parallel for schedule(static) if (par)
        for (int oc = 0; oc < out_c; oc++) {
            const double* gp = dy.data.data() + static_cast<size_t>(oc) * h * wd;
            double acc_b = 0.0;
            for (size_t i = 0; i < static_cast<size_t>(h) * wd; i++) acc_b += gp[i];
            (*db)[oc] += acc_b;
            for (int ic = 0; ic < in_c; ic++) {
                const double* xc = x.data.data() + static_cast<size_t>(ic) * h * wd;
                double* wg = dw->data() + (static_cast<size_t>(oc) * in_c + ic) * 9;
                double acc[9] = {0};
                for (int yy = 0; yy < h; yy++) {
                    const double* gr = gp + static_cast<size_t>(yy) * wd;
                    for (int dy_ = -1; dy_ <= 1; dy_++) {
                        const int sy = yy + dy_;
                        if (sy < 0 || sy >= h) continue;
                        const double* xr = xc + static_cast<size_t>(sy) * wd;
                        double al = 0.0, ac = 0.0, ar = 0.0;
                        ac += gr[0] * xr[0];
                        ar += gr[0] * xr[1];
                        for (int xx = 1; xx < wd - 1; xx++) {
                            al += gr[xx] * xr[xx - 1];
                            ac += gr[xx] * xr[xx];
                            ar += gr[xx] * xr[xx + 1];
                        }
                        al += gr[wd - 1] * xr[wd - 2];
                        ac += gr[wd - 1] * xr[wd - 1];
                        acc[(dy_ + 1) * 3 + 0] += al;
                        acc[(dy_ + 1) * 3 + 1] += ac;
                        acc[(dy_ + 1) * 3 + 2] += ar;
                    }
                }
                for (int i = 0; i < 9; i++) wg[i] += acc[i];
            }
        }
    }
#pragma omp parallel for schedule(static) if (par)
    for (int ic = 0; ic < in_c; ic++) {
        double* dxp = dx.data.data() + static_cast<size_t>(ic) * h * wd;
        for (int oc = 0; oc < out_c; oc++) {
            const double* gp = dy.data.data() + static_cast<size_t>(oc) * h * wd;
            const double* wk = w.data() + (static_cast<size_t>(oc) * in_c + ic) * 9;
            for (int yy = 0; yy < h; yy++) {
                double* dst = dxp + static_cast<size_t>(yy) * wd;
                // dx picks up the flipped taps from the surrounding g rows
                for (int dy_ = -1; dy_ <= 1; dy_++) {
                    const int gy = yy - dy_;
                    if (gy < 0 || gy >= h) continue;
                    const double* src = gp + static_cast<size_t>(gy) * wd;
                    const double* t = wk + (dy_ + 1) * 3;
                    row_taps(dst, src, t[2], t[1], t[0], wd);
                }
            }
        }
    }
}

// one output row of a stride-2 3x3 correlation
inline void row_taps_s2(double* dst, const double* src, double wl, double wc, double wr, int ow) {
    dst[0] += wc * src[0] + wr * src[1];
    for (int ox = 1; ox < ow; ox++) {
        const double* s = src + 2 * ox;
        dst[ox] += wl * s[-1] + wc * s[0] + wr * s[1];
    }
}

void conv3x3s2_forward(const Tensor& x, const std::vector<double>& w, const std::vector<double>& b,
                       Tensor& y) {
    const int h = x.h, wd = x.w, in_c = x.c, out_c = y.c;
    const int oh = y.h, ow = y.w;
#pragma omp parallel for schedule(static) if (static_cast<long>(out_c) * in_c * h * wd >= (1 << 15))
    for (int oc = 0; oc < out_c; oc++) {
        double* yp = y.data.data() + static_cast<size_t>(oc) * oh * ow;
        std::fill(yp, yp + static_cast<size_t>(oh) * ow, b[oc]);
        for (int ic = 0; ic < in_c; ic++) {
            const double* xc = x.data.data() + static_cast<size_t>(ic) * h * wd;
            const double* wk = w.data() + (static_cast<size_t>(oc) * in_c + ic) * 9;
            for (int oy = 0; oy < oh; oy++) {
                double* dst = yp + static_cast<size_t>(oy) * ow;
                for (int i = 0; i < 3; i++) {
                    const int sy = 2 * oy + i - 1;
                    if (sy < 0 || sy >= h) continue;
                    const double* src = xc + static_cast<size_t>(sy) * wd;
                    const double* t = wk + i * 3;
                    row_taps_s2(dst, src, t[0], t[1], t[2], ow);
                }
            }
        }
    }
}

void conv3x3s2_backward(const Tensor& x, const Tensor& dy, const std::vector<double>& w,
                        std::vector<double>* dw, std::vector<double>* db, Tensor& dx) {
    const int h = x.h, wd = x.w, in_c = x.c, out_c = dy.c;
    const int oh = dy.h, ow = dy.w;
    const bool par = static_cast<long>(out_c) * in_c * h * wd >= (1 << 15);
    if (dw) {
#pragma omp parallel for schedule(static) if (par)
        for (int oc = 0; oc < out_c; oc++) {
            const double* gp = dy.data.data() + static_cast<size_t>(oc) * oh * ow;
            double acc_b = 0.0;
            for (size_t i = 0; i < static_cast<size_t>(oh) * ow; i++) acc_b += gp[i];
            (*db)[oc] += acc_b;
            for (int ic = 0; ic < in_c; ic++) {
                const double* xc = x.data.data() + static_cast<size_t>(ic) * h * wd;
                double* wg = dw->data() + (static_cast<size_t>(oc) * in_c + ic) * 9;
                double acc[9] = {0};
                for (int oy = 0; oy < oh; oy++) {
                    const double* gr = gp + static_cast<size_t>(oy) * ow;
                    for (int i = 0; i < 3; i++) {
                        const int sy = 2 * oy + i - 1;
                        if (sy < 0 || sy >= h) continue;
                        const double* xr = xc + static_cast<size_t>(sy) * wd;
                        double al = 0.0, ac = 0.0, ar = 0.0;
                        ac += gr[0] * xr[0];
                        ar += gr[0] * xr[1];
                        for (int ox = 1; ox < ow; ox++) {
                            const double* s = xr + 2 * ox;
                            al += gr[ox] * s[-1];
                            ac += gr[ox] * s[0];
                            ar += gr[ox] * s[1];
                        }
                        acc[i * 3 + 0] += al;
                        acc[i * 3 + 1] += ac;
                        acc[i * 3 + 2] += ar;
                    }
                }
                for (int i = 0; i < 9; i++) wg[i] += acc[i];
            }
        }
    }
#pragma omp parallel for schedule(static) if (par)
    for (int ic = 0; ic < in_c; ic++) {
        double* dxp = dx.data.data() + static_cast<size_t>(ic) * h * wd;
        for (int oc = 0; oc < out_c; oc++) {
            const double* gp = dy.data.data() + static_cast<size_t>(oc) * oh * ow;
            const double* wk = w.data() + (static_cast<size_t>(oc) * in_c + ic) * 9;
            for (int oy = 0; oy < oh; oy++) {
                const double* gr = gp + static_cast<size_t>(oy) * ow;
                for (int i = 0; i < 3; i++) {
                    const int sy = 2 * oy + i - 1;
                    if (sy < 0 || sy >= h) continue;
                    double* dst = dxp + static_cast<size_t>(sy) * wd;
                    const double* t = wk + i * 3;
                    dst[0] += t[1] * gr[0];
                    dst[1] += t[2] * gr[0];
                    for (int ox = 1; ox < ow; ox++) {
                        double* d = dst + 2 * ox;
                        d[-1] += t[0] * gr[ox];
                        d[0] += t[1] * gr[ox];
                        d[1] += t[2] * gr[ox];
                    }
                }
            }
        }
    }
}

// col layout: [in_c*k*k, oh*ow]
void im2col(const Tensor& x, int k, int stride, int oh, int ow, std::vector<double>& col) {
    const int pad = k / 2;
    const int n = oh * ow;
    col.assign(static_cast<size_t>(x.c) * k * k * n, 0.0);
    for (int c = 0; c < x.c; c++) {
        for (int i = 0; i < k; i++) {
            for (int j = 0; j < k; j++) {
                double* dst = col.data() + ((static_cast<size_t>(c) * k + i) * k + j) * n;
                for (int oy = 0; oy < oh; oy++) {
                    const int sy = oy * stride + i - pad;
                    if (sy < 0 || sy >= x.h) continue;
                    for (int ox = 0; ox < ow; ox++) {
                        const int sx = ox * stride + j - pad;
                        if (sx < 0 || sx >= x.w) continue;
                        dst[oy * ow + ox] = x.at(c, sy, sx);
                    }
                }
            }
        }
    }
}

void col2im_add(const std::vector<double>& col, int c_in, int k, int stride, int oh, int ow,
                Tensor& dx) {
    const int pad = k / 2;
    const int n = oh * ow;
    for (int c = 0; c < c_in; c++) {
        for (int i = 0; i < k; i++) {
            for (int j = 0; j < k; j++) {
                const double* src = col.data() + ((static_cast<size_t>(c) * k + i) * k + j) * n;
                for (int oy = 0; oy < oh; oy++) {
                    const int sy = oy * stride + i - pad;
                    if (sy < 0 || sy >= dx.h) continue;
                    for (int ox = 0; ox < ow; ox++) {
                        const int sx = ox * stride + j - pad;
                        if (sx < 0 || sx >= dx.w) continue;
                        dx.at(c, sy, sx) += src[oy * ow + ox];
                    }
                }
            }
        }
    }
}

}  // namespace

Tensor Conv2d::forward(const Tensor& x, Tape& tape) const {
    if (x.c != in_c) {
        throw std::invalid_argument(weight.name + ": expected " + std::to_string(in_c) +
                                    " input channels, got " + std::to_string(x.c));
    }
    const int oh = out_dim(x.h), ow = out_dim(x.w);
    const int n = oh * ow;
    Tensor y(out_c, oh, ow);
    // direct taps win at image resolution; im2col+gemm wins on tiny planes
    if (k == 3 && stride == 1 && x.w >= 8) {
        conv3x3_forward(x, weight.v, bias.v, y);
    } else if (k == 3 && stride == 2 && x.w >= 12 && x.w % 2 == 0 && x.h % 2 == 0) {
        conv3x3s2_forward(x, weight.v, bias.v, y);
    } else if (k == 1 && stride == 1) {
        for (int oc = 0; oc < out_c; oc++) {
            std::fill(y.data.begin() + y.plane(oc), y.data.begin() + y.plane(oc) + n, bias.v[oc]);
        }
        gemm_nn(out_c, n, in_c, weight.v.data(), x.data.data(), y.data.data());
    } else {
        const int kk = in_c * k * k;
        std::vector<double> col;
        im2col(x, k, stride, oh, ow, col);
        for (int oc = 0; oc < out_c; oc++) {
            std::fill(y.data.begin() + y.plane(oc), y.data.begin() + y.plane(oc) + n, bias.v[oc]);
        }
        gemm_nn(out_c, n, kk, weight.v.data(), col.data(), y.data.data());
    }
    tape.push(x);
    return y;
}

Tensor Conv2d::backward(const Tensor& dy, Tape& tape, bool train) {
    const Tensor x = tape.pop();
    const int oh = dy.h, ow = dy.w;
    const int n = oh * ow;
    Tensor dx(in_c, x.h, x.w);
    if (k == 3 && stride == 1 && x.w >= 8) {
        conv3x3_backward(x, dy, weight.v, train ? &weight.g : nullptr,
                         train ? &bias.g : nullptr, dx);
        return dx;
    }
    if (k == 3 && stride == 2 && x.w >= 12 && x.w % 2 == 0 && x.h % 2 == 0) {
        conv3x3s2_backward(x, dy, weight.v, train ? &weight.g : nullptr,
                           train ? &bias.g : nullptr, dx);
        return dx;
    }
    if (k == 1 && stride == 1) {
        if (train) {
            gemm_nt(out_c, in_c, n, dy.data.data(), x.data.data(), weight.g.data());
            for (int oc = 0; oc < out_c; oc++) {
                double acc = 0.0;
                const double* p = dy.data.data() + dy.plane(oc);
                for (int i = 0; i < n; i++) acc += p[i];
                bias.g[oc] += acc;
            }
        }
        gemm_tn(in_c, n, out_c, weight.v.data(), dy.data.data(), dx.data.data());
        return dx;
    }
    const int kk = in_c * k * k;
    std::vector<double> col;
    im2col(x, k, stride, oh, ow, col);
    if (train) {
        gemm_nt(out_c, kk, n, dy.data.data(), col.data(), weight.g.data());
        for (int oc = 0; oc < out_c; oc++) {
            double acc = 0.0;
            const double* p = dy.data.data() + dy.plane(oc);
            for (int i = 0; i < n; i++) acc += p[i];
            bias.g[oc] += acc;
        }
    }
    std::vector<double> dcol(static_cast<size_t>(kk) * n, 0.0);
    gemm_tn(kk, n, out_c, weight.v.data(), dy.data.data(), dcol.data());
    col2im_add(dcol, in_c, k, stride, oh, ow, dx);
    return dx;
}

/*-------------------------------- GroupNorm -------------------------------*/

void GroupNorm::init(const std::string& name, int channels_, int groups_) {
    channels = channels_;
    groups = groups_;
    if (channels % groups != 0) {
        throw std::invalid_argument("GroupNorm: channels must be divisible by groups");
    }
    gamma.name = name + ".gamma";
    beta.name = name + ".beta";
    gamma.init_size(channels);
    beta.init_size(channels);
    std::fill(gamma.v.begin(), gamma.v.end(), 1.0);
}

Tensor GroupNorm::forward(const Tensor& x, Tape& tape) const {
    if (x.c != channels) throw std::invalid_argument(gamma.name + ": channel mismatch");
    const int gs = channels / groups;
    const size_t plane = static_cast<size_t>(x.h) * x.w;
    const size_t n = gs * plane;
    Tensor xhat(x.c, x.h, x.w);
    Tensor inv_std(groups, 1, 1);
    for (int g = 0; g < groups; g++) {
        const size_t base = static_cast<size_t>(g) * gs * plane;
        double mean = 0.0;
        for (size_t i = 0; i < n; i++) mean += x.data[base + i];
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (size_t i = 0; i < n; i++) {
            const double d = x.data[base + i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        const double inv = 1.0 / std::sqrt(var + eps);
        inv_std.data[g] = inv;
        for (size_t i = 0; i < n; i++) xhat.data[base + i] = (x.data[base + i] - mean) * inv;
    }
    Tensor y(x.c, x.h, x.w);
    for (int c = 0; c < x.c; c++) {
        const double gm = gamma.v[c], bt = beta.v[c];
        for (size_t i = 0; i < plane; i++) {
            y.data[c * plane + i] = gm * xhat.data[c * plane + i] + bt;
        }
    }
    tape.push(xhat);
    tape.push(inv_std);
    return y;
}

Tensor GroupNorm::backward(const Tensor& dy, Tape& tape, bool train) {
    const Tensor inv_std = tape.pop();
    const Tensor xhat = tape.pop();
    const int gs = channels / groups;
    const size_t plane = static_cast<size_t>(dy.h) * dy.w;
    const size_t n = gs * plane;

    if (train) {
        for (int c = 0; c < channels; c++) {
            double dg = 0.0, db = 0.0;
            for (size_t i = 0; i < plane; i++) {
                dg += dy.data[c * plane + i] * xhat.data[c * plane + i];
                db += dy.data[c * plane + i];
            }
            gamma.g[c] += dg;
            beta.g[c] += db;
        }
    }

    Tensor dx(dy.c, dy.h, dy.w);
    for (int g = 0; g < groups; g++) {
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (int c = g * gs; c < (g + 1) * gs; c++) {
            const double gm = gamma.v[c];
            for (size_t i = 0; i < plane; i++) {
                const double dxh = dy.data[c * plane + i] * gm;
                sum_dxhat += dxh;
                sum_dxhat_xhat += dxh * xhat.data[c * plane + i];
            }
        }
        const double mean_dxhat = sum_dxhat / static_cast<double>(n);
        const double mean_dxhat_xhat = sum_dxhat_xhat / static_cast<double>(n);
        const double inv = inv_std.data[g];
        for (int c = g * gs; c < (g + 1) * gs; c++) {
            const double gm = gamma.v[c];
            for (size_t i = 0; i < plane; i++) {
                const double dxh = dy.data[c * plane + i] * gm;
                dx.data[c * plane + i] =
                    inv * (dxh - mean_dxhat - xhat.data[c * plane + i] * mean_dxhat_xhat);
            }
        }
    }
    return dx;
}

/*---------------------------------- SiLU ----------------------------------*/

Tensor silu(const Tensor& x, Tape& tape) {
    Tensor y(x.c, x.h, x.w);
    for (size_t i = 0; i < x.size(); i++) y.data[i] = x.data[i] * sigmoid(x.data[i]);
    tape.push(x);
    return y;
}

Tensor silu_backward(const Tensor& dy, Tape& tape) {
    const Tensor x = tape.pop();
    Tensor dx(dy.c, dy.h, dy.w);
    for (size_t i = 0; i < dy.size(); i++) {
        const double s = sigmoid(x.data[i]);
        dx.data[i] = dy.data[i] * (s + x.data[i] * s * (1.0 - s));
    }
    return dx;
}

/*--------------------------------- Linear ---------------------------------*/

void Linear::init(const std::string& name, int in_dim_, int out_dim_, Rng& rng) {
    in_dim = in_dim_;
    out_dim = out_dim_;
    weight.name = name + ".weight";
    bias.name = name + ".bias";
    weight.init_size(static_cast<size_t>(out_dim) * in_dim);
    bias.init_size(out_dim);
    const double std = std::sqrt(2.0 / in_dim);
    for (double& w : weight.v) w = rng.normal() * std;
}

std::vector<double> Linear::forward(const std::vector<double>& x, Tape& tape) const {
    if (static_cast<int>(x.size()) != in_dim) {
        throw std::invalid_argument(weight.name + ": input dim mismatch");
    }
    std::vector<double> y(out_dim);
    for (int o = 0; o < out_dim; o++) {
        double acc = bias.v[o];
        const double* wr = weight.v.data() + static_cast<size_t>(o) * in_dim;
        for (int i = 0; i < in_dim; i++) acc += wr[i] * x[i];
        y[o] = acc;
    }
    Tensor cache(in_dim, 1, 1);
    cache.data = x;
    tape.push(std::move(cache));
    return y;
}

std::vector<double> Linear::backward(const std::vector<double>& dy, Tape& tape, bool train) {
    const Tensor cache = tape.pop();
    const std::vector<double>& x = cache.data;
    if (train) {
        for (int o = 0; o < out_dim; o++) {
            double* wg = weight.g.data() + static_cast<size_t>(o) * in_dim;
            for (int i = 0; i < in_dim; i++) wg[i] += dy[o] * x[i];
            bias.g[o] += dy[o];
        }
    }
    std::vector<double> dx(in_dim, 0.0);
    for (int o = 0; o < out_dim; o++) {
        const double* wr = weight.v.data() + static_cast<size_t>(o) * in_dim;
        for (int i = 0; i < in_dim; i++) dx[i] += wr[i] * dy[o];
    }
    return dx;
}

/*-------------------------------- Embedding -------------------------------*/

void Embedding::init(const std::string& name, int rows_, int dim_, Rng& rng, double scale) {
    rows = rows_;
    dim = dim_;
    table.name = name;
    table.init_size(static_cast<size_t>(rows) * dim);
    for (double& w : table.v) w = rng.normal() * scale;
}

std::vector<double> Embedding::forward(int idx) const {
    if (idx < 0 || idx >= rows) throw std::invalid_argument(table.name + ": index out of range");
    const double* row = table.v.data() + static_cast<size_t>(idx) * dim;
    return std::vector<double>(row, row + dim);
}

void Embedding::backward(const std::vector<double>& dy, int idx, bool train) {
    if (!train) return;
    double* row = table.g.data() + static_cast<size_t>(idx) * dim;
    for (int i = 0; i < dim; i++) row[i] += dy[i];
}

/*------------------------------- resampling -------------------------------*/

Tensor avgpool2(const Tensor& x) {
    if (x.h % 2 != 0 || x.w % 2 != 0) throw std::invalid_argument("avgpool2: odd dims");
    Tensor y(x.c, x.h / 2, x.w / 2);
    for (int c = 0; c < x.c; c++) {
        for (int oy = 0; oy < y.h; oy++) {
            for (int ox = 0; ox < y.w; ox++) {
                y.at(c, oy, ox) = 0.25 * (x.at(c, 2 * oy, 2 * ox) + x.at(c, 2 * oy, 2 * ox + 1) +
                                          x.at(c, 2 * oy + 1, 2 * ox) +
                                          x.at(c, 2 * oy + 1, 2 * ox + 1));
            }
        }
    }
    return y;
}

Tensor avgpool2_backward(const Tensor& dy) {
    Tensor dx(dy.c, dy.h * 2, dy.w * 2);
    for (int c = 0; c < dy.c; c++) {
        for (int oy = 0; oy < dy.h; oy++) {
            for (int ox = 0; ox < dy.w; ox++) {
                const double v = 0.25 * dy.at(c, oy, ox);
                dx.at(c, 2 * oy, 2 * ox) = v;
                dx.at(c, 2 * oy, 2 * ox + 1) = v;
                dx.at(c, 2 * oy + 1, 2 * ox) = v;
                dx.at(c, 2 * oy + 1, 2 * ox + 1) = v;
            }
        }
    }
    return dx;
}

Tensor upsample2(const Tensor& x) {
    Tensor y(x.c, x.h * 2, x.w * 2);
    for (int c = 0; c < x.c; c++) {
        for (int oy = 0; oy < y.h; oy++) {
            for (int ox = 0; ox < y.w; ox++) {
                y.at(c, oy, ox) = x.at(c, oy / 2, ox / 2);
            }
        }
    }
    return y;
}

Tensor upsample2_backward(const Tensor& dy) {
    if (dy.h % 2 != 0 || dy.w % 2 != 0) throw std::invalid_argument("upsample2_backward: odd dims");
    Tensor dx(dy.c, dy.h / 2, dy.w / 2);
    for (int c = 0; c < dy.c; c++) {
        for (int oy = 0; oy < dy.h; oy++) {
            for (int ox = 0; ox < dy.w; ox++) {
                dx.at(c, oy / 2, ox / 2) += dy.at(c, oy, ox);
            }
        }
    }
    return dx;
}

/*---------------------------------- AdamW ---------------------------------*/

void AdamW::step(const std::vector<Param*>& params) {
    if (m.empty()) {
        m.resize(params.size());
        v.resize(params.size());
        for (size_t p = 0; p < params.size(); p++) {
            m[p].assign(params[p]->size(), 0.0);
            v[p].assign(params[p]->size(), 0.0);
        }
    }
    step_count++;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    for (size_t p = 0; p < params.size(); p++) {
        Param& prm = *params[p];
        for (size_t i = 0; i < prm.size(); i++) {
            const double g = prm.g[i];
            m[p][i] = beta1 * m[p][i] + (1.0 - beta1) * g;
            v[p][i] = beta2 * v[p][i] + (1.0 - beta2) * g * g;
            const double mh = m[p][i] / bc1;
            const double vh = v[p][i] / bc2;
            prm.v[i] -= lr * (mh / (std::sqrt(vh) + eps) + weight_decay * prm.v[i]);
        }
    }
}

void AdamW::zero_grad(const std::vector<Param*>& params) {
    for (Param* p : params) std::fill(p->g.begin(), p->g.end(), 0.0);
}

size_t param_count(const std::vector<Param*>& params) {
    size_t n = 0;
    for (const Param* p : params) n += p->size();
    return n;
}

}  // namespace ldc::nn

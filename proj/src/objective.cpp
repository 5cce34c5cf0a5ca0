#include "ldc/objective.hpp"

#include <array>
#include <cmath>

namespace ldc {

namespace {

// 3x3 kernels, applied as correlation
constexpr std::array<double, 9> kSobelX = {-1, 0, 1, -2, 0, 2, -1, 0, 1};
constexpr std::array<double, 9> kSobelY = {-1, -2, -1, 0, 0, 0, 1, 2, 1};
constexpr std::array<double, 9> kLaplace = {0, 1, 0, 1, -4, 1, 0, 1, 0};

inline int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

void correlate3x3(const Tensor& z, int ci, const std::array<double, 9>& k, Tensor& out, int co) {
    const int h = z.h, w = z.w;
    for (int y = 0; y < h; y++) {
        for (int x = 0; x < w; x++) {
            double acc = 0.0;
            for (int i = 0; i < 3; i++) {
                const int sy = clampi(y + i - 1, 0, h - 1);
                for (int j = 0; j < 3; j++) {
                    acc += k[i * 3 + j] * z.at(ci, sy, clampi(x + j - 1, 0, w - 1));
                }
            }
            out.at(co, y, x) = acc;
        }
    }
}

// adjoint of correlate3x3 with replicate padding: scatter-add through clamps
void correlate3x3_adjoint(const Tensor& g, int co, const std::array<double, 9>& k, Tensor& dz,
                          int ci) {
    const int h = g.h, w = g.w;
    for (int y = 0; y < h; y++) {
        for (int x = 0; x < w; x++) {
            const double gv = g.at(co, y, x);
            if (gv == 0.0) continue;
            for (int i = 0; i < 3; i++) {
                const int sy = clampi(y + i - 1, 0, h - 1);
                for (int j = 0; j < 3; j++) {
                    dz.at(ci, sy, clampi(x + j - 1, 0, w - 1)) += k[i * 3 + j] * gv;
                }
            }
        }
    }
}

void check_filter_input(const Tensor& z) {
    if (z.h < 3 || z.w < 3) {
        throw std::invalid_argument("latent_filter: spatial dims must be >= 3");
    }
}

void check_latent_mask(const Tensor& z, const Tensor& mask) {
    if (mask.c != 1 || mask.h != z.h || mask.w != z.w) {
        throw std::invalid_argument("loss_sim: mask must be (1," + std::to_string(z.h) + "," +
                                    std::to_string(z.w) + "), got " + mask.shape_str());
    }
}

}  // namespace

FilterKind filter_kind_from_string(const std::string& s) {
    if (s == "sobel") return FilterKind::sobel;
    if (s == "laplace") return FilterKind::laplace;
    throw std::invalid_argument("unknown filter kind: " + s);
}

std::string filter_kind_to_string(FilterKind kind) {
    return kind == FilterKind::sobel ? "sobel" : "laplace";
}

double loss_diff(const Tensor& eps, const Tensor& eps_hat) {
    check_same_shape(eps, eps_hat, "loss_diff");
    double acc = 0.0;
    for (size_t i = 0; i < eps.size(); i++) {
        const double d = eps.data[i] - eps_hat.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(eps.size());
}

Tensor loss_diff_grad(const Tensor& eps, const Tensor& eps_hat) {
    check_same_shape(eps, eps_hat, "loss_diff_grad");
    Tensor g(eps.c, eps.h, eps.w);
    const double scale = 2.0 / static_cast<double>(eps.size());
    for (size_t i = 0; i < eps.size(); i++) {
        g.data[i] = scale * (eps_hat.data[i] - eps.data[i]);
    }
    return g;
}

Tensor latent_filter(const Tensor& z, FilterKind kind) {
    check_filter_input(z);
    if (kind == FilterKind::sobel) {
        Tensor out(2 * z.c, z.h, z.w);
        for (int ci = 0; ci < z.c; ci++) {
            correlate3x3(z, ci, kSobelX, out, 2 * ci);
            correlate3x3(z, ci, kSobelY, out, 2 * ci + 1);
        }
        return out;
    }
    Tensor out(z.c, z.h, z.w);
    for (int ci = 0; ci < z.c; ci++) {
        correlate3x3(z, ci, kLaplace, out, ci);
    }
    return out;
}

double loss_sim(const Tensor& z0, const Tensor& z0_hat, const Tensor& latent_mask,
                FilterKind kind) {
    check_same_shape(z0, z0_hat, "loss_sim");
    check_latent_mask(z0, latent_mask);
    const double mask_ones = latent_mask.sum();
    if (mask_ones == 0.0) return 0.0;

    const Tensor fa = latent_filter(z0, kind);
    const Tensor fb = latent_filter(z0_hat, kind);
    double acc = 0.0;
    for (int co = 0; co < fa.c; co++) {
        for (int y = 0; y < fa.h; y++) {
            for (int x = 0; x < fa.w; x++) {
                if (latent_mask.at(0, y, x) == 0.0) continue;
                const double d = fa.at(co, y, x) - fb.at(co, y, x);
                acc += d * d;
            }
        }
    }
    return acc / (static_cast<double>(fa.c) * mask_ones);
}

double loss_sim(const Tensor& z0, const Tensor& z0_hat, const RoiMask& mask, FilterKind kind) {
    auto levels = downsample_mask(mask, {{z0.h, z0.w}});
    return loss_sim(z0, z0_hat, levels[0], kind);
}

Tensor loss_sim_grad(const Tensor& z0, const Tensor& z0_hat, const Tensor& latent_mask,
                     FilterKind kind) {
    check_same_shape(z0, z0_hat, "loss_sim_grad");
    check_latent_mask(z0, latent_mask);
    Tensor dz(z0.c, z0.h, z0.w);
    const double mask_ones = latent_mask.sum();
    if (mask_ones == 0.0) return dz;

    const Tensor fa = latent_filter(z0, kind);
    const Tensor fb = latent_filter(z0_hat, kind);
    const double scale = 2.0 / (static_cast<double>(fa.c) * mask_ones);
    Tensor g(fa.c, fa.h, fa.w);
    for (int co = 0; co < fa.c; co++) {
        for (int y = 0; y < fa.h; y++) {
            for (int x = 0; x < fa.w; x++) {
                if (latent_mask.at(0, y, x) == 0.0) continue;
                g.at(co, y, x) = scale * (fb.at(co, y, x) - fa.at(co, y, x));
            }
        }
    }
    if (kind == FilterKind::sobel) {
        for (int ci = 0; ci < z0.c; ci++) {
            correlate3x3_adjoint(g, 2 * ci, kSobelX, dz, ci);
            correlate3x3_adjoint(g, 2 * ci + 1, kSobelY, dz, ci);
        }
    } else {
        for (int ci = 0; ci < z0.c; ci++) {
            correlate3x3_adjoint(g, ci, kLaplace, dz, ci);
        }
    }
    return dz;
}

double loss_total(double l_diff, double l_sim, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("loss_total: lambda must be >= 0");
    return l_diff + lambda * l_sim;
}

LossReport make_loss_report(double l_diff, double l_sim, double lambda) {
    LossReport r;
    r.l_diff = l_diff;
    r.l_sim = l_sim;
    r.lambda = lambda;
    r.l_total = loss_total(l_diff, l_sim, lambda);
    if (!std::isfinite(r.l_total)) {
        throw std::runtime_error("loss report: non-finite loss");
    }
    return r;
}

}  // namespace ldc

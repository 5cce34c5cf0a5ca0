#include <cmath>
#include <functional>

#include "doctest.h"
#include "ldc/nn.hpp"

using namespace ldc;
using namespace ldc::nn;

namespace {

Tensor randn(Rng& rng, int c, int h, int w) {
    Tensor t(c, h, w);
    for (double& v : t.data) v = rng.normal();
    return t;
}

double sum_sq(const Tensor& t) {
    double s = 0.0;
    for (double v : t.data) s += v * v;
    return s;
}

// d(sum_sq)/dy
Tensor sum_sq_grad(const Tensor& t) {
    Tensor g(t.c, t.h, t.w);
    for (size_t i = 0; i < t.size(); i++) g.data[i] = 2.0 * t.data[i];
    return g;
}

// relative-error finite difference check over every element of a parameter
void check_param_grads(Param& p, const std::function<double()>& loss, const std::vector<double>& analytic) {
    const double h = 1e-6;
    for (size_t i = 0; i < p.size(); i++) {
        const double keep = p.v[i];
        p.v[i] = keep + h;
        const double lp = loss();
        p.v[i] = keep - h;
        const double lm = loss();
        p.v[i] = keep;
        const double fd = (lp - lm) / (2 * h);
        REQUIRE(std::fabs(analytic[i] - fd) / std::max(std::fabs(fd), 1e-7) <= 1e-5);
    }
}

}  // namespace

TEST_CASE("gemm variants against hand products") {
    // A = [[1,2],[3,4]], B = [[5,6],[7,8]]
    std::vector<double> a = {1, 2, 3, 4}, b = {5, 6, 7, 8};
    std::vector<double> c(4, 0.0);
    gemm_nn(2, 2, 2, a.data(), b.data(), c.data());
    CHECK(c == std::vector<double>{19, 22, 43, 50});

    std::fill(c.begin(), c.end(), 0.0);
    gemm_nt(2, 2, 2, a.data(), b.data(), c.data());  // A * B^T
    CHECK(c == std::vector<double>{17, 23, 39, 53});

    std::fill(c.begin(), c.end(), 0.0);
    gemm_tn(2, 2, 2, a.data(), b.data(), c.data());  // A^T * B
    CHECK(c == std::vector<double>{26, 30, 38, 44});
}

TEST_CASE("conv2d forward matches a direct loop") {
    Rng rng(1);
    Conv2d conv;
    conv.init("t", 2, 3, 3, 1, rng);
    Tensor x = randn(rng, 2, 5, 5);
    Tape tape;
    Tensor y = conv.forward(x, tape);
    REQUIRE(y.c == 3);
    REQUIRE(y.h == 5);
    REQUIRE(y.w == 5);
    for (int oc = 0; oc < 3; oc++) {
        for (int oy = 0; oy < 5; oy++) {
            for (int ox = 0; ox < 5; ox++) {
                double acc = conv.bias.v[oc];
                for (int ic = 0; ic < 2; ic++) {
                    for (int i = 0; i < 3; i++) {
                        for (int j = 0; j < 3; j++) {
                            const int sy = oy + i - 1, sx = ox + j - 1;
                            if (sy < 0 || sy >= 5 || sx < 0 || sx >= 5) continue;
                            acc += conv.weight.v[((oc * 2 + ic) * 3 + i) * 3 + j] * x.at(ic, sy, sx);
                        }
                    }
                }
                REQUIRE(y.at(oc, oy, ox) == doctest::Approx(acc).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("strided conv halves even dims") {
    Rng rng(2);
    Conv2d conv;
    conv.init("t", 1, 4, 3, 2, rng);
    Tape tape;
    Tensor y = conv.forward(randn(rng, 1, 8, 8), tape);
    CHECK(y.c == 4);
    CHECK(y.h == 4);
    CHECK(y.w == 4);
}

TEST_CASE("conv2d gradients match finite differences") {
    Rng rng(3);
    Conv2d conv;
    conv.init("t", 2, 2, 3, 1, rng);
    Tensor x = randn(rng, 2, 4, 4);

    auto loss = [&] {
        Tape tape;
        return sum_sq(conv.forward(x, tape));
    };

    Tape tape;
    Tensor y = conv.forward(x, tape);
    std::fill(conv.weight.g.begin(), conv.weight.g.end(), 0.0);
    std::fill(conv.bias.g.begin(), conv.bias.g.end(), 0.0);
    Tensor dx = conv.backward(sum_sq_grad(y), tape, true);

    check_param_grads(conv.weight, loss, conv.weight.g);
    check_param_grads(conv.bias, loss, conv.bias.g);

    const double h = 1e-6;
    for (size_t i = 0; i < x.size(); i++) {
        const double keep = x.data[i];
        x.data[i] = keep + h;
        const double lp = loss();
        x.data[i] = keep - h;
        const double lm = loss();
        x.data[i] = keep;
        const double fd = (lp - lm) / (2 * h);
        REQUIRE(std::fabs(dx.data[i] - fd) / std::max(std::fabs(fd), 1e-7) <= 1e-5);
    }
}

TEST_CASE("direct conv paths match the reference loop at image resolution") {
    Rng rng(31);
    for (int stride : {1, 2}) {
        Conv2d conv;
        conv.init("t", 2, 3, 3, stride, rng);
        Tensor x = randn(rng, 2, 16, 16);
        Tape tape;
        Tensor y = conv.forward(x, tape);
        const int os = 16 / stride;
        REQUIRE(y.h == os);
        REQUIRE(y.w == os);
        for (int oc = 0; oc < 3; oc++) {
            for (int oy = 0; oy < os; oy++) {
                for (int ox = 0; ox < os; ox++) {
                    double acc = conv.bias.v[oc];
                    for (int ic = 0; ic < 2; ic++) {
                        for (int i = 0; i < 3; i++) {
                            for (int j = 0; j < 3; j++) {
                                const int sy = oy * stride + i - 1, sx = ox * stride + j - 1;
                                if (sy < 0 || sy >= 16 || sx < 0 || sx >= 16) continue;
                                acc += conv.weight.v[((oc * 2 + ic) * 3 + i) * 3 + j] *
                                       x.at(ic, sy, sx);
                            }
                        }
                    }
                    REQUIRE(y.at(oc, oy, ox) == doctest::Approx(acc).epsilon(1e-12));
                }
            }
        }
    }
}

TEST_CASE("direct conv gradients match finite differences at image resolution") {
    Rng rng(32);
    for (int stride : {1, 2}) {
        Conv2d conv;
        conv.init("t", 2, 2, 3, stride, rng);
        Tensor x = randn(rng, 2, 16, 16);
        auto loss = [&] {
            Tape tape;
            return sum_sq(conv.forward(x, tape));
        };
        Tape tape;
        Tensor y = conv.forward(x, tape);
        std::fill(conv.weight.g.begin(), conv.weight.g.end(), 0.0);
        std::fill(conv.bias.g.begin(), conv.bias.g.end(), 0.0);
        Tensor dx = conv.backward(sum_sq_grad(y), tape, true);
        check_param_grads(conv.weight, loss, conv.weight.g);
        check_param_grads(conv.bias, loss, conv.bias.g);
        const double h = 1e-6;
        Rng pick(33);
        for (int probe = 0; probe < 40; probe++) {
            const size_t i = static_cast<size_t>(pick.uniform_int(static_cast<int>(x.size())));
            const double keep = x.data[i];
            x.data[i] = keep + h;
            const double lp = loss();
            x.data[i] = keep - h;
            const double lm = loss();
            x.data[i] = keep;
            const double fd = (lp - lm) / (2 * h);
            REQUIRE(std::fabs(dx.data[i] - fd) / std::max(std::fabs(fd), 1e-7) <= 1e-5);
        }
    }
}

TEST_CASE("groupnorm normalizes and its gradients check out") {
    Rng rng(4);
    GroupNorm gn;
    gn.init("t", 4, 2);
    // non-trivial affine parameters
    for (size_t i = 0; i < gn.gamma.size(); i++) gn.gamma.v[i] = 0.5 + 0.1 * i;
    for (size_t i = 0; i < gn.beta.size(); i++) gn.beta.v[i] = 0.05 * i;
    Tensor x = randn(rng, 4, 3, 3);

    auto loss = [&] {
        Tape tape;
        return sum_sq(gn.forward(x, tape));
    };

    Tape tape;
    Tensor y = gn.forward(x, tape);
    std::fill(gn.gamma.g.begin(), gn.gamma.g.end(), 0.0);
    std::fill(gn.beta.g.begin(), gn.beta.g.end(), 0.0);
    Tensor dx = gn.backward(sum_sq_grad(y), tape, true);

    check_param_grads(gn.gamma, loss, gn.gamma.g);
    check_param_grads(gn.beta, loss, gn.beta.g);

    const double h = 1e-6;
    for (size_t i = 0; i < x.size(); i++) {
        const double keep = x.data[i];
        x.data[i] = keep + h;
        const double lp = loss();
        x.data[i] = keep - h;
        const double lm = loss();
        x.data[i] = keep;
        const double fd = (lp - lm) / (2 * h);
        REQUIRE(std::fabs(dx.data[i] - fd) <= 1e-4 * std::max(std::fabs(fd), 1.0));
    }
}

TEST_CASE("silu gradient") {
    Rng rng(5);
    Tensor x = randn(rng, 1, 3, 3);
    auto loss = [&] {
        Tape tape;
        return sum_sq(silu(x, tape));
    };
    Tape tape;
    Tensor y = silu(x, tape);
    Tensor dx = silu_backward(sum_sq_grad(y), tape);
    const double h = 1e-6;
    for (size_t i = 0; i < x.size(); i++) {
        const double keep = x.data[i];
        x.data[i] = keep + h;
        const double lp = loss();
        x.data[i] = keep - h;
        const double lm = loss();
        x.data[i] = keep;
        REQUIRE(dx.data[i] == doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-5));
    }
}

TEST_CASE("linear and embedding gradients") {
    Rng rng(6);
    Linear lin;
    lin.init("t", 3, 2, rng);
    std::vector<double> x = {0.3, -0.7, 1.1};

    auto loss = [&] {
        Tape tape;
        auto y = lin.forward(x, tape);
        return y[0] * y[0] + y[1] * y[1];
    };
    Tape tape;
    auto y = lin.forward(x, tape);
    std::fill(lin.weight.g.begin(), lin.weight.g.end(), 0.0);
    std::fill(lin.bias.g.begin(), lin.bias.g.end(), 0.0);
    auto dx = lin.backward({2 * y[0], 2 * y[1]}, tape, true);
    check_param_grads(lin.weight, loss, lin.weight.g);
    check_param_grads(lin.bias, loss, lin.bias.g);

    const double h = 1e-6;
    for (size_t i = 0; i < x.size(); i++) {
        const double keep = x[i];
        x[i] = keep + h;
        const double lp = loss();
        x[i] = keep - h;
        const double lm = loss();
        x[i] = keep;
        REQUIRE(dx[i] == doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-5));
    }

    Embedding emb;
    emb.init("e", 4, 3, rng);
    auto row = emb.forward(2);
    CHECK(row.size() == 3);
    CHECK_THROWS_AS(emb.forward(4), std::invalid_argument);
    std::fill(emb.table.g.begin(), emb.table.g.end(), 0.0);
    emb.backward({1.0, 2.0, 3.0}, 2, true);
    CHECK(emb.table.g[2 * 3 + 1] == 2.0);
    CHECK(emb.table.g[0] == 0.0);
}

TEST_CASE("pool and upsample adjointness") {
    Rng rng(7);
    Tensor x = randn(rng, 2, 4, 4);
    Tensor y = randn(rng, 2, 2, 2);
    // <pool(x), y> == <x, pool^T(y)>
    Tensor px = avgpool2(x);
    Tensor pty = avgpool2_backward(y);
    double lhs = 0.0, rhs = 0.0;
    for (size_t i = 0; i < px.size(); i++) lhs += px.data[i] * y.data[i];
    for (size_t i = 0; i < x.size(); i++) rhs += x.data[i] * pty.data[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));

    Tensor uy = upsample2(y);
    Tensor uty = upsample2_backward(x);
    double lhs2 = 0.0, rhs2 = 0.0;
    for (size_t i = 0; i < uy.size(); i++) lhs2 += uy.data[i] * x.data[i];
    for (size_t i = 0; i < y.size(); i++) rhs2 += y.data[i] * uty.data[i];
    CHECK(lhs2 == doctest::Approx(rhs2).epsilon(1e-12));
}

TEST_CASE("adamw step matches the update formula") {
    Param p;
    p.init_size(2);
    p.v = {1.0, -2.0};
    p.g = {0.5, -0.25};
    AdamW opt;
    opt.lr = 0.01;
    opt.weight_decay = 0.1;
    std::vector<Param*> params = {&p};
    opt.step(params);
    for (int i = 0; i < 2; i++) {
        const double g = i == 0 ? 0.5 : -0.25;
        const double w0 = i == 0 ? 1.0 : -2.0;
        const double m = 0.1 * g, v = 0.001 * g * g;
        const double mh = m / 0.1, vh = v / 0.001;
        const double want = w0 - 0.01 * (mh / (std::sqrt(vh) + 1e-8) + 0.1 * w0);
        REQUIRE(p.v[i] == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("param_count sums parameter sizes") {
    Rng rng(8);
    Conv2d conv;
    conv.init("t", 2, 3, 3, 1, rng);
    std::vector<Param*> params;
    conv.collect(params);
    CHECK(param_count(params) == 2 * 3 * 9 + 3);
}

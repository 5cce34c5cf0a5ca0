#include <cmath>

#include "doctest.h"
#include "ldc/adapter.hpp"
#include "ldc/schedule.hpp"

using namespace ldc;

namespace {

Tensor randn(Rng& rng, int c, int h, int w) {
    Tensor t(c, h, w);
    for (double& v : t.data) v = rng.normal();
    return t;
}

// single-entry schedule with a hand-set alpha_bar, for degenerate cases
NoiseSchedule fixed_alpha_bar(double ab) {
    NoiseSchedule s;
    s.num_steps = 1;
    s.betas = {0.1};
    s.alphas = {0.9};
    s.alpha_bars = {ab};
    return s;
}

}  // namespace

TEST_CASE("build_schedule single step") {
    NoiseSchedule s = build_schedule(1, 0.1, 0.1);
    CHECK(s.betas.size() == 1);
    CHECK(s.betas[0] == 0.1);
    CHECK(s.alpha_bars[0] == doctest::Approx(0.9).epsilon(1e-15));
}

TEST_CASE("build_schedule two steps matches hand product") {
    NoiseSchedule s = build_schedule(2, 0.1, 0.3);
    CHECK(s.alpha_bars[0] == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(s.alpha_bars[1] == doctest::Approx(0.63).epsilon(1e-15));  // 0.9 * 0.7
}

TEST_CASE("build_schedule rejects invalid inputs") {
    CHECK_THROWS_AS(build_schedule(0, 0.1, 0.2), std::invalid_argument);
    CHECK_THROWS_AS(build_schedule(10, 0.0, 0.2), std::invalid_argument);
    CHECK_THROWS_AS(build_schedule(10, 0.1, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(build_schedule(10, 0.3, 0.1), std::invalid_argument);
}

TEST_CASE("alpha_bar is the running product and strictly decreases") {
    NoiseSchedule s = build_schedule(1000, 1e-4, 0.02);
    long double running = 1.0L;
    for (int t = 0; t < s.num_steps; t++) {
        running *= static_cast<long double>(s.alphas[t]);
        const double rel = std::fabs(s.alpha_bars[t] - static_cast<double>(running)) /
                           static_cast<double>(running);
        REQUIRE(rel <= 1e-12);
        REQUIRE(s.alpha_bars[t] > 0.0);
        REQUIRE(s.alpha_bars[t] <= 1.0);
        if (t > 0) REQUIRE(s.alpha_bars[t] < s.alpha_bars[t - 1]);
    }
}

TEST_CASE("snr strictly decreases in t") {
    NoiseSchedule s = build_schedule(100, 1e-4, 0.2);
    for (int t = 1; t < s.num_steps; t++) {
        REQUIRE(s.snr(t) < s.snr(t - 1));
    }
}

TEST_CASE("forward_diffuse degenerate alpha_bar = 1 returns z0") {
    NoiseSchedule s = fixed_alpha_bar(1.0);
    Rng rng(1);
    Tensor z0 = randn(rng, 2, 3, 3);
    Tensor eps = randn(rng, 2, 3, 3);
    Tensor z_t = forward_diffuse(z0, 0, eps, s);
    CHECK(z_t.max_abs_diff(z0) == 0.0);
}

TEST_CASE("forward_diffuse with zero noise is a pure scaling") {
    NoiseSchedule s = fixed_alpha_bar(0.49);
    Tensor z0(1, 2, 2, 2.0);
    Tensor eps(1, 2, 2, 0.0);
    Tensor z_t = forward_diffuse(z0, 0, eps, s);
    for (double v : z_t.data) CHECK(v == doctest::Approx(0.7 * 2.0).epsilon(1e-15));
}

TEST_CASE("forward_diffuse scalar example") {
    // alpha_bar = 0.25: 0.5 * 1 + sqrt(0.75) * 1
    NoiseSchedule s = fixed_alpha_bar(0.25);
    Tensor z0(1, 1, 1, 1.0), eps(1, 1, 1, 1.0);
    Tensor z_t = forward_diffuse(z0, 0, eps, s);
    CHECK(z_t.data[0] == doctest::Approx(0.5 + std::sqrt(0.75)).epsilon(1e-15));
    CHECK(z_t.data[0] == doctest::Approx(1.36603).epsilon(1e-5));
}

TEST_CASE("predict_z0 inverts the scalar example") {
    NoiseSchedule s = fixed_alpha_bar(0.25);
    Tensor z_t(1, 1, 1, 0.5 + std::sqrt(0.75)), eps(1, 1, 1, 1.0);
    Tensor z0 = predict_z0(z_t, eps, 0, s);
    CHECK(z0.data[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("predict_z0 with zero eps_hat rescales z_t") {
    NoiseSchedule s = fixed_alpha_bar(0.25);
    Tensor z_t(1, 1, 1, 3.0), eps(1, 1, 1, 0.0);
    CHECK(predict_z0(z_t, eps, 0, s).data[0] == doctest::Approx(6.0).epsilon(1e-15));
}

TEST_CASE("round trip recovers z0 across the full schedule") {
    NoiseSchedule s = build_schedule(1000, 1e-4, 0.02);
    Rng rng(5);
    for (int i = 0; i < 50; i++) {
        const int t = rng.uniform_int(s.num_steps);
        Tensor z0 = randn(rng, 4, 8, 8);
        Tensor eps = randn(rng, 4, 8, 8);
        Tensor back = predict_z0(forward_diffuse(z0, t, eps, s), eps, t, s);
        REQUIRE(back.max_abs_diff(z0) <= 1e-10);
    }
}

TEST_CASE("predict_z0 rejects a near-singular inversion") {
    NoiseSchedule s = fixed_alpha_bar(1e-17);  // sqrt below the 1e-8 floor
    Tensor z_t(1, 1, 1, 1.0), eps(1, 1, 1, 0.0);
    CHECK_THROWS_AS(predict_z0(z_t, eps, 0, s), std::invalid_argument);
}

TEST_CASE("schedule ops validate shapes and step range") {
    NoiseSchedule s = build_schedule(10, 1e-4, 0.02);
    Tensor a(1, 2, 2), b(1, 2, 3);
    CHECK_THROWS_AS(forward_diffuse(a, 0, b, s), std::invalid_argument);
    CHECK_THROWS_AS(forward_diffuse(a, 10, a, s), std::invalid_argument);
    CHECK_THROWS_AS(forward_diffuse(a, -1, a, s), std::invalid_argument);
    CHECK_THROWS_AS(predict_z0(a, b, 0, s), std::invalid_argument);
    CHECK_THROWS_AS(predict_z0(a, a, 99, s), std::invalid_argument);
}

TEST_CASE("variance law holds under Monte Carlo") {
    NoiseSchedule s = build_schedule(100, 1e-4, 0.2);
    Rng rng(11);
    for (int t : {5, 50, 95}) {
        const double ab = s.alpha_bars[t];
        double sum = 0.0, sq = 0.0;
        long n = 0;
        for (int draw = 0; draw < 4000; draw++) {
            Tensor z0(1, 4, 4);
            for (double& v : z0.data) v = rng.uniform(-1.0, 1.0);  // var 1/3
            Tensor eps = randn(rng, 1, 4, 4);
            Tensor z_t = forward_diffuse(z0, t, eps, s);
            for (double v : z_t.data) {
                sum += v;
                sq += v * v;
                n++;
            }
        }
        const double mean = sum / n;
        const double var = sq / n - mean * mean;
        const double expected = ab / 3.0 + (1.0 - ab);
        CHECK(std::fabs(var - expected) / expected < 0.03);
    }
}

TEST_CASE("ancestral sampling is seed-deterministic with the right shape") {
    NoiseSchedule s = build_schedule(20, 1e-4, 0.3);
    auto denoiser = [](const Tensor& z, int, const std::optional<int>&, const FeaturePyramid*) {
        Tensor eps(z.c, z.h, z.w);
        for (size_t i = 0; i < z.size(); i++) eps.data[i] = 0.5 * z.data[i];
        return eps;
    };
    Tensor a = ancestral_sample(denoiser, 4, 8, 8, s, 99);
    Tensor b = ancestral_sample(denoiser, 4, 8, 8, s, 99);
    CHECK(a.c == 4);
    CHECK(a.h == 8);
    CHECK(a.w == 8);
    CHECK(a.max_abs_diff(b) == 0.0);
    Tensor c = ancestral_sample(denoiser, 4, 8, 8, s, 100);
    CHECK(c.max_abs_diff(a) > 0.0);
}

TEST_CASE("ancestral sampling matches the closed-form Gaussian oracle") {
    // data distribution: scalar z0 ~ N(mu, sigma0^2); the optimal denoiser is
    // the posterior-mean noise estimate, so sampled draws must reproduce the
    // data mean within Monte Carlo error
    const double mu = 0.7, sigma0 = 0.5;
    NoiseSchedule s = build_schedule(100, 1e-4, 0.2);
    auto oracle = [&](const Tensor& z, int t, const std::optional<int>&, const FeaturePyramid*) {
        const double ab = s.alpha_bars[t];
        Tensor eps(z.c, z.h, z.w);
        for (size_t i = 0; i < z.size(); i++) {
            const double post_mean =
                (sigma0 * sigma0 * std::sqrt(ab) * z.data[i] + (1.0 - ab) * mu) /
                (ab * sigma0 * sigma0 + (1.0 - ab));
            eps.data[i] = (z.data[i] - std::sqrt(ab) * post_mean) / std::sqrt(1.0 - ab);
        }
        return eps;
    };
    const int n = 10000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; i++) {
        Tensor draw = ancestral_sample(oracle, 1, 1, 1, s, 1000 + i);
        sum += draw.data[0];
        sq += draw.data[0] * draw.data[0];
    }
    const double mean = sum / n;
    const double stddev = std::sqrt(sq / n - mean * mean);
    const double se = stddev / std::sqrt(static_cast<double>(n));
    CHECK(std::fabs(mean - mu) <= 3.0 * se);
    CHECK(stddev == doctest::Approx(sigma0).epsilon(0.10));
}

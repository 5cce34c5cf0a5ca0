#include <cmath>

#include "doctest.h"
#include "ldc/adapter.hpp"

using namespace ldc;

namespace {

AdapterConfig small_cfg() {
    AdapterConfig cfg;
    cfg.image_size = 64;
    cfg.latent_size = 8;
    cfg.width = 8;
    cfg.depth = 1;
    cfg.level_channels = {8, 16, 32, 64};
    return cfg;
}

Tensor random_edges(Rng& rng, int size, double density = 0.1) {
    Tensor e(1, size, size);
    for (double& v : e.data) v = rng.uniform() < density ? 1.0 : 0.0;
    return e;
}

void randomize(AdapterNet& net, uint64_t seed) {
    Rng rng(seed);
    for (nn::Param* p : net.params()) {
        for (double& v : p->v) v = 0.05 * rng.normal();
    }
}

RoiMask half_plane_mask(int size) {
    Tensor m(1, size, size);
    for (int y = 0; y < size; y++) {
        for (int x = 0; x < size / 2; x++) m.at(0, y, x) = 1.0;
    }
    return RoiMask(std::move(m));
}

std::vector<std::pair<int, int>> level_dims_of(const AdapterNet& net) {
    std::vector<std::pair<int, int>> dims;
    for (const auto& s : net.level_shapes()) dims.emplace_back(s[1], s[2]);
    return dims;
}

}  // namespace

TEST_CASE("adapter produces four encoder-shaped levels") {
    AdapterNet net(small_cfg(), 0);
    Rng rng(1);
    nn::Tape tape;
    FeaturePyramid pyr = net.forward(random_edges(rng, 64), tape);
    const auto shapes = net.level_shapes();
    for (int l = 0; l < 4; l++) {
        CHECK(pyr.levels[l].c == shapes[l][0]);
        CHECK(pyr.levels[l].h == shapes[l][1]);
        CHECK(pyr.levels[l].w == shapes[l][2]);
    }
    CHECK(shapes[0][1] == 8);
    CHECK(shapes[3][1] == 1);
}

TEST_CASE("zero-initialized heads make the initial pyramid a no-op") {
    AdapterNet net(small_cfg(), 7);
    Rng rng(2);
    nn::Tape tape;
    FeaturePyramid pyr = net.forward(random_edges(rng, 64), tape);
    CHECK(pyr.all_zero());
}

TEST_CASE("different edge maps give different level-1 features") {
    AdapterNet net(small_cfg(), 0);
    randomize(net, 3);
    Rng rng(4);
    Tensor a = random_edges(rng, 64), b = random_edges(rng, 64);
    FeaturePyramid pa = adapter_forward(net, a);
    FeaturePyramid pb = adapter_forward(net, b);
    CHECK(pa.levels[0].max_abs_diff(pb.levels[0]) > 0.0);
}

TEST_CASE("adapter validates input dims") {
    AdapterNet net(small_cfg(), 0);
    CHECK_THROWS_AS(adapter_forward(net, Tensor(1, 32, 32)), std::invalid_argument);
    CHECK_THROWS_AS(adapter_forward(net, Tensor(3, 64, 64)), std::invalid_argument);
}

TEST_CASE("mask_features identity, annihilation and half-plane zeroing") {
    AdapterNet net(small_cfg(), 0);
    randomize(net, 5);
    Rng rng(6);
    FeaturePyramid pyr = adapter_forward(net, random_edges(rng, 64));
    const auto dims = level_dims_of(net);

    RoiMask ones(Tensor(1, 64, 64, 1.0));
    ones.build_pyramid(dims);
    FeaturePyramid same = mask_features(pyr, ones);
    for (int l = 0; l < 4; l++) REQUIRE(same.levels[l].max_abs_diff(pyr.levels[l]) == 0.0);

    RoiMask zeros(Tensor(1, 64, 64, 0.0));
    zeros.build_pyramid(dims);
    CHECK(mask_features(pyr, zeros).all_zero());

    RoiMask half = half_plane_mask(64);
    half.build_pyramid(dims);
    FeaturePyramid masked = mask_features(pyr, half);
    for (int l = 0; l < 4; l++) {
        const Tensor& level = masked.levels[l];
        const Tensor& mask_level = half.pyramid[l];
        for (int c = 0; c < level.c; c++) {
            for (int y = 0; y < level.h; y++) {
                for (int x = 0; x < level.w; x++) {
                    if (mask_level.at(0, y, x) == 0.0) REQUIRE(level.at(c, y, x) == 0.0);
                    else REQUIRE(level.at(c, y, x) == pyr.levels[l].at(c, y, x));
                }
            }
        }
    }
}

TEST_CASE("mask_features is idempotent") {
    AdapterNet net(small_cfg(), 0);
    randomize(net, 7);
    Rng rng(8);
    FeaturePyramid pyr = adapter_forward(net, random_edges(rng, 64));
    RoiMask half = half_plane_mask(64);
    half.build_pyramid(level_dims_of(net));
    FeaturePyramid once = mask_features(pyr, half);
    FeaturePyramid twice = mask_features(once, half);
    for (int l = 0; l < 4; l++) REQUIRE(twice.levels[l].max_abs_diff(once.levels[l]) == 0.0);
}

TEST_CASE("mask_features rejects missing or mismatched pyramids") {
    AdapterNet net(small_cfg(), 0);
    Rng rng(9);
    FeaturePyramid pyr = adapter_forward(net, random_edges(rng, 64));
    RoiMask no_pyramid(Tensor(1, 64, 64, 1.0));
    CHECK_THROWS_AS(mask_features(pyr, no_pyramid), std::invalid_argument);
    RoiMask wrong(Tensor(1, 64, 64, 1.0));
    wrong.build_pyramid({{4, 4}, {2, 2}, {1, 1}, {1, 1}});
    CHECK_THROWS_AS(mask_features(pyr, wrong), std::invalid_argument);
}

TEST_CASE("receptive-field locality: far edits leave masked ROI features intact") {
    AdapterNet net(small_cfg(), 0);
    randomize(net, 10);
    // ROI: left 16 columns; edit: far right column
    Tensor roi_data(1, 64, 64);
    for (int y = 0; y < 64; y++) {
        for (int x = 0; x < 16; x++) roi_data.at(0, y, x) = 1.0;
    }
    RoiMask roi(roi_data);
    roi.build_pyramid(level_dims_of(net));

    Rng rng(11);
    Tensor edges = random_edges(rng, 64, 0.15);
    Tensor edited = edges;
    for (int y = 0; y < 64; y++) edited.at(0, y, 63) = 1.0 - edited.at(0, y, 63);

    FeaturePyramid a = mask_features(adapter_forward(net, edges), roi);
    FeaturePyramid b = mask_features(adapter_forward(net, edited), roi);

    bool asserted_any_level = false;
    for (int l = 0; l < 4; l++) {
        const int radius = net.receptive_field_radius(l);
        const int jump = net.level_jump(l);
        // the edit sits at distance 63 - 16 = 47 from the ROI boundary; only
        // levels whose receptive span cannot bridge that gap must be intact
        if (radius + jump >= 47) continue;
        asserted_any_level = true;
        REQUIRE(a.levels[l].max_abs_diff(b.levels[l]) == 0.0);
    }
    CHECK(asserted_any_level);
    // the unmasked pyramid does feel the edit
    FeaturePyramid ua = adapter_forward(net, edges);
    FeaturePyramid ub = adapter_forward(net, edited);
    CHECK(ua.levels[0].max_abs_diff(ub.levels[0]) > 0.0);
}

TEST_CASE("adapter backward matches finite differences") {
    AdapterConfig cfg = small_cfg();
    cfg.width = 4;
    cfg.level_channels = {4, 4, 4, 4};
    AdapterNet net(cfg, 0);
    randomize(net, 12);
    Rng rng(13);
    Tensor edges = random_edges(rng, 64, 0.2);

    auto loss = [&] {
        FeaturePyramid pyr = adapter_forward(net, edges);
        double s = 0.0;
        for (const auto& level : pyr.levels) {
            for (double v : level.data) s += v * v;
        }
        return s;
    };

    nn::Tape tape;
    FeaturePyramid pyr = net.forward(edges, tape);
    FeaturePyramid d;
    for (int l = 0; l < 4; l++) {
        d.levels[l] = Tensor(pyr.levels[l].c, pyr.levels[l].h, pyr.levels[l].w);
        for (size_t i = 0; i < d.levels[l].size(); i++) {
            d.levels[l].data[i] = 2.0 * pyr.levels[l].data[i];
        }
    }
    auto params = net.params();
    nn::AdamW::zero_grad(params);
    net.backward(d, tape, true);

    // probe a spread of parameters in every layer
    const double h = 1e-6;
    Rng pick(14);
    for (nn::Param* p : params) {
        for (int probe = 0; probe < 3; probe++) {
            const size_t i = static_cast<size_t>(pick.uniform_int(static_cast<int>(p->size())));
            const double keep = p->v[i];
            p->v[i] = keep + h;
            const double lp = loss();
            p->v[i] = keep - h;
            const double lm = loss();
            p->v[i] = keep;
            const double fd = (lp - lm) / (2 * h);
            REQUIRE(std::fabs(p->g[i] - fd) <= 1e-4 * std::max(std::fabs(fd), 1.0));
        }
    }
}

TEST_CASE("receptive field radius grows with depth") {
    AdapterNet net(small_cfg(), 0);
    CHECK(net.receptive_field_radius(0) == 16);   // stem + three stride-2 stages + body
    CHECK(net.level_jump(0) == 8);
    CHECK(net.receptive_field_radius(3) > net.receptive_field_radius(0));
    CHECK(net.param_count() > 0);
}

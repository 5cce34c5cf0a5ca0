#include "ldc/adapter.hpp"

namespace ldc {

FeaturePyramid mask_features(const FeaturePyramid& features, const RoiMask& mask) {
    return mask_features(features, mask.pyramid);
}

FeaturePyramid mask_features(const FeaturePyramid& features, const std::vector<Tensor>& pyramid) {
    if (pyramid.size() != 4) {
        throw std::invalid_argument("mask_features: mask pyramid must hold 4 levels");
    }
    FeaturePyramid out;
    for (int i = 0; i < 4; i++) {
        const Tensor& f = features.levels[i];
        const Tensor& m = pyramid[i];
        if (m.h != f.h || m.w != f.w) {
            throw std::invalid_argument("mask_features: level " + std::to_string(i) +
                                        " shape mismatch " + m.shape_str() + " vs " +
                                        f.shape_str());
        }
        Tensor o(f.c, f.h, f.w);
        const size_t plane = static_cast<size_t>(f.h) * f.w;
        for (int c = 0; c < f.c; c++) {
            for (size_t p = 0; p < plane; p++) {
                o.data[c * plane + p] = f.data[c * plane + p] * m.data[p];
            }
        }
        out.levels[i] = std::move(o);
    }
    return out;
}

AdapterNet::AdapterNet(const AdapterConfig& cfg_, uint64_t init_seed) : cfg(cfg_) {
    if (cfg.image_size % cfg.latent_size != 0) {
        throw std::invalid_argument("adapter: latent size must divide image size");
    }
    int factor = cfg.image_size / cfg.latent_size;
    int n_pre = 0;
    while (factor > 1) {
        if (factor % 2 != 0) throw std::invalid_argument("adapter: factor must be a power of 2");
        factor /= 2;
        n_pre++;
    }
    Rng rng(mix_seed(init_seed, 0xada7));
    stem.init("adapter.stem", 1, cfg.width, 3, 1, rng);
    pre_downs.resize(n_pre);
    for (int i = 0; i < n_pre; i++) {
        pre_downs[i].init("adapter.pre" + std::to_string(i), cfg.width, cfg.width, 3, 2, rng);
    }
    for (int l = 0; l < 4; l++) {
        bodies[l].resize(cfg.depth);
        for (int d = 0; d < cfg.depth; d++) {
            bodies[l][d].init("adapter.body" + std::to_string(l) + "_" + std::to_string(d),
                              cfg.width, cfg.width, 3, 1, rng);
        }
        heads[l].init("adapter.head" + std::to_string(l), cfg.width, cfg.level_channels[l], 1, 1,
                      rng, /*zero_init=*/true);
        if (l < 3) {
            downs[l].init("adapter.down" + std::to_string(l), cfg.width, cfg.width, 3, 2, rng);
        }
    }
}

FeaturePyramid AdapterNet::forward(const Tensor& edge_map, nn::Tape& tape) const {
    if (edge_map.c != 1 || edge_map.h != cfg.image_size || edge_map.w != cfg.image_size) {
        throw std::invalid_argument("adapter: edge map must be (1," +
                                    std::to_string(cfg.image_size) + "," +
                                    std::to_string(cfg.image_size) + "), got " +
                                    edge_map.shape_str());
    }
    Tensor h = nn::silu(stem.forward(edge_map, tape), tape);
    for (const auto& p : pre_downs) h = nn::silu(p.forward(h, tape), tape);

    FeaturePyramid pyr;
    for (int l = 0; l < 4; l++) {
        for (const auto& b : bodies[l]) h = nn::silu(b.forward(h, tape), tape);
        pyr.levels[l] = heads[l].forward(h, tape);
        if (l < 3) h = nn::silu(downs[l].forward(h, tape), tape);
    }
    return pyr;
}

void AdapterNet::backward(const FeaturePyramid& d_features, nn::Tape& tape, bool train) {
    Tensor g;
    for (int l = 3; l >= 0; l--) {
        if (l < 3) {
            g = nn::silu_backward(g, tape);
            g = downs[l].backward(g, tape, train);
            Tensor gh = heads[l].backward(d_features.levels[l], tape, train);
            for (size_t i = 0; i < g.size(); i++) g.data[i] += gh.data[i];
        } else {
            g = heads[l].backward(d_features.levels[l], tape, train);
        }
        for (int d = static_cast<int>(bodies[l].size()) - 1; d >= 0; d--) {
            g = nn::silu_backward(g, tape);
            g = bodies[l][d].backward(g, tape, train);
        }
    }
    for (int i = static_cast<int>(pre_downs.size()) - 1; i >= 0; i--) {
        g = nn::silu_backward(g, tape);
        g = pre_downs[i].backward(g, tape, train);
    }
    g = nn::silu_backward(g, tape);
    stem.backward(g, tape, train);
}

std::vector<nn::Param*> AdapterNet::params() {
    std::vector<nn::Param*> out;
    stem.collect(out);
    for (auto& p : pre_downs) p.collect(out);
    for (int l = 0; l < 4; l++) {
        for (auto& b : bodies[l]) b.collect(out);
        heads[l].collect(out);
        if (l < 3) downs[l].collect(out);
    }
    return out;
}

size_t AdapterNet::param_count() { return nn::param_count(params()); }

int AdapterNet::receptive_field_radius(int level) const {
    int radius = 0, jump = 1;
    auto conv = [&](int k, int stride) {
        radius += (k / 2) * jump;
        jump *= stride;
    };
    conv(3, 1);  // stem
    for (size_t i = 0; i < pre_downs.size(); i++) conv(3, 2);
    for (int l = 0; l <= level; l++) {
        for (int d = 0; d < cfg.depth; d++) conv(3, 1);
        // the 1x1 head adds nothing
        if (l < level) conv(3, 2);
    }
    return radius;
}

int AdapterNet::level_jump(int level) const {
    return (cfg.image_size / cfg.latent_size) << level;
}

std::array<std::array<int, 3>, 4> AdapterNet::level_shapes() const {
    std::array<std::array<int, 3>, 4> shapes;
    int s = cfg.latent_size;
    for (int l = 0; l < 4; l++) {
        shapes[l] = {cfg.level_channels[l], s, s};
        s /= 2;
    }
    return shapes;
}

FeaturePyramid adapter_forward(const AdapterNet& adapter, const Tensor& edge_map) {
    nn::Tape tape;
    return adapter.forward(edge_map, tape);
}

}  // namespace ldc

#include "ldc/denoiser.hpp"

#include <cmath>

namespace ldc {

namespace {

int pick_groups(int channels) {
    for (int g : {8, 4, 2}) {
        if (channels % g == 0) return g;
    }
    return 1;
}

std::vector<double> sinusoidal_embedding(int t, int dim) {
    const int half = dim / 2;
    std::vector<double> e(dim);
    for (int i = 0; i < half; i++) {
        const double freq = std::exp(-std::log(10000.0) * i / half);
        e[i] = std::cos(t * freq);
        e[half + i] = std::sin(t * freq);
    }
    return e;
}

std::vector<double> vec_silu(const std::vector<double>& x) {
    std::vector<double> y(x.size());
    for (size_t i = 0; i < x.size(); i++) y[i] = x[i] / (1.0 + std::exp(-x[i]));
    return y;
}

std::vector<double> vec_silu_backward(const std::vector<double>& dy, const std::vector<double>& x) {
    std::vector<double> dx(x.size());
    for (size_t i = 0; i < x.size(); i++) {
        const double s = 1.0 / (1.0 + std::exp(-x[i]));
        dx[i] = dy[i] * (s + x[i] * s * (1.0 - s));
    }
    return dx;
}

}  // namespace

/*--------------------------------- ResBlock -------------------------------*/

void ResBlock::init(const std::string& name, int in_c_, int out_c_, int emb_dim, Rng& rng) {
    in_c = in_c_;
    out_c = out_c_;
    gn1.init(name + ".gn1", in_c, pick_groups(in_c));
    conv1.init(name + ".conv1", in_c, out_c, 3, 1, rng);
    emb_proj.init(name + ".emb", emb_dim, out_c, rng);
    gn2.init(name + ".gn2", out_c, pick_groups(out_c));
    conv2.init(name + ".conv2", out_c, out_c, 3, 1, rng);
    has_skip = in_c != out_c;
    if (has_skip) skip.init(name + ".skip", in_c, out_c, 1, 1, rng);
}

Tensor ResBlock::forward(const Tensor& x, const std::vector<double>& emb_act,
                         nn::Tape& tape) const {
    Tensor h = conv1.forward(nn::silu(gn1.forward(x, tape), tape), tape);
    const std::vector<double> e = emb_proj.forward(emb_act, tape);
    const size_t plane = static_cast<size_t>(h.h) * h.w;
    for (int c = 0; c < h.c; c++) {
        for (size_t p = 0; p < plane; p++) h.data[c * plane + p] += e[c];
    }
    Tensor h2 = conv2.forward(nn::silu(gn2.forward(h, tape), tape), tape);
    if (has_skip) {
        Tensor s = skip.forward(x, tape);
        for (size_t i = 0; i < h2.size(); i++) h2.data[i] += s.data[i];
    } else {
        for (size_t i = 0; i < h2.size(); i++) h2.data[i] += x.data[i];
    }
    return h2;
}

Tensor ResBlock::backward(const Tensor& dy, nn::Tape& tape, bool train,
                          std::vector<double>& demb_act) {
    Tensor dx_skip;
    if (has_skip) {
        dx_skip = skip.backward(dy, tape, train);
    }
    Tensor dh = conv2.backward(dy, tape, train);
    dh = gn2.backward(nn::silu_backward(dh, tape), tape, train);

    // embedding add: channel-wise sum of the incoming gradient
    std::vector<double> de(out_c, 0.0);
    const size_t plane = static_cast<size_t>(dh.h) * dh.w;
    for (int c = 0; c < out_c; c++) {
        double acc = 0.0;
        for (size_t p = 0; p < plane; p++) acc += dh.data[c * plane + p];
        de[c] = acc;
    }
    const std::vector<double> demb = emb_proj.backward(de, tape, train);
    for (size_t i = 0; i < demb.size(); i++) demb_act[i] += demb[i];

    Tensor dx = conv1.backward(dh, tape, train);
    dx = gn1.backward(nn::silu_backward(dx, tape), tape, train);
    if (has_skip) {
        for (size_t i = 0; i < dx.size(); i++) dx.data[i] += dx_skip.data[i];
    } else {
        for (size_t i = 0; i < dx.size(); i++) dx.data[i] += dy.data[i];
    }
    return dx;
}

void ResBlock::collect(std::vector<nn::Param*>& out) {
    gn1.collect(out);
    conv1.collect(out);
    emb_proj.collect(out);
    gn2.collect(out);
    conv2.collect(out);
    if (has_skip) skip.collect(out);
}

/*-------------------------------- DenoiserNet -----------------------------*/

DenoiserNet::DenoiserNet(const DenoiserConfig& cfg_, uint64_t init_seed) : cfg(cfg_) {
    if (cfg.latent_size % 8 != 0) {
        throw std::invalid_argument("denoiser: latent_size must be divisible by 8");
    }
    Rng rng(mix_seed(init_seed, 0xd015e));
    const int ed = cfg.emb_dim();
    time_mlp1.init("time.mlp1", cfg.base_width, ed, rng);
    time_mlp2.init("time.mlp2", ed, ed, rng);
    class_table.init("class_table", cfg.num_classes + 1, ed, rng, 0.1);
    conv_in.init("conv_in", cfg.latent_channels, cfg.level_channels(0), 3, 1, rng);
    int prev = cfg.level_channels(0);
    for (int l = 0; l < 4; l++) {
        enc[l].init("enc" + std::to_string(l), prev, cfg.level_channels(l), ed, rng);
        prev = cfg.level_channels(l);
    }
    mid.init("mid", prev, prev, ed, rng);
    for (int l = 3; l >= 0; l--) {
        const int skip_c = cfg.level_channels(l);
        const int out_c = l > 0 ? cfg.level_channels(l - 1) : cfg.level_channels(0);
        dec[l].init("dec" + std::to_string(l), prev + skip_c, out_c, ed, rng);
        prev = out_c;
    }
    out_gn.init("out_gn", prev, pick_groups(prev));
    conv_out.init("conv_out", prev, cfg.latent_channels, 3, 1, rng, /*zero_init=*/true);
}

std::vector<double> DenoiserNet::embed_class(const std::optional<int>& class_id) const {
    if (class_id && (*class_id < 0 || *class_id >= cfg.num_classes)) {
        throw std::invalid_argument("embed_class: class id out of range");
    }
    return class_table.forward(class_id ? *class_id : cfg.null_class());
}

Tensor DenoiserNet::forward(const Tensor& z_t, int t, const std::optional<int>& class_id,
                            const FeaturePyramid* features, nn::Tape& tape) const {
    if (z_t.c != cfg.latent_channels || z_t.h != cfg.latent_size || z_t.w != cfg.latent_size) {
        throw std::invalid_argument("denoise: latent shape mismatch, got " + z_t.shape_str());
    }
    if (features) {
        const auto shapes = encoder_level_shapes();
        for (int l = 0; l < 4; l++) {
            const Tensor& f = features->levels[l];
            if (f.c != shapes[l][0] || f.h != shapes[l][1] || f.w != shapes[l][2]) {
                throw std::invalid_argument("denoise: feature level " + std::to_string(l) +
                                            " shape mismatch, got " + f.shape_str());
            }
        }
    }

    // conditioning vector: time MLP plus class embedding, activated once
    const std::vector<double> temb0 = sinusoidal_embedding(t, cfg.base_width);
    std::vector<double> e1 = time_mlp1.forward(temb0, tape);
    const std::vector<double> e1a = vec_silu(e1);
    {
        Tensor c(static_cast<int>(e1.size()), 1, 1);
        c.data = e1;
        tape.push(std::move(c));
    }
    std::vector<double> emb = time_mlp2.forward(e1a, tape);
    const std::vector<double> cemb = embed_class(class_id);
    for (size_t i = 0; i < emb.size(); i++) emb[i] += cemb[i];
    const std::vector<double> emb_act = vec_silu(emb);
    {
        Tensor c(static_cast<int>(emb.size()), 1, 1);
        c.data = emb;
        tape.push(std::move(c));
        Tensor idx(1, 1, 1);
        idx.data[0] = class_id ? static_cast<double>(*class_id)
                               : static_cast<double>(cfg.null_class());
        tape.push(std::move(idx));
    }

    Tensor x = conv_in.forward(z_t, tape);
    std::array<Tensor, 4> skips;
    for (int l = 0; l < 4; l++) {
        x = enc[l].forward(x, emb_act, tape);
        if (features) {
            for (size_t i = 0; i < x.size(); i++) x.data[i] += features->levels[l].data[i];
        }
        skips[l] = x;
        if (l < 3) x = nn::avgpool2(x);
    }
    x = mid.forward(x, emb_act, tape);
    for (int l = 3; l >= 0; l--) {
        Tensor cat(x.c + skips[l].c, x.h, x.w);
        std::copy(x.data.begin(), x.data.end(), cat.data.begin());
        std::copy(skips[l].data.begin(), skips[l].data.end(), cat.data.begin() + x.size());
        x = dec[l].forward(cat, emb_act, tape);
        if (l > 0) x = nn::upsample2(x);
    }
    return conv_out.forward(nn::silu(out_gn.forward(x, tape), tape), tape);
}

void DenoiserNet::backward(const Tensor& d_eps, nn::Tape& tape, bool train,
                           FeaturePyramid* d_features) {
    const int ed = cfg.emb_dim();
    std::vector<double> demb_act(ed, 0.0);

    Tensor g = conv_out.backward(d_eps, tape, train);
    g = out_gn.backward(nn::silu_backward(g, tape), tape, train);

    std::array<Tensor, 4> d_skips;
    for (int l = 0; l <= 3; l++) {
        if (l > 0) g = nn::upsample2_backward(g);
        Tensor dcat = dec[l].backward(g, tape, train, demb_act);
        const int deep_c = dcat.c - cfg.level_channels(l);
        Tensor d_deep(deep_c, dcat.h, dcat.w);
        Tensor d_skip(cfg.level_channels(l), dcat.h, dcat.w);
        std::copy(dcat.data.begin(), dcat.data.begin() + d_deep.size(), d_deep.data.begin());
        std::copy(dcat.data.begin() + d_deep.size(), dcat.data.end(), d_skip.data.begin());
        d_skips[l] = std::move(d_skip);
        g = std::move(d_deep);
    }
    g = mid.backward(g, tape, train, demb_act);
    for (int l = 3; l >= 0; l--) {
        if (l < 3) g = nn::avgpool2_backward(g);
        for (size_t i = 0; i < g.size(); i++) g.data[i] += d_skips[l].data[i];
        if (d_features) d_features->levels[l] = g;
        g = enc[l].backward(g, tape, train, demb_act);
    }
    conv_in.backward(g, tape, train);

    // conditioning path
    const Tensor idx_cache = tape.pop();
    Tensor emb_cache = tape.pop();
    std::vector<double> demb = vec_silu_backward(demb_act, emb_cache.data);
    // the add node sends the same gradient to the time MLP and the class row
    // (the null row trains whenever class_id was absent)
    class_table.backward(demb, static_cast<int>(idx_cache.data[0]), train);
    std::vector<double> de1a = time_mlp2.backward(demb, tape, train);
    Tensor e1_cache = tape.pop();
    std::vector<double> de1 = vec_silu_backward(de1a, e1_cache.data);
    time_mlp1.backward(de1, tape, train);
}

std::vector<nn::Param*> DenoiserNet::params() {
    std::vector<nn::Param*> out;
    time_mlp1.collect(out);
    time_mlp2.collect(out);
    class_table.collect(out);
    conv_in.collect(out);
    for (auto& b : enc) b.collect(out);
    mid.collect(out);
    for (auto& b : dec) b.collect(out);
    out_gn.collect(out);
    conv_out.collect(out);
    return out;
}

size_t DenoiserNet::param_count() { return nn::param_count(params()); }

std::array<std::array<int, 3>, 4> DenoiserNet::encoder_level_shapes() const {
    std::array<std::array<int, 3>, 4> shapes;
    int s = cfg.latent_size;
    for (int l = 0; l < 4; l++) {
        shapes[l] = {cfg.level_channels(l), s, s};
        s /= 2;
    }
    return shapes;
}

std::vector<std::pair<int, int>> DenoiserNet::level_dims() const {
    std::vector<std::pair<int, int>> dims;
    int s = cfg.latent_size;
    for (int l = 0; l < 4; l++) {
        dims.emplace_back(s, s);
        s /= 2;
    }
    return dims;
}

DenoiseFn DenoiserNet::as_denoise_fn() const {
    return [this](const Tensor& z_t, int t, const std::optional<int>& class_id,
                  const FeaturePyramid* features) {
        nn::Tape tape;
        return forward(z_t, t, class_id, features, tape);
    };
}

Tensor denoise(const DenoiserNet& net, const Tensor& z_t, int t,
               const std::optional<int>& class_id, const FeaturePyramid* features) {
    nn::Tape tape;
    return net.forward(z_t, t, class_id, features, tape);
}

}  // namespace ldc

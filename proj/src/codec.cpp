#include "ldc/codec.hpp"

#include "ldc/image.hpp"

namespace ldc {

/*------------------------------ GeometricCodec ----------------------------*/

Tensor GeometricCodec::encode(const Tensor& image) const {
    check_image(image);
    const int f = spatial_factor();
    const int lh = image.h / f, lw = image.w / f;
    Tensor z(channels(), lh, lw);
    // sub-channel order: (color, dy, dx)
    for (int c = 0; c < 3; c++) {
        for (int dy = 0; dy < f; dy++) {
            for (int dx = 0; dx < f; dx++) {
                const int zc = (c * f + dy) * f + dx;
                for (int y = 0; y < lh; y++) {
                    for (int x = 0; x < lw; x++) {
                        z.at(zc, y, x) = image.at(c, y * f + dy, x * f + dx);
                    }
                }
            }
        }
    }
    return z;
}

Tensor GeometricCodec::decode(const Tensor& latent) const {
    if (latent.c != channels()) {
        throw std::invalid_argument("geometric decode: expected 48 channels, got " +
                                    std::to_string(latent.c));
    }
    const int f = spatial_factor();
    Tensor image(3, latent.h * f, latent.w * f);
    for (int c = 0; c < 3; c++) {
        for (int dy = 0; dy < f; dy++) {
            for (int dx = 0; dx < f; dx++) {
                const int zc = (c * f + dy) * f + dx;
                for (int y = 0; y < latent.h; y++) {
                    for (int x = 0; x < latent.w; x++) {
                        image.at(c, y * f + dy, x * f + dx) = latent.at(zc, y, x);
                    }
                }
            }
        }
    }
    return clamp01(std::move(image));
}

/*------------------------------- SdLikeCodec ------------------------------*/

SdLikeCodec::SdLikeCodec(int width_, uint64_t init_seed) : width(width_) {
    Rng rng(mix_seed(init_seed, 0xc0dec));
    e0.init("codec.e0", 3, width, 3, 1, rng);
    e1.init("codec.e1", width, width, 3, 2, rng);
    e2.init("codec.e2", width, 2 * width, 3, 2, rng);
    e3.init("codec.e3", 2 * width, 2 * width, 3, 2, rng);
    e4.init("codec.e4", 2 * width, 4, 3, 1, rng);
    d0.init("codec.d0", 4, 2 * width, 3, 1, rng);
    d1.init("codec.d1", 2 * width, 2 * width, 3, 1, rng);
    d2.init("codec.d2", 2 * width, width, 3, 1, rng);
    d3.init("codec.d3", width, width, 3, 1, rng);
    d4.init("codec.d4", width, 3, 3, 1, rng);
}

Tensor SdLikeCodec::encode_impl(const Tensor& image, nn::Tape& tape) const {
    Tensor h = nn::silu(e0.forward(image, tape), tape);
    h = nn::silu(e1.forward(h, tape), tape);
    h = nn::silu(e2.forward(h, tape), tape);
    h = nn::silu(e3.forward(h, tape), tape);
    return e4.forward(h, tape);
}

Tensor SdLikeCodec::decode_impl(const Tensor& latent, nn::Tape& tape) const {
    Tensor h = nn::silu(d0.forward(latent, tape), tape);
    h = nn::upsample2(h);
    h = nn::silu(d1.forward(h, tape), tape);
    h = nn::upsample2(h);
    h = nn::silu(d2.forward(h, tape), tape);
    h = nn::upsample2(h);
    h = nn::silu(d3.forward(h, tape), tape);
    return d4.forward(h, tape);
}

Tensor SdLikeCodec::encode(const Tensor& image) const {
    check_image(image);
    nn::Tape tape;
    Tensor z = encode_impl(image, tape);
    for (double& v : z.data) v *= latent_scale;
    return z;
}

Tensor SdLikeCodec::decode(const Tensor& latent) const {
    if (latent.c != channels()) {
        throw std::invalid_argument("sd-like decode: expected 4 channels, got " +
                                    std::to_string(latent.c));
    }
    Tensor z = latent;
    for (double& v : z.data) v /= latent_scale;
    nn::Tape tape;
    return clamp01(decode_impl(z, tape));
}

Tensor SdLikeCodec::forward_recon(const Tensor& image, nn::Tape& tape) const {
    return decode_impl(encode_impl(image, tape), tape);
}

void SdLikeCodec::backward_recon(const Tensor& d_recon, nn::Tape& tape) {
    Tensor g = d4.backward(d_recon, tape, true);
    g = d3.backward(nn::silu_backward(g, tape), tape, true);
    g = nn::upsample2_backward(g);
    g = d2.backward(nn::silu_backward(g, tape), tape, true);
    g = nn::upsample2_backward(g);
    g = d1.backward(nn::silu_backward(g, tape), tape, true);
    g = nn::upsample2_backward(g);
    g = d0.backward(nn::silu_backward(g, tape), tape, true);
    g = e4.backward(g, tape, true);
    g = e3.backward(nn::silu_backward(g, tape), tape, true);
    g = e2.backward(nn::silu_backward(g, tape), tape, true);
    g = e1.backward(nn::silu_backward(g, tape), tape, true);
    g = e0.backward(nn::silu_backward(g, tape), tape, true);
}

std::vector<nn::Param*> SdLikeCodec::params() {
    std::vector<nn::Param*> out;
    for (nn::Conv2d* c : {&e0, &e1, &e2, &e3, &e4, &d0, &d1, &d2, &d3, &d4}) c->collect(out);
    return out;
}

size_t SdLikeCodec::param_count() { return nn::param_count(params()); }

std::unique_ptr<Codec> make_codec(const std::string& kind, int sd_width, uint64_t init_seed) {
    if (kind == "geometric") return std::make_unique<GeometricCodec>();
    if (kind == "sd-like") return std::make_unique<SdLikeCodec>(sd_width, init_seed);
    throw std::invalid_argument("unknown codec kind: " + kind);
}

}  // namespace ldc

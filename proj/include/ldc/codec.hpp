#pragma once

#include <memory>
#include <string>

#include "ldc/nn.hpp"
#include "ldc/tensor.hpp"

namespace ldc {

// Image <-> latent mapping. Two implementations ship:
//  - "geometric": space-to-depth factor 4 (48 channels), exact and linear
//  - "sd-like":   trained conv autoencoder, 4 channels at factor 8 (lossy)
struct Codec {
    virtual ~Codec() = default;
    virtual std::string kind() const = 0;
    virtual int channels() const = 0;
    virtual int spatial_factor() const = 0;
    virtual Tensor encode(const Tensor& image) const = 0;
    virtual Tensor decode(const Tensor& latent) const = 0;
};

struct GeometricCodec final : Codec {
    std::string kind() const override { return "geometric"; }
    int channels() const override { return 48; }
    int spatial_factor() const override { return 4; }
    Tensor encode(const Tensor& image) const override;
    Tensor decode(const Tensor& latent) const override;
};

struct SdLikeCodec final : Codec {
    int width = 24;
    // latents are standardized after pretraining so they sit at unit scale
    double latent_scale = 1.0;

    nn::Conv2d e0, e1, e2, e3, e4;
    nn::Conv2d d0, d1, d2, d3, d4;

    explicit SdLikeCodec(int width_ = 24, uint64_t init_seed = 0);

    std::string kind() const override { return "sd-like"; }
    int channels() const override { return 4; }
    int spatial_factor() const override { return 8; }
    Tensor encode(const Tensor& image) const override;
    Tensor decode(const Tensor& latent) const override;

    std::vector<nn::Param*> params();
    size_t param_count();

    // training path (latent_scale is not applied here)
    Tensor forward_recon(const Tensor& image, nn::Tape& tape) const;
    void backward_recon(const Tensor& d_recon, nn::Tape& tape);

private:
    Tensor encode_impl(const Tensor& image, nn::Tape& tape) const;
    Tensor decode_impl(const Tensor& latent, nn::Tape& tape) const;
};

std::unique_ptr<Codec> make_codec(const std::string& kind, int sd_width, uint64_t init_seed);

}  // namespace ldc

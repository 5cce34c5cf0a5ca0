#pragma once

#include <optional>

#include "ldc/adapter.hpp"
#include "ldc/nn.hpp"
#include "ldc/schedule.hpp"
#include "ldc/tensor.hpp"

namespace ldc {

struct DenoiserConfig {
    int latent_channels = 4;
    int latent_size = 8;
    int base_width = 32;
    std::array<int, 4> channel_mult = {1, 2, 4, 8};
    int num_classes = 4;

    int emb_dim() const { return 4 * base_width; }
    int level_channels(int l) const { return base_width * channel_mult[l]; }
    int null_class() const { return num_classes; }
};

// norm -> silu -> conv, timestep/class embedding added between the two convs,
// residual skip (1x1 projection on channel change)
struct ResBlock {
    int in_c = 0, out_c = 0;
    nn::GroupNorm gn1, gn2;
    nn::Conv2d conv1, conv2;
    nn::Linear emb_proj;
    nn::Conv2d skip;
    bool has_skip = false;

    void init(const std::string& name, int in_c_, int out_c_, int emb_dim, Rng& rng);
    Tensor forward(const Tensor& x, const std::vector<double>& emb_act, nn::Tape& tape) const;
    Tensor backward(const Tensor& dy, nn::Tape& tape, bool train, std::vector<double>& demb_act);
    void collect(std::vector<nn::Param*>& out);
};

// Small U-shaped noise-prediction network: 4 encoder levels with adapter
// feature injection, bottleneck, 4 decoder levels with skip connections.
// Class-embedding conditioning stands in for text prompts; the table holds a
// null token used when no class id is given.
struct DenoiserNet {
    DenoiserConfig cfg;
    nn::Linear time_mlp1, time_mlp2;
    nn::Embedding class_table;
    nn::Conv2d conv_in;
    std::array<ResBlock, 4> enc;
    ResBlock mid;
    std::array<ResBlock, 4> dec;
    nn::GroupNorm out_gn;
    nn::Conv2d conv_out;

    DenoiserNet(const DenoiserConfig& cfg_, uint64_t init_seed);

    Tensor forward(const Tensor& z_t, int t, const std::optional<int>& class_id,
                   const FeaturePyramid* features, nn::Tape& tape) const;
    // d_features, when non-null, receives the gradients at the four injection
    // points (the path the adapter trains through while the denoiser is frozen)
    void backward(const Tensor& d_eps, nn::Tape& tape, bool train, FeaturePyramid* d_features);

    std::vector<nn::Param*> params();
    size_t param_count();

    std::array<std::array<int, 3>, 4> encoder_level_shapes() const;
    std::vector<std::pair<int, int>> level_dims() const;  // (h,w) per level, for mask pyramids

    // embedding row for a class id; nullopt selects the null token
    std::vector<double> embed_class(const std::optional<int>& class_id) const;

    // convenience wrapper for sampling
    DenoiseFn as_denoise_fn() const;
};

Tensor denoise(const DenoiserNet& net, const Tensor& z_t, int t,
               const std::optional<int>& class_id = std::nullopt,
               const FeaturePyramid* features = nullptr);

}  // namespace ldc

#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace ldc {

// Full training configuration. Serialized verbatim (canonical JSON) into
// every checkpoint; the fingerprint guards weight/config pairings.
struct TrainConfig {
    int image_size = 64;
    std::string codec = "sd-like";  // or "geometric"
    int codec_width = 24;

    int num_steps = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;

    int base_width = 32;
    std::array<int, 4> channel_mult = {1, 2, 4, 8};
    int num_classes = 4;

    int adapter_width = 16;
    int adapter_depth = 1;

    double learning_rate = 8e-5;
    double weight_decay = 1e-2;
    double lambda = 1e-3;
    // cap on the per-sample loss-gradient norm at the noise prediction
    // (0 disables); tames the 1/alpha_bar blow-up of the similarity term
    // at large t without touching the loss definition
    double grad_clip = 0.0;
    int batch_size = 4;
    int grad_accum = 2;
    int max_steps = 10000;
    int eval_every = 1000;
    int seed = 1;

    std::string filter = "sobel";        // or "laplace"
    std::string sim_reduction = "mean";  // or "sum" (rescales the masked MSE)
    double mask_min_area_fraction = 0.0381;
    int mask_max_rects = 1;
    std::string mask_mode = "feature";  // feature | edge | none

    double canny_low = 0.1;
    double canny_high = 0.2;

    int codec_pretrain_steps = 3000;
    double codec_pretrain_lr = 1e-3;
    int denoiser_pretrain_steps = 8000;
    double denoiser_pretrain_lr = 3e-4;
    double class_dropout = 0.1;

    int spatial_factor() const { return codec == "geometric" ? 4 : 8; }
    int latent_channels() const { return codec == "geometric" ? 48 : 4; }
    int latent_size() const { return image_size / spatial_factor(); }

    void validate() const;
    std::string to_json() const;          // canonical (sorted keys)
    static TrainConfig from_json(const std::string& text);
    static TrainConfig load_file(const std::string& path);
    void save_file(const std::string& path) const;

    uint64_t fingerprint() const;  // FNV-1a over the canonical JSON

    // hash over the keys that determine weight shapes and the diffusion
    // setup (plus the seed); training hyperparameters like lambda/lr may
    // differ between a pretrain checkpoint and the run reusing it
    uint64_t arch_fingerprint() const;
};

uint64_t fnv1a64(const std::string& s);

}  // namespace ldc

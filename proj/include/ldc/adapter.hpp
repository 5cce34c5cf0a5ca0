#pragma once

#include <array>

#include "ldc/mask.hpp"
#include "ldc/nn.hpp"
#include "ldc/tensor.hpp"

namespace ldc {

// Four condition feature maps shaped to match the denoiser encoder levels.
struct FeaturePyramid {
    std::array<Tensor, 4> levels;

    bool all_zero() const {
        for (const auto& l : levels) {
            for (double v : l.data) {
                if (v != 0.0) return false;
            }
        }
        return true;
    }
};

// Elementwise product of each level with the matching mask pyramid level,
// broadcast over channels. The mask pyramid must hold the four level dims.
FeaturePyramid mask_features(const FeaturePyramid& features, const RoiMask& mask);
FeaturePyramid mask_features(const FeaturePyramid& features, const std::vector<Tensor>& pyramid);

struct AdapterConfig {
    int image_size = 64;
    int latent_size = 8;
    int width = 16;                             // trunk channels
    int depth = 1;                              // 3x3 convs per level block
    std::array<int, 4> level_channels = {32, 64, 128, 256};
};

// Shallow convolutional pyramid mapping an edge condition (1,S,S) to four
// feature levels at the encoder resolutions. The per-level output projections
// are zero-initialized so conditioning starts as a no-op.
struct AdapterNet {
    AdapterConfig cfg;
    nn::Conv2d stem;
    std::vector<nn::Conv2d> pre_downs;           // image res -> latent res
    std::array<std::vector<nn::Conv2d>, 4> bodies;
    std::array<nn::Conv2d, 4> heads;             // 1x1, zero-initialized
    std::array<nn::Conv2d, 3> downs;             // between levels

    AdapterNet(const AdapterConfig& cfg_, uint64_t init_seed);

    FeaturePyramid forward(const Tensor& edge_map, nn::Tape& tape) const;
    void backward(const FeaturePyramid& d_features, nn::Tape& tape, bool train);

    std::vector<nn::Param*> params();
    size_t param_count();

    // radius, in input pixels, beyond which an edit cannot influence a feature
    // cell of the given level (0-based); without an argument, the deepest level
    int receptive_field_radius(int level = 3) const;
    // input-pixel stride between adjacent feature cells of a level
    int level_jump(int level) const;

    std::array<std::array<int, 3>, 4> level_shapes() const;  // (c,h,w) per level
};

FeaturePyramid adapter_forward(const AdapterNet& adapter, const Tensor& edge_map);

}  // namespace ldc

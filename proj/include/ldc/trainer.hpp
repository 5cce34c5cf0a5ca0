#pragma once

#include <memory>
#include <optional>
#include <string>

#include "ldc/adapter.hpp"
#include "ldc/checkpoint.hpp"
#include "ldc/codec.hpp"
#include "ldc/config.hpp"
#include "ldc/dataset.hpp"
#include "ldc/denoiser.hpp"
#include "ldc/schedule.hpp"

namespace ldc {

AdapterConfig adapter_config_from(const TrainConfig& cfg);
DenoiserConfig denoiser_config_from(const TrainConfig& cfg);

// Codec + denoiser + adapter + schedule assembled for one configuration.
struct ModelBundle {
    TrainConfig cfg;
    std::unique_ptr<Codec> codec;
    std::unique_ptr<DenoiserNet> denoiser;
    std::unique_ptr<AdapterNet> adapter;
    NoiseSchedule schedule;

    static ModelBundle fresh(const TrainConfig& cfg);
    static ModelBundle from_checkpoint(const std::string& path);

    // quadrant/infer entry point: features are computed once per condition
    Tensor sample_latent(uint64_t seed, const std::optional<int>& class_id,
                         const FeaturePyramid* features) const;
};

// Stage 1: reconstruction pretraining of the sd-like codec (writes a codec
// checkpoint; a no-op passthrough checkpoint for the geometric codec).
void pretrain_codec(const TrainConfig& cfg, const std::string& dataset_dir,
                    const std::string& out_ckpt);

// Stage 2: noise-prediction pretraining of the denoiser, class-conditioned
// with null dropout, no adapter. The codec stays frozen.
void pretrain_denoiser(const TrainConfig& cfg, const std::string& dataset_dir,
                       const std::string& codec_ckpt, const std::string& out_ckpt);

// Stage 3: adapter training with frozen codec + denoiser. Per step: encode,
// pick t, diffuse, compute masked adapter features, predict noise, recover
// z0_hat, combine the diffusion and masked similarity losses, and update the
// adapter with AdamW after grad_accum micro-batches. Writes metrics.log and
// periodic checkpoints under out_dir; resumes from an existing checkpoint.
// Returns the final checkpoint path.
std::string train(const TrainConfig& cfg, const std::string& dataset_dir,
                  const std::string& pretrain_ckpt, const std::string& out_dir);

}  // namespace ldc

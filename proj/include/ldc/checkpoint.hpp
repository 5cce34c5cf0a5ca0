#pragma once

#include <string>
#include <vector>

#include "ldc/config.hpp"
#include "ldc/nn.hpp"

namespace ldc {

// Single-file binary checkpoint: magic + version + config fingerprint header,
// the config JSON verbatim, trainer counters, RNG state, and flat parameter
// blobs. Writes are atomic (write-temp then rename) and load-then-save
// round-trips bit-identically.
struct Checkpoint {
    uint32_t version = 1;
    std::string config_json;
    uint64_t fingerprint = 0;
    int64_t step = 0;
    int64_t opt_step = 0;
    double codec_latent_scale = 1.0;
    std::string rng_state;
    std::vector<double> codec_params;
    std::vector<double> denoiser_params;
    std::vector<double> adapter_params;
    std::vector<double> opt_m;  // optimizer slots of the trained group
    std::vector<double> opt_v;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);

    TrainConfig config() const;
    // refuses to pair weights with a different configuration
    void require_config(const TrainConfig& cfg) const;
};

std::vector<double> flatten_params(const std::vector<nn::Param*>& params);
void unflatten_params(const std::vector<double>& flat, const std::vector<nn::Param*>& params);

}  // namespace ldc

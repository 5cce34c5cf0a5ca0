#pragma once

#include <string>
#include <vector>

#include "ldc/config.hpp"
#include "ldc/mask.hpp"
#include "ldc/tensor.hpp"

namespace ldc {

// One training unit: a procedural scene, its Canny edges (the condition), a
// sampled ROI mask, the scene-class id (the prompt stand-in) and a palette id.
struct SyntheticSample {
    Tensor image;
    Tensor edges;
    RoiMask mask;
    int class_id = 0;
    int caption_id = 0;
};

// scene classes: 0 circles, 1 rectangles, 2 triangles, 3 mixed
constexpr int kSceneClasses = 4;
constexpr int kPalettes = 4;

// Deterministic in-memory generation; sample i depends only on (seed, i).
SyntheticSample make_sample(uint64_t seed, int index, const TrainConfig& cfg);

// Persists count samples under dir/{images,edges,masks}/NNNNN.png plus
// meta.tsv (id, class_id, caption_id, mask_area) and manifest.json.
void generate_dataset(const std::string& dir, uint64_t seed, int count, const TrainConfig& cfg);

struct DatasetReader {
    std::string dir;
    int count = 0;
    int image_size = 0;
    std::vector<int> class_ids;
    std::vector<int> caption_ids;

    explicit DatasetReader(const std::string& dir);
    SyntheticSample load(int index) const;
};

}  // namespace ldc

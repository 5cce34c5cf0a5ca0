#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ldc/metrics.hpp"
#include "ldc/trainer.hpp"

namespace ldc {

// Quadrant condition built from a full edge map: the left half is blacked
// out, the lower-right quadrant is zeroed, the upper-right keeps true edges.
Tensor quadrant_condition(const Tensor& edges);

// The ROI: right half of the image.
RoiMask quadrant_mask(int height, int width);

struct QuadrantResult {
    std::vector<DmseReport> reports;
    DmseAggregate agg;
};

// Runs the quadrant protocol on the first sample_count test samples: build
// the condition, mask adapter features (feature-mode models), sample, decode,
// extract edges, score DMSE inside/outside the ROI. Per-sample sampling seeds
// depend only on (eval_seed, index), so runs with different checkpoints pair.
// Writes a TSV report plus aggregate and pixel-statistics footers when
// report_path is non-empty.
QuadrantResult quadrant_experiment(const ModelBundle& bundle, const std::string& test_dir,
                                   int sample_count, bool use_prompt, uint64_t eval_seed,
                                   const std::string& report_path = "");

struct AblationOverride {
    double lambda = 1e-3;
    double lr = 8e-5;
    std::string filter = "sobel";
};

struct AblationRow {
    AblationOverride ov;
    uint64_t fingerprint = 0;
    DmseAggregate agg;
    std::string checkpoint_path;
};

// Trains one adapter per override at the shared seed and fixed budget on top
// of shared pretrained stages (built under out_dir when absent), evaluates
// each with the quadrant protocol, and writes a delimited table keyed by
// (lambda, lr, filter).
std::vector<AblationRow> run_ablation(const TrainConfig& base,
                                      const std::vector<AblationOverride>& grid,
                                      const std::string& train_dir, const std::string& test_dir,
                                      const std::string& out_dir, int eval_samples,
                                      bool use_prompt);

struct InferResult {
    DmseReport report;
    std::string image_path;
    std::string edges_path;
};

// End-user entry point: condition on an edge PNG with an ROI mask PNG, sample
// one image, save it and its extracted edges, and score DMSE against the
// provided condition.
InferResult infer(const std::string& checkpoint_path, const std::string& edge_png,
                  const std::string& mask_png, const std::optional<int>& class_id, uint64_t seed,
                  const std::string& out_prefix);

// Batch evaluator over a directory triplet of same-named PNGs; writes one row
// per sample plus an aggregate footer.
DmseAggregate eval_dmse_dir(const std::string& gt_dir, const std::string& gen_dir,
                            const std::string& mask_dir, const std::string& report_path);

void write_dmse_report(const std::string& path, const std::vector<DmseReport>& reports,
                       const DmseAggregate& agg, const std::vector<std::string>& footer = {});

// Parses the aggregate footer of a previously written report; false when the
// file is missing or malformed. Lets long evaluations resume from disk.
bool read_dmse_aggregate(const std::string& path, DmseAggregate& out);

}  // namespace ldc

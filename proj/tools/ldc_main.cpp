#include <iostream>

#include "CLI11.hpp"
#include "ldc/dataset.hpp"
#include "ldc/experiment.hpp"
#include "ldc/trainer.hpp"

using namespace ldc;

namespace {

TrainConfig load_config(const std::string& path, int seed_override) {
    TrainConfig cfg = path.empty() ? TrainConfig{} : TrainConfig::load_file(path);
    if (seed_override >= 0) cfg.seed = seed_override;
    cfg.validate();
    return cfg;
}

void print_aggregate(const DmseAggregate& agg) {
    std::cout << "dmse_in  " << agg.in_mean << " +/- " << agg.in_std << " (n=" << agg.in_count
              << ")\n";
    std::cout << "dmse_out " << agg.out_mean << " +/- " << agg.out_std << " (n=" << agg.out_count
              << ")\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"localized structural control for a toy latent diffusion model"};
    app.require_subcommand(1);

    std::string config_path, dataset_dir, test_dir, out, ckpt, codec_ckpt, pretrain_ckpt;
    std::string edge_png, mask_png, gt_dir, gen_dir, mask_dir;
    int seed_override = -1, count = 1000, samples = 200, class_id = -1;
    uint64_t sample_seed = 0;
    bool use_prompt = false;
    std::vector<double> lambdas;
    std::vector<double> lrs;
    std::vector<std::string> filters;

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
    gen->add_option("--config", config_path, "config JSON");
    gen->add_option("--out", out, "output directory")->required();
    gen->add_option("--count", count, "sample count");
    gen->add_option("--seed", seed_override, "generation seed");

    auto* pc = app.add_subcommand("pretrain-codec", "reconstruction pretraining of the codec");
    pc->add_option("--config", config_path, "config JSON");
    pc->add_option("--data", dataset_dir, "training dataset dir")->required();
    pc->add_option("--out", out, "output checkpoint")->required();
    pc->add_option("--seed", seed_override, "training seed");

    auto* pd = app.add_subcommand("pretrain-denoiser", "noise-prediction pretraining, no adapter");
    pd->add_option("--config", config_path, "config JSON");
    pd->add_option("--data", dataset_dir, "training dataset dir")->required();
    pd->add_option("--codec", codec_ckpt, "codec checkpoint")->required();
    pd->add_option("--out", out, "output checkpoint")->required();
    pd->add_option("--seed", seed_override, "training seed");

    auto* tr = app.add_subcommand("train", "adapter training with frozen codec and denoiser");
    tr->add_option("--config", config_path, "config JSON");
    tr->add_option("--data", dataset_dir, "training dataset dir")->required();
    tr->add_option("--pretrain", pretrain_ckpt, "pretrained checkpoint")->required();
    tr->add_option("--out", out, "run directory")->required();
    tr->add_option("--seed", seed_override, "training seed");

    auto* qd = app.add_subcommand("quadrant", "quadrant-control evaluation of a checkpoint");
    qd->add_option("--checkpoint", ckpt, "trained checkpoint")->required();
    qd->add_option("--data", test_dir, "test dataset dir")->required();
    qd->add_option("--samples", samples, "number of test samples");
    qd->add_option("--out", out, "report path")->required();
    qd->add_option("--eval-seed", sample_seed, "sampling seed");
    qd->add_flag("--use-prompt", use_prompt, "condition on scene-class ids");

    auto* ab = app.add_subcommand("ablate", "train and evaluate a (lambda, lr, filter) grid");
    ab->add_option("--config", config_path, "base config JSON");
    ab->add_option("--data", dataset_dir, "training dataset dir")->required();
    ab->add_option("--test-data", test_dir, "test dataset dir")->required();
    ab->add_option("--out", out, "output directory")->required();
    ab->add_option("--samples", samples, "eval samples per cell");
    ab->add_option("--lambda", lambdas, "lambda values");
    ab->add_option("--lr", lrs, "learning rates");
    ab->add_option("--filter", filters, "filters (sobel/laplace)");
    ab->add_option("--seed", seed_override, "shared seed");
    ab->add_flag("--use-prompt", use_prompt, "condition on scene-class ids");

    auto* in = app.add_subcommand("infer", "sample one image from an edge condition and ROI mask");
    in->add_option("--checkpoint", ckpt, "trained checkpoint")->required();
    in->add_option("--edges", edge_png, "edge condition PNG")->required();
    in->add_option("--mask", mask_png, "ROI mask PNG")->required();
    in->add_option("--class-id", class_id, "scene class id (omit for the null prompt)");
    in->add_option("--seed", sample_seed, "sampling seed");
    in->add_option("--out", out, "output prefix")->required();

    auto* ev = app.add_subcommand("eval-dmse", "batch DMSE over a directory triplet");
    ev->add_option("--gt", gt_dir, "ground-truth edges dir")->required();
    ev->add_option("--gen", gen_dir, "generated edges dir")->required();
    ev->add_option("--masks", mask_dir, "masks dir")->required();
    ev->add_option("--out", out, "report path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            TrainConfig cfg = load_config(config_path, seed_override);
            generate_dataset(out, static_cast<uint64_t>(cfg.seed), count, cfg);
            std::cout << "wrote " << count << " samples to " << out << "\n";
        } else if (*pc) {
            TrainConfig cfg = load_config(config_path, seed_override);
            pretrain_codec(cfg, dataset_dir, out);
            std::cout << "codec checkpoint: " << out << "\n";
        } else if (*pd) {
            TrainConfig cfg = load_config(config_path, seed_override);
            pretrain_denoiser(cfg, dataset_dir, codec_ckpt, out);
            std::cout << "pretrained checkpoint: " << out << "\n";
        } else if (*tr) {
            TrainConfig cfg = load_config(config_path, seed_override);
            const std::string final_ckpt = train(cfg, dataset_dir, pretrain_ckpt, out);
            std::cout << "final checkpoint: " << final_ckpt << "\n";
        } else if (*qd) {
            ModelBundle bundle = ModelBundle::from_checkpoint(ckpt);
            QuadrantResult q =
                quadrant_experiment(bundle, test_dir, samples, use_prompt, sample_seed, out);
            print_aggregate(q.agg);
            std::cout << "report: " << out << "\n";
        } else if (*ab) {
            TrainConfig base = load_config(config_path, seed_override);
            if (lambdas.empty()) lambdas = {0.0, 10e-4, 25e-4, 50e-4, 75e-4};
            if (lrs.empty()) lrs = {base.learning_rate};
            if (filters.empty()) filters = {base.filter};
            std::vector<AblationOverride> grid;
            for (const auto& f : filters) {
                for (double lr : lrs) {
                    for (double lam : lambdas) grid.push_back({lam, lr, f});
                }
            }
            auto rows = run_ablation(base, grid, dataset_dir, test_dir, out, samples, use_prompt);
            for (const auto& r : rows) {
                std::cout << "lambda " << r.ov.lambda << " lr " << r.ov.lr << " filter "
                          << r.ov.filter << " dmse_in " << r.agg.in_mean << " dmse_out "
                          << r.agg.out_mean << "\n";
            }
            std::cout << "table: " << out << "/ablation.tsv\n";
        } else if (*in) {
            std::optional<int> cls;
            if (class_id >= 0) cls = class_id;
            InferResult r = infer(ckpt, edge_png, mask_png, cls, sample_seed, out);
            std::cout << "image: " << r.image_path << "\nedges: " << r.edges_path << "\n";
            std::cout << "dmse_in "
                      << (r.report.in_defined ? std::to_string(r.report.dmse_in) : "undefined")
                      << " dmse_out "
                      << (r.report.out_defined ? std::to_string(r.report.dmse_out) : "undefined")
                      << "\n";
        } else if (*ev) {
            DmseAggregate agg = eval_dmse_dir(gt_dir, gen_dir, mask_dir, out);
            print_aggregate(agg);
            std::cout << "report: " << out << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

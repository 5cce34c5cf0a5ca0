#include "ldc/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "ldc/canny.hpp"
#include "ldc/image.hpp"
#include "ldc/objective.hpp"

namespace fs = std::filesystem;

namespace ldc {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

// per-channel mean and variance over a set of images
std::array<double, 6> channel_stats(const std::vector<Tensor>& images) {
    std::array<double, 6> out{};
    if (images.empty()) return out;
    const size_t plane = images[0].size() / 3;
    for (int c = 0; c < 3; c++) {
        double sum = 0.0, sq = 0.0;
        long n = 0;
        for (const Tensor& img : images) {
            for (size_t i = 0; i < plane; i++) {
                const double v = img.data[c * plane + i];
                sum += v;
                sq += v * v;
                n++;
            }
        }
        const double mean = sum / n;
        out[c] = mean;
        out[3 + c] = sq / n - mean * mean;
    }
    return out;
}

}  // namespace

Tensor quadrant_condition(const Tensor& edges) {
    Tensor cond = edges;
    const int half_w = edges.w / 2, half_h = edges.h / 2;
    for (int y = 0; y < edges.h; y++) {
        for (int x = 0; x < edges.w; x++) {
            if (x < half_w || (y >= half_h && x >= half_w)) cond.at(0, y, x) = 0.0;
        }
    }
    return cond;
}

RoiMask quadrant_mask(int height, int width) {
    Tensor m(1, height, width);
    for (int y = 0; y < height; y++) {
        for (int x = width / 2; x < width; x++) m.at(0, y, x) = 1.0;
    }
    return RoiMask(std::move(m));
}

void write_dmse_report(const std::string& path, const std::vector<DmseReport>& reports,
                       const DmseAggregate& agg, const std::vector<std::string>& footer) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write report " + path);
    os << "sample_id\tdmse_in\tdmse_out\tmask_area\n";
    for (const auto& r : reports) {
        os << r.sample_id << "\t" << (r.in_defined ? fmt(r.dmse_in) : "undefined") << "\t"
           << (r.out_defined ? fmt(r.dmse_out) : "undefined") << "\t" << r.mask_area << "\n";
    }
    os << "# aggregate dmse_in " << fmt(agg.in_mean) << " +/- " << fmt(agg.in_std) << " n "
       << agg.in_count << "\n";
    os << "# aggregate dmse_out " << fmt(agg.out_mean) << " +/- " << fmt(agg.out_std) << " n "
       << agg.out_count << "\n";
    for (const auto& line : footer) os << "# " << line << "\n";
}

bool read_dmse_aggregate(const std::string& path, DmseAggregate& out) {
    std::ifstream f(path);
    if (!f) return false;
    std::string line;
    bool got_in = false, got_out = false;
    while (std::getline(f, line)) {
        std::istringstream ss(line);
        std::string hash, word, metric, pm;
        if (!(ss >> hash >> word) || hash != "#" || word != "aggregate") continue;
        double mean = 0.0, std = 0.0;
        int n = 0;
        std::string nword;
        if (!(ss >> metric >> mean >> pm >> std >> nword >> n)) continue;
        if (metric == "dmse_in") {
            out.in_mean = mean;
            out.in_std = std;
            out.in_count = n;
            got_in = true;
        } else if (metric == "dmse_out") {
            out.out_mean = mean;
            out.out_std = std;
            out.out_count = n;
            got_out = true;
        }
    }
    return got_in && got_out;
}

QuadrantResult quadrant_experiment(const ModelBundle& bundle, const std::string& test_dir,
                                   int sample_count, bool use_prompt, uint64_t eval_seed,
                                   const std::string& report_path) {
    const TrainConfig& cfg = bundle.cfg;
    DatasetReader reader(test_dir);
    if (sample_count < 1 || sample_count > reader.count) {
        throw std::invalid_argument("quadrant: sample_count out of range");
    }

    RoiMask roi = quadrant_mask(cfg.image_size, cfg.image_size);
    roi.build_pyramid(bundle.denoiser->level_dims());

    QuadrantResult result;
    result.reports.resize(sample_count);
    const int kept = std::min(sample_count, 64);
    std::vector<Tensor> generated(kept), references(kept);
#pragma omp parallel for schedule(dynamic, 1) num_threads(2)
    for (int i = 0; i < sample_count; i++) {
        SyntheticSample s = reader.load(i);
        const Tensor cond = quadrant_condition(s.edges);

        FeaturePyramid feats = adapter_forward(*bundle.adapter, cond);
        if (cfg.mask_mode == "feature") feats = mask_features(feats, roi);

        const std::optional<int> cls =
            use_prompt ? std::optional<int>(s.class_id) : std::nullopt;
        const Tensor z = bundle.sample_latent(mix_seed(eval_seed, static_cast<uint64_t>(i)), cls,
                                              &feats);
        const Tensor image = bundle.codec->decode(z);
        const Tensor e_gen = extract_edges(image, cfg.canny_low, cfg.canny_high);

        result.reports[i] = make_dmse_report(std::to_string(i), cond, e_gen, roi);
        if (i < kept) {
            generated[i] = image;
            references[i] = std::move(s.image);
        }
    }
    result.agg = aggregate(result.reports);

    if (!report_path.empty()) {
        const auto gen_stats = channel_stats(generated);
        const auto ref_stats = channel_stats(references);
        std::vector<std::string> footer;
        footer.push_back("pixel-stats generated mean " + fmt(gen_stats[0]) + " " +
                         fmt(gen_stats[1]) + " " + fmt(gen_stats[2]) + " var " +
                         fmt(gen_stats[3]) + " " + fmt(gen_stats[4]) + " " + fmt(gen_stats[5]));
        footer.push_back("pixel-stats reference mean " + fmt(ref_stats[0]) + " " +
                         fmt(ref_stats[1]) + " " + fmt(ref_stats[2]) + " var " +
                         fmt(ref_stats[3]) + " " + fmt(ref_stats[4]) + " " + fmt(ref_stats[5]));
        write_dmse_report(report_path, result.reports, result.agg, footer);
    }
    return result;
}

std::vector<AblationRow> run_ablation(const TrainConfig& base,
                                      const std::vector<AblationOverride>& grid,
                                      const std::string& train_dir, const std::string& test_dir,
                                      const std::string& out_dir, int eval_samples,
                                      bool use_prompt) {
    if (grid.empty()) throw std::invalid_argument("run_ablation: empty grid");
    fs::create_directories(out_dir);

    // shared pretrained stages, built once per (architecture, seed)
    const std::string codec_ckpt = (fs::path(out_dir) / "codec.ldc").string();
    const std::string pretrain_ckpt = (fs::path(out_dir) / "pretrain.ldc").string();
    if (!fs::exists(codec_ckpt)) {
        pretrain_codec(base, train_dir, codec_ckpt);
    } else {
        Checkpoint::load(codec_ckpt).require_config(base);
    }
    if (!fs::exists(pretrain_ckpt)) {
        pretrain_denoiser(base, train_dir, codec_ckpt, pretrain_ckpt);
    } else {
        Checkpoint::load(pretrain_ckpt).require_config(base);
    }

    std::vector<AblationRow> rows;
    for (size_t i = 0; i < grid.size(); i++) {
        TrainConfig cfg = base;
        cfg.lambda = grid[i].lambda;
        cfg.learning_rate = grid[i].lr;
        cfg.filter = grid[i].filter;
        cfg.validate();

        char run_name[96];
        std::snprintf(run_name, sizeof(run_name), "run_lam%g_lr%g_%s", cfg.lambda,
                      cfg.learning_rate, cfg.filter.c_str());
        const std::string run_dir = (fs::path(out_dir) / run_name).string();
        const std::string ckpt = train(cfg, train_dir, pretrain_ckpt, run_dir);
        const std::string report = (fs::path(run_dir) / "quadrant.tsv").string();

        AblationRow row;
        row.ov = grid[i];
        row.fingerprint = cfg.fingerprint();
        row.checkpoint_path = ckpt;
        if (!read_dmse_aggregate(report, row.agg)) {
            ModelBundle bundle = ModelBundle::from_checkpoint(ckpt);
            row.agg = quadrant_experiment(bundle, test_dir, eval_samples, use_prompt,
                                          static_cast<uint64_t>(base.seed), report)
                          .agg;
        }
        rows.push_back(row);
    }

    std::ofstream table(fs::path(out_dir) / "ablation.tsv");
    table << "lambda\tlr\tfilter\tdmse_in_mean\tdmse_in_std\tdmse_out_mean\tdmse_out_std\tn\n";
    for (const auto& r : rows) {
        table << r.ov.lambda << "\t" << r.ov.lr << "\t" << r.ov.filter << "\t" << fmt(r.agg.in_mean)
              << "\t" << fmt(r.agg.in_std) << "\t" << fmt(r.agg.out_mean) << "\t"
              << fmt(r.agg.out_std) << "\t" << r.agg.in_count << "\n";
    }
    return rows;
}

InferResult infer(const std::string& checkpoint_path, const std::string& edge_png,
                  const std::string& mask_png, const std::optional<int>& class_id, uint64_t seed,
                  const std::string& out_prefix) {
    ModelBundle bundle = ModelBundle::from_checkpoint(checkpoint_path);
    const TrainConfig& cfg = bundle.cfg;

    const Tensor edges = load_binary_png(edge_png);
    if (edges.h != cfg.image_size || edges.w != cfg.image_size) {
        throw std::invalid_argument("infer: edge map dims do not match the configured image size");
    }
    RoiMask mask(load_binary_png(mask_png));
    if (mask.data.h != cfg.image_size || mask.data.w != cfg.image_size) {
        throw std::invalid_argument("infer: mask dims do not match the configured image size");
    }
    mask.build_pyramid(bundle.denoiser->level_dims());

    FeaturePyramid feats = adapter_forward(*bundle.adapter, edges);
    if (cfg.mask_mode == "feature") feats = mask_features(feats, mask);

    const Tensor z = bundle.sample_latent(seed, class_id, &feats);
    const Tensor image = bundle.codec->decode(z);
    const Tensor e_gen = extract_edges(image, cfg.canny_low, cfg.canny_high);

    InferResult r;
    r.report = make_dmse_report("infer", edges, e_gen, mask);
    r.image_path = out_prefix + "_image.png";
    r.edges_path = out_prefix + "_edges.png";
    save_image_png(r.image_path, image);
    save_binary_png(r.edges_path, e_gen);
    return r;
}

DmseAggregate eval_dmse_dir(const std::string& gt_dir, const std::string& gen_dir,
                            const std::string& mask_dir, const std::string& report_path) {
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(gt_dir)) {
        if (entry.path().extension() == ".png") names.push_back(entry.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    if (names.empty()) throw std::runtime_error("eval_dmse_dir: no PNGs in " + gt_dir);

    std::vector<DmseReport> reports;
    for (const auto& name : names) {
        const Tensor e_gt = load_binary_png((fs::path(gt_dir) / name).string());
        const Tensor e_gen = load_binary_png((fs::path(gen_dir) / name).string());
        RoiMask mask(load_binary_png((fs::path(mask_dir) / name).string()));
        reports.push_back(make_dmse_report(name, e_gt, e_gen, mask));
    }
    const DmseAggregate agg = aggregate(reports);
    write_dmse_report(report_path, reports, agg);
    return agg;
}

}  // namespace ldc

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "doctest.h"
#include "ldc/dataset.hpp"
#include "ldc/experiment.hpp"
#include "ldc/image.hpp"
#include "ldc/objective.hpp"
#include "ldc/trainer.hpp"

using namespace ldc;
namespace fs = std::filesystem;

namespace {

TrainConfig smoke_config() {
    TrainConfig cfg;
    cfg.image_size = 64;
    cfg.codec = "sd-like";
    cfg.codec_width = 8;
    cfg.num_steps = 50;
    cfg.beta_start = 1e-4;
    cfg.beta_end = 0.4;
    cfg.base_width = 8;
    cfg.channel_mult = {1, 2, 2, 4};
    cfg.num_classes = 4;
    cfg.adapter_width = 8;
    cfg.learning_rate = 1e-3;  // smoke runs need visible movement
    cfg.lambda = 1e-3;
    cfg.batch_size = 2;
    cfg.grad_accum = 2;
    cfg.max_steps = 100;
    cfg.eval_every = 50;
    cfg.seed = 3;
    cfg.codec_pretrain_steps = 120;
    cfg.codec_pretrain_lr = 2e-3;
    cfg.denoiser_pretrain_steps = 150;
    cfg.denoiser_pretrain_lr = 1e-3;
    return cfg;
}

struct SmokeRun {
    std::string root;
    std::string data_dir;
    std::string test_dir;
    std::string codec_ckpt;
    std::string pretrain_ckpt;
    std::string final_ckpt;
    TrainConfig cfg;
};

// one staged pipeline shared by the cases below (train once, inspect often)
const SmokeRun& smoke_run() {
    static const SmokeRun run = [] {
        SmokeRun r;
        r.cfg = smoke_config();
        const fs::path root = fs::temp_directory_path() / "ldc_smoke_pipeline";
        fs::remove_all(root);
        fs::create_directories(root);
        r.root = root.string();
        r.data_dir = (root / "train").string();
        r.test_dir = (root / "test").string();
        generate_dataset(r.data_dir, 101, 48, r.cfg);
        generate_dataset(r.test_dir, 202, 12, r.cfg);
        r.codec_ckpt = (root / "codec.ldc").string();
        r.pretrain_ckpt = (root / "pretrain.ldc").string();
        pretrain_codec(r.cfg, r.data_dir, r.codec_ckpt);
        pretrain_denoiser(r.cfg, r.data_dir, r.codec_ckpt, r.pretrain_ckpt);
        r.final_ckpt = train(r.cfg, r.data_dir, r.pretrain_ckpt, (root / "run").string());
        return r;
    }();
    return run;
}

struct MetricsRow {
    std::string tag;
    long step;
    double l_diff, l_sim, l_total;
};

std::vector<MetricsRow> read_metrics(const std::string& path) {
    std::ifstream f(path);
    REQUIRE(f.good());
    std::vector<MetricsRow> rows;
    MetricsRow r;
    while (f >> r.tag >> r.step >> r.l_diff >> r.l_sim >> r.l_total) rows.push_back(r);
    return rows;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("staged pipeline produces a loadable adapter checkpoint") {
    const SmokeRun& run = smoke_run();
    Checkpoint ck = Checkpoint::load(run.final_ckpt);
    CHECK(ck.step == run.cfg.max_steps);
    CHECK_FALSE(ck.codec_params.empty());
    CHECK_FALSE(ck.denoiser_params.empty());
    CHECK_FALSE(ck.adapter_params.empty());
    CHECK_FALSE(ck.opt_m.empty());
    CHECK(ck.codec_latent_scale > 0.0);

    ModelBundle bundle = ModelBundle::from_checkpoint(run.final_ckpt);
    CHECK(bundle.cfg.fingerprint() == ck.fingerprint);
}

TEST_CASE("metrics log covers every eval boundary exactly once") {
    const SmokeRun& run = smoke_run();
    auto rows = read_metrics(run.root + "/run/metrics.log");
    std::map<long, int> eval_counts;
    long step_rows = 0;
    for (const auto& r : rows) {
        if (r.tag == "eval") eval_counts[r.step]++;
        else if (r.tag == "step") step_rows++;
    }
    CHECK(step_rows == run.cfg.max_steps);
    REQUIRE(eval_counts.count(0) == 1);
    for (long s = run.cfg.eval_every; s <= run.cfg.max_steps; s += run.cfg.eval_every) {
        REQUIRE(eval_counts.count(s) == 1);
        REQUIRE(eval_counts[s] == 1);
    }
    CHECK(eval_counts.size() == static_cast<size_t>(1 + run.cfg.max_steps / run.cfg.eval_every));
}

TEST_CASE("pretraining reduces the held-out diffusion loss") {
    // fixed (sample, t, eps) draws scored under fresh weights and under the
    // pretrained checkpoint; the pretrained denoiser must be strictly better
    const SmokeRun& run = smoke_run();
    ModelBundle fresh = ModelBundle::fresh(run.cfg);
    ModelBundle trained = ModelBundle::from_checkpoint(run.pretrain_ckpt);
    DatasetReader reader(run.test_dir);
    Rng rng(77);
    double fresh_loss = 0.0, trained_loss = 0.0;
    for (int i = 0; i < 8; i++) {
        SyntheticSample s = reader.load(i);
        const Tensor z0 = trained.codec->encode(s.image);
        const int t = rng.uniform_int(run.cfg.num_steps);
        Tensor eps(z0.c, z0.h, z0.w);
        for (double& v : eps.data) v = rng.normal();
        const Tensor z_t = forward_diffuse(z0, t, eps, trained.schedule);
        fresh_loss += loss_diff(eps, denoise(*fresh.denoiser, z_t, t, s.class_id));
        trained_loss += loss_diff(eps, denoise(*trained.denoiser, z_t, t, s.class_id));
    }
    CHECK(trained_loss < fresh_loss);
}

TEST_CASE("adapter training moves the zero-initialized heads") {
    const SmokeRun& run = smoke_run();
    ModelBundle bundle = ModelBundle::from_checkpoint(run.final_ckpt);
    double head_mass = 0.0;
    for (int l = 0; l < 4; l++) {
        for (double v : bundle.adapter->heads[l].weight.v) head_mass += std::fabs(v);
    }
    CHECK(head_mass > 0.0);
    // conditioning is no longer a no-op
    Rng rng(78);
    Tensor edges(1, 64, 64);
    for (int i = 0; i < 300; i++) edges.data[rng.uniform_int(64 * 64)] = 1.0;
    FeaturePyramid pyr = adapter_forward(*bundle.adapter, edges);
    CHECK_FALSE(pyr.all_zero());
}

TEST_CASE("loss report rows keep the exact combination") {
    const SmokeRun& run = smoke_run();
    auto rows = read_metrics(run.root + "/run/metrics.log");
    REQUIRE_FALSE(rows.empty());
    for (const auto& r : rows) {
        REQUIRE(r.l_total == doctest::Approx(r.l_diff + run.cfg.lambda * r.l_sim).epsilon(1e-6));
    }
}

TEST_CASE("lambda 0 reduces the objective to the pure diffusion loss") {
    const SmokeRun& run = smoke_run();
    TrainConfig cfg = run.cfg;
    cfg.lambda = 0.0;
    cfg.max_steps = 10;
    cfg.eval_every = 5;
    const std::string out = run.root + "/run_lambda0";
    const std::string ckpt = train(cfg, run.data_dir, run.pretrain_ckpt, out);
    auto rows = read_metrics(out + "/metrics.log");
    REQUIRE_FALSE(rows.empty());
    for (const auto& r : rows) REQUIRE(r.l_total == r.l_diff);
    CHECK(fs::exists(ckpt));
}

TEST_CASE("sum reduction rescales the similarity term") {
    const SmokeRun& run = smoke_run();
    TrainConfig cfg = run.cfg;
    cfg.sim_reduction = "sum";
    cfg.max_steps = 4;
    cfg.eval_every = 2;
    const std::string out = run.root + "/run_sum";
    train(cfg, run.data_dir, run.pretrain_ckpt, out);
    auto sum_rows = read_metrics(out + "/metrics.log");
    auto mean_rows = read_metrics(run.root + "/run/metrics.log");
    REQUIRE_FALSE(sum_rows.empty());
    // the same underlying errors, scaled up by the masked element count
    CHECK(sum_rows[0].l_sim > mean_rows[0].l_sim);
    for (const auto& r : sum_rows) {
        REQUIRE(r.l_total == doctest::Approx(r.l_diff + cfg.lambda * r.l_sim).epsilon(1e-6));
    }
}

TEST_CASE("training is reproducible byte for byte") {
    const SmokeRun& run = smoke_run();
    TrainConfig cfg = run.cfg;
    cfg.max_steps = 12;
    cfg.eval_every = 6;
    const std::string out1 = run.root + "/repro1", out2 = run.root + "/repro2";
    const std::string c1 = train(cfg, run.data_dir, run.pretrain_ckpt, out1);
    const std::string c2 = train(cfg, run.data_dir, run.pretrain_ckpt, out2);
    CHECK(slurp(c1) == slurp(c2));
    CHECK(slurp(out1 + "/metrics.log") == slurp(out2 + "/metrics.log"));
}

TEST_CASE("finished runs are returned as-is on re-entry") {
    const SmokeRun& run = smoke_run();
    TrainConfig cfg = run.cfg;
    cfg.max_steps = 12;
    cfg.eval_every = 6;
    const std::string out = run.root + "/resume";
    train(cfg, run.data_dir, run.pretrain_ckpt, out);
    const std::string again = train(cfg, run.data_dir, run.pretrain_ckpt, out);
    Checkpoint ck = Checkpoint::load(again);
    CHECK(ck.step == cfg.max_steps);
}

TEST_CASE("train refuses a run directory from a different config") {
    const SmokeRun& run = smoke_run();
    TrainConfig cfg = run.cfg;
    cfg.max_steps = 6;
    cfg.eval_every = 3;
    const std::string out = run.root + "/conflict";
    train(cfg, run.data_dir, run.pretrain_ckpt, out);
    TrainConfig other = cfg;
    other.lambda = 0.0;
    CHECK_THROWS_AS(train(other, run.data_dir, run.pretrain_ckpt, out), std::runtime_error);
}

TEST_CASE("non-finite losses abort with a batch dump") {
    const SmokeRun& run = smoke_run();
    Checkpoint pre = Checkpoint::load(run.pretrain_ckpt);
    pre.denoiser_params[0] = std::nan("");
    const std::string bad_ckpt = run.root + "/bad_pretrain.ldc";
    pre.save(bad_ckpt);
    TrainConfig cfg = run.cfg;
    cfg.max_steps = 3;
    const std::string out = run.root + "/nan_run";
    CHECK_THROWS_AS(train(cfg, run.data_dir, bad_ckpt, out), std::runtime_error);
    CHECK(fs::exists(out + "/nan_dump.txt"));
}

TEST_CASE("pretraining separates class embeddings") {
    const SmokeRun& run = smoke_run();
    ModelBundle bundle = ModelBundle::from_checkpoint(run.pretrain_ckpt);
    for (int a = 0; a < bundle.cfg.num_classes; a++) {
        for (int b = a + 1; b < bundle.cfg.num_classes; b++) {
            const auto ea = bundle.denoiser->embed_class(a);
            const auto eb = bundle.denoiser->embed_class(b);
            double dist = 0.0;
            for (size_t i = 0; i < ea.size(); i++) dist += (ea[i] - eb[i]) * (ea[i] - eb[i]);
            REQUIRE(dist > 0.0);
        }
    }
}

TEST_CASE("pretrain stages refuse mismatched architectures") {
    const SmokeRun& run = smoke_run();
    TrainConfig other = run.cfg;
    other.base_width = 16;
    CHECK_THROWS_AS(pretrain_denoiser(other, run.data_dir, run.codec_ckpt, run.root + "/x.ldc"),
                    std::runtime_error);
    CHECK_THROWS_AS(train(other, run.data_dir, run.pretrain_ckpt, run.root + "/y"),
                    std::runtime_error);
}

TEST_CASE("quadrant experiment produces a full paired report") {
    const SmokeRun& run = smoke_run();
    ModelBundle bundle = ModelBundle::from_checkpoint(run.final_ckpt);
    const std::string report = run.root + "/quadrant.tsv";
    QuadrantResult q = quadrant_experiment(bundle, run.test_dir, 6, true, 7, report);
    CHECK(q.reports.size() == 6);
    CHECK(q.agg.in_count == 6);
    CHECK(q.agg.out_count == 6);
    for (const auto& r : q.reports) {
        REQUIRE(r.in_defined);
        REQUIRE(r.out_defined);
        REQUIRE(r.dmse_in >= 0.0);
        REQUIRE(r.dmse_in <= 1.0);
        REQUIRE(r.dmse_out >= 0.0);
        REQUIRE(r.dmse_out <= 1.0);
        REQUIRE(r.mask_area == 64 * 32);
    }
    const std::string text = slurp(report);
    CHECK(text.find("aggregate dmse_in") != std::string::npos);
    CHECK(text.find("pixel-stats generated") != std::string::npos);

    // identical seeds and checkpoint give identical results
    QuadrantResult q2 = quadrant_experiment(bundle, run.test_dir, 6, true, 7, "");
    for (size_t i = 0; i < q.reports.size(); i++) {
        REQUIRE(q.reports[i].dmse_in == q2.reports[i].dmse_in);
    }
}

TEST_CASE("quadrant condition and mask follow the protocol layout") {
    Tensor edges(1, 8, 8, 1.0);
    Tensor cond = quadrant_condition(edges);
    for (int y = 0; y < 8; y++) {
        for (int x = 0; x < 8; x++) {
            const bool upper_right = x >= 4 && y < 4;
            REQUIRE(cond.at(0, y, x) == (upper_right ? 1.0 : 0.0));
        }
    }
    RoiMask m = quadrant_mask(8, 8);
    CHECK(m.area() == 32.0);
    CHECK(m.data.at(0, 0, 0) == 0.0);
    CHECK(m.data.at(0, 7, 4) == 1.0);
}

TEST_CASE("infer masks features, samples and scores against the condition") {
    const SmokeRun& run = smoke_run();
    DatasetReader reader(run.test_dir);
    SyntheticSample s = reader.load(0);
    const std::string edges_png = run.root + "/cond.png";
    const std::string mask_png = run.root + "/mask.png";
    save_binary_png(edges_png, s.edges);
    save_binary_png(mask_png, s.mask.data);

    InferResult r = infer(run.final_ckpt, edges_png, mask_png, 1, 5, run.root + "/out");
    CHECK(fs::exists(r.image_path));
    CHECK(fs::exists(r.edges_path));
    CHECK(r.report.in_defined);
    Tensor img = load_image_png(r.image_path);
    CHECK(img.h == run.cfg.image_size);

    // all-zero mask: the output is independent of the edge content
    Tensor blank(1, 64, 64, 0.0);
    save_binary_png(mask_png, blank);
    Tensor other_edges(1, 64, 64, 0.0);
    for (int x = 0; x < 64; x++) other_edges.at(0, 32, x) = 1.0;
    const std::string edges2_png = run.root + "/cond2.png";
    save_binary_png(edges2_png, other_edges);
    InferResult z1 = infer(run.final_ckpt, edges_png, mask_png, 1, 5, run.root + "/z1");
    InferResult z2 = infer(run.final_ckpt, edges2_png, mask_png, 1, 5, run.root + "/z2");
    CHECK(slurp(z1.image_path) == slurp(z2.image_path));

    // full mask: identical to unmasked conditioning
    Tensor full(1, 64, 64, 1.0);
    save_binary_png(mask_png, full);
    InferResult f1 = infer(run.final_ckpt, edges_png, mask_png, 1, 5, run.root + "/f1");
    ModelBundle bundle = ModelBundle::from_checkpoint(run.final_ckpt);
    FeaturePyramid feats = adapter_forward(*bundle.adapter, s.edges);
    Tensor direct = bundle.codec->decode(bundle.sample_latent(5, 1, &feats));
    Tensor via_infer = load_image_png(f1.image_path);
    CHECK(via_infer.max_abs_diff(direct) <= 0.5 / 255.0 + 1e-12);

    CHECK_THROWS_AS(infer(run.final_ckpt, edges_png, mask_png, 9, 5, run.root + "/bad"),
                    std::invalid_argument);
}

TEST_CASE("eval-dmse walks a directory triplet") {
    const SmokeRun& run = smoke_run();
    const fs::path root = fs::path(run.root) / "dmse_dirs";
    fs::create_directories(root / "gt");
    fs::create_directories(root / "gen");
    fs::create_directories(root / "masks");
    DatasetReader reader(run.test_dir);
    for (int i = 0; i < 4; i++) {
        SyntheticSample s = reader.load(i);
        char name[16];
        std::snprintf(name, sizeof(name), "%03d.png", i);
        save_binary_png((root / "gt" / name).string(), s.edges);
        SyntheticSample other = reader.load((i + 1) % 4);
        save_binary_png((root / "gen" / name).string(), other.edges);
        save_binary_png((root / "masks" / name).string(), s.mask.data);
    }
    const std::string report = (root / "report.tsv").string();
    DmseAggregate agg = eval_dmse_dir((root / "gt").string(), (root / "gen").string(),
                                      (root / "masks").string(), report);
    CHECK(agg.in_count > 0);
    const std::string text = slurp(report);
    CHECK(text.find("sample_id") != std::string::npos);
    CHECK(text.find("000.png") != std::string::npos);
}

TEST_CASE("single-cell ablation grid equals a direct quadrant call") {
    const SmokeRun& run = smoke_run();
    TrainConfig base = run.cfg;
    base.max_steps = 8;
    base.eval_every = 4;
    const std::string out = run.root + "/ablate";
    std::vector<AblationOverride> grid = {{base.lambda, base.learning_rate, base.filter}};
    auto rows = run_ablation(base, grid, run.data_dir, run.test_dir, out, 5, false);
    REQUIRE(rows.size() == 1);
    CHECK(fs::exists(out + "/ablation.tsv"));

    ModelBundle bundle = ModelBundle::from_checkpoint(rows[0].checkpoint_path);
    QuadrantResult direct = quadrant_experiment(bundle, run.test_dir, 5, false,
                                                static_cast<uint64_t>(base.seed), "");
    CHECK(rows[0].agg.in_mean == direct.agg.in_mean);
    CHECK(rows[0].agg.out_mean == direct.agg.out_mean);

    // shared-seed pairing: a second cell differs only in lambda
    std::vector<AblationOverride> pair = {{0.0, base.learning_rate, base.filter},
                                          {1e-3, base.learning_rate, base.filter}};
    auto rows2 = run_ablation(base, pair, run.data_dir, run.test_dir, out + "_pair", 5, false);
    REQUIRE(rows2.size() == 2);
    TrainConfig a = Checkpoint::load(rows2[0].checkpoint_path).config();
    TrainConfig b = Checkpoint::load(rows2[1].checkpoint_path).config();
    CHECK(a.seed == b.seed);
    CHECK(a.lambda != b.lambda);
    a.lambda = b.lambda;
    CHECK(a.to_json() == b.to_json());
}

TEST_CASE("geometric codec drives the full staged pipeline") {
    TrainConfig cfg = smoke_config();
    cfg.codec = "geometric";
    cfg.image_size = 32;
    cfg.codec_pretrain_steps = 1;  // passthrough stage
    cfg.denoiser_pretrain_steps = 30;
    cfg.max_steps = 10;
    cfg.eval_every = 5;
    cfg.base_width = 8;
    cfg.adapter_width = 8;
    cfg.validate();
    CHECK(cfg.latent_channels() == 48);
    CHECK(cfg.latent_size() == 8);

    const fs::path root = fs::temp_directory_path() / "ldc_geo_pipeline";
    fs::remove_all(root);
    fs::create_directories(root);
    generate_dataset((root / "train").string(), 404, 24, cfg);
    pretrain_codec(cfg, (root / "train").string(), (root / "codec.ldc").string());
    pretrain_denoiser(cfg, (root / "train").string(), (root / "codec.ldc").string(),
                      (root / "pre.ldc").string());
    const std::string ckpt =
        train(cfg, (root / "train").string(), (root / "pre.ldc").string(), (root / "run").string());

    ModelBundle bundle = ModelBundle::from_checkpoint(ckpt);
    CHECK(bundle.codec->kind() == "geometric");
    QuadrantResult q = quadrant_experiment(bundle, (root / "train").string(), 3, true, 5, "");
    CHECK(q.reports.size() == 3);
    // exact codec: decoding an encoded image round-trips bit-exactly
    DatasetReader reader((root / "train").string());
    Tensor img = reader.load(0).image;
    CHECK(bundle.codec->decode(bundle.codec->encode(img)).max_abs_diff(img) == 0.0);
}

TEST_CASE("training-time mask consistency: one mask source per sample") {
    // the latent-resolution loss mask is the first pyramid level of the very
    // mask applied to the features
    const SmokeRun& run = smoke_run();
    DatasetReader reader(run.data_dir);
    SyntheticSample s = reader.load(0);
    ModelBundle bundle = ModelBundle::from_checkpoint(run.final_ckpt);
    s.mask.build_pyramid(bundle.denoiser->level_dims());
    auto direct = downsample_mask(s.mask, {{bundle.cfg.latent_size(), bundle.cfg.latent_size()}});
    CHECK(s.mask.pyramid[0].max_abs_diff(direct[0]) == 0.0);
}

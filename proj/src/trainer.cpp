#include "ldc/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "ldc/objective.hpp"

namespace fs = std::filesystem;

namespace ldc {

namespace {

constexpr int kEvalBatch = 8;

// Micro-batches fan out over two fixed worker lanes (sample index parity).
// Each lane accumulates into its own clone's gradients in index order, and
// the lanes reduce in a fixed order afterwards, so results are bit-identical
// for any thread count.
constexpr int kLanes = 2;

template <typename Net>
void copy_params(Net& dst, Net& src) {
    auto pd = dst.params();
    auto ps = src.params();
    for (size_t i = 0; i < pd.size(); i++) pd[i]->v = ps[i]->v;
}

template <typename Net>
void reduce_grads(Net& master, std::vector<std::unique_ptr<Net>>& lanes) {
    auto pm = master.params();
    for (auto& lane : lanes) {
        auto pl = lane->params();
        for (size_t i = 0; i < pm.size(); i++) {
            for (size_t j = 0; j < pm[i]->size(); j++) pm[i]->g[j] += pl[i]->g[j];
        }
    }
}

Tensor tensor_randn(Rng& rng, int c, int h, int w) {
    Tensor t(c, h, w);
    for (double& v : t.data) v = rng.normal();
    return t;
}

// frozen per-sample training cache: latent, condition, mask, class.
// Binary maps are kept as bytes; tensors are rebuilt per use.
struct CachedSample {
    Tensor z0;
    std::vector<uint8_t> edges;
    std::vector<uint8_t> mask;
    std::vector<Tensor> mask_pyramid;
    int class_id = 0;
};

std::vector<uint8_t> to_bytes(const Tensor& map) {
    std::vector<uint8_t> b(map.size());
    for (size_t i = 0; i < map.size(); i++) b[i] = map.data[i] != 0.0 ? 1 : 0;
    return b;
}

Tensor to_map(const std::vector<uint8_t>& b, int h, int w) {
    Tensor t(1, h, w);
    for (size_t i = 0; i < b.size(); i++) t.data[i] = b[i];
    return t;
}

std::vector<CachedSample> build_cache(const DatasetReader& reader, const Codec& codec,
                                      const std::vector<std::pair<int, int>>& level_dims) {
    std::vector<CachedSample> cache(reader.count);
#pragma omp parallel for schedule(dynamic, 8) num_threads(kLanes)
    for (int i = 0; i < reader.count; i++) {
        SyntheticSample s = reader.load(i);
        cache[i].z0 = codec.encode(s.image);
        cache[i].edges = to_bytes(s.edges);
        cache[i].mask = to_bytes(s.mask.data);
        s.mask.build_pyramid(level_dims);
        cache[i].mask_pyramid = std::move(s.mask.pyramid);
        cache[i].class_id = s.class_id;
    }
    return cache;
}

void log_line(std::ostream& os, const char* tag, long step, const LossReport& r) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s\t%ld\t%.8f\t%.8f\t%.8f\n", tag, step, r.l_diff, r.l_sim,
                  r.l_total);
    os << buf;
    os.flush();
}

}  // namespace

AdapterConfig adapter_config_from(const TrainConfig& cfg) {
    AdapterConfig a;
    a.image_size = cfg.image_size;
    a.latent_size = cfg.latent_size();
    a.width = cfg.adapter_width;
    a.depth = cfg.adapter_depth;
    for (int l = 0; l < 4; l++) a.level_channels[l] = cfg.base_width * cfg.channel_mult[l];
    return a;
}

DenoiserConfig denoiser_config_from(const TrainConfig& cfg) {
    DenoiserConfig d;
    d.latent_channels = cfg.latent_channels();
    d.latent_size = cfg.latent_size();
    d.base_width = cfg.base_width;
    d.channel_mult = cfg.channel_mult;
    d.num_classes = cfg.num_classes;
    return d;
}

ModelBundle ModelBundle::fresh(const TrainConfig& cfg) {
    cfg.validate();
    ModelBundle b;
    b.cfg = cfg;
    b.codec = make_codec(cfg.codec, cfg.codec_width, static_cast<uint64_t>(cfg.seed));
    b.denoiser = std::make_unique<DenoiserNet>(denoiser_config_from(cfg),
                                               static_cast<uint64_t>(cfg.seed));
    b.adapter = std::make_unique<AdapterNet>(adapter_config_from(cfg),
                                             static_cast<uint64_t>(cfg.seed));
    b.schedule = build_schedule(cfg.num_steps, cfg.beta_start, cfg.beta_end);
    return b;
}

ModelBundle ModelBundle::from_checkpoint(const std::string& path) {
    Checkpoint ck = Checkpoint::load(path);
    ModelBundle b = fresh(ck.config());
    if (!ck.codec_params.empty()) {
        auto* sd = dynamic_cast<SdLikeCodec*>(b.codec.get());
        if (!sd) throw std::runtime_error("checkpoint holds codec weights but codec is geometric");
        unflatten_params(ck.codec_params, sd->params());
        sd->latent_scale = ck.codec_latent_scale;
    }
    if (!ck.denoiser_params.empty()) {
        unflatten_params(ck.denoiser_params, b.denoiser->params());
    }
    if (!ck.adapter_params.empty()) {
        unflatten_params(ck.adapter_params, b.adapter->params());
    }
    return b;
}

Tensor ModelBundle::sample_latent(uint64_t seed, const std::optional<int>& class_id,
                                  const FeaturePyramid* features) const {
    return ancestral_sample(denoiser->as_denoise_fn(), cfg.latent_channels(), cfg.latent_size(),
                            cfg.latent_size(), schedule, seed, class_id, features);
}

/*------------------------------ codec pretrain ----------------------------*/

void pretrain_codec(const TrainConfig& cfg, const std::string& dataset_dir,
                    const std::string& out_ckpt) {
    cfg.validate();
    Checkpoint ck;
    ck.config_json = cfg.to_json();
    ck.fingerprint = cfg.fingerprint();

    if (cfg.codec == "geometric") {
        // nothing to train; the checkpoint just records the configuration
        ck.save(out_ckpt);
        return;
    }

    DatasetReader reader(dataset_dir);
    SdLikeCodec codec(cfg.codec_width, static_cast<uint64_t>(cfg.seed));
    auto params = codec.params();
    nn::AdamW opt;
    opt.lr = cfg.codec_pretrain_lr;
    Rng rng(mix_seed(static_cast<uint64_t>(cfg.seed), 0x10dec));

    // keep the whole set in memory; images are small
    std::vector<Tensor> images(reader.count);
    for (int i = 0; i < reader.count; i++) images[i] = reader.load(i).image;

    std::vector<std::unique_ptr<SdLikeCodec>> lanes;
    for (int w = 0; w < kLanes; w++) {
        lanes.push_back(std::make_unique<SdLikeCodec>(cfg.codec_width, 0));
    }

    const int batch = cfg.batch_size * cfg.grad_accum;
    std::vector<int> draw(batch);
    std::vector<double> sample_loss(batch);
    for (int step = 1; step <= cfg.codec_pretrain_steps; step++) {
        nn::AdamW::zero_grad(params);
        for (auto& lane : lanes) {
            copy_params(*lane, codec);
            nn::AdamW::zero_grad(lane->params());
        }
        for (int b = 0; b < batch; b++) draw[b] = rng.uniform_int(reader.count);
#pragma omp parallel for schedule(static, 1) num_threads(kLanes)
        for (int b = 0; b < batch; b++) {
            SdLikeCodec& lane = *lanes[b % kLanes];
            const Tensor& img = images[draw[b]];
            nn::Tape tape;
            Tensor recon = lane.forward_recon(img, tape);
            Tensor d(recon.c, recon.h, recon.w);
            const double scale = 2.0 / (static_cast<double>(recon.size()) * batch);
            double l = 0.0;
            for (size_t i = 0; i < recon.size(); i++) {
                const double e = recon.data[i] - img.data[i];
                l += e * e;
                d.data[i] = scale * e;
            }
            sample_loss[b] = l / static_cast<double>(recon.size());
            lane.backward_recon(d, tape);
        }
        reduce_grads(codec, lanes);
        opt.step(params);
        if (step % 500 == 0 || step == 1) {
            double loss = 0.0;
            for (int b = 0; b < batch; b++) loss += sample_loss[b];
            std::cout << "codec step " << step << " recon_mse " << loss / batch << "\n";
        }
    }

    // standardize latents to unit scale for diffusion
    double sq = 0.0;
    long n = 0;
    const int probe = std::min(reader.count, 256);
    for (int i = 0; i < probe; i++) {
        Tensor z = codec.encode(images[i]);
        for (double v : z.data) sq += v * v;
        n += static_cast<long>(z.size());
    }
    const double std = std::sqrt(sq / static_cast<double>(n));
    codec.latent_scale = std > 1e-6 ? 1.0 / std : 1.0;

    ck.codec_params = flatten_params(params);
    ck.codec_latent_scale = codec.latent_scale;
    ck.rng_state = rng.state_str();
    ck.save(out_ckpt);
}

/*----------------------------- denoiser pretrain --------------------------*/

void pretrain_denoiser(const TrainConfig& cfg, const std::string& dataset_dir,
                       const std::string& codec_ckpt, const std::string& out_ckpt) {
    cfg.validate();
    Checkpoint prev = Checkpoint::load(codec_ckpt);
    prev.require_config(cfg);

    ModelBundle bundle = ModelBundle::fresh(cfg);
    if (!prev.codec_params.empty()) {
        auto* sd = dynamic_cast<SdLikeCodec*>(bundle.codec.get());
        unflatten_params(prev.codec_params, sd->params());
        sd->latent_scale = prev.codec_latent_scale;
    }

    DatasetReader reader(dataset_dir);
    std::vector<CachedSample> cache =
        build_cache(reader, *bundle.codec, bundle.denoiser->level_dims());

    auto params = bundle.denoiser->params();
    std::cout << "denoiser parameters: " << bundle.denoiser->param_count() << "\n";
    nn::AdamW opt;
    opt.lr = cfg.denoiser_pretrain_lr;
    opt.weight_decay = cfg.weight_decay;
    Rng rng(mix_seed(static_cast<uint64_t>(cfg.seed), 0x20de0));

    std::vector<std::unique_ptr<DenoiserNet>> lanes;
    for (int w = 0; w < kLanes; w++) {
        lanes.push_back(std::make_unique<DenoiserNet>(denoiser_config_from(cfg), 0));
    }

    const int micro_total = cfg.batch_size * cfg.grad_accum;
    struct Draw {
        const CachedSample* s;
        int t;
        Tensor eps;
        std::optional<int> cls;
    };
    std::vector<Draw> draws(micro_total);
    std::vector<double> sample_loss(micro_total);
    for (int step = 1; step <= cfg.denoiser_pretrain_steps; step++) {
        nn::AdamW::zero_grad(params);
        for (auto& lane : lanes) {
            copy_params(*lane, *bundle.denoiser);
            nn::AdamW::zero_grad(lane->params());
        }
        for (int b = 0; b < micro_total; b++) {
            const CachedSample& s = cache[rng.uniform_int(reader.count)];
            draws[b].s = &s;
            draws[b].t = rng.uniform_int(cfg.num_steps);
            draws[b].eps = tensor_randn(rng, s.z0.c, s.z0.h, s.z0.w);
            draws[b].cls = s.class_id;
            if (rng.uniform() < cfg.class_dropout) draws[b].cls.reset();
        }
#pragma omp parallel for schedule(static, 1) num_threads(kLanes)
        for (int b = 0; b < micro_total; b++) {
            DenoiserNet& lane = *lanes[b % kLanes];
            const Draw& d = draws[b];
            const Tensor z_t = forward_diffuse(d.s->z0, d.t, d.eps, bundle.schedule);
            nn::Tape tape;
            Tensor eps_hat = lane.forward(z_t, d.t, d.cls, nullptr, tape);
            sample_loss[b] = loss_diff(d.eps, eps_hat);
            Tensor g = loss_diff_grad(d.eps, eps_hat);
            for (double& v : g.data) v /= micro_total;
            lane.backward(g, tape, /*train=*/true, nullptr);
        }
        reduce_grads(*bundle.denoiser, lanes);
        opt.step(params);
        if (step % 1000 == 0 || step == 1) {
            double loss = 0.0;
            for (int b = 0; b < micro_total; b++) loss += sample_loss[b];
            std::cout << "denoiser step " << step << " l_diff " << loss / micro_total << "\n";
        }
    }

    Checkpoint ck;
    ck.config_json = cfg.to_json();
    ck.fingerprint = cfg.fingerprint();
    ck.codec_params = prev.codec_params;
    ck.codec_latent_scale = prev.codec_latent_scale;
    ck.denoiser_params = flatten_params(params);
    ck.opt_m.clear();
    ck.opt_v.clear();
    ck.rng_state = rng.state_str();
    ck.step = cfg.denoiser_pretrain_steps;
    ck.save(out_ckpt);
}

/*------------------------------ adapter training --------------------------*/

std::string train(const TrainConfig& cfg, const std::string& dataset_dir,
                  const std::string& pretrain_ckpt, const std::string& out_dir) {
    cfg.validate();
    fs::create_directories(out_dir);
    const std::string ckpt_path = (fs::path(out_dir) / "checkpoint.ldc").string();
    const std::string metrics_path = (fs::path(out_dir) / "metrics.log").string();

    Checkpoint pre = Checkpoint::load(pretrain_ckpt);
    pre.require_config(cfg);
    if (pre.denoiser_params.empty()) {
        throw std::runtime_error("train: pretrain checkpoint lacks denoiser weights");
    }

    ModelBundle bundle = ModelBundle::fresh(cfg);
    if (!pre.codec_params.empty()) {
        auto* sd = dynamic_cast<SdLikeCodec*>(bundle.codec.get());
        unflatten_params(pre.codec_params, sd->params());
        sd->latent_scale = pre.codec_latent_scale;
    }
    unflatten_params(pre.denoiser_params, bundle.denoiser->params());

    auto params = bundle.adapter->params();
    std::cout << "adapter parameters: " << bundle.adapter->param_count()
              << " (denoiser " << bundle.denoiser->param_count() << " frozen)\n";
    nn::AdamW opt;
    opt.lr = cfg.learning_rate;
    opt.weight_decay = cfg.weight_decay;
    Rng rng(mix_seed(static_cast<uint64_t>(cfg.seed), 0x30ada));

    long start_step = 0;
    bool resumed = false;
    if (fs::exists(ckpt_path)) {
        Checkpoint ck = Checkpoint::load(ckpt_path);
        if (ck.fingerprint != cfg.fingerprint()) {
            throw std::runtime_error("train: " + out_dir + " holds a checkpoint from a different run");
        }
        if (ck.step >= 1) {
            unflatten_params(ck.adapter_params, params);
            if (!ck.opt_m.empty()) {
                opt.m.resize(params.size());
                opt.v.resize(params.size());
                size_t pos = 0;
                for (size_t p = 0; p < params.size(); p++) {
                    opt.m[p].assign(ck.opt_m.begin() + pos, ck.opt_m.begin() + pos + params[p]->size());
                    opt.v[p].assign(ck.opt_v.begin() + pos, ck.opt_v.begin() + pos + params[p]->size());
                    pos += params[p]->size();
                }
            }
            opt.step_count = ck.opt_step;
            rng.set_state_str(ck.rng_state);
            start_step = ck.step;
            resumed = true;
        }
    }
    if (start_step >= cfg.max_steps) return ckpt_path;

    DatasetReader reader(dataset_dir);
    if (reader.count <= kEvalBatch) throw std::runtime_error("train: dataset too small");
    std::vector<CachedSample> cache =
        build_cache(reader, *bundle.codec, bundle.denoiser->level_dims());
    const int train_count = reader.count - kEvalBatch;  // tail held out for eval records

    const FilterKind filter = filter_kind_from_string(cfg.filter);
    std::ofstream metrics(metrics_path, resumed ? std::ios::app : std::ios::trunc);
    if (!metrics) throw std::runtime_error("train: cannot write " + metrics_path);

    const int micro_total = cfg.batch_size * cfg.grad_accum;

    std::vector<std::unique_ptr<AdapterNet>> lanes;
    for (int w = 0; w < kLanes; w++) {
        lanes.push_back(std::make_unique<AdapterNet>(adapter_config_from(cfg), 0));
    }

    // one micro sample: forward, losses, backward into the given adapter.
    // The frozen denoiser is shared; its backward only reads weights.
    auto run_sample = [&](AdapterNet& adapter, const CachedSample& s, int t, const Tensor& eps,
                          const std::optional<int>& cls, bool backprop) -> LossReport {
        const Tensor z_t = forward_diffuse(s.z0, t, eps, bundle.schedule);

        Tensor cond = to_map(s.edges, cfg.image_size, cfg.image_size);
        if (cfg.mask_mode == "edge") {
            for (size_t i = 0; i < cond.size(); i++) cond.data[i] *= s.mask[i];
        }

        nn::Tape tape_a;
        FeaturePyramid pyr = adapter.forward(cond, tape_a);
        FeaturePyramid feats =
            cfg.mask_mode == "feature" ? mask_features(pyr, s.mask_pyramid) : pyr;

        nn::Tape tape_d;
        Tensor eps_hat = bundle.denoiser->forward(z_t, t, cls, &feats, tape_d);

        const double l_diff = loss_diff(eps, eps_hat);
        const Tensor z0_hat = predict_z0(z_t, eps_hat, t, bundle.schedule);
        const Tensor& latent_mask = s.mask_pyramid[0];
        // "sum" undoes the masked-mean normalization (the ablation runner
        // covers either reading of the similarity norm)
        double sim_scale = 1.0;
        if (cfg.sim_reduction == "sum") {
            const int nf = (filter == FilterKind::sobel ? 2 : 1) * s.z0.c;
            sim_scale = nf * latent_mask.sum();
        }
        const double l_sim = sim_scale * loss_sim(s.z0, z0_hat, latent_mask, filter);

        if (backprop) {
            Tensor d_eps = loss_diff_grad(eps, eps_hat);
            if (cfg.lambda > 0.0) {
                const Tensor d_z0 = loss_sim_grad(s.z0, z0_hat, latent_mask, filter);
                const double ab = bundle.schedule.alpha_bars[t];
                const double chain = -std::sqrt(1.0 - ab) / std::sqrt(ab);  // dz0_hat/deps_hat
                for (size_t i = 0; i < d_eps.size(); i++) {
                    d_eps.data[i] += cfg.lambda * sim_scale * chain * d_z0.data[i];
                }
            }
            if (cfg.grad_clip > 0.0) {
                double norm = 0.0;
                for (double v : d_eps.data) norm += v * v;
                norm = std::sqrt(norm);
                if (norm > cfg.grad_clip) {
                    const double scale = cfg.grad_clip / norm;
                    for (double& v : d_eps.data) v *= scale;
                }
            }
            for (double& v : d_eps.data) v /= micro_total;

            FeaturePyramid d_feats;
            bundle.denoiser->backward(d_eps, tape_d, /*train=*/false, &d_feats);
            FeaturePyramid d_pyr =
                cfg.mask_mode == "feature" ? mask_features(d_feats, s.mask_pyramid) : d_feats;
            adapter.backward(d_pyr, tape_a, /*train=*/true);
        }

        LossReport r;
        r.l_diff = l_diff;
        r.l_sim = l_sim;
        r.lambda = cfg.lambda;
        r.l_total = loss_total(l_diff, l_sim, cfg.lambda);
        return r;
    };

    // fixed held-out batch, fixed noise draws: comparable across eval points.
    // Non-finite values are logged as-is; the training loop owns the abort.
    auto eval_record = [&](long step) {
        Rng erng(mix_seed(static_cast<uint64_t>(cfg.seed), 0xe7a1));
        LossReport avg;
        avg.lambda = cfg.lambda;
        for (int b = 0; b < kEvalBatch; b++) {
            const CachedSample& s = cache[train_count + b];
            const int t = erng.uniform_int(cfg.num_steps);
            const Tensor eps = tensor_randn(erng, s.z0.c, s.z0.h, s.z0.w);
            LossReport r = run_sample(*bundle.adapter, s, t, eps, s.class_id, /*backprop=*/false);
            avg.l_diff += r.l_diff;
            avg.l_sim += r.l_sim;
        }
        avg.l_diff /= kEvalBatch;
        avg.l_sim /= kEvalBatch;
        avg.l_total = loss_total(avg.l_diff, avg.l_sim, cfg.lambda);
        log_line(metrics, "eval", step, avg);
    };

    auto write_checkpoint = [&](long step) {
        Checkpoint ck;
        ck.config_json = cfg.to_json();
        ck.fingerprint = cfg.fingerprint();
        ck.codec_params = pre.codec_params;
        ck.codec_latent_scale = pre.codec_latent_scale;
        ck.denoiser_params = pre.denoiser_params;
        ck.adapter_params = flatten_params(params);
        ck.step = step;
        ck.opt_step = opt.step_count;
        ck.rng_state = rng.state_str();
        if (!opt.m.empty()) {
            for (const auto& m : opt.m) ck.opt_m.insert(ck.opt_m.end(), m.begin(), m.end());
            for (const auto& v : opt.v) ck.opt_v.insert(ck.opt_v.end(), v.begin(), v.end());
        }
        ck.save(ckpt_path);
    };

    if (start_step == 0) eval_record(0);

    std::vector<int> batch_idx(micro_total);
    std::vector<int> batch_t(micro_total);
    std::vector<Tensor> batch_eps(micro_total);
    std::vector<std::optional<int>> batch_cls(micro_total);
    std::vector<LossReport> batch_report(micro_total);

    for (long step = start_step + 1; step <= cfg.max_steps; step++) {
        nn::AdamW::zero_grad(params);
        for (auto& lane : lanes) {
            copy_params(*lane, *bundle.adapter);
            nn::AdamW::zero_grad(lane->params());
        }
        for (int b = 0; b < micro_total; b++) {
            batch_idx[b] = rng.uniform_int(train_count);
            const CachedSample& s = cache[batch_idx[b]];
            batch_t[b] = rng.uniform_int(cfg.num_steps);
            batch_eps[b] = tensor_randn(rng, s.z0.c, s.z0.h, s.z0.w);
            batch_cls[b] = s.class_id;
            if (rng.uniform() < cfg.class_dropout) batch_cls[b].reset();
        }
#pragma omp parallel for schedule(static, 1) num_threads(kLanes)
        for (int b = 0; b < micro_total; b++) {
            batch_report[b] = run_sample(*lanes[b % kLanes], cache[batch_idx[b]], batch_t[b],
                                         batch_eps[b], batch_cls[b], /*backprop=*/true);
        }
        LossReport batch_sum;
        for (int b = 0; b < micro_total; b++) {
            const LossReport& r = batch_report[b];
            batch_sum.l_diff += r.l_diff;
            batch_sum.l_sim += r.l_sim;
            if (!std::isfinite(loss_total(r.l_diff, r.l_sim, cfg.lambda))) {
                std::ofstream dump(fs::path(out_dir) / "nan_dump.txt");
                dump << "step " << step << "\n";
                for (int i = 0; i <= b; i++) {
                    dump << "sample " << batch_idx[i] << " t " << batch_t[i] << "\n";
                }
                dump << "l_diff " << r.l_diff << " l_sim " << r.l_sim << "\n";
                throw std::runtime_error("train: non-finite loss at step " + std::to_string(step) +
                                         ", batch dumped to nan_dump.txt");
            }
        }
        reduce_grads(*bundle.adapter, lanes);
        opt.step(params);

        LossReport avg = make_loss_report(batch_sum.l_diff / micro_total,
                                          batch_sum.l_sim / micro_total, cfg.lambda);
        log_line(metrics, "step", step, avg);

        if (step % cfg.eval_every == 0) {
            eval_record(step);
            write_checkpoint(step);
        }
    }
    if (cfg.max_steps % cfg.eval_every != 0) write_checkpoint(cfg.max_steps);
    return ckpt_path;
}

}  // namespace ldc

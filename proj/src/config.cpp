#include "ldc/config.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace ldc {

using nlohmann::json;

void TrainConfig::validate() const {
    auto require = [](bool ok, const char* msg) {
        if (!ok) throw std::invalid_argument(std::string("config: ") + msg);
    };
    require(image_size > 0 && image_size % 8 == 0, "image_size must be a positive multiple of 8");
    require(codec == "sd-like" || codec == "geometric", "codec must be sd-like or geometric");
    require(codec_width > 0, "codec_width must be positive");
    require(num_steps >= 1, "num_steps must be >= 1");
    require(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0,
            "betas must satisfy 0 < beta_start <= beta_end < 1");
    require(base_width > 0, "base_width must be positive");
    for (int m : channel_mult) require(m > 0, "channel_mult entries must be positive");
    require(num_classes >= 1, "num_classes must be >= 1");
    require(adapter_width > 0 && adapter_depth > 0, "adapter dims must be positive");
    require(learning_rate > 0.0, "learning_rate must be positive");
    require(weight_decay >= 0.0, "weight_decay must be >= 0");
    require(lambda >= 0.0, "lambda must be >= 0");
    require(grad_clip >= 0.0, "grad_clip must be >= 0");
    require(batch_size > 0 && grad_accum > 0, "batch sizes must be positive");
    require(max_steps > 0 && eval_every > 0, "step counts must be positive");
    require(filter == "sobel" || filter == "laplace", "filter must be sobel or laplace");
    require(sim_reduction == "mean" || sim_reduction == "sum", "sim_reduction must be mean or sum");
    require(mask_min_area_fraction > 0.0 && mask_min_area_fraction <= 1.0,
            "mask_min_area_fraction must be in (0,1]");
    require(mask_max_rects >= 1 && mask_max_rects <= 3, "mask_max_rects must be in [1,3]");
    require(mask_mode == "feature" || mask_mode == "edge" || mask_mode == "none",
            "mask_mode must be feature, edge or none");
    require(canny_low >= 0.0 && canny_low <= canny_high, "canny thresholds must satisfy 0 <= low <= high");
    require(latent_size() % 8 == 0, "image_size / codec factor must be divisible by 8");
    require(codec_pretrain_steps > 0 && denoiser_pretrain_steps > 0, "pretrain steps must be positive");
    require(codec_pretrain_lr > 0.0 && denoiser_pretrain_lr > 0.0, "pretrain lrs must be positive");
    require(class_dropout >= 0.0 && class_dropout <= 1.0, "class_dropout must be in [0,1]");
}

std::string TrainConfig::to_json() const {
    json j;
    j["image_size"] = image_size;
    j["codec"] = codec;
    j["codec_width"] = codec_width;
    j["schedule"] = {{"num_steps", num_steps}, {"beta_start", beta_start}, {"beta_end", beta_end}};
    j["denoiser"] = {{"base_width", base_width},
                     {"channel_mult", channel_mult},
                     {"num_classes", num_classes}};
    j["adapter"] = {{"width", adapter_width}, {"depth", adapter_depth}};
    j["learning_rate"] = learning_rate;
    j["weight_decay"] = weight_decay;
    j["lambda"] = lambda;
    j["grad_clip"] = grad_clip;
    j["batch_size"] = batch_size;
    j["grad_accum"] = grad_accum;
    j["max_steps"] = max_steps;
    j["eval_every"] = eval_every;
    j["seed"] = seed;
    j["filter"] = filter;
    j["sim_reduction"] = sim_reduction;
    j["mask"] = {{"min_area_fraction", mask_min_area_fraction}, {"max_rects", mask_max_rects}};
    j["mask_mode"] = mask_mode;
    j["canny"] = {{"low", canny_low}, {"high", canny_high}};
    j["pretrain"] = {{"codec_steps", codec_pretrain_steps},
                     {"codec_lr", codec_pretrain_lr},
                     {"denoiser_steps", denoiser_pretrain_steps},
                     {"denoiser_lr", denoiser_pretrain_lr},
                     {"class_dropout", class_dropout}};
    return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
    json j = json::parse(text);
    TrainConfig c;
    c.image_size = j.value("image_size", c.image_size);
    c.codec = j.value("codec", c.codec);
    c.codec_width = j.value("codec_width", c.codec_width);
    if (j.contains("schedule")) {
        const auto& s = j["schedule"];
        c.num_steps = s.value("num_steps", c.num_steps);
        c.beta_start = s.value("beta_start", c.beta_start);
        c.beta_end = s.value("beta_end", c.beta_end);
    }
    if (j.contains("denoiser")) {
        const auto& d = j["denoiser"];
        c.base_width = d.value("base_width", c.base_width);
        if (d.contains("channel_mult")) {
            auto v = d["channel_mult"].get<std::vector<int>>();
            if (v.size() != 4) throw std::invalid_argument("config: channel_mult needs 4 entries");
            std::copy(v.begin(), v.end(), c.channel_mult.begin());
        }
        c.num_classes = d.value("num_classes", c.num_classes);
    }
    if (j.contains("adapter")) {
        const auto& a = j["adapter"];
        c.adapter_width = a.value("width", c.adapter_width);
        c.adapter_depth = a.value("depth", c.adapter_depth);
    }
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.lambda = j.value("lambda", c.lambda);
    c.grad_clip = j.value("grad_clip", c.grad_clip);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.grad_accum = j.value("grad_accum", c.grad_accum);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.eval_every = j.value("eval_every", c.eval_every);
    c.seed = j.value("seed", c.seed);
    c.filter = j.value("filter", c.filter);
    c.sim_reduction = j.value("sim_reduction", c.sim_reduction);
    if (j.contains("mask")) {
        const auto& m = j["mask"];
        c.mask_min_area_fraction = m.value("min_area_fraction", c.mask_min_area_fraction);
        c.mask_max_rects = m.value("max_rects", c.mask_max_rects);
    }
    c.mask_mode = j.value("mask_mode", c.mask_mode);
    if (j.contains("canny")) {
        const auto& k = j["canny"];
        c.canny_low = k.value("low", c.canny_low);
        c.canny_high = k.value("high", c.canny_high);
    }
    if (j.contains("pretrain")) {
        const auto& p = j["pretrain"];
        c.codec_pretrain_steps = p.value("codec_steps", c.codec_pretrain_steps);
        c.codec_pretrain_lr = p.value("codec_lr", c.codec_pretrain_lr);
        c.denoiser_pretrain_steps = p.value("denoiser_steps", c.denoiser_pretrain_steps);
        c.denoiser_pretrain_lr = p.value("denoiser_lr", c.denoiser_pretrain_lr);
        c.class_dropout = p.value("class_dropout", c.class_dropout);
    }
    c.validate();
    return c;
}

TrainConfig TrainConfig::load_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return from_json(text);
}

void TrainConfig::save_file(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("config: cannot write " + path);
    f << to_json() << "\n";
}

uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

uint64_t TrainConfig::fingerprint() const { return fnv1a64(to_json()); }

uint64_t TrainConfig::arch_fingerprint() const {
    json j;
    j["image_size"] = image_size;
    j["codec"] = codec;
    j["codec_width"] = codec_width;
    j["schedule"] = {{"num_steps", num_steps}, {"beta_start", beta_start}, {"beta_end", beta_end}};
    j["denoiser"] = {{"base_width", base_width},
                     {"channel_mult", channel_mult},
                     {"num_classes", num_classes}};
    j["adapter"] = {{"width", adapter_width}, {"depth", adapter_depth}};
    j["seed"] = seed;
    return fnv1a64(j.dump());
}

}  // namespace ldc

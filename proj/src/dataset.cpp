#include "ldc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "ldc/canny.hpp"
#include "ldc/image.hpp"

namespace fs = std::filesystem;

namespace ldc {

namespace {

// small per-channel tints keyed by palette id
constexpr double kTint[kPalettes][3] = {
    {0.00, 0.00, 0.00},
    {0.06, 0.02, -0.04},
    {-0.05, 0.03, 0.05},
    {0.02, -0.05, 0.03},
};

void fill_background(Tensor& img, Rng& rng, int palette) {
    const double g0 = rng.uniform(0.2, 0.8);
    const double g1 = rng.uniform(0.2, 0.8);
    const bool horizontal = rng.uniform() < 0.5;
    for (int y = 0; y < img.h; y++) {
        for (int x = 0; x < img.w; x++) {
            const double f = horizontal ? static_cast<double>(x) / (img.w - 1)
                                        : static_cast<double>(y) / (img.h - 1);
            const double base = g0 + (g1 - g0) * f;
            for (int c = 0; c < 3; c++) {
                img.at(c, y, x) = std::clamp(base + kTint[palette][c], 0.0, 1.0);
            }
        }
    }
}

double pick_shade(Rng& rng, double avoid) {
    // strong contrast against the background mid tone keeps shape boundaries
    // visible through the lossy codec
    for (;;) {
        double s = rng.uniform(0.02, 0.98);
        if (std::fabs(s - avoid) >= 0.4) return s;
    }
}

void paint(Tensor& img, int y, int x, double shade, const double* tint) {
    for (int c = 0; c < 3; c++) {
        img.at(c, y, x) = std::clamp(shade + tint[c], 0.0, 1.0);
    }
}

void draw_circle(Tensor& img, Rng& rng, double shade, const double* tint) {
    // radius capped so small canvases keep a positive placement range
    const int r = 5 + rng.uniform_int(std::max(1, std::min(11, img.w / 4 - 4)));
    const int cx = r + rng.uniform_int(img.w - 2 * r);
    const int cy = r + rng.uniform_int(img.h - 2 * r);
    for (int y = cy - r; y <= cy + r; y++) {
        for (int x = cx - r; x <= cx + r; x++) {
            if ((y - cy) * (y - cy) + (x - cx) * (x - cx) <= r * r) paint(img, y, x, shade, tint);
        }
    }
}

void draw_rect(Tensor& img, Rng& rng, double shade, const double* tint) {
    const int rw = 8 + rng.uniform_int(17);
    const int rh = 8 + rng.uniform_int(17);
    const int x0 = rng.uniform_int(img.w - rw);
    const int y0 = rng.uniform_int(img.h - rh);
    for (int y = y0; y < y0 + rh; y++) {
        for (int x = x0; x < x0 + rw; x++) paint(img, y, x, shade, tint);
    }
}

void draw_triangle(Tensor& img, Rng& rng, double shade, const double* tint) {
    double vx[3], vy[3];
    for (;;) {
        const int size = 14 + rng.uniform_int(13);
        const int x0 = rng.uniform_int(img.w - size);
        const int y0 = rng.uniform_int(img.h - size);
        for (int i = 0; i < 3; i++) {
            vx[i] = x0 + rng.uniform() * size;
            vy[i] = y0 + rng.uniform() * size;
        }
        const double area2 = std::fabs((vx[1] - vx[0]) * (vy[2] - vy[0]) -
                                       (vx[2] - vx[0]) * (vy[1] - vy[0]));
        if (area2 >= 60.0) break;
    }
    auto edge = [&](int a, int b, double px, double py) {
        return (vx[b] - vx[a]) * (py - vy[a]) - (vy[b] - vy[a]) * (px - vx[a]);
    };
    const int ylo = std::max(0, static_cast<int>(std::floor(std::min({vy[0], vy[1], vy[2]}))));
    const int yhi = std::min(img.h - 1, static_cast<int>(std::ceil(std::max({vy[0], vy[1], vy[2]}))));
    const int xlo = std::max(0, static_cast<int>(std::floor(std::min({vx[0], vx[1], vx[2]}))));
    const int xhi = std::min(img.w - 1, static_cast<int>(std::ceil(std::max({vx[0], vx[1], vx[2]}))));
    // winding sign from the third vertex
    const double sign = edge(0, 1, vx[2], vy[2]) >= 0.0 ? 1.0 : -1.0;
    for (int y = ylo; y <= yhi; y++) {
        for (int x = xlo; x <= xhi; x++) {
            const double px = x + 0.5, py = y + 0.5;
            if (sign * edge(0, 1, px, py) >= 0.0 && sign * edge(1, 2, px, py) >= 0.0 &&
                sign * edge(2, 0, px, py) >= 0.0) {
                paint(img, y, x, shade, tint);
            }
        }
    }
}

std::string sample_name(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%05d.png", index);
    return buf;
}

}  // namespace

SyntheticSample make_sample(uint64_t seed, int index, const TrainConfig& cfg) {
    Rng rng(mix_seed(seed, static_cast<uint64_t>(index)));
    SyntheticSample s;
    s.class_id = rng.uniform_int(kSceneClasses);
    s.caption_id = rng.uniform_int(kPalettes);

    s.image = Tensor(3, cfg.image_size, cfg.image_size);
    fill_background(s.image, rng, s.caption_id);
    const double bg_mid = (s.image.at(0, 0, 0) + s.image.at(0, cfg.image_size - 1,
                                                            cfg.image_size - 1)) / 2.0;
    const int shapes = 2 + rng.uniform_int(3);
    for (int i = 0; i < shapes; i++) {
        const double shade = pick_shade(rng, bg_mid);
        const int kind = s.class_id == 3 ? rng.uniform_int(3) : s.class_id;
        switch (kind) {
            case 0: draw_circle(s.image, rng, shade, kTint[s.caption_id]); break;
            case 1: draw_rect(s.image, rng, shade, kTint[s.caption_id]); break;
            default: draw_triangle(s.image, rng, shade, kTint[s.caption_id]); break;
        }
    }
    s.edges = extract_edges(s.image, cfg.canny_low, cfg.canny_high);
    s.mask = sample_roi_mask(rng, cfg.image_size, cfg.image_size, cfg.mask_min_area_fraction,
                             cfg.mask_max_rects);
    return s;
}

void generate_dataset(const std::string& dir, uint64_t seed, int count, const TrainConfig& cfg) {
    if (count < 1) throw std::invalid_argument("generate_dataset: count must be >= 1");
    fs::create_directories(fs::path(dir) / "images");
    fs::create_directories(fs::path(dir) / "edges");
    fs::create_directories(fs::path(dir) / "masks");

    std::ofstream meta(fs::path(dir) / "meta.tsv");
    if (!meta) throw std::runtime_error("generate_dataset: cannot write meta.tsv");
    for (int i = 0; i < count; i++) {
        SyntheticSample s = make_sample(seed, i, cfg);
        const std::string name = sample_name(i);
        save_image_png((fs::path(dir) / "images" / name).string(), s.image);
        save_binary_png((fs::path(dir) / "edges" / name).string(), s.edges);
        save_binary_png((fs::path(dir) / "masks" / name).string(), s.mask.data);
        meta << i << "\t" << s.class_id << "\t" << s.caption_id << "\t"
             << static_cast<long>(s.mask.area()) << "\n";
    }
    meta.close();

    nlohmann::json manifest;
    manifest["count"] = count;
    manifest["image_size"] = cfg.image_size;
    manifest["seed"] = seed;
    manifest["num_classes"] = kSceneClasses;
    manifest["canny"] = {{"low", cfg.canny_low}, {"high", cfg.canny_high}};
    manifest["mask"] = {{"min_area_fraction", cfg.mask_min_area_fraction},
                        {"max_rects", cfg.mask_max_rects}};
    std::ofstream mf(fs::path(dir) / "manifest.json");
    mf << manifest.dump(2) << "\n";
}

DatasetReader::DatasetReader(const std::string& dir_) : dir(dir_) {
    std::ifstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw std::runtime_error("dataset: missing manifest.json in " + dir);
    nlohmann::json manifest = nlohmann::json::parse(mf);
    count = manifest["count"].get<int>();
    image_size = manifest["image_size"].get<int>();

    std::ifstream meta(fs::path(dir) / "meta.tsv");
    if (!meta) throw std::runtime_error("dataset: missing meta.tsv in " + dir);
    class_ids.resize(count);
    caption_ids.resize(count);
    int id, cls, cap;
    long area;
    while (meta >> id >> cls >> cap >> area) {
        if (id >= 0 && id < count) {
            class_ids[id] = cls;
            caption_ids[id] = cap;
        }
    }
}

SyntheticSample DatasetReader::load(int index) const {
    if (index < 0 || index >= count) throw std::invalid_argument("dataset: index out of range");
    const std::string name = sample_name(index);
    SyntheticSample s;
    s.image = load_image_png((fs::path(dir) / "images" / name).string());
    s.edges = load_binary_png((fs::path(dir) / "edges" / name).string());
    s.mask = RoiMask(load_binary_png((fs::path(dir) / "masks" / name).string()));
    s.class_id = class_ids[index];
    s.caption_id = caption_ids[index];
    return s;
}

}  // namespace ldc

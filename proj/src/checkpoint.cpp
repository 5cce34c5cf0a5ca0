#include "ldc/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace ldc {

namespace {

constexpr char kMagic[8] = {'L', 'D', 'C', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

void write_string(std::ostream& os, const std::string& s) {
    write_pod<uint64_t>(os, s.size());
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
    const uint64_t n = read_pod<uint64_t>(is);
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    if (!is) throw std::runtime_error("checkpoint: truncated string");
    return s;
}

void write_blob(std::ostream& os, const std::vector<double>& v) {
    write_pod<uint64_t>(os, v.size());
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::vector<double> read_blob(std::istream& is) {
    const uint64_t n = read_pod<uint64_t>(is);
    std::vector<double> v(n);
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw std::runtime_error("checkpoint: truncated blob");
    return v;
}

}  // namespace

void Checkpoint::save(const std::string& path) const {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("checkpoint: cannot open " + tmp);
        os.write(kMagic, sizeof(kMagic));
        write_pod(os, version);
        write_pod(os, fingerprint);
        write_string(os, config_json);
        write_pod(os, step);
        write_pod(os, opt_step);
        write_pod(os, codec_latent_scale);
        write_string(os, rng_state);
        write_blob(os, codec_params);
        write_blob(os, denoiser_params);
        write_blob(os, adapter_params);
        write_blob(os, opt_m);
        write_blob(os, opt_v);
        if (!os) throw std::runtime_error("checkpoint: write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error("checkpoint: bad magic in " + path);
    }
    Checkpoint c;
    c.version = read_pod<uint32_t>(is);
    if (c.version != 1) throw std::runtime_error("checkpoint: unsupported version");
    c.fingerprint = read_pod<uint64_t>(is);
    c.config_json = read_string(is);
    c.step = read_pod<int64_t>(is);
    c.opt_step = read_pod<int64_t>(is);
    c.codec_latent_scale = read_pod<double>(is);
    c.rng_state = read_string(is);
    c.codec_params = read_blob(is);
    c.denoiser_params = read_blob(is);
    c.adapter_params = read_blob(is);
    c.opt_m = read_blob(is);
    c.opt_v = read_blob(is);
    if (fnv1a64(c.config_json) != c.fingerprint) {
        throw std::runtime_error("checkpoint: fingerprint does not match embedded config");
    }
    return c;
}

TrainConfig Checkpoint::config() const { return TrainConfig::from_json(config_json); }

void Checkpoint::require_config(const TrainConfig& cfg) const {
    if (cfg.arch_fingerprint() != config().arch_fingerprint()) {
        throw std::runtime_error("checkpoint: config fingerprint mismatch, refusing to load");
    }
}

std::vector<double> flatten_params(const std::vector<nn::Param*>& params) {
    std::vector<double> flat;
    size_t total = 0;
    for (const nn::Param* p : params) total += p->size();
    flat.reserve(total);
    for (const nn::Param* p : params) flat.insert(flat.end(), p->v.begin(), p->v.end());
    return flat;
}

void unflatten_params(const std::vector<double>& flat, const std::vector<nn::Param*>& params) {
    size_t pos = 0;
    for (nn::Param* p : params) {
        if (pos + p->size() > flat.size()) {
            throw std::runtime_error("checkpoint: parameter blob too small");
        }
        std::copy(flat.begin() + pos, flat.begin() + pos + p->size(), p->v.begin());
        pos += p->size();
    }
    if (pos != flat.size()) {
        throw std::runtime_error("checkpoint: parameter blob size mismatch");
    }
}

}  // namespace ldc

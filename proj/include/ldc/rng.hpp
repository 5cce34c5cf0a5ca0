#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace ldc {

// splitmix64, used to derive well-separated seeds for sub-streams.
inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic RNG. Distributions are hand-rolled on top of mt19937_64 so
// draws are bit-identical across platforms and standard library versions.
struct Rng {
    std::mt19937_64 engine;
    bool have_spare = false;
    double spare = 0.0;

    explicit Rng(uint64_t seed = 0) : engine(seed) {}

    // uniform in [0, 1)
    double uniform() {
        return static_cast<double>(engine() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    int uniform_int(int n) {
        if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
        return static_cast<int>(engine() % static_cast<uint64_t>(n));
    }

    // standard normal via Box-Muller
    double normal() {
        if (have_spare) {
            have_spare = false;
            return spare;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare = r * std::sin(a);
        have_spare = true;
        return r * std::cos(a);
    }

    std::string state_str() const {
        std::ostringstream os;
        os << engine << " " << (have_spare ? 1 : 0) << " ";
        os.precision(17);
        os << spare;
        return os.str();
    }

    void set_state_str(const std::string& s) {
        std::istringstream is(s);
        int hs = 0;
        is >> engine >> hs >> spare;
        have_spare = hs != 0;
    }
};

}  // namespace ldc

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "fcrl/matrix.hpp"

namespace fcrl {

// Deterministic random source. Streams are reproducible by construction:
// the generator is std::mt19937_64 (bit-exact per the standard), uniforms
// are built from the top 53 bits, and normals use Box-Muller rather than
// std::normal_distribution (whose algorithm is implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // uniform in (a, b)
    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    // Box-Muller transform; second variate is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * M_PI * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    Matrix normal_matrix(std::size_t rows, std::size_t cols) {
        Matrix out(rows, cols);
        for (double& v : out.data()) v = normal();
        return out;
    }

    // integer in [0, n)
    std::size_t index(std::size_t n) {
        // rejection sampling keeps the draw unbiased
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return static_cast<std::size_t>(x % n);
    }

    // Fisher-Yates
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
    }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Mixes a base seed with a stream tag so independent phases of a run
// (init, epoch k, ...) get decorrelated but reproducible streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    // splitmix64 finalizer over the combined value
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace fcrl

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "peva/common.hpp"

namespace peva {

/// Deterministic RNG used everywhere randomness is needed.
///
/// mt19937_64 core with an explicit Box-Muller normal so draws are identical
/// across standard libraries (std::normal_distribution is not pinned by the
/// standard). One Rng per logical stream; derive streams with derive_seed.
class Rng {
  public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    /// Uniform in [0, 1).
    double uniform() {
        return (gen_() >> 11) * (1.0 / 9007199254740992.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    uint64_t below(uint64_t n) {
        PEVA_CHECK(n > 0, "below(0)");
        // rejection sampling keeps the draw unbiased
        uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t r;
        do {
            r = gen_();
        } while (r >= limit);
        return r % n;
    }

    /// Standard normal via Box-Muller with cached spare.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 1e-300);
        u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mu, double sigma) { return mu + sigma * normal(); }

    template <typename T>
    void fill_normal(T* out, size_t n, double mu = 0.0, double sigma = 1.0) {
        for (size_t i = 0; i < n; ++i) out[i] = static_cast<T>(normal(mu, sigma));
    }

    /// Fisher-Yates shuffle.
    template <typename It>
    void shuffle(It begin, It end) {
        auto n = static_cast<uint64_t>(end - begin);
        for (uint64_t i = n; i > 1; --i) {
            uint64_t j = below(i);
            std::swap(begin[i - 1], begin[j]);
        }
    }

  private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace peva

#pragma once

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace peva {

#define PEVA_VERSION_STRING "0.1.0"

/// Contract violation in library code. Thrown by PEVA_CHECK.
struct CheckError : std::logic_error {
    using std::logic_error::logic_error;
};

/// Malformed or truncated on-disk data (datasets, checkpoints, configs).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define PEVA_CHECK(cond, msg)                                                     \
    do {                                                                          \
        if (!(cond)) {                                                            \
            throw ::peva::CheckError(std::string("check failed: ") + (msg) +      \
                                     " [" #cond "] at " __FILE__ ":" +            \
                                     std::to_string(__LINE__));                   \
        }                                                                         \
    } while (0)

/// splitmix64: cheap, well-mixed 64-bit hash for seed derivation and id hashing.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derive an independent seed stream: mixes a root seed, a purpose tag and a counter.
inline uint64_t derive_seed(uint64_t root, uint64_t purpose, uint64_t counter = 0) {
    return splitmix64(root ^ splitmix64(purpose) ^ splitmix64(counter * 0xd1342543de82ef95ULL + 1));
}

/// FNV-1a over bytes; used for content fingerprints in manifests and tests.
inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Thread count for data-parallel sections: PEVA_THREADS env var, else hardware default.
int worker_threads();

}  // namespace peva

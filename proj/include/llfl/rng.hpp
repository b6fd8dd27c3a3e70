#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace llfl {

// FNV-1a 64-bit hash; also used for input-file digests in run manifests.
std::uint64_t fnv1a64(const void* data, std::size_t len);
std::uint64_t fnv1a64(std::string_view s);

// xoshiro256** seeded via splitmix64.  Every consumer of randomness draws
// from a stream derived from (root seed, purpose label, indices), so adding
// or removing one consumer never shifts the values seen by another.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();
    // Uniform in [0, 1).
    double uniform();
    // Uniform in [lo, hi).
    double uniform(double lo, double hi);
    // Standard normal via Box-Muller.
    double normal();
    // Uniform integer in [0, n); n must be positive.
    std::uint64_t below(std::uint64_t n);

    // Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t s_[4];
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Root of the stream tree for one run.
class RngHub {
public:
    explicit RngHub(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    // Derive an independent generator for (purpose, indices...).
    Rng stream(std::string_view purpose) const;
    Rng stream(std::string_view purpose, std::uint64_t a) const;
    Rng stream(std::string_view purpose, std::uint64_t a, std::uint64_t b) const;

private:
    std::uint64_t seed_;
};

} // namespace llfl

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace rvlab {

namespace detail {

inline constexpr std::uint64_t kPhiloxMult = 0xD2B74407B1CE6E93ULL;
inline constexpr std::uint64_t kPhiloxWeyl = 0x9E3779B97F4A7C15ULL;

// Philox 2x64-10: one 128-bit block per (key, counter, stream) triple.
inline void philox2x64(std::uint64_t key, std::uint64_t c0, std::uint64_t c1,
                       std::uint64_t& out0, std::uint64_t& out1) {
    for (int round = 0; round < 10; ++round) {
        const unsigned __int128 prod = static_cast<unsigned __int128>(kPhiloxMult) * c0;
        const std::uint64_t hi = static_cast<std::uint64_t>(prod >> 64);
        const std::uint64_t lo = static_cast<std::uint64_t>(prod);
        c0 = hi ^ key ^ c1;
        c1 = lo;
        key += kPhiloxWeyl;
    }
    out0 = c0;
    out1 = c1;
}

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace detail

// Counter-based random stream. Every output is a pure function of
// (seed, stream id, draw index); streams never share mutable state, so any
// number of them may be consumed concurrently.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream) : key_(seed), stream_(stream) {}

    std::uint64_t next_u64() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        std::uint64_t a = 0, b = 0;
        detail::philox2x64(key_, block_++, stream_, a, b);
        spare_ = b;
        have_spare_ = true;
        return a;
    }

    // Uniform on the open interval (0,1); never returns an endpoint.
    double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53; }

    // Standard normal via Box-Muller; the paired deviate is cached.
    double normal() {
        if (have_normal_) {
            have_normal_ = false;
            return spare_normal_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_normal_ = r * std::sin(a);
        have_normal_ = true;
        return r * std::cos(a);
    }

    std::uint64_t seed() const { return key_; }
    std::uint64_t stream() const { return stream_; }

private:
    std::uint64_t key_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    std::uint64_t spare_ = 0;
    bool have_spare_ = false;
    double spare_normal_ = 0.0;
    bool have_normal_ = false;
};

// (seed, stream) address of a stream, with hash-based derivation of child
// streams. sub(i) is collision-free for practical purposes (64-bit mixing).
struct RngKey {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    RngKey sub(std::uint64_t i) const {
        return RngKey{seed, detail::splitmix64(stream ^ detail::splitmix64(i))};
    }

    RngStream make_stream() const { return RngStream(seed, stream); }
};

}  // namespace rvlab

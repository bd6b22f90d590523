#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace hjb {

/// Counter-based splitmix64 stream.
///
/// Each stream is fully determined by its 64-bit starting state; per-path
/// streams hash the (seed, path index) pair through the full-avalanche
/// finalizer, so nearby seeds and indices land on unrelated states. Draws
/// are reproducible and independent of any scheduling, so estimates never
/// depend on worker count.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t state) : state_(state) {}

    /// Derive the stream for one simulation path from a global seed.
    ///
    /// The pair must be mixed before use: a raw (seed XOR index) state would
    /// hand two seeds differing in a few low bits the same batch of paths,
    /// merely permuted, whenever the path count is a multiple of a small
    /// power of two, making their estimates identical.
    static SplitMix64 for_path(std::uint64_t seed, std::uint64_t path_index) {
        SplitMix64 mixer(seed ^ (path_index * 0x9E3779B97F4A7C15ULL));
        return SplitMix64(mixer.next_u64());
    }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1): top 53 bits of the draw.
    double next_uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in (0, 1]: never zero, safe under log().
    double next_uniform_pos() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * next_uniform();
    }

    /// Standard normal variate.
    ///
    /// Fixed, documented transform: Box-Muller on two uniforms,
    ///   z0 = sqrt(-2 ln u1) cos(2 pi u2),  z1 = sqrt(-2 ln u1) sin(2 pi u2),
    /// with u1 in (0,1] and u2 in [0,1). Both variates are used (the second is
    /// cached), so a stream yields one normal per single uniform pair on average
    /// and the draw sequence is a pure function of the stream state.
    double next_normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        const double two_pi = 6.283185307179586476925286766559;
        double u1 = next_uniform_pos();
        double u2 = next_uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        cached_ = r * std::sin(two_pi * u2);
        has_cached_ = true;
        return r * std::cos(two_pi * u2);
    }

private:
    std::uint64_t state_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

/// Sum with a fixed-order pairwise reduction (recursive halving).
///
/// The reduction tree depends only on the element count, so accumulated
/// roundoff is bitwise reproducible regardless of how work was produced,
/// and error grows like O(log n) rather than O(n).
inline double pairwise_sum(std::span<const double> x) {
    if (x.size() <= 8) {
        double s = 0.0;
        for (double v : x) s += v;
        return s;
    }
    std::size_t half = x.size() / 2;
    return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

/// FNV-1a 64-bit hash; used to fingerprint config text in run manifests.
inline std::uint64_t fnv1a_hash(std::span<const char> bytes) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace hjb

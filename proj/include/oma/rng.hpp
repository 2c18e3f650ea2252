#pragma once

#include "oma/math.hpp"

#include <array>
#include <cstdint>

namespace oma {

// Philox4x32-10 counter-based generator. The 128-bit counter is split so
// that words 2..3 hold the path index and words 0..1 the draw counter:
// stream m is a pure function of (seed, m), independent of how many paths
// a run asks for and of any threading.
class Philox4x32 {
public:
    using Block = std::array<std::uint32_t, 4>;

    static Block round10(Block ctr, std::uint32_t k0, std::uint32_t k1) {
        for (int r = 0; r < 10; ++r) {
            const std::uint64_t p0 = 0xD2511F53ull * ctr[0];
            const std::uint64_t p1 = 0xCD9E8D57ull * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ k0, lo1, hi0 ^ ctr[3] ^ k1, lo0};
            k0 += 0x9E3779B9u;
            k1 += 0xBB67AE85u;
        }
        return ctr;
    }
};

// Per-path substream of standard normals (inverse-CDF transform; two draws
// per 128-bit block).
class PathRng {
public:
    PathRng(std::uint64_t seed, std::uint64_t path_index)
        : key0_(static_cast<std::uint32_t>(seed)),
          key1_(static_cast<std::uint32_t>(seed >> 32)),
          path_lo_(static_cast<std::uint32_t>(path_index)),
          path_hi_(static_cast<std::uint32_t>(path_index >> 32)) {}

    double normal() {
        if (phase_ == 0) {
            block_ = Philox4x32::round10(
                {static_cast<std::uint32_t>(counter_),
                 static_cast<std::uint32_t>(counter_ >> 32), path_lo_, path_hi_},
                key0_, key1_);
            ++counter_;
        }
        const std::uint32_t hi = block_[2 * phase_];
        const std::uint32_t lo = block_[2 * phase_ + 1];
        phase_ ^= 1;
        const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
        // 53-bit uniform strictly inside (0,1)
        const double u = static_cast<double>(bits >> 11) * 0x1.0p-53 + 0x1.0p-54;
        return inv_norm_cdf(u);
    }

private:
    std::uint32_t key0_, key1_, path_lo_, path_hi_;
    std::uint64_t counter_ = 0;
    Philox4x32::Block block_{};
    int phase_ = 0;
};

} // namespace oma

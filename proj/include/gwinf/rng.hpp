#pragma once

#include <cmath>
#include <cstdint>

namespace gwinf {

// Philox4x32-10 counter-based generator. Stream k of a given root seed is
// the key (root_seed) applied to the counter block (block, k_lo, k_hi, 0),
// so trial k draws the same numbers no matter which thread runs it.
class RngStream {
public:
    RngStream(std::uint64_t root_seed, std::uint64_t stream)
        : key0_(static_cast<std::uint32_t>(root_seed)),
          key1_(static_cast<std::uint32_t>(root_seed >> 32)),
          ctr1_(static_cast<std::uint32_t>(stream)),
          ctr2_(static_cast<std::uint32_t>(stream >> 32)) {}

    std::uint32_t next_u32() {
        if (have_ == 0) {
            fill_block();
            have_ = 4;
        }
        return out_[--have_];
    }

    std::uint64_t next_u64() {
        std::uint64_t hi = next_u32();
        return (hi << 32) | next_u32();
    }

    // Uniform on [0,1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform on (0,1], safe as a log() argument.
    double uniform01_open_left() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

private:
    static void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
        std::uint64_t p = static_cast<std::uint64_t>(a) * b;
        hi = static_cast<std::uint32_t>(p >> 32);
        lo = static_cast<std::uint32_t>(p);
    }

    void fill_block() {
        constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
        constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
        std::uint32_t c0 = block_, c1 = ctr1_, c2 = ctr2_, c3 = 0;
        std::uint32_t k0 = key0_, k1 = key1_;
        for (int round = 0; round < 10; ++round) {
            std::uint32_t hi0, lo0, hi1, lo1;
            mulhilo(M0, c0, hi0, lo0);
            mulhilo(M1, c2, hi1, lo1);
            std::uint32_t n0 = hi1 ^ c1 ^ k0;
            std::uint32_t n1 = lo1;
            std::uint32_t n2 = hi0 ^ c3 ^ k1;
            std::uint32_t n3 = lo0;
            c0 = n0; c1 = n1; c2 = n2; c3 = n3;
            k0 += W0; k1 += W1;
        }
        out_[0] = c0; out_[1] = c1; out_[2] = c2; out_[3] = c3;
        ++block_;
    }

    std::uint32_t key0_, key1_;
    std::uint32_t ctr1_, ctr2_;
    std::uint32_t block_ = 0;
    std::uint32_t out_[4] = {0, 0, 0, 0};
    int have_ = 0;
};

} // namespace gwinf

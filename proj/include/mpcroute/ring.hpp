#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

#include "mpcroute/errors.hpp"

namespace mpcroute {

using u8 = std::uint8_t;
using u16 = std::uint16_t;
using u32 = std::uint32_t;
using u64 = std::uint64_t;
using i64 = std::int64_t;

// Ring Z_{2^bits} for bits <= 64, backed by uint64_t behind a mask.
// All arithmetic wraps; there is no overflow trap anywhere.
struct Ring {
    unsigned bits = 64;
    u64 mask = ~0ULL;

    constexpr Ring() = default;
    explicit constexpr Ring(unsigned n_bits)
        : bits(n_bits), mask(n_bits == 64 ? ~0ULL : ((1ULL << n_bits) - 1ULL)) {}

    constexpr u64 add(u64 a, u64 b) const { return (a + b) & mask; }
    constexpr u64 sub(u64 a, u64 b) const { return (a - b) & mask; }
    constexpr u64 mul(u64 a, u64 b) const { return (a * b) & mask; }
    constexpr u64 neg(u64 a) const { return (0 - a) & mask; }

    constexpr u64 from_signed(i64 x) const { return static_cast<u64>(x) & mask; }

    // Values in [0, 2^(bits-1)) are non-negative; the rest wrap to value - 2^bits.
    constexpr i64 to_signed(u64 x) const {
        x &= mask;
        if (bits == 64) return static_cast<i64>(x);
        const u64 sign = 1ULL << (bits - 1);
        if (x & sign) return static_cast<i64>(x | ~mask);
        return static_cast<i64>(x);
    }

    constexpr u64 sign_bit(u64 x) const { return (x >> (bits - 1)) & 1ULL; }
};

// Maps reals to ring elements at a fixed fractional scale: r = round(x * 2^f).
// Rounding is half-away-from-zero so that encode(-x) == neg(encode(x)).
struct FixedPointCodec {
    Ring ring;
    int frac_bits = 16;

    constexpr FixedPointCodec() = default;
    constexpr FixedPointCodec(Ring r, int f) : ring(r), frac_bits(f) {}

    double resolution() const { return std::ldexp(1.0, -frac_bits); }

    // Representable range: |x| < 2^(bits - 1 - f).
    double range_limit() const {
        return std::ldexp(1.0, static_cast<int>(ring.bits) - 1 - frac_bits);
    }

    u64 encode(double x) const {
        if (!std::isfinite(x)) throw RangeError("encode: non-finite input");
        const long double scaled = std::ldexp(static_cast<long double>(x), frac_bits);
        const long double rounded = std::roundl(scaled);
        const long double bound = std::ldexp(1.0L, static_cast<int>(ring.bits) - 1);
        if (rounded >= bound || rounded < -bound)
            throw RangeError("encode: value out of fixed-point range");
        return ring.from_signed(static_cast<i64>(rounded));
    }

    double decode(u64 r) const {
        return std::ldexp(static_cast<double>(ring.to_signed(r)), -frac_bits);
    }

    // Arithmetic right shift in the signed interpretation, re-encoded into the
    // ring. This is the plaintext reference for share truncation.
    u64 truncate(u64 r, int f) const {
        i64 s = ring.to_signed(r);
        return ring.from_signed(s >> f);
    }
};

// splitmix64; used to derive independent seeds from one base seed.
inline u64 derive_seed(u64 base, u64 tag) {
    u64 z = base + 0x9e3779b97f4a7c15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace mpcroute

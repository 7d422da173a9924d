#include <doctest.h>

#include <random>

#include "mpcroute/ring.hpp"
#include "support/oracles.hpp"

using namespace mpcroute;

TEST_CASE("encode examples against the big-integer oracle") {
    const FixedPointCodec codec{Ring{}, 16};
    CHECK(codec.encode(0.0) == 0);
    CHECK(codec.encode(1.5) == 98304);
    CHECK(codec.encode(1.5) == test::bigint_encode(1.5, 16));
    CHECK(codec.encode(-0.5) == 18446744073709518848ULL);
    CHECK(codec.encode(-0.5) == test::bigint_encode(-0.5, 16));
}

TEST_CASE("encode rejects out-of-range values") {
    const FixedPointCodec codec{Ring{}, 16};
    CHECK_THROWS_AS((void)codec.encode(std::ldexp(1.0, 47)), RangeError);
    CHECK_THROWS_AS((void)codec.encode(-std::ldexp(1.0, 48)), RangeError);
    CHECK_NOTHROW((void)codec.encode(std::ldexp(1.0, 47) - 1.0));
    CHECK_THROWS_AS((void)codec.encode(std::nan("")), RangeError);
}

TEST_CASE("encode is odd: encode(-x) = neg(encode(x))") {
    const FixedPointCodec codec{Ring{}, 16};
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> dist(-1e6, 1e6);
    for (int i = 0; i < 2000; i++) {
        const double x = dist(rng);
        CHECK(codec.encode(-x) == codec.ring.neg(codec.encode(x)));
    }
}

TEST_CASE("decode examples and round trip") {
    const FixedPointCodec codec{Ring{}, 16};
    CHECK(codec.decode(0) == 0.0);
    CHECK(codec.decode(98304) == 1.5);

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> dist(-1e5, 1e5);
    double max_err = 0;
    for (int i = 0; i < 100000; i++) {
        const double x = dist(rng);
        max_err = std::max(max_err, std::abs(codec.decode(codec.encode(x)) - x));
    }
    CHECK(max_err <= std::ldexp(1.0, -16));
}

TEST_CASE("plain truncation matches the big-integer oracle") {
    const FixedPointCodec codec{Ring{}, 16};
    SUBCASE("positive square") {
        const u64 a = codec.encode(1.5);
        const u64 prod = codec.ring.mul(a, a); // scale 32
        const u64 t = codec.truncate(prod, 16);
        const u64 expect = codec.encode(2.25);
        CHECK(codec.ring.sub(t, expect) + 1 <= 2); // within 1 ulp
        CHECK(t == test::bigint_truncate(prod, 16));
    }
    SUBCASE("zero") { CHECK(codec.truncate(0, 16) == 0); }
    SUBCASE("negative value scaled twice") {
        const u64 v = codec.ring.mul(codec.encode(-2.0), 1ULL << 16); // scale 32
        CHECK(codec.truncate(v, 16) == codec.encode(-2.0));
        CHECK(codec.truncate(v, 16) == test::bigint_truncate(v, 16));
    }
    SUBCASE("randomized against oracle") {
        std::mt19937_64 rng(3);
        for (int i = 0; i < 50000; i++) {
            const u64 v = rng();
            const int f = static_cast<int>(rng() % 32);
            CHECK(codec.truncate(v, f) == test::bigint_truncate(v, f));
        }
    }
}

TEST_CASE("(a + b) - b = a") {
    SUBCASE("exhaustive in a on the 16-bit test ring") {
        const Ring ring{16};
        std::mt19937_64 rng(5);
        for (u64 a = 0; a < 65536; a++) {
            const u64 b = rng() & ring.mask;
            CHECK(ring.sub(ring.add(a, b), b) == a);
        }
    }
    SUBCASE("randomized at 64 bits") {
        const Ring ring{};
        std::mt19937_64 rng(6);
        for (int i = 0; i < 100000; i++) {
            const u64 a = rng(), b = rng();
            if (ring.sub(ring.add(a, b), b) != a) FAIL("ring identity broken");
        }
    }
}

TEST_CASE("signed interpretation round-trips") {
    const Ring r64{};
    CHECK(r64.to_signed(r64.from_signed(-1)) == -1);
    CHECK(r64.to_signed(r64.from_signed(std::numeric_limits<i64>::min() + 1)) ==
          std::numeric_limits<i64>::min() + 1);
    std::mt19937_64 rng(9);
    for (int i = 0; i < 100000; i++) {
        const i64 s = static_cast<i64>(rng());
        if (r64.to_signed(r64.from_signed(s)) != s) FAIL("64-bit signed roundtrip");
    }
    const Ring r16{16};
    for (i64 s = -32768; s < 32768; s++)
        CHECK(r16.to_signed(r16.from_signed(s)) == s);
}

TEST_CASE("fixed-point addition is exact on the grid") {
    const FixedPointCodec codec{Ring{}, 16};
    std::mt19937_64 rng(13);
    for (int i = 0; i < 20000; i++) {
        const double x = static_cast<double>(static_cast<i64>(rng() % (1ULL << 30)) -
                                             (1LL << 29)) /
                         65536.0;
        const double y = static_cast<double>(static_cast<i64>(rng() % (1ULL << 30)) -
                                             (1LL << 29)) /
                         65536.0;
        const u64 sum = codec.ring.add(codec.encode(x), codec.encode(y));
        if (codec.decode(sum) != x + y) FAIL("grid addition not exact");
    }
}

TEST_CASE("narrow ring masks wrap correctly") {
    const Ring ring{16};
    CHECK(ring.add(65535, 1) == 0);
    CHECK(ring.neg(0) == 0);
    CHECK(ring.neg(1) == 65535);
    CHECK(ring.mul(256, 256) == 0);
    CHECK(ring.sign_bit(0x8000) == 1);
    CHECK(ring.sign_bit(0x7fff) == 0);
}

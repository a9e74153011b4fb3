#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace spikehe::ring {

using u64 = std::uint64_t;
using u128 = unsigned __int128;

/// A prime q < 2^62 with Barrett constants for 128-bit reduction.
class Modulus {
public:
    Modulus() = default;
    explicit Modulus(u64 q);

    u64 value() const { return q_; }
    int bits() const { return bits_; }

    u64 reduce(u64 a) const { return a >= q_ ? a % q_ : a; }

    /// floor(x mod q) for any 128-bit x.
    u64 reduce128(u128 x) const {
        const u64 x0 = static_cast<u64>(x);
        const u64 x1 = static_cast<u64>(x >> 64);
        const u128 p00 = static_cast<u128>(x0) * ratio_lo_;
        const u128 p01 = static_cast<u128>(x0) * ratio_hi_;
        const u128 p10 = static_cast<u128>(x1) * ratio_lo_;
        const u64 p11 = x1 * ratio_hi_;
        const u128 mid = (p00 >> 64) + static_cast<u64>(p01) + static_cast<u64>(p10);
        const u64 qhat = p11 + static_cast<u64>(p01 >> 64) + static_cast<u64>(p10 >> 64) +
                         static_cast<u64>(mid >> 64);
        u64 r = x0 - qhat * q_;
        while (r >= q_) r -= q_;
        return r;
    }

    u64 add(u64 a, u64 b) const {
        u64 s = a + b;
        return s >= q_ ? s - q_ : s;
    }
    u64 sub(u64 a, u64 b) const { return a >= b ? a - b : a + q_ - b; }
    u64 neg(u64 a) const { return a == 0 ? 0 : q_ - a; }
    u64 mul(u64 a, u64 b) const { return reduce128(static_cast<u128>(a) * b); }

    /// floor(w * 2^64 / q), the Shoup companion of a fixed multiplicand w < q.
    u64 shoup(u64 w) const { return static_cast<u64>((static_cast<u128>(w) << 64) / q_); }
    u64 mul_shoup(u64 a, u64 w, u64 wp) const {
        const u64 qhat = static_cast<u64>((static_cast<u128>(a) * wp) >> 64);
        u64 r = a * w - qhat * q_;
        return r >= q_ ? r - q_ : r;
    }

    u64 pow(u64 base, u64 e) const;
    /// Inverse modulo a prime q; throws DomainError on 0.
    u64 inv(u64 a) const;

    /// Signed integer to residue.
    u64 from_signed(std::int64_t v) const {
        if (v >= 0) return reduce(static_cast<u64>(v));
        u64 m = static_cast<u64>(-(v + 1)) % q_;
        return q_ - 1 - m;
    }

    bool operator==(const Modulus& o) const { return q_ == o.q_; }

private:
    u64 q_ = 0;
    int bits_ = 0;
    u64 ratio_lo_ = 0;
    u64 ratio_hi_ = 0;
};

bool is_prime(u64 n);

/// The `count` largest primes below 2^bits that are 1 mod 2n, skipping `exclude`.
std::vector<u64> ntt_primes_below(int bits, std::size_t n, std::size_t count,
                                  const std::vector<u64>& exclude = {});

/// A primitive 2n-th root of unity mod q (the smallest such generator power).
u64 primitive_root_2n(const Modulus& q, std::size_t n);

}  // namespace spikehe::ring

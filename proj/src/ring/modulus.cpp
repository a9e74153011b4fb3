#include "spikehe/ring/modulus.hpp"

#include <algorithm>
#include <string>

#include "spikehe/common/errors.hpp"

namespace spikehe::ring {

Modulus::Modulus(u64 q) : q_(q) {
    if (q < 2 || (q >> 62) != 0) {
        throw ParameterError("modulus must lie in [2, 2^62): " + std::to_string(q));
    }
    bits_ = 64 - __builtin_clzll(q);
    const u128 ratio = ~static_cast<u128>(0) / q;
    ratio_lo_ = static_cast<u64>(ratio);
    ratio_hi_ = static_cast<u64>(ratio >> 64);
}

u64 Modulus::pow(u64 base, u64 e) const {
    u64 r = 1 % q_;
    base = reduce(base);
    while (e) {
        if (e & 1) r = mul(r, base);
        base = mul(base, base);
        e >>= 1;
    }
    return r;
}

u64 Modulus::inv(u64 a) const {
    a = reduce(a);
    if (a == 0) throw DomainError("zero has no inverse mod " + std::to_string(q_));
    return pow(a, q_ - 2);
}

namespace {

u64 mulmod(u64 a, u64 b, u64 m) { return static_cast<u64>(static_cast<u128>(a) * b % m); }

u64 powmod(u64 b, u64 e, u64 m) {
    u64 r = 1 % m;
    b %= m;
    while (e) {
        if (e & 1) r = mulmod(r, b, m);
        b = mulmod(b, b, m);
        e >>= 1;
    }
    return r;
}

}  // namespace

bool is_prime(u64 n) {
    if (n < 2) return false;
    static const u64 small[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37};
    for (u64 p : small) {
        if (n % p == 0) return n == p;
    }
    u64 d = n - 1;
    int s = 0;
    while ((d & 1) == 0) {
        d >>= 1;
        ++s;
    }
    // These bases are deterministic for all n < 2^64.
    for (u64 a : small) {
        u64 x = powmod(a, d, n);
        if (x == 1 || x == n - 1) continue;
        bool composite = true;
        for (int r = 1; r < s; ++r) {
            x = mulmod(x, x, n);
            if (x == n - 1) {
                composite = false;
                break;
            }
        }
        if (composite) return false;
    }
    return true;
}

std::vector<u64> ntt_primes_below(int bits, std::size_t n, std::size_t count,
                                  const std::vector<u64>& exclude) {
    if (bits < 10 || bits > 61) throw ParameterError("prime size must be in [10, 61] bits");
    const u64 step = 2 * static_cast<u64>(n);
    const u64 top = u64{1} << bits;
    std::vector<u64> out;
    // largest candidate below 2^bits congruent to 1 mod 2n
    u64 cand = top - step + 1;
    while (out.size() < count) {
        if (cand <= step) {
            throw ParameterError("ran out of " + std::to_string(bits) + "-bit NTT primes for N=" +
                                 std::to_string(n));
        }
        if (is_prime(cand) && std::find(exclude.begin(), exclude.end(), cand) == exclude.end()) {
            out.push_back(cand);
        }
        cand -= step;
    }
    return out;
}

u64 primitive_root_2n(const Modulus& q, std::size_t n) {
    const u64 m = 2 * static_cast<u64>(n);
    const u64 qv = q.value();
    if ((qv - 1) % m != 0) {
        throw ParameterError("modulus " + std::to_string(qv) + " is not 1 mod 2N");
    }
    const u64 cofactor = (qv - 1) / m;
    for (u64 g = 2; g < qv; ++g) {
        u64 w = q.pow(g, cofactor);
        // w has order dividing 2n; it is primitive iff w^n == -1
        if (q.pow(w, n) == qv - 1) {
            return w;
        }
    }
    throw ParameterError("no primitive 2N-th root mod " + std::to_string(qv));
}

}  // namespace spikehe::ring

#include "spikehe/ring/rns.hpp"

#include <string>

#include "spikehe/common/errors.hpp"

namespace spikehe::ring {

std::size_t bit_reverse(std::size_t x, int bits) {
    std::size_t r = 0;
    for (int i = 0; i < bits; ++i) {
        r = (r << 1) | (x & 1);
        x >>= 1;
    }
    return r;
}

PrimeModulus::PrimeModulus(u64 q, std::size_t n) : mod_(q), n_(n) {
    if (n < 2 || (n & (n - 1)) != 0) {
        throw ParameterError("ring dimension must be a power of two >= 2, got " + std::to_string(n));
    }
    if (!is_prime(q)) throw ParameterError("modulus " + std::to_string(q) + " is not prime");
    logn_ = __builtin_ctzll(n);
    psi_ = primitive_root_2n(mod_, n);
    const u64 ipsi = mod_.inv(psi_);

    psi_rev_.resize(n);
    ipsi_rev_.resize(n);
    psi_rev_shoup_.resize(n);
    ipsi_rev_shoup_.resize(n);
    u64 p = 1, ip = 1;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = bit_reverse(i, logn_);
        psi_rev_[r] = p;
        ipsi_rev_[r] = ip;
        p = mod_.mul(p, psi_);
        ip = mod_.mul(ip, ipsi);
    }
    for (std::size_t i = 0; i < n; ++i) {
        psi_rev_shoup_[i] = mod_.shoup(psi_rev_[i]);
        ipsi_rev_shoup_[i] = mod_.shoup(ipsi_rev_[i]);
    }
    n_inv_ = mod_.inv(n);
    n_inv_shoup_ = mod_.shoup(n_inv_);
}

// Lazy (Harvey) butterflies: forward keeps values in [0, 4q), inverse in [0, 2q);
// both need 4q < 2^64, which every supported prime (< 2^62) satisfies.

void PrimeModulus::forward(u64* a) const {
    const u64 q = mod_.value();
    const u64 q2 = 2 * q;
    std::size_t t = n_;
    for (std::size_t m = 1; m < n_; m <<= 1) {
        t >>= 1;
        for (std::size_t i = 0; i < m; ++i) {
            const u64 w = psi_rev_[m + i];
            const u64 wp = psi_rev_shoup_[m + i];
            u64* x = a + 2 * i * t;
            u64* y = x + t;
            for (std::size_t j = 0; j < t; ++j) {
                u64 u = x[j];
                if (u >= q2) u -= q2;
                const u64 qhat = static_cast<u64>((static_cast<u128>(y[j]) * wp) >> 64);
                const u64 v = y[j] * w - qhat * q;
                x[j] = u + v;
                y[j] = u + q2 - v;
            }
        }
    }
    for (std::size_t i = 0; i < n_; ++i) {
        u64 v = a[i];
        if (v >= q2) v -= q2;
        if (v >= q) v -= q;
        a[i] = v;
    }
}

void PrimeModulus::inverse(u64* a) const {
    const u64 q = mod_.value();
    const u64 q2 = 2 * q;
    std::size_t t = 1;
    for (std::size_t m = n_; m > 1; m >>= 1) {
        const std::size_t h = m >> 1;
        std::size_t j1 = 0;
        for (std::size_t i = 0; i < h; ++i) {
            const u64 w = ipsi_rev_[h + i];
            const u64 wp = ipsi_rev_shoup_[h + i];
            u64* x = a + j1;
            u64* y = x + t;
            for (std::size_t j = 0; j < t; ++j) {
                const u64 u = x[j];
                const u64 v = y[j];
                u64 s = u + v;
                x[j] = s >= q2 ? s - q2 : s;
                const u64 d = u + q2 - v;
                const u64 qhat = static_cast<u64>((static_cast<u128>(d) * wp) >> 64);
                y[j] = d * w - qhat * q;
            }
            j1 += 2 * t;
        }
        t <<= 1;
    }
    for (std::size_t i = 0; i < n_; ++i) a[i] = mod_.mul_shoup(a[i], n_inv_, n_inv_shoup_);
}

RnsBasis::RnsBasis(std::size_t n, std::vector<PrimeRef> primes) : n_(n), primes_(std::move(primes)) {
    if (n < 2 || (n & (n - 1)) != 0) {
        throw ParameterError("ring dimension must be a power of two, got " + std::to_string(n));
    }
    if (primes_.empty()) throw ParameterError("RNS basis needs at least one modulus");
    for (std::size_t i = 0; i < primes_.size(); ++i) {
        if (primes_[i]->n() != n) throw ParameterError("prime tables built for a different N");
        for (std::size_t j = 0; j < i; ++j) {
            if (primes_[i]->value() == primes_[j]->value()) {
                throw ParameterError("duplicate modulus " + std::to_string(primes_[i]->value()));
            }
        }
    }
}

std::shared_ptr<const RnsBasis> RnsBasis::make(std::size_t n, const std::vector<u64>& primes) {
    std::vector<PrimeRef> refs;
    refs.reserve(primes.size());
    for (u64 q : primes) refs.push_back(std::make_shared<const PrimeModulus>(q, n));
    return std::make_shared<const RnsBasis>(n, std::move(refs));
}

bool RnsBasis::same(const RnsBasis& o) const {
    if (this == &o) return true;
    if (n_ != o.n_ || primes_.size() != o.primes_.size()) return false;
    for (std::size_t i = 0; i < primes_.size(); ++i) {
        if (primes_[i]->value() != o.primes_[i]->value()) return false;
    }
    return true;
}

}  // namespace spikehe::ring

#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "spikehe/ring/modulus.hpp"

namespace spikehe::ring {

/// One NTT-friendly prime with its negacyclic transform tables for a fixed N.
class PrimeModulus {
public:
    PrimeModulus(u64 q, std::size_t n);

    const Modulus& mod() const { return mod_; }
    u64 value() const { return mod_.value(); }
    std::size_t n() const { return n_; }
    u64 root() const { return psi_; }

    /// In-place forward transform; output in bit-reversed evaluation order.
    void forward(u64* a) const;
    void inverse(u64* a) const;

private:
    Modulus mod_;
    std::size_t n_;
    int logn_;
    u64 psi_;
    std::vector<u64> psi_rev_, psi_rev_shoup_;
    std::vector<u64> ipsi_rev_, ipsi_rev_shoup_;
    u64 n_inv_, n_inv_shoup_;
};

using PrimeRef = std::shared_ptr<const PrimeModulus>;

/// Ordered list of distinct primes sharing a power-of-two ring dimension.
class RnsBasis {
public:
    RnsBasis(std::size_t n, std::vector<PrimeRef> primes);
    /// Convenience: builds tables for every prime.
    static std::shared_ptr<const RnsBasis> make(std::size_t n, const std::vector<u64>& primes);

    std::size_t n() const { return n_; }
    std::size_t size() const { return primes_.size(); }
    const PrimeModulus& prime(std::size_t i) const { return *primes_[i]; }
    const PrimeRef& prime_ref(std::size_t i) const { return primes_[i]; }
    const std::vector<PrimeRef>& primes() const { return primes_; }

    /// Same N and same modulus sequence.
    bool same(const RnsBasis& o) const;

private:
    std::size_t n_;
    std::vector<PrimeRef> primes_;
};

using BasisRef = std::shared_ptr<const RnsBasis>;

std::size_t bit_reverse(std::size_t x, int bits);

}  // namespace spikehe::ring

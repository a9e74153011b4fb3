#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "spikehe/ckks/encoder.hpp"
#include "spikehe/ckks/params.hpp"
#include "spikehe/ring/ring_poly.hpp"

namespace spikehe::ckks {

using ring::BasisRef;
using ring::RingPoly;
using ring::u64;

/// Encoded message in NTT form over q_0..q_level.
struct Plaintext {
    RingPoly poly;
    int level = 0;
    double scale = 1.0;
};

/// (c0, c1) in NTT form over q_0..q_level; decrypts as c0 + c1*s.
/// `level` is the number of rescales still available (limb count minus one).
struct Ciphertext {
    RingPoly c0, c1;
    int level = 0;
    double scale = 1.0;
};

/// Precomputed constants for converting one key-switching digit into the other primes.
struct DigitConversion {
    std::vector<std::size_t> src;         // indices into the q chain
    std::vector<std::size_t> dst_q;       // other q indices at this level
    std::vector<u64> inv_hat;             // [(Q_D/q_i)^-1]_{q_i}
    std::vector<std::vector<u64>> hat;    // hat[t][i] = [Q_D/q_i]_t, t over dst_q then special primes
};

/// Immutable parameter context: prime chains, bases per level, canonical scales and
/// key-switching tables. Shared by keys, encryptors and evaluators.
class CkksContext {
public:
    explicit CkksContext(const CkksParams& params);

    const CkksParams& params() const { return params_; }
    std::size_t n() const { return params_.n; }
    std::size_t slots() const { return params_.slots(); }
    int max_level() const { return params_.depth; }

    const std::vector<u64>& q_primes() const { return q_; }
    const std::vector<u64>& p_primes() const { return p_; }

    BasisRef q_basis(int level) const { return q_bases_.at(static_cast<std::size_t>(level)); }
    BasisRef qp_basis(int level) const { return qp_bases_.at(static_cast<std::size_t>(level)); }
    BasisRef p_basis() const { return p_basis_; }
    BasisRef key_basis() const { return qp_basis(max_level()); }

    /// Canonical scale of every ciphertext at `level`: D_L = 2^scaleBits, D_{l-1} = D_l^2 / q_l.
    double scale(int level) const { return scales_.at(static_cast<std::size_t>(level)); }

    /// FNV-1a digest over N, depth, scale bits, dnum and every prime.
    std::uint64_t digest() const { return digest_; }

    const SlotTransform& transform() const { return transform_; }

    /// Encode real slot values at `level` with the given scale.
    Plaintext encode(const std::vector<double>& values, int level, double scale) const;
    /// Decode using the first min(2, limbs) limbs.
    std::vector<double> decode(const Plaintext& pt) const;
    /// Residues of round(value) in every q-limb up to `level` (value may be large or negative).
    std::vector<u64> integer_residues(long double value, int level) const;

    int digit_count(int level) const;
    const DigitConversion& digit_conversion(int level, int digit) const;
    const std::vector<u64>& p_inv_hat() const { return p_inv_hat_; }
    /// [P/p_j]_{q_i}
    const std::vector<std::vector<u64>>& p_hat_mod_q() const { return p_hat_mod_q_; }
    const std::vector<u64>& p_inv_mod_q() const { return p_inv_mod_q_; }
    /// [P]_{q_i}
    const std::vector<u64>& p_mod_q() const { return p_mod_q_; }

    /// Cached NTT-domain permutation for X -> X^g.
    const std::vector<std::uint32_t>& galois_permutation(u64 g) const;

private:
    CkksParams params_;
    SlotTransform transform_;
    std::vector<u64> q_, p_;
    std::vector<BasisRef> q_bases_, qp_bases_;
    BasisRef p_basis_;
    std::vector<double> scales_;
    std::uint64_t digest_ = 0;
    std::vector<std::vector<DigitConversion>> digits_;  // [level][digit]
    std::vector<u64> p_inv_hat_;
    std::vector<std::vector<u64>> p_hat_mod_q_;
    std::vector<u64> p_inv_mod_q_;
    std::vector<u64> p_mod_q_;
    mutable std::mutex perm_mu_;
    mutable std::map<u64, std::vector<std::uint32_t>> perms_;
};

using ContextRef = std::shared_ptr<const CkksContext>;

}  // namespace spikehe::ckks

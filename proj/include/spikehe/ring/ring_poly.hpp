#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "spikehe/ring/rns.hpp"

namespace spikehe::ring {

enum class Domain { Coeff, Ntt };

/// Element of Z_Q[X]/(X^N+1) stored limb-major: limb i occupies [i*N, (i+1)*N).
class RingPoly {
public:
    RingPoly() = default;
    RingPoly(BasisRef basis, Domain domain);

    const BasisRef& basis() const { return basis_; }
    Domain domain() const { return domain_; }
    void set_domain(Domain d) { domain_ = d; }
    std::size_t n() const { return basis_->n(); }
    std::size_t limbs() const { return basis_->size(); }

    u64* limb(std::size_t i) { return data_.data() + i * n(); }
    const u64* limb(std::size_t i) const { return data_.data() + i * n(); }
    std::vector<u64>& data() { return data_; }
    const std::vector<u64>& data() const { return data_; }

    bool operator==(const RingPoly& o) const;

    /// Build from signed integer coefficients, reduced into every limb.
    static RingPoly from_signed(BasisRef basis, const std::vector<std::int64_t>& coeffs);

private:
    BasisRef basis_;
    Domain domain_ = Domain::Coeff;
    std::vector<u64> data_;
};

using Prng = std::mt19937_64;

RingPoly ntt_forward(const RingPoly& p);
RingPoly ntt_inverse(const RingPoly& p);
void ntt_forward_inplace(RingPoly& p);
void ntt_inverse_inplace(RingPoly& p);

RingPoly poly_add(const RingPoly& a, const RingPoly& b);
RingPoly poly_sub(const RingPoly& a, const RingPoly& b);
RingPoly poly_neg(const RingPoly& a);
/// Negacyclic product; coefficient-domain inputs are transformed internally and
/// the result is returned in the inputs' domain.
RingPoly poly_mul(const RingPoly& a, const RingPoly& b);
void poly_add_inplace(RingPoly& a, const RingPoly& b);
void poly_sub_inplace(RingPoly& a, const RingPoly& b);
/// a += b * c (NTT domain).
void poly_mul_add_inplace(RingPoly& a, const RingPoly& b, const RingPoly& c);
/// Multiply limb i by scalars[i].
void poly_mul_scalar_inplace(RingPoly& a, const std::vector<u64>& scalars);

/// X -> X^g; works in either domain. Even g throws InvalidAutomorphism.
RingPoly apply_automorphism(const RingPoly& p, u64 g);
/// Index map for the NTT-domain automorphism: out[k] = in[perm[k]].
std::vector<std::uint32_t> automorphism_ntt_permutation(std::size_t n, u64 g);
RingPoly apply_automorphism_ntt(const RingPoly& p, const std::vector<std::uint32_t>& perm);

RingPoly sample_ternary(BasisRef basis, Prng& rng);
RingPoly sample_gaussian(BasisRef basis, double sigma, Prng& rng);
RingPoly sample_uniform(BasisRef basis, Prng& rng);

/// Divide by the last modulus with rounding and drop it. Coefficient domain only.
RingPoly rns_drop_last(const RingPoly& p, BasisRef shorter);

/// Sub-polynomial on the first k limbs (same domain).
RingPoly take_limbs(const RingPoly& p, BasisRef prefix);

}  // namespace spikehe::ring

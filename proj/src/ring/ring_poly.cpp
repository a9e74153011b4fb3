#include "spikehe/ring/ring_poly.hpp"

#include <cmath>
#include <string>

#include "spikehe/common/errors.hpp"

namespace spikehe::ring {

RingPoly::RingPoly(BasisRef basis, Domain domain)
    : basis_(std::move(basis)), domain_(domain), data_(basis_->size() * basis_->n(), 0) {}

bool RingPoly::operator==(const RingPoly& o) const {
    return basis_->same(*o.basis_) && domain_ == o.domain_ && data_ == o.data_;
}

RingPoly RingPoly::from_signed(BasisRef basis, const std::vector<std::int64_t>& coeffs) {
    RingPoly p(std::move(basis), Domain::Coeff);
    if (coeffs.size() > p.n()) throw CapacityError("more coefficients than ring dimension");
    for (std::size_t i = 0; i < p.limbs(); ++i) {
        const Modulus& m = p.basis()->prime(i).mod();
        u64* l = p.limb(i);
        for (std::size_t j = 0; j < coeffs.size(); ++j) l[j] = m.from_signed(coeffs[j]);
    }
    return p;
}

namespace {

void check_compatible(const RingPoly& a, const RingPoly& b, const char* op) {
    if (!a.basis()->same(*b.basis())) {
        throw StructuralError(std::string(op) + ": operands have different RNS bases");
    }
    if (a.domain() != b.domain()) {
        throw StructuralError(std::string(op) + ": operands are in different domains");
    }
}

}  // namespace

void ntt_forward_inplace(RingPoly& p) {
    if (p.domain() != Domain::Coeff) throw StructuralError("ntt_forward: input already in NTT domain");
    for (std::size_t i = 0; i < p.limbs(); ++i) p.basis()->prime(i).forward(p.limb(i));
    p.set_domain(Domain::Ntt);
}

void ntt_inverse_inplace(RingPoly& p) {
    if (p.domain() != Domain::Ntt) throw StructuralError("ntt_inverse: input not in NTT domain");
    for (std::size_t i = 0; i < p.limbs(); ++i) p.basis()->prime(i).inverse(p.limb(i));
    p.set_domain(Domain::Coeff);
}

RingPoly ntt_forward(const RingPoly& p) {
    RingPoly r = p;
    ntt_forward_inplace(r);
    return r;
}

RingPoly ntt_inverse(const RingPoly& p) {
    RingPoly r = p;
    ntt_inverse_inplace(r);
    return r;
}

void poly_add_inplace(RingPoly& a, const RingPoly& b) {
    check_compatible(a, b, "poly_add");
    const std::size_t n = a.n();
    for (std::size_t i = 0; i < a.limbs(); ++i) {
        const Modulus& m = a.basis()->prime(i).mod();
        u64* x = a.limb(i);
        const u64* y = b.limb(i);
        for (std::size_t j = 0; j < n; ++j) x[j] = m.add(x[j], y[j]);
    }
}

void poly_sub_inplace(RingPoly& a, const RingPoly& b) {
    check_compatible(a, b, "poly_sub");
    const std::size_t n = a.n();
    for (std::size_t i = 0; i < a.limbs(); ++i) {
        const Modulus& m = a.basis()->prime(i).mod();
        u64* x = a.limb(i);
        const u64* y = b.limb(i);
        for (std::size_t j = 0; j < n; ++j) x[j] = m.sub(x[j], y[j]);
    }
}

RingPoly poly_add(const RingPoly& a, const RingPoly& b) {
    RingPoly r = a;
    poly_add_inplace(r, b);
    return r;
}

RingPoly poly_sub(const RingPoly& a, const RingPoly& b) {
    RingPoly r = a;
    poly_sub_inplace(r, b);
    return r;
}

RingPoly poly_neg(const RingPoly& a) {
    RingPoly r = a;
    for (std::size_t i = 0; i < r.limbs(); ++i) {
        const Modulus& m = r.basis()->prime(i).mod();
        u64* x = r.limb(i);
        for (std::size_t j = 0; j < r.n(); ++j) x[j] = m.neg(x[j]);
    }
    return r;
}

RingPoly poly_mul(const RingPoly& a, const RingPoly& b) {
    check_compatible(a, b, "poly_mul");
    if (a.domain() == Domain::Coeff) {
        RingPoly r = poly_mul(ntt_forward(a), ntt_forward(b));
        ntt_inverse_inplace(r);
        return r;
    }
    RingPoly r(a.basis(), Domain::Ntt);
    const std::size_t n = a.n();
    for (std::size_t i = 0; i < a.limbs(); ++i) {
        const Modulus& m = a.basis()->prime(i).mod();
        const u64* x = a.limb(i);
        const u64* y = b.limb(i);
        u64* z = r.limb(i);
        for (std::size_t j = 0; j < n; ++j) z[j] = m.mul(x[j], y[j]);
    }
    return r;
}

void poly_mul_add_inplace(RingPoly& a, const RingPoly& b, const RingPoly& c) {
    check_compatible(b, c, "poly_mul_add");
    check_compatible(a, b, "poly_mul_add");
    if (a.domain() != Domain::Ntt) throw StructuralError("poly_mul_add: NTT domain required");
    const std::size_t n = a.n();
    for (std::size_t i = 0; i < a.limbs(); ++i) {
        const Modulus& m = a.basis()->prime(i).mod();
        u64* z = a.limb(i);
        const u64* x = b.limb(i);
        const u64* y = c.limb(i);
        for (std::size_t j = 0; j < n; ++j) z[j] = m.add(z[j], m.mul(x[j], y[j]));
    }
}

void poly_mul_scalar_inplace(RingPoly& a, const std::vector<u64>& scalars) {
    if (scalars.size() != a.limbs()) throw StructuralError("poly_mul_scalar: one scalar per limb required");
    for (std::size_t i = 0; i < a.limbs(); ++i) {
        const Modulus& m = a.basis()->prime(i).mod();
        const u64 w = m.reduce(scalars[i]);
        const u64 wp = m.shoup(w);
        u64* x = a.limb(i);
        for (std::size_t j = 0; j < a.n(); ++j) x[j] = m.mul_shoup(x[j], w, wp);
    }
}

std::vector<std::uint32_t> automorphism_ntt_permutation(std::size_t n, u64 g) {
    const u64 m = 2 * static_cast<u64>(n);
    if ((g & 1) == 0) throw InvalidAutomorphism("automorphism index must be odd, got " + std::to_string(g));
    g %= m;
    const int logn = __builtin_ctzll(n);
    std::vector<std::uint32_t> perm(n);
    // Slot k holds the evaluation at psi^(2*brev(k)+1).
    for (std::size_t k = 0; k < n; ++k) {
        const u64 e = 2 * bit_reverse(k, logn) + 1;
        const u64 eg = static_cast<u64>((static_cast<u128>(e) * g) % m);
        perm[k] = static_cast<std::uint32_t>(bit_reverse((eg - 1) / 2, logn));
    }
    return perm;
}

RingPoly apply_automorphism_ntt(const RingPoly& p, const std::vector<std::uint32_t>& perm) {
    if (p.domain() != Domain::Ntt) throw StructuralError("NTT automorphism on coefficient-domain input");
    RingPoly r(p.basis(), Domain::Ntt);
    for (std::size_t i = 0; i < p.limbs(); ++i) {
        const u64* x = p.limb(i);
        u64* z = r.limb(i);
        for (std::size_t k = 0; k < p.n(); ++k) z[k] = x[perm[k]];
    }
    return r;
}

RingPoly apply_automorphism(const RingPoly& p, u64 g) {
    const std::size_t n = p.n();
    const u64 m = 2 * static_cast<u64>(n);
    if ((g & 1) == 0) throw InvalidAutomorphism("automorphism index must be odd, got " + std::to_string(g));
    g %= m;
    if (p.domain() == Domain::Ntt) return apply_automorphism_ntt(p, automorphism_ntt_permutation(n, g));
    RingPoly r(p.basis(), Domain::Coeff);
    for (std::size_t i = 0; i < p.limbs(); ++i) {
        const Modulus& mod = p.basis()->prime(i).mod();
        const u64* x = p.limb(i);
        u64* z = r.limb(i);
        for (std::size_t j = 0; j < n; ++j) {
            const u64 t = static_cast<u64>((static_cast<u128>(j) * g) % m);
            if (t < n) {
                z[t] = x[j];
            } else {
                z[t - n] = mod.neg(x[j]);
            }
        }
    }
    return r;
}

RingPoly sample_ternary(BasisRef basis, Prng& rng) {
    std::vector<std::int64_t> c(basis->n());
    std::uniform_int_distribution<int> d(-1, 1);
    for (auto& v : c) v = d(rng);
    return RingPoly::from_signed(std::move(basis), c);
}

RingPoly sample_gaussian(BasisRef basis, double sigma, Prng& rng) {
    if (!(sigma > 0)) throw DomainError("gaussian sigma must be positive");
    std::vector<std::int64_t> c(basis->n());
    std::normal_distribution<double> d(0.0, sigma);
    for (auto& v : c) v = std::llround(d(rng));
    return RingPoly::from_signed(std::move(basis), c);
}

RingPoly sample_uniform(BasisRef basis, Prng& rng) {
    RingPoly p(basis, Domain::Coeff);
    for (std::size_t i = 0; i < p.limbs(); ++i) {
        std::uniform_int_distribution<u64> d(0, basis->prime(i).value() - 1);
        u64* x = p.limb(i);
        for (std::size_t j = 0; j < p.n(); ++j) x[j] = d(rng);
    }
    return p;
}

RingPoly take_limbs(const RingPoly& p, BasisRef prefix) {
    if (prefix->size() > p.limbs() || prefix->n() != p.n()) {
        throw StructuralError("take_limbs: target basis is not a prefix");
    }
    for (std::size_t i = 0; i < prefix->size(); ++i) {
        if (prefix->prime(i).value() != p.basis()->prime(i).value()) {
            throw StructuralError("take_limbs: target basis is not a prefix");
        }
    }
    RingPoly r(prefix, p.domain());
    std::copy(p.data().begin(), p.data().begin() + static_cast<long>(prefix->size() * p.n()),
              r.data().begin());
    return r;
}

RingPoly rns_drop_last(const RingPoly& p, BasisRef shorter) {
    if (p.limbs() < 2) throw LevelExhausted("rns_drop_last: single-modulus basis cannot be rescaled");
    if (p.domain() != Domain::Coeff) throw StructuralError("rns_drop_last: coefficient domain required");
    if (!shorter) {
        std::vector<PrimeRef> refs(p.basis()->primes().begin(), p.basis()->primes().end() - 1);
        shorter = std::make_shared<const RnsBasis>(p.n(), std::move(refs));
    }
    if (shorter->size() != p.limbs() - 1) throw StructuralError("rns_drop_last: wrong target basis");
    const std::size_t last = p.limbs() - 1;
    const Modulus& ql = p.basis()->prime(last).mod();
    const u64 half = ql.value() >> 1;
    RingPoly r(shorter, Domain::Coeff);
    const u64* xl = p.limb(last);
    for (std::size_t i = 0; i < last; ++i) {
        const Modulus& qi = p.basis()->prime(i).mod();
        const u64 inv = qi.inv(ql.value() % qi.value());
        const u64 half_i = qi.reduce(half);
        const u64* x = p.limb(i);
        u64* z = r.limb(i);
        for (std::size_t j = 0; j < p.n(); ++j) {
            // (x + half - ((x_l + half) mod q_l)) / q_l rounds x / q_l to nearest
            const u64 t = qi.reduce((xl[j] + half) % ql.value());
            const u64 v = qi.sub(qi.add(x[j], half_i), t);
            z[j] = qi.mul(v, inv);
        }
    }
    return r;
}

}  // namespace spikehe::ring

#include "spikehe/ckks/keys.hpp"

#include <string>

#include "spikehe/common/errors.hpp"

namespace spikehe::ckks {

const SwitchKey* GaloisKeySet::find(long k, std::size_t slots) const {
    const long s = static_cast<long>(slots);
    for (long cand : {k, k - s, k + s}) {
        auto it = keys.find(cand);
        if (it != keys.end()) return &it->second;
    }
    return nullptr;
}

std::set<long> GaloisKeySet::indices() const {
    std::set<long> out;
    for (const auto& [k, _] : keys) out.insert(k);
    return out;
}

KeyGenerator::KeyGenerator(ContextRef ctx, std::uint64_t seed) : ctx_(std::move(ctx)), rng_(seed) {
    sk_.s = ring::sample_ternary(ctx_->key_basis(), rng_);
    ring::ntt_forward_inplace(sk_.s);
}

PublicKey KeyGenerator::make_public_key() {
    const BasisRef qb = ctx_->q_basis(ctx_->max_level());
    PublicKey pk;
    pk.a = ring::sample_uniform(qb, rng_);
    pk.a.set_domain(ring::Domain::Ntt);
    RingPoly e = ring::sample_gaussian(qb, ctx_->params().sigma, rng_);
    ring::ntt_forward_inplace(e);
    const RingPoly s = ring::take_limbs(sk_.s, qb);
    pk.b = ring::poly_sub(e, ring::poly_mul(pk.a, s));
    return pk;
}

SwitchKey KeyGenerator::make_switch_key(const RingPoly& s_from) {
    const BasisRef kb = ctx_->key_basis();
    const int L = ctx_->max_level();
    SwitchKey key;
    for (int d = 0; d < ctx_->digit_count(L); ++d) {
        RingPoly a = ring::sample_uniform(kb, rng_);
        a.set_domain(ring::Domain::Ntt);
        RingPoly e = ring::sample_gaussian(kb, ctx_->params().sigma, rng_);
        ring::ntt_forward_inplace(e);
        RingPoly b = ring::poly_sub(e, ring::poly_mul(a, sk_.s));
        for (std::size_t i : ctx_->digit_conversion(L, d).src) {
            const ring::Modulus& m = kb->prime(i).mod();
            const u64 pq = ctx_->p_mod_q()[i];
            u64* bl = b.limb(i);
            const u64* sl = s_from.limb(i);
            for (std::size_t j = 0; j < ctx_->n(); ++j) bl[j] = m.add(bl[j], m.mul(pq, sl[j]));
        }
        key.b.push_back(std::move(b));
        key.a.push_back(std::move(a));
    }
    return key;
}

RelinKey KeyGenerator::make_relin_key() { return make_switch_key(ring::poly_mul(sk_.s, sk_.s)); }

GaloisKeySet KeyGenerator::make_galois_keys(const std::vector<long>& indices) {
    const long half = static_cast<long>(ctx_->slots());
    GaloisKeySet set;
    for (long k : indices) {
        if (k == 0 || k <= -half || k >= half) {
            throw ContractError("rotation index " + std::to_string(k) + " outside (-N/2, N/2) \\ {0}");
        }
        if (set.keys.count(k)) continue;
        const u64 g = ctx_->transform().galois_element(k);
        const RingPoly s_rot = ring::apply_automorphism_ntt(sk_.s, ctx_->galois_permutation(g));
        set.keys.emplace(k, make_switch_key(s_rot));
        set.elements.emplace(k, g);
    }
    return set;
}

}  // namespace spikehe::ckks

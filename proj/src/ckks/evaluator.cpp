#include "spikehe/ckks/evaluator.hpp"

#include <cmath>
#include <string>

#include "spikehe/common/errors.hpp"

namespace spikehe::ckks {

using ring::Domain;
using ring::Modulus;
using ring::u128;

// ---------------------------------------------------------------- Encryptor

Encryptor::Encryptor(ContextRef ctx, PublicKey pk, std::uint64_t seed)
    : ctx_(std::move(ctx)), pk_(std::move(pk)), rng_(seed) {}

Ciphertext Encryptor::encrypt(const Plaintext& pt) {
    if (pt.level < 0 || pt.level > ctx_->max_level()) {
        throw StructuralError("encrypt: plaintext level " + std::to_string(pt.level) + " out of range");
    }
    const BasisRef qb = ctx_->q_basis(pt.level);
    RingPoly u = ring::sample_ternary(qb, rng_);
    ring::ntt_forward_inplace(u);
    RingPoly e0 = ring::sample_gaussian(qb, ctx_->params().sigma, rng_);
    RingPoly e1 = ring::sample_gaussian(qb, ctx_->params().sigma, rng_);
    ring::ntt_forward_inplace(e0);
    ring::ntt_forward_inplace(e1);
    Ciphertext ct;
    ct.c0 = ring::poly_mul(ring::take_limbs(pk_.b, qb), u);
    ring::poly_add_inplace(ct.c0, e0);
    ring::poly_add_inplace(ct.c0, pt.poly);
    ct.c1 = ring::poly_mul(ring::take_limbs(pk_.a, qb), u);
    ring::poly_add_inplace(ct.c1, e1);
    ct.level = pt.level;
    ct.scale = pt.scale;
    return ct;
}

Ciphertext Encryptor::encrypt_values(const std::vector<double>& values, int level) {
    if (level < 0) level = ctx_->max_level();
    return encrypt(ctx_->encode(values, level, ctx_->scale(level)));
}

// ---------------------------------------------------------------- Decryptor

Decryptor::Decryptor(ContextRef ctx, SecretKey sk) : ctx_(std::move(ctx)), sk_(std::move(sk)) {}

Plaintext Decryptor::decrypt(const Ciphertext& ct) const {
    const BasisRef qb = ctx_->q_basis(ct.level);
    if (!ct.c0.basis()->same(*qb) || !ct.c1.basis()->same(*qb)) {
        throw StructuralError("decrypt: ciphertext basis does not match its level");
    }
    Plaintext pt;
    pt.poly = ring::poly_mul(ct.c1, ring::take_limbs(sk_.s, qb));
    ring::poly_add_inplace(pt.poly, ct.c0);
    pt.level = ct.level;
    pt.scale = ct.scale;
    return pt;
}

std::vector<double> Decryptor::decrypt_values(const Ciphertext& ct) const {
    return ctx_->decode(decrypt(ct));
}

// ---------------------------------------------------------------- Evaluator

Evaluator::Evaluator(ContextRef ctx) : ctx_(std::move(ctx)) {}

namespace {

void check_scales(double a, double b, const char* op) {
    if (std::fabs(a / b - 1.0) > 1e-6) {
        throw StructuralError(std::string(op) + ": operand scales differ (" + std::to_string(a) + " vs " +
                              std::to_string(b) + ")");
    }
}

void need_level(int level, int needed, const char* op) {
    if (level < needed) {
        throw LevelExhausted(std::string(op) + " needs " + std::to_string(needed) + " level(s), ciphertext has " +
                             std::to_string(level));
    }
}

void mul_scalar_residues(RingPoly& p, const std::vector<u64>& r) {
    std::vector<u64> head(r.begin(), r.begin() + static_cast<long>(p.limbs()));
    ring::poly_mul_scalar_inplace(p, head);
}

}  // namespace

void Evaluator::align(Ciphertext& a, Ciphertext& b) const {
    if (a.level > b.level) a = level_down(a, b.level);
    if (b.level > a.level) b = level_down(b, a.level);
}

Ciphertext Evaluator::add(const Ciphertext& a0, const Ciphertext& b0) const {
    Ciphertext a = a0, b = b0;
    align(a, b);
    check_scales(a.scale, b.scale, "add");
    ring::poly_add_inplace(a.c0, b.c0);
    ring::poly_add_inplace(a.c1, b.c1);
    return a;
}

Ciphertext Evaluator::sub(const Ciphertext& a0, const Ciphertext& b0) const {
    Ciphertext a = a0, b = b0;
    align(a, b);
    check_scales(a.scale, b.scale, "sub");
    ring::poly_sub_inplace(a.c0, b.c0);
    ring::poly_sub_inplace(a.c1, b.c1);
    return a;
}

Ciphertext Evaluator::negate(const Ciphertext& a) const {
    Ciphertext r = a;
    r.c0 = ring::poly_neg(a.c0);
    r.c1 = ring::poly_neg(a.c1);
    return r;
}

Ciphertext Evaluator::add_plain(const Ciphertext& a, const Plaintext& p) const {
    if (p.level != a.level) throw StructuralError("add_plain: plaintext level differs from ciphertext level");
    check_scales(a.scale, p.scale, "add_plain");
    Ciphertext r = a;
    ring::poly_add_inplace(r.c0, p.poly);
    return r;
}

Ciphertext Evaluator::add_const(const Ciphertext& a, double c) const {
    Ciphertext r = a;
    const auto res = ctx_->integer_residues(static_cast<long double>(c) * a.scale, a.level);
    for (std::size_t i = 0; i < r.c0.limbs(); ++i) {
        const Modulus& m = r.c0.basis()->prime(i).mod();
        u64* x = r.c0.limb(i);
        for (std::size_t j = 0; j < r.c0.n(); ++j) x[j] = m.add(x[j], res[i]);
    }
    return r;
}

double Evaluator::plain_scale(int level, double ct_scale) const {
    return static_cast<double>(static_cast<long double>(ctx_->q_primes()[static_cast<std::size_t>(level)]) *
                               ctx_->scale(level - 1) / ct_scale);
}

Ciphertext Evaluator::rescale(const Ciphertext& a) const {
    need_level(a.level, 1, "rescale");
    const int l = a.level;
    const BasisRef qb = ctx_->q_basis(l - 1);
    const BasisRef full = ctx_->q_basis(l);
    const std::size_t n = ctx_->n();
    const ring::PrimeModulus& pl = full->prime(static_cast<std::size_t>(l));
    const u64 ql = pl.value();
    const u64 half = ql >> 1;

    auto drop = [&](const RingPoly& in) {
        RingPoly out(qb, Domain::Ntt);
        std::vector<u64> last(in.limb(static_cast<std::size_t>(l)), in.limb(static_cast<std::size_t>(l)) + n);
        pl.inverse(last.data());
        for (auto& v : last) v = pl.mod().add(v, half);
        std::vector<u64> t(n);
        for (int i = 0; i < l; ++i) {
            const ring::PrimeModulus& pi = qb->prime(static_cast<std::size_t>(i));
            const Modulus& m = pi.mod();
            const u64 half_i = m.reduce(half);
            const u64 inv = m.inv(m.reduce(ql));
            const u64 invp = m.shoup(inv);
            for (std::size_t j = 0; j < n; ++j) t[j] = m.sub(m.reduce(last[j]), half_i);
            pi.forward(t.data());
            const u64* x = in.limb(static_cast<std::size_t>(i));
            u64* z = out.limb(static_cast<std::size_t>(i));
            for (std::size_t j = 0; j < n; ++j) z[j] = m.mul_shoup(m.sub(x[j], t[j]), inv, invp);
        }
        return out;
    };

    Ciphertext r;
    r.c0 = drop(a.c0);
    r.c1 = drop(a.c1);
    r.level = l - 1;
    r.scale = static_cast<double>(static_cast<long double>(a.scale) / ql);
    return r;
}

Ciphertext Evaluator::mul(const Ciphertext& a0, const Ciphertext& b0, const RelinKey& rk) const {
    Ciphertext a = a0, b = b0;
    align(a, b);
    need_level(a.level, 1, "mul");
    RingPoly d0 = ring::poly_mul(a.c0, b.c0);
    RingPoly d1 = ring::poly_mul(a.c0, b.c1);
    ring::poly_mul_add_inplace(d1, a.c1, b.c0);
    RingPoly d2 = ring::poly_mul(a.c1, b.c1);
    auto [k0, k1] = key_switch(d2, rk);
    ring::poly_add_inplace(d0, k0);
    ring::poly_add_inplace(d1, k1);
    Ciphertext r{std::move(d0), std::move(d1), a.level, a.scale * b.scale};
    return rescale(r);
}

Ciphertext Evaluator::mul_plain(const Ciphertext& a, const Plaintext& p) const {
    need_level(a.level, 1, "mul_plain");
    if (p.level != a.level) throw StructuralError("mul_plain: plaintext level differs from ciphertext level");
    Ciphertext r{ring::poly_mul(a.c0, p.poly), ring::poly_mul(a.c1, p.poly), a.level, a.scale * p.scale};
    return rescale(r);
}

Ciphertext Evaluator::mul_plain(const Ciphertext& a, const std::vector<double>& w) const {
    need_level(a.level, 1, "mul_plain");
    return mul_plain(a, ctx_->encode(w, a.level, plain_scale(a.level, a.scale)));
}

Ciphertext Evaluator::mul_const(const Ciphertext& a, double c) const {
    need_level(a.level, 1, "mul_const");
    const double s = plain_scale(a.level, a.scale);
    const long double cs = std::nearbyint(static_cast<long double>(c) * s);
    const auto res = ctx_->integer_residues(cs, a.level);
    Ciphertext r = a;
    mul_scalar_residues(r.c0, res);
    mul_scalar_residues(r.c1, res);
    // Rounding the constant perturbs the nominal scale only when c*s is not integral.
    r.scale = a.scale * s;
    return rescale(r);
}

Ciphertext Evaluator::linear_combination(const std::vector<const Ciphertext*>& a,
                                         const std::vector<const Plaintext*>& p) const {
    if (a.empty() || a.size() != p.size()) throw StructuralError("linear_combination: size mismatch");
    const int l = a[0]->level;
    need_level(l, 1, "linear_combination");
    Ciphertext r{RingPoly(ctx_->q_basis(l), Domain::Ntt), RingPoly(ctx_->q_basis(l), Domain::Ntt), l,
                 a[0]->scale * p[0]->scale};
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i]->level != l || p[i]->level != l) {
            throw StructuralError("linear_combination: operands at different levels");
        }
        check_scales(a[i]->scale * p[i]->scale, r.scale, "linear_combination");
        ring::poly_mul_add_inplace(r.c0, a[i]->c0, p[i]->poly);
        ring::poly_mul_add_inplace(r.c1, a[i]->c1, p[i]->poly);
    }
    return rescale(r);
}

Ciphertext Evaluator::level_down(const Ciphertext& a, int target) const {
    if (target == a.level) return a;
    if (target > a.level) throw StructuralError("level_down: target above current level");
    if (target < 0) throw LevelExhausted("level_down: target level below zero");
    Ciphertext r = a;
    const int top = target + 1;
    if (top < a.level) {
        const BasisRef qb = ctx_->q_basis(top);
        r.c0 = ring::take_limbs(a.c0, qb);
        r.c1 = ring::take_limbs(a.c1, qb);
        r.level = top;
    }
    const long double c = std::nearbyint(static_cast<long double>(plain_scale(top, r.scale)));
    const auto res = ctx_->integer_residues(c, top);
    mul_scalar_residues(r.c0, res);
    mul_scalar_residues(r.c1, res);
    r.scale = static_cast<double>(static_cast<long double>(r.scale) * c);
    return rescale(r);
}

Ciphertext Evaluator::rotate(const Ciphertext& a, long k, const GaloisKeySet& gk) const {
    const long half = static_cast<long>(ctx_->slots());
    long r = k % half;
    if (r < 0) r += half;
    if (r == 0) return a;
    const SwitchKey* key = gk.find(k, ctx_->slots());
    if (!key) key = gk.find(r, ctx_->slots());
    if (!key) throw MissingKeyError(k, "missing rotation key for index " + std::to_string(k));
    const u64 g = ctx_->transform().galois_element(r);
    const auto& perm = ctx_->galois_permutation(g);
    RingPoly c0 = ring::apply_automorphism_ntt(a.c0, perm);
    RingPoly c1 = ring::apply_automorphism_ntt(a.c1, perm);
    auto [k0, k1] = key_switch(c1, *key);
    ring::poly_add_inplace(c0, k0);
    return Ciphertext{std::move(c0), std::move(k1), a.level, a.scale};
}

std::pair<RingPoly, RingPoly> Evaluator::key_switch(const RingPoly& d, const SwitchKey& key) const {
    const int l = static_cast<int>(d.limbs()) - 1;
    const int L = ctx_->max_level();
    const std::size_t n = ctx_->n();
    const std::size_t kp = ctx_->p_primes().size();
    const std::size_t nq = static_cast<std::size_t>(l) + 1;
    const BasisRef qp = ctx_->qp_basis(l);
    if (key.b.size() != static_cast<std::size_t>(ctx_->digit_count(L))) {
        throw StructuralError("key_switch: key digit count does not match parameters");
    }

    const RingPoly dc = ring::ntt_inverse(d);
    RingPoly acc0(qp, Domain::Ntt), acc1(qp, Domain::Ntt);
    RingPoly digit(qp, Domain::Ntt);
    auto key_limb = [&](std::size_t idx) { return idx < nq ? idx : static_cast<std::size_t>(L) + 1 + (idx - nq); };

    for (int j = 0; j < ctx_->digit_count(l); ++j) {
        const DigitConversion& cv = ctx_->digit_conversion(l, j);
        const std::size_t ns = cv.src.size();
        std::vector<u64> y(ns * n);
        for (std::size_t a = 0; a < ns; ++a) {
            const std::size_t i = cv.src[a];
            const Modulus& m = qp->prime(i).mod();
            const u64 w = cv.inv_hat[a];
            const u64 wp = m.shoup(w);
            const u64* x = dc.limb(i);
            u64* ya = y.data() + a * n;
            for (std::size_t t = 0; t < n; ++t) ya[t] = m.mul_shoup(x[t], w, wp);
        }
        std::vector<std::size_t> targets(cv.dst_q.begin(), cv.dst_q.end());
        for (std::size_t p = 0; p < kp; ++p) targets.push_back(nq + p);
        for (std::size_t tp = 0; tp < targets.size(); ++tp) {
            const std::size_t idx = targets[tp];
            const ring::PrimeModulus& pm = qp->prime(idx);
            const Modulus& m = pm.mod();
            const std::vector<u64>& row = cv.hat[tp];
            u64* out = digit.limb(idx);
            for (std::size_t t = 0; t < n; ++t) {
                u128 s = 0;
                for (std::size_t a = 0; a < ns; ++a) s += static_cast<u128>(y[a * n + t]) * row[a];
                out[t] = m.reduce128(s);
            }
            pm.forward(out);
        }
        for (std::size_t i : cv.src) std::copy(d.limb(i), d.limb(i) + n, digit.limb(i));

        const RingPoly& kb = key.b[static_cast<std::size_t>(j)];
        const RingPoly& ka = key.a[static_cast<std::size_t>(j)];
        for (std::size_t idx = 0; idx < qp->size(); ++idx) {
            const Modulus& m = qp->prime(idx).mod();
            const std::size_t ki = key_limb(idx);
            const u64* x = digit.limb(idx);
            const u64* bb = kb.limb(ki);
            const u64* aa = ka.limb(ki);
            u64* z0 = acc0.limb(idx);
            u64* z1 = acc1.limb(idx);
            for (std::size_t t = 0; t < n; ++t) {
                z0[t] = m.add(z0[t], m.mul(x[t], bb[t]));
                z1[t] = m.add(z1[t], m.mul(x[t], aa[t]));
            }
        }
    }
    return {mod_down(acc0, l), mod_down(acc1, l)};
}

RingPoly Evaluator::mod_down(const RingPoly& acc, int l) const {
    const std::size_t n = ctx_->n();
    const std::size_t kp = ctx_->p_primes().size();
    const std::size_t nq = static_cast<std::size_t>(l) + 1;
    const BasisRef qp = acc.basis();
    std::vector<u64> y(kp * n);
    for (std::size_t j = 0; j < kp; ++j) {
        const ring::PrimeModulus& pm = qp->prime(nq + j);
        u64* yj = y.data() + j * n;
        std::copy(acc.limb(nq + j), acc.limb(nq + j) + n, yj);
        pm.inverse(yj);
        const u64 w = ctx_->p_inv_hat()[j];
        const u64 wp = pm.mod().shoup(w);
        for (std::size_t t = 0; t < n; ++t) yj[t] = pm.mod().mul_shoup(yj[t], w, wp);
    }
    RingPoly out(ctx_->q_basis(l), Domain::Ntt);
    std::vector<u64> tmp(n);
    for (std::size_t i = 0; i < nq; ++i) {
        const ring::PrimeModulus& pm = qp->prime(i);
        const Modulus& m = pm.mod();
        const std::vector<u64>& row = ctx_->p_hat_mod_q()[i];
        for (std::size_t t = 0; t < n; ++t) {
            u128 s = 0;
            for (std::size_t j = 0; j < kp; ++j) s += static_cast<u128>(y[j * n + t]) * row[j];
            tmp[t] = m.reduce128(s);
        }
        pm.forward(tmp.data());
        const u64 w = ctx_->p_inv_mod_q()[i];
        const u64 wp = m.shoup(w);
        const u64* x = acc.limb(i);
        u64* z = out.limb(i);
        for (std::size_t t = 0; t < n; ++t) z[t] = m.mul_shoup(m.sub(x[t], tmp[t]), w, wp);
    }
    return out;
}

// ---------------------------------------------------------------- RecryptionAuthority

RecryptionAuthority::RecryptionAuthority(ContextRef ctx, SecretKey sk, PublicKey pk, std::uint64_t seed)
    : ctx_(ctx), dec_(ctx, std::move(sk)), enc_(ctx, std::move(pk), seed) {}

Ciphertext RecryptionAuthority::refresh(const Ciphertext& ct) {
    return enc_.encrypt_values(dec_.decrypt_values(ct), ctx_->max_level());
}

Ciphertext RecryptionAuthority::compare_le(const Ciphertext& v, const Ciphertext& t) {
    const auto a = dec_.decrypt_values(v);
    const auto b = dec_.decrypt_values(t);
    std::vector<double> c(a.size());
    // decrypted operands carry noise, so differences below the tie band count as equal
    for (std::size_t i = 0; i < a.size(); ++i) c[i] = a[i] <= b[i] + kCompareTieBand ? 1.0 : 0.0;
    return enc_.encrypt_values(c, ctx_->max_level());
}

}  // namespace spikehe::ckks

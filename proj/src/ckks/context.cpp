#include "spikehe/ckks/context.hpp"

#include <cmath>
#include <string>

#include "spikehe/common/errors.hpp"

namespace spikehe::ckks {

using ring::Modulus;
using ring::u128;

namespace {

void fnv(std::uint64_t& h, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xff;
        h *= 0x100000001b3ULL;
    }
}

double log2_prime(u64 q) { return std::log2(static_cast<double>(q)); }

}  // namespace

CkksContext::CkksContext(const CkksParams& params) : params_(params), transform_(params.n) {
    params_.validate();
    const std::size_t n = params_.n;
    const int L = params_.depth;

    q_ = ring::ntt_primes_below(params_.base_bits, n, 1);
    const auto scale_primes = ring::ntt_primes_below(params_.scale_bits, n, static_cast<std::size_t>(L), q_);
    q_.insert(q_.end(), scale_primes.begin(), scale_primes.end());

    const std::size_t alpha = (static_cast<std::size_t>(L) + params_.dnum) / params_.dnum;  // ceil((L+1)/dnum)
    double max_digit_bits = 0;
    for (std::size_t start = 0; start < q_.size(); start += alpha) {
        double b = 0;
        for (std::size_t i = start; i < std::min(q_.size(), start + alpha); ++i) b += log2_prime(q_[i]);
        max_digit_bits = std::max(max_digit_bits, b);
    }
    const std::size_t k = static_cast<std::size_t>(std::ceil(max_digit_bits / params_.special_bits)) + 1;
    p_ = ring::ntt_primes_below(params_.special_bits, n, k, q_);

    std::vector<ring::PrimeRef> qrefs, prefs;
    for (u64 q : q_) qrefs.push_back(std::make_shared<const ring::PrimeModulus>(q, n));
    for (u64 p : p_) prefs.push_back(std::make_shared<const ring::PrimeModulus>(p, n));
    for (int l = 0; l <= L; ++l) {
        std::vector<ring::PrimeRef> qs(qrefs.begin(), qrefs.begin() + l + 1);
        q_bases_.push_back(std::make_shared<const ring::RnsBasis>(n, qs));
        qs.insert(qs.end(), prefs.begin(), prefs.end());
        qp_bases_.push_back(std::make_shared<const ring::RnsBasis>(n, qs));
    }
    p_basis_ = std::make_shared<const ring::RnsBasis>(n, prefs);

    scales_.assign(static_cast<std::size_t>(L) + 1, 0.0);
    long double s = std::ldexp(1.0L, params_.scale_bits);
    scales_[static_cast<std::size_t>(L)] = static_cast<double>(s);
    for (int l = L; l >= 1; --l) {
        s = s * s / static_cast<long double>(q_[static_cast<std::size_t>(l)]);
        scales_[static_cast<std::size_t>(l - 1)] = static_cast<double>(s);
    }

    std::uint64_t h = 0xcbf29ce484222325ULL;
    fnv(h, n);
    fnv(h, static_cast<std::uint64_t>(L));
    fnv(h, static_cast<std::uint64_t>(params_.scale_bits));
    fnv(h, static_cast<std::uint64_t>(params_.dnum));
    for (u64 q : q_) fnv(h, q);
    for (u64 p : p_) fnv(h, p);
    digest_ = h;

    // Key-switching digit tables per level.
    digits_.resize(static_cast<std::size_t>(L) + 1);
    for (int l = 0; l <= L; ++l) {
        const std::size_t top = static_cast<std::size_t>(l) + 1;
        for (std::size_t start = 0; start < top; start += alpha) {
            DigitConversion dc;
            for (std::size_t i = start; i < std::min(top, start + alpha); ++i) dc.src.push_back(i);
            for (std::size_t i = 0; i < top; ++i) {
                if (i < start || i >= start + alpha) dc.dst_q.push_back(i);
            }
            for (std::size_t i : dc.src) {
                const Modulus qi(q_[i]);
                u64 prod = 1;
                for (std::size_t j : dc.src) {
                    if (j != i) prod = qi.mul(prod, qi.reduce(q_[j]));
                }
                dc.inv_hat.push_back(qi.inv(prod));
            }
            std::vector<u64> targets;
            for (std::size_t t : dc.dst_q) targets.push_back(q_[t]);
            targets.insert(targets.end(), p_.begin(), p_.end());
            for (u64 tv : targets) {
                const Modulus mt(tv);
                std::vector<u64> row;
                for (std::size_t i : dc.src) {
                    u64 prod = 1;
                    for (std::size_t j : dc.src) {
                        if (j != i) prod = mt.mul(prod, mt.reduce(q_[j]));
                    }
                    row.push_back(prod);
                }
                dc.hat.push_back(std::move(row));
            }
            digits_[static_cast<std::size_t>(l)].push_back(std::move(dc));
        }
    }

    for (std::size_t j = 0; j < p_.size(); ++j) {
        const Modulus pj(p_[j]);
        u64 prod = 1;
        for (std::size_t i = 0; i < p_.size(); ++i) {
            if (i != j) prod = pj.mul(prod, pj.reduce(p_[i]));
        }
        p_inv_hat_.push_back(pj.inv(prod));
    }
    for (u64 qv : q_) {
        const Modulus qi(qv);
        std::vector<u64> row;
        u64 pfull = 1;
        for (std::size_t j = 0; j < p_.size(); ++j) {
            u64 prod = 1;
            for (std::size_t i = 0; i < p_.size(); ++i) {
                if (i != j) prod = qi.mul(prod, qi.reduce(p_[i]));
            }
            row.push_back(prod);
            pfull = qi.mul(pfull, qi.reduce(p_[j]));
        }
        p_hat_mod_q_.push_back(std::move(row));
        p_mod_q_.push_back(pfull);
        p_inv_mod_q_.push_back(qi.inv(pfull));
    }
}

int CkksContext::digit_count(int level) const {
    return static_cast<int>(digits_.at(static_cast<std::size_t>(level)).size());
}

const DigitConversion& CkksContext::digit_conversion(int level, int digit) const {
    return digits_.at(static_cast<std::size_t>(level)).at(static_cast<std::size_t>(digit));
}

const std::vector<std::uint32_t>& CkksContext::galois_permutation(u64 g) const {
    std::lock_guard<std::mutex> lock(perm_mu_);
    auto it = perms_.find(g);
    if (it == perms_.end()) {
        it = perms_.emplace(g, ring::automorphism_ntt_permutation(params_.n, g)).first;
    }
    return it->second;
}

std::vector<u64> CkksContext::integer_residues(long double value, int level) const {
    const long double r = std::nearbyint(value);
    if (!(std::fabs(r) < std::ldexp(1.0L, 125))) {
        throw DomainError("value too large to encode at this scale");
    }
    const bool neg = r < 0;
    const u128 mag = static_cast<u128>(neg ? -r : r);
    std::vector<u64> out;
    for (int i = 0; i <= level; ++i) {
        const Modulus m(q_[static_cast<std::size_t>(i)]);
        const u64 v = m.reduce128(mag);
        out.push_back(neg ? m.neg(v) : v);
    }
    return out;
}

Plaintext CkksContext::encode(const std::vector<double>& values, int level, double scale) const {
    if (level < 0 || level > max_level()) throw StructuralError("encode: level out of range");
    if (!(scale > 0)) throw DomainError("encode: scale must be positive");
    const std::vector<double> coeffs = transform_.to_coeffs(values);
    Plaintext pt{RingPoly(q_basis(level), ring::Domain::Coeff), level, scale};
    const std::size_t nn = n();
    std::vector<u128> mag(nn);
    std::vector<char> neg(nn);
    for (std::size_t j = 0; j < nn; ++j) {
        const long double r = std::nearbyint(static_cast<long double>(coeffs[j]) * scale);
        if (!(std::fabs(r) < std::ldexp(1.0L, 125))) throw DomainError("encode: value overflow");
        neg[j] = r < 0;
        mag[j] = static_cast<u128>(neg[j] ? -r : r);
    }
    for (int i = 0; i <= level; ++i) {
        const Modulus& m = pt.poly.basis()->prime(static_cast<std::size_t>(i)).mod();
        u64* x = pt.poly.limb(static_cast<std::size_t>(i));
        for (std::size_t j = 0; j < nn; ++j) {
            const u64 v = m.reduce128(mag[j]);
            x[j] = neg[j] ? m.neg(v) : v;
        }
    }
    ring::ntt_forward_inplace(pt.poly);
    return pt;
}

std::vector<double> CkksContext::decode(const Plaintext& pt) const {
    const std::size_t nn = n();
    const std::size_t use = std::min<std::size_t>(2, pt.poly.limbs());
    std::vector<std::vector<u64>> limbs(use);
    for (std::size_t i = 0; i < use; ++i) {
        limbs[i].assign(pt.poly.limb(i), pt.poly.limb(i) + nn);
        if (pt.poly.domain() == ring::Domain::Ntt) pt.poly.basis()->prime(i).inverse(limbs[i].data());
    }
    std::vector<double> coeffs(nn);
    const u64 q0 = q_[0];
    if (use == 1) {
        for (std::size_t j = 0; j < nn; ++j) {
            const u64 x = limbs[0][j];
            const long double v = x > q0 / 2 ? -static_cast<long double>(q0 - x) : static_cast<long double>(x);
            coeffs[j] = static_cast<double>(v / pt.scale);
        }
    } else {
        const u64 q1 = q_[1];
        const Modulus m1(q1);
        const u64 q0inv = m1.inv(q0 % q1);
        const u128 big = static_cast<u128>(q0) * q1;
        for (std::size_t j = 0; j < nn; ++j) {
            const u64 x0 = limbs[0][j];
            const u64 d = m1.mul(m1.sub(limbs[1][j], m1.reduce(x0)), q0inv);
            const u128 x = static_cast<u128>(d) * q0 + x0;
            long double v;
            if (x > big / 2) {
                v = -static_cast<long double>(big - x);
            } else {
                v = static_cast<long double>(x);
            }
            coeffs[j] = static_cast<double>(v / pt.scale);
        }
    }
    return transform_.to_slots(coeffs);
}

}  // namespace spikehe::ckks

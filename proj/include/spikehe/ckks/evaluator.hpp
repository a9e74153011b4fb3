#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "spikehe/ckks/context.hpp"
#include "spikehe/ckks/keys.hpp"

namespace spikehe::ckks {

class Encryptor {
public:
    Encryptor(ContextRef ctx, PublicKey pk, std::uint64_t seed);

    Ciphertext encrypt(const Plaintext& pt);
    /// Encode at the canonical scale of `level` (default: max level) and encrypt.
    Ciphertext encrypt_values(const std::vector<double>& values, int level = -1);

private:
    ContextRef ctx_;
    PublicKey pk_;
    ring::Prng rng_;
};

class Decryptor {
public:
    Decryptor(ContextRef ctx, SecretKey sk);

    Plaintext decrypt(const Ciphertext& ct) const;
    std::vector<double> decrypt_values(const Ciphertext& ct) const;

private:
    ContextRef ctx_;
    SecretKey sk_;
};

/// Homomorphic operations. Every multiplication rescales immediately, so a ciphertext at
/// level l always carries the canonical scale ctx.scale(l).
class Evaluator {
public:
    explicit Evaluator(ContextRef ctx);

    const CkksContext& context() const { return *ctx_; }

    Ciphertext add(const Ciphertext& a, const Ciphertext& b) const;
    Ciphertext sub(const Ciphertext& a, const Ciphertext& b) const;
    Ciphertext negate(const Ciphertext& a) const;
    Ciphertext add_plain(const Ciphertext& a, const Plaintext& p) const;
    Ciphertext add_const(const Ciphertext& a, double c) const;

    Ciphertext mul(const Ciphertext& a, const Ciphertext& b, const RelinKey& rk) const;
    Ciphertext mul_plain(const Ciphertext& a, const Plaintext& p) const;
    /// Encodes `w` at the scale that keeps the result canonical.
    Ciphertext mul_plain(const Ciphertext& a, const std::vector<double>& w) const;
    Ciphertext mul_const(const Ciphertext& a, double c) const;
    /// sum_i a_i * p_i with a single rescale. All a_i share one level.
    Ciphertext linear_combination(const std::vector<const Ciphertext*>& a,
                                  const std::vector<const Plaintext*>& p) const;

    /// Slot i of the result holds slot (i + k) mod N/2 of the input.
    Ciphertext rotate(const Ciphertext& a, long k, const GaloisKeySet& gk) const;

    Ciphertext rescale(const Ciphertext& a) const;
    /// Drop to `target` level keeping values, with canonical scale at the target.
    Ciphertext level_down(const Ciphertext& a, int target) const;

    /// Plaintext scale that, multiplied at `level` into a ciphertext of scale `ct_scale`,
    /// yields the canonical scale of level-1 after rescaling.
    double plain_scale(int level, double ct_scale) const;

    /// Hybrid key switch of `d` (NTT over the q chain) into (c0, c1) under s.
    std::pair<RingPoly, RingPoly> key_switch(const RingPoly& d, const SwitchKey& key) const;

private:
    void align(Ciphertext& a, Ciphertext& b) const;
    RingPoly mod_down(const RingPoly& acc, int level) const;

    ContextRef ctx_;
};

/// Decrypted values closer than this to the threshold compare as equal (no spike).
inline constexpr double kCompareTieBand = 1.0 / (1 << 20);

/// Test-mode stand-in for bootstrapping and scheme switching: holds the secret key,
/// decrypts and re-encrypts at the maximum level.
class RecryptionAuthority {
public:
    RecryptionAuthority(ContextRef ctx, SecretKey sk, PublicKey pk, std::uint64_t seed);

    Ciphertext refresh(const Ciphertext& ct);
    /// c_i = 1 if v_i <= t_i else 0, freshly encrypted at the maximum level.
    Ciphertext compare_le(const Ciphertext& v, const Ciphertext& t);
    std::vector<double> peek(const Ciphertext& ct) const { return dec_.decrypt_values(ct); }

private:
    ContextRef ctx_;
    Decryptor dec_;
    Encryptor enc_;
};

}  // namespace spikehe::ckks

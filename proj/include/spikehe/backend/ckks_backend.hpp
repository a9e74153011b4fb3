#pragma once

#include <optional>
#include <string>

#include "spikehe/backend/backend.hpp"
#include "spikehe/ckks/evaluator.hpp"
#include "spikehe/ckks/keys.hpp"

namespace spikehe::backend {

/// Evaluation keys plus the harness-held secret (needed for decryption and the
/// test-mode authority).
struct CkksKeys {
    ckks::PublicKey pk;
    ckks::RelinKey rk;
    ckks::GaloisKeySet gk;
    std::optional<ckks::SecretKey> sk;

    std::size_t bytes(const ckks::CkksContext& ctx) const;
};

std::shared_ptr<const CkksKeys> generate_keys(const ckks::ContextRef& ctx, const std::vector<long>& rotations,
                                              std::uint64_t seed);

/// Writes secret.key, public.key, relin.key, galois.key and params.txt into `dir`.
void save_keys(const std::string& dir, const ckks::CkksContext& ctx, const CkksKeys& keys);
/// Reads a directory written by save_keys; the profile is taken from params.txt.
std::shared_ptr<const CkksKeys> load_keys(const std::string& dir, ckks::ContextRef& ctx_out);

/// Access to the raw ciphertext held by a CKKS CipherVector.
const ckks::Ciphertext& as_ciphertext(const CipherVector& a);

}  // namespace spikehe::backend

#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "spikehe/ckks/context.hpp"

namespace spikehe::ckks {

/// Ternary secret, NTT form over the full key basis (q chain plus special primes).
struct SecretKey {
    RingPoly s;
};

/// (b, a) = (-a*s + e, a), NTT form over the q chain.
struct PublicKey {
    RingPoly b, a;
};

/// Hybrid key-switching key: one (b, a) pair per digit over the key basis.
struct SwitchKey {
    std::vector<RingPoly> b, a;
};

using RelinKey = SwitchKey;

/// Rotation keys indexed by the signed rotation amount requested.
struct GaloisKeySet {
    std::map<long, SwitchKey> keys;
    std::map<long, u64> elements;

    std::size_t size() const { return keys.size(); }
    /// Key for rotation k, also accepting k +- slots aliases. Null if absent.
    const SwitchKey* find(long k, std::size_t slots) const;
    std::set<long> indices() const;
};

class KeyGenerator {
public:
    KeyGenerator(ContextRef ctx, std::uint64_t seed);

    const SecretKey& secret_key() const { return sk_; }
    PublicKey make_public_key();
    RelinKey make_relin_key();
    /// One key per distinct index; each index must lie in (-N/2, N/2) \ {0}.
    GaloisKeySet make_galois_keys(const std::vector<long>& indices);

private:
    SwitchKey make_switch_key(const RingPoly& s_from_ntt);

    ContextRef ctx_;
    ring::Prng rng_;
    SecretKey sk_;
};

}  // namespace spikehe::ckks

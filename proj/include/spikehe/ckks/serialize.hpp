#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "spikehe/ckks/context.hpp"
#include "spikehe/ckks/keys.hpp"

namespace spikehe::ckks {

/// Object tags following the 8-byte magic and the params digest. Layout in docs/formats.md.
enum class ObjectType : std::uint32_t {
    Ciphertext = 1,
    SecretKey = 2,
    PublicKey = 3,
    RelinKey = 4,
    GaloisKeys = 5,
};

void save(std::ostream& os, const CkksContext& ctx, const Ciphertext& ct);
void save(std::ostream& os, const CkksContext& ctx, const SecretKey& sk);
void save(std::ostream& os, const CkksContext& ctx, const PublicKey& pk);
void save_relin(std::ostream& os, const CkksContext& ctx, const RelinKey& rk);
void save(std::ostream& os, const CkksContext& ctx, const GaloisKeySet& gk);

/// Loaders check the magic, the params digest and the object tag; FormatError otherwise.
Ciphertext load_ciphertext(std::istream& is, const CkksContext& ctx);
SecretKey load_secret_key(std::istream& is, const CkksContext& ctx);
PublicKey load_public_key(std::istream& is, const CkksContext& ctx);
RelinKey load_relin_key(std::istream& is, const CkksContext& ctx);
GaloisKeySet load_galois_keys(std::istream& is, const CkksContext& ctx);

/// FNV-1a over the serialized bytes of a ciphertext.
std::uint64_t digest(const CkksContext& ctx, const Ciphertext& ct);

template <class T>
void save_file(const std::string& path, const CkksContext& ctx, const T& obj);
void save_relin_file(const std::string& path, const CkksContext& ctx, const RelinKey& rk);

SecretKey load_secret_key_file(const std::string& path, const CkksContext& ctx);
PublicKey load_public_key_file(const std::string& path, const CkksContext& ctx);
RelinKey load_relin_key_file(const std::string& path, const CkksContext& ctx);
GaloisKeySet load_galois_keys_file(const std::string& path, const CkksContext& ctx);

/// Reads only the header of a key file and returns its params digest.
std::uint64_t peek_digest(const std::string& path);

}  // namespace spikehe::ckks

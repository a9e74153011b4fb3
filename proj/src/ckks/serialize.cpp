#include "spikehe/ckks/serialize.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "spikehe/common/errors.hpp"

namespace spikehe::ckks {

namespace {

constexpr char kMagic[8] = {'C', 'K', 'K', 'S', 0, 0, 0, 1};

template <class T>
void put(std::ostream& os, T v) {
    unsigned char b[sizeof(T)];
    std::uint64_t u = 0;
    std::memcpy(&u, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get(std::istream& is) {
    unsigned char b[sizeof(T)];
    if (!is.read(reinterpret_cast<char*>(b), sizeof(T))) throw FormatError("unexpected end of stream");
    std::uint64_t u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    T v;
    std::memcpy(&v, &u, sizeof(T));
    return v;
}

void header(std::ostream& os, const CkksContext& ctx, ObjectType t) {
    os.write(kMagic, 8);
    put<std::uint64_t>(os, ctx.digest());
    put<std::uint32_t>(os, static_cast<std::uint32_t>(t));
}

void expect_header(std::istream& is, const CkksContext& ctx, ObjectType t) {
    char m[8];
    if (!is.read(m, 8) || std::memcmp(m, kMagic, 8) != 0) throw FormatError("bad CKKS magic");
    const auto d = get<std::uint64_t>(is);
    if (d != ctx.digest()) throw FormatError("params digest mismatch: object was made for other parameters");
    const auto tag = get<std::uint32_t>(is);
    if (tag != static_cast<std::uint32_t>(t)) {
        throw FormatError("object type " + std::to_string(tag) + ", expected " +
                          std::to_string(static_cast<std::uint32_t>(t)));
    }
}

void put_poly(std::ostream& os, const RingPoly& p) {
    put<std::uint32_t>(os, p.domain() == ring::Domain::Ntt ? 1u : 0u);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(p.limbs()));
    put<std::uint64_t>(os, p.n());
    for (std::size_t i = 0; i < p.limbs(); ++i) {
        put<std::uint64_t>(os, p.basis()->prime(i).value());
        for (std::size_t j = 0; j < p.n(); ++j) put<std::uint64_t>(os, p.limb(i)[j]);
    }
}

RingPoly get_poly(std::istream& is, const BasisRef& basis) {
    const auto dom = get<std::uint32_t>(is);
    const auto limbs = get<std::uint32_t>(is);
    const auto n = get<std::uint64_t>(is);
    if (dom > 1) throw FormatError("bad domain flag");
    if (limbs != basis->size() || n != basis->n()) throw FormatError("polynomial shape does not match basis");
    RingPoly p(basis, dom ? ring::Domain::Ntt : ring::Domain::Coeff);
    for (std::size_t i = 0; i < limbs; ++i) {
        const u64 q = get<std::uint64_t>(is);
        if (q != basis->prime(i).value()) throw FormatError("modulus mismatch in limb " + std::to_string(i));
        for (std::size_t j = 0; j < n; ++j) {
            const u64 v = get<std::uint64_t>(is);
            if (v >= q) throw FormatError("unreduced coefficient");
            p.limb(i)[j] = v;
        }
    }
    return p;
}

void put_switch(std::ostream& os, const SwitchKey& k) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(k.b.size()));
    for (std::size_t d = 0; d < k.b.size(); ++d) {
        put_poly(os, k.b[d]);
        put_poly(os, k.a[d]);
    }
}

SwitchKey get_switch(std::istream& is, const CkksContext& ctx) {
    const auto digits = get<std::uint32_t>(is);
    if (static_cast<int>(digits) != ctx.digit_count(ctx.max_level())) throw FormatError("digit count mismatch");
    SwitchKey k;
    for (std::uint32_t d = 0; d < digits; ++d) {
        k.b.push_back(get_poly(is, ctx.key_basis()));
        k.a.push_back(get_poly(is, ctx.key_basis()));
    }
    return k;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw LoadError("cannot open key file '" + path + "'");
    return f;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw LoadError("cannot write '" + path + "'");
    return f;
}

}  // namespace

void save(std::ostream& os, const CkksContext& ctx, const Ciphertext& ct) {
    header(os, ctx, ObjectType::Ciphertext);
    put<std::int32_t>(os, ct.level);
    put<double>(os, ct.scale);
    put_poly(os, ct.c0);
    put_poly(os, ct.c1);
}

void save(std::ostream& os, const CkksContext& ctx, const SecretKey& sk) {
    header(os, ctx, ObjectType::SecretKey);
    put_poly(os, sk.s);
}

void save(std::ostream& os, const CkksContext& ctx, const PublicKey& pk) {
    header(os, ctx, ObjectType::PublicKey);
    put_poly(os, pk.b);
    put_poly(os, pk.a);
}

void save_relin(std::ostream& os, const CkksContext& ctx, const RelinKey& rk) {
    header(os, ctx, ObjectType::RelinKey);
    put_switch(os, rk);
}

void save(std::ostream& os, const CkksContext& ctx, const GaloisKeySet& gk) {
    header(os, ctx, ObjectType::GaloisKeys);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(gk.keys.size()));
    for (const auto& [k, key] : gk.keys) {
        put<std::int64_t>(os, k);
        put<std::uint64_t>(os, gk.elements.at(k));
        put_switch(os, key);
    }
}

Ciphertext load_ciphertext(std::istream& is, const CkksContext& ctx) {
    expect_header(is, ctx, ObjectType::Ciphertext);
    Ciphertext ct;
    ct.level = get<std::int32_t>(is);
    if (ct.level < 0 || ct.level > ctx.max_level()) throw FormatError("ciphertext level out of range");
    ct.scale = get<double>(is);
    if (!(ct.scale > 0)) throw FormatError("nonpositive scale");
    ct.c0 = get_poly(is, ctx.q_basis(ct.level));
    ct.c1 = get_poly(is, ctx.q_basis(ct.level));
    return ct;
}

SecretKey load_secret_key(std::istream& is, const CkksContext& ctx) {
    expect_header(is, ctx, ObjectType::SecretKey);
    return SecretKey{get_poly(is, ctx.key_basis())};
}

PublicKey load_public_key(std::istream& is, const CkksContext& ctx) {
    expect_header(is, ctx, ObjectType::PublicKey);
    PublicKey pk;
    pk.b = get_poly(is, ctx.q_basis(ctx.max_level()));
    pk.a = get_poly(is, ctx.q_basis(ctx.max_level()));
    return pk;
}

RelinKey load_relin_key(std::istream& is, const CkksContext& ctx) {
    expect_header(is, ctx, ObjectType::RelinKey);
    return get_switch(is, ctx);
}

GaloisKeySet load_galois_keys(std::istream& is, const CkksContext& ctx) {
    expect_header(is, ctx, ObjectType::GaloisKeys);
    GaloisKeySet gk;
    const auto count = get<std::uint32_t>(is);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto k = get<std::int64_t>(is);
        const auto g = get<std::uint64_t>(is);
        if (g != ctx.transform().galois_element(k)) throw FormatError("galois element does not match index");
        if (gk.keys.count(k)) throw FormatError("duplicate rotation index " + std::to_string(k));
        gk.elements.emplace(k, g);
        gk.keys.emplace(k, get_switch(is, ctx));
    }
    return gk;
}

std::uint64_t digest(const CkksContext& ctx, const Ciphertext& ct) {
    std::ostringstream os;
    save(os, ctx, ct);
    const std::string s = os.str();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

template <class T>
void save_file(const std::string& path, const CkksContext& ctx, const T& obj) {
    auto f = open_out(path);
    save(f, ctx, obj);
}

template void save_file<Ciphertext>(const std::string&, const CkksContext&, const Ciphertext&);
template void save_file<SecretKey>(const std::string&, const CkksContext&, const SecretKey&);
template void save_file<PublicKey>(const std::string&, const CkksContext&, const PublicKey&);
template void save_file<GaloisKeySet>(const std::string&, const CkksContext&, const GaloisKeySet&);

void save_relin_file(const std::string& path, const CkksContext& ctx, const RelinKey& rk) {
    auto f = open_out(path);
    save_relin(f, ctx, rk);
}

SecretKey load_secret_key_file(const std::string& path, const CkksContext& ctx) {
    auto f = open_in(path);
    return load_secret_key(f, ctx);
}

PublicKey load_public_key_file(const std::string& path, const CkksContext& ctx) {
    auto f = open_in(path);
    return load_public_key(f, ctx);
}

RelinKey load_relin_key_file(const std::string& path, const CkksContext& ctx) {
    auto f = open_in(path);
    return load_relin_key(f, ctx);
}

GaloisKeySet load_galois_keys_file(const std::string& path, const CkksContext& ctx) {
    auto f = open_in(path);
    return load_galois_keys(f, ctx);
}

std::uint64_t peek_digest(const std::string& path) {
    auto f = open_in(path);
    char m[8];
    if (!f.read(m, 8) || std::memcmp(m, kMagic, 8) != 0) throw FormatError("bad CKKS magic in '" + path + "'");
    return get<std::uint64_t>(f);
}

}  // namespace spikehe::ckks

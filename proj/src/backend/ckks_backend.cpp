#include "spikehe/backend/ckks_backend.hpp"

#include <filesystem>
#include <fstream>
#include <list>
#include <sstream>
#include <unordered_map>

#include "spikehe/ckks/serialize.hpp"
#include "spikehe/common/errors.hpp"

namespace spikehe::backend {

namespace fs = std::filesystem;
using ckks::Ciphertext;

const ckks::Ciphertext& as_ciphertext(const CipherVector& a) {
    const auto* c = std::get_if<Ciphertext>(&a.payload);
    if (!c) throw StructuralError("CKKS backend received a foreign ciphertext");
    return *c;
}

std::size_t CkksKeys::bytes(const ckks::CkksContext& ctx) const {
    auto poly = [&](const ring::RingPoly& p) { return p.data().size() * sizeof(std::uint64_t); };
    std::size_t b = poly(pk.b) + poly(pk.a);
    auto sw = [&](const ckks::SwitchKey& k) {
        std::size_t s = 0;
        for (std::size_t i = 0; i < k.b.size(); ++i) s += poly(k.b[i]) + poly(k.a[i]);
        return s;
    };
    b += sw(rk);
    for (const auto& [_, k] : gk.keys) b += sw(k);
    if (sk) b += poly(sk->s);
    (void)ctx;
    return b;
}

std::shared_ptr<const CkksKeys> generate_keys(const ckks::ContextRef& ctx, const std::vector<long>& rotations,
                                              std::uint64_t seed) {
    ckks::KeyGenerator kg(ctx, seed);
    auto keys = std::make_shared<CkksKeys>();
    keys->pk = kg.make_public_key();
    keys->rk = kg.make_relin_key();
    keys->gk = kg.make_galois_keys(rotations);
    keys->sk = kg.secret_key();
    return keys;
}

void save_keys(const std::string& dir, const ckks::CkksContext& ctx, const CkksKeys& keys) {
    fs::create_directories(dir);
    {
        std::ofstream p(fs::path(dir) / "params.txt");
        if (!p) throw LoadError("cannot write key directory '" + dir + "'");
        std::ostringstream hex;
        hex << std::hex << ctx.digest();
        p << "profile " << ctx.params().name << "\ndigest " << hex.str() << "\nrotations " << keys.gk.size()
          << "\n";
    }
    if (keys.sk) ckks::save_file((fs::path(dir) / "secret.key").string(), ctx, *keys.sk);
    ckks::save_file((fs::path(dir) / "public.key").string(), ctx, keys.pk);
    ckks::save_relin_file((fs::path(dir) / "relin.key").string(), ctx, keys.rk);
    ckks::save_file((fs::path(dir) / "galois.key").string(), ctx, keys.gk);
}

std::shared_ptr<const CkksKeys> load_keys(const std::string& dir, ckks::ContextRef& ctx_out) {
    const fs::path params = fs::path(dir) / "params.txt";
    std::ifstream p(params);
    if (!p) throw LoadError("missing key file '" + params.string() + "'");
    std::string key, profile, digest;
    while (p >> key) {
        if (key == "profile") p >> profile;
        else if (key == "digest") p >> digest;
        else p.ignore(1 << 20, '\n');
    }
    if (profile.empty()) throw FormatError("params.txt has no profile line");
    auto ctx = std::make_shared<const ckks::CkksContext>(ckks::CkksParams::profile(profile));
    std::ostringstream hex;
    hex << std::hex << ctx->digest();
    if (hex.str() != digest) throw FormatError("key directory digest does not match profile '" + profile + "'");
    auto keys = std::make_shared<CkksKeys>();
    for (const char* f : {"public.key", "relin.key", "galois.key"}) {
        if (!fs::exists(fs::path(dir) / f)) throw LoadError(std::string("missing key file '") + f + "' in " + dir);
    }
    keys->pk = ckks::load_public_key_file((fs::path(dir) / "public.key").string(), *ctx);
    keys->rk = ckks::load_relin_key_file((fs::path(dir) / "relin.key").string(), *ctx);
    keys->gk = ckks::load_galois_keys_file((fs::path(dir) / "galois.key").string(), *ctx);
    if (fs::exists(fs::path(dir) / "secret.key")) {
        keys->sk = ckks::load_secret_key_file((fs::path(dir) / "secret.key").string(), *ctx);
    }
    ctx_out = ctx;
    return keys;
}

namespace {

class CkksBackend final : public Backend {
public:
    CkksBackend(ckks::ContextRef ctx, std::shared_ptr<const CkksKeys> keys, const CkksBackendConfig& cfg)
        : ctx_(std::move(ctx)), keys_(std::move(keys)), cfg_(cfg), ev_(ctx_), enc_(ctx_, keys_->pk, cfg.seed) {
        if (keys_->sk) {
            dec_.emplace(ctx_, *keys_->sk);
            auth_.emplace(ctx_, *keys_->sk, keys_->pk, cfg.seed ^ 0x5eed5eedULL);
        }
    }

    std::string name() const override { return "ckks"; }
    std::size_t slots() const override { return ctx_->slots(); }
    int max_level() const override { return ctx_->max_level(); }
    std::size_t ciphertext_bytes(int level) const override {
        return 2 * static_cast<std::size_t>(level + 1) * ctx_->n() * sizeof(std::uint64_t);
    }
    std::size_t key_bytes() const override { return keys_->bytes(*ctx_); }

    void release_plaintext_cache() override {
        cache_.clear();
        cache_bytes_ = 0;
    }
    std::size_t plaintext_cache_bytes() const override { return cache_bytes_; }

protected:
    CipherVector wrap(const CipherVector& meta, Ciphertext ct) {
        CipherVector r = meta;
        r.level = ct.level;
        r.payload = std::move(ct);
        return r;
    }

    CipherVector do_encrypt(const std::vector<double>& values, int level) override {
        CipherVector r;
        r.slots = slots();
        return wrap(r, enc_.encrypt_values(values, level));
    }

    std::vector<double> do_decrypt(const CipherVector& a) override {
        if (!dec_) throw ContractError("decryption needs the harness secret key");
        return dec_->decrypt_values(as_ciphertext(a));
    }

    CipherVector do_add(const CipherVector& a, const CipherVector& b, bool subtract) override {
        const auto& x = as_ciphertext(a);
        const auto& y = as_ciphertext(b);
        return wrap(a, subtract ? ev_.sub(x, y) : ev_.add(x, y));
    }

    CipherVector do_add_plain(const CipherVector& a, const std::vector<double>& w) override {
        const auto& x = as_ciphertext(a);
        return wrap(a, ev_.add_plain(x, *encoded(w, x.level, x.scale)));
    }

    CipherVector do_add_const(const CipherVector& a, double c) override {
        return wrap(a, ev_.add_const(as_ciphertext(a), c));
    }

    CipherVector do_mul(const CipherVector& a, const CipherVector& b) override {
        return wrap(a, ev_.mul(as_ciphertext(a), as_ciphertext(b), keys_->rk));
    }

    CipherVector do_mul_const(const CipherVector& a, double c) override {
        return wrap(a, ev_.mul_const(as_ciphertext(a), c));
    }

    CipherVector do_dot_plain(const std::vector<const CipherVector*>& xs,
                              const std::vector<const std::vector<double>*>& ws) override {
        const auto& x0 = as_ciphertext(*xs[0]);
        const double ps = ev_.plain_scale(x0.level, x0.scale);
        std::vector<const Ciphertext*> cts;
        std::vector<const ckks::Plaintext*> pts;
        // holders keep encodings alive if the cache is flushed mid-product
        std::vector<std::shared_ptr<const ckks::Plaintext>> held;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            cts.push_back(&as_ciphertext(*xs[i]));
            held.push_back(encoded(*ws[i], x0.level, ps));
            pts.push_back(held.back().get());
        }
        return wrap(*xs[0], ev_.linear_combination(cts, pts));
    }

    CipherVector do_rotate(const CipherVector& a, long k) override {
        try {
            return wrap(a, ev_.rotate(as_ciphertext(a), k, keys_->gk));
        } catch (const MissingKeyError& e) {
            throw MissingKeyError(e.index(), std::string(e.what()) + site());
        }
    }

    CipherVector do_level_down(const CipherVector& a, int target) override {
        return wrap(a, ev_.level_down(as_ciphertext(a), target));
    }

    CipherVector do_refresh(const CipherVector& a) override {
        if (!auth_ || !cfg_.refresh_authority) throw RefreshUnavailable("no recryption authority" + site());
        return wrap(a, auth_->refresh(as_ciphertext(a)));
    }

    CipherVector do_compare(const CipherVector& v, const CipherVector& t) override {
        if (!auth_ || !cfg_.compare_authority) throw CompareUnavailable("no comparison authority" + site());
        return wrap(v, auth_->compare_le(as_ciphertext(v), as_ciphertext(t)));
    }

private:
    struct Entry {
        std::vector<double> values;
        int level;
        double scale;
        std::shared_ptr<const ckks::Plaintext> pt;
    };

    std::shared_ptr<const ckks::Plaintext> encoded(const std::vector<double>& w, int level, double scale) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        auto mix = [&h](const void* p, std::size_t n) {
            const auto* b = static_cast<const unsigned char*>(p);
            for (std::size_t i = 0; i < n; ++i) {
                h ^= b[i];
                h *= 0x100000001b3ULL;
            }
        };
        mix(w.data(), w.size() * sizeof(double));
        mix(&level, sizeof level);
        mix(&scale, sizeof scale);
        auto range = cache_.equal_range(h);
        for (auto it = range.first; it != range.second; ++it) {
            if (it->second.level == level && it->second.scale == scale && it->second.values == w) return it->second.pt;
        }
        const std::size_t bytes = static_cast<std::size_t>(level + 1) * ctx_->n() * sizeof(std::uint64_t);
        if (cache_bytes_ + bytes > cfg_.cache_bytes) release_plaintext_cache();
        cache_bytes_ += bytes;
        auto it = cache_.emplace(
            h, Entry{w, level, scale, std::make_shared<const ckks::Plaintext>(ctx_->encode(w, level, scale))});
        return it->second.pt;
    }

    ckks::ContextRef ctx_;
    std::shared_ptr<const CkksKeys> keys_;
    CkksBackendConfig cfg_;
    ckks::Evaluator ev_;
    ckks::Encryptor enc_;
    std::optional<ckks::Decryptor> dec_;
    std::optional<ckks::RecryptionAuthority> auth_;
    std::unordered_multimap<std::uint64_t, Entry> cache_;
    std::size_t cache_bytes_ = 0;
};

}  // namespace

std::unique_ptr<Backend> make_ckks_backend(ckks::ContextRef ctx, std::shared_ptr<const CkksKeys> keys,
                                           const CkksBackendConfig& cfg) {
    return std::make_unique<CkksBackend>(std::move(ctx), std::move(keys), cfg);
}

}  // namespace spikehe::backend

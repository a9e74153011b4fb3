#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "spikehe/backend/ckks_backend.hpp"
#include "spikehe/ckks/serialize.hpp"
#include "spikehe/common/errors.hpp"

using namespace spikehe;
using namespace spikehe::backend;

namespace {

struct Env {
    ckks::ContextRef ctx;
    std::shared_ptr<const CkksKeys> keys;
};

const Env& env() {
    static Env e = [] {
        Env x;
        x.ctx = std::make_shared<const ckks::CkksContext>(ckks::CkksParams::profile("test"));
        x.keys = generate_keys(x.ctx, {1, 2, 4, -1, -3, 7, 64}, 5);
        return x;
    }();
    return e;
}

std::unique_ptr<Backend> ckks_backend() { return make_ckks_backend(env().ctx, env().keys, {}); }

std::unique_ptr<Backend> sim_backend() {
    SimBackendConfig c;
    c.slots = env().ctx->slots();
    c.depth = env().ctx->max_level();
    return make_sim_backend(c);
}

std::vector<double> rand_vec(std::mt19937_64& rng, std::size_t n, double lo = -1, double hi = 1) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

double max_err(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0;
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST(SimBackend, MulByOnesIsIdentity) {
    auto b = sim_backend();
    std::vector<double> v = {1, -2, 3.5};
    auto x = b->encrypt(v);
    auto y = b->mul_plain(x, std::vector<double>(b->slots(), 1.0));
    EXPECT_EQ(y.level, x.level - 1);
    EXPECT_EQ(max_err(b->decrypt(y), v), 0.0);
}

TEST(SimBackend, RotateIsCyclicShift) {
    auto b = sim_backend();
    std::vector<double> v(b->slots());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
    auto r = b->decrypt(b->rotate(b->encrypt(v), 3));
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(r[i], static_cast<double>((i + 3) % v.size()));
    auto l = b->decrypt(b->rotate(b->encrypt(v), -1));
    EXPECT_EQ(l[0], static_cast<double>(v.size() - 1));
}

TEST(SimBackend, RejectsNegativeNoise) {
    SimBackendConfig c;
    c.noise_stddev = -1;
    EXPECT_THROW(make_sim_backend(c), ParameterError);
}

TEST(SimBackend, MissingRotationKey) {
    SimBackendConfig c;
    c.slots = 16;
    c.rotation_keys = std::make_shared<const std::set<long>>(std::set<long>{1});
    auto b = make_sim_backend(c);
    auto x = b->encrypt({1, 2});
    EXPECT_NO_THROW(b->rotate(x, 1));
    EXPECT_NO_THROW(b->rotate(x, 17));
    try {
        b->rotate(x, 2);
        FAIL();
    } catch (const MissingKeyError& e) {
        EXPECT_EQ(e.index(), 2);
    }
}

TEST(Backend, CrossBackendRandomPrograms) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto sb = sim_backend();
        auto cb = ckks_backend();
        std::mt19937_64 rng(seed);
        const std::size_t n = sb->slots();
        std::vector<CipherVector> s, c;
        for (int i = 0; i < 3; ++i) {
            auto v = rand_vec(rng, n);
            s.push_back(sb->encrypt(v));
            c.push_back(cb->encrypt(v));
        }
        const long rots[] = {1, 2, 4, -1, -3, 7, 64};
        for (int step = 0; step < 20; ++step) {
            const std::size_t i = rng() % s.size(), j = rng() % s.size();
            const int op = static_cast<int>(rng() % 8);
            CipherVector rs, rc;
            const bool low = s[i].level < 1 || s[j].level < 1;
            if (low || op == 0) {
                rs = sb->add(s[i], s[j]);
                rc = cb->add(c[i], c[j]);
                rs = sb->mul_const(rs, 0.5);
                rc = cb->mul_const(rc, 0.5);
                if (low) {
                    rs = sb->refresh(s[i]);
                    rc = cb->refresh(c[i]);
                }
            } else if (op == 1) {
                rs = sb->sub(s[i], s[j]);
                rc = cb->sub(c[i], c[j]);
            } else if (op == 2) {
                rs = sb->mul(s[i], s[j]);
                rc = cb->mul(c[i], c[j]);
            } else if (op == 3) {
                auto w = rand_vec(rng, n);
                rs = sb->mul_plain(s[i], w);
                rc = cb->mul_plain(c[i], w);
            } else if (op == 4) {
                const double k = std::uniform_real_distribution<double>(-1, 1)(rng);
                rs = sb->mul_const(s[i], k);
                rc = cb->mul_const(c[i], k);
            } else if (op == 5) {
                const long k = rots[rng() % 7];
                rs = sb->rotate(s[i], k);
                rc = cb->rotate(c[i], k);
            } else if (op == 6) {
                auto w = rand_vec(rng, n, -0.5, 0.5);
                rs = sb->add_plain(s[i], w);
                rc = cb->add_plain(c[i], w);
            } else {
                auto w1 = rand_vec(rng, n), w2 = rand_vec(rng, n);
                rs = sb->dot_plain({&s[i], &s[j]}, {&w1, &w2});
                rc = cb->dot_plain({&c[i], &c[j]}, {&w1, &w2});
            }
            ASSERT_EQ(rs.level, rc.level) << "step " << step;
            const auto ds = sb->decrypt(rs);
            const auto dc = cb->decrypt(rc);
            ASSERT_LT(max_err(ds, dc), 1e-3) << "seed " << seed << " step " << step << " op " << op;
            // keep magnitudes bounded so the absolute tolerance stays meaningful
            double mx = 0;
            for (double x : ds) mx = std::max(mx, std::fabs(x));
            if (mx > 4) {
                rs = sb->mul_const(rs.level > 0 ? rs : sb->refresh(rs), 1.0 / mx);
                rc = cb->mul_const(rc.level > 0 ? rc : cb->refresh(rc), 1.0 / mx);
            }
            s[i] = rs;
            c[i] = rc;
        }
        EXPECT_EQ(sb->counters().mul, cb->counters().mul);
        EXPECT_EQ(sb->counters().rotate, cb->counters().rotate);
    }
}

TEST(Backend, ExactCompare) {
    std::mt19937_64 rng(3);
    auto v = rand_vec(rng, 1024);
    v[0] = 0.5;
    for (auto* name : {"sim", "ckks"}) {
        auto b = std::string(name) == "sim" ? sim_backend() : ckks_backend();
        auto x = b->encrypt(v, 2);
        auto t = b->encrypt(std::vector<double>(b->slots(), 0.5), 1);
        auto c = b->exact_compare(x, t);
        EXPECT_EQ(c.level, b->max_level());
        const auto d = b->decrypt(c);
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double want = v[i] <= 0.5 ? 1.0 : 0.0;
            if (std::string(name) == "sim") EXPECT_EQ(d[i], want);
            else EXPECT_NEAR(d[i], want, 1e-4);
        }
        auto ones = b->exact_compare(b->encrypt(std::vector<double>(b->slots(), -1.0)), t);
        for (double y : b->decrypt(ones)) EXPECT_NEAR(y, 1.0, 1e-4);
    }
}

TEST(Backend, AuthoritiesCanBeDisabled) {
    SimBackendConfig c;
    c.refresh_authority = false;
    c.compare_authority = false;
    auto b = make_sim_backend(c);
    auto x = b->encrypt({1});
    EXPECT_THROW(b->refresh(x), RefreshUnavailable);
    EXPECT_THROW(b->exact_compare(x, x), CompareUnavailable);

    CkksBackendConfig cc;
    cc.refresh_authority = false;
    auto k = ckks_backend();
    auto cb = make_ckks_backend(env().ctx, env().keys, cc);
    EXPECT_THROW(cb->refresh(cb->encrypt({1})), RefreshUnavailable);
}

TEST(Backend, AuditLog) {
    auto b = sim_backend();
    b->set_site("lif1", 2);
    auto x = b->mul_const(b->encrypt({0.1}), 2.0);
    auto r = b->refresh(x);
    b->set_site("lif2", 1);
    b->exact_compare(r, r);
    EXPECT_EQ(b->audit().size(), 2u);
    const std::string text = b->audit_text();
    EXPECT_NE(text.find("TEST-MODE"), std::string::npos);
    EXPECT_NE(text.find("\nrefresh lif1 2 8 9\n"), std::string::npos);
    EXPECT_NE(text.find("\nswitch lif2 1 9 9\n"), std::string::npos);
}

TEST(Backend, TagRules) {
    auto b = sim_backend();
    auto raw = b->encrypt({1});
    auto sc = Backend::retag(b->encrypt({1}), ScaleDomain::Scaled, 8.0);
    EXPECT_THROW(b->add(raw, sc), StructuralError);
    EXPECT_THROW(b->mul(sc, sc), StructuralError);
    EXPECT_EQ(b->mul(raw, sc).domain, ScaleDomain::Scaled);
    auto sc2 = Backend::retag(b->encrypt({1}), ScaleDomain::Scaled, 4.0);
    EXPECT_THROW(b->add(sc, sc2), StructuralError);
    EXPECT_EQ(b->exact_compare(sc, sc).domain, ScaleDomain::Raw);
}

TEST(Backend, LevelErrors) {
    auto b = sim_backend();
    auto x = b->encrypt({1}, 0);
    EXPECT_THROW(b->mul_const(x, 2), LevelExhausted);
    EXPECT_THROW(b->encrypt(std::vector<double>(b->slots() + 1)), CapacityError);
}

TEST(Backend, PlaintextCache) {
    auto b = ckks_backend();
    std::vector<double> w(16, 0.25);
    auto x = b->encrypt(std::vector<double>(16, 2.0));
    b->mul_plain(x, w);
    const auto bytes = b->plaintext_cache_bytes();
    EXPECT_GT(bytes, 0u);
    b->mul_plain(x, w);
    EXPECT_EQ(b->plaintext_cache_bytes(), bytes);
    b->release_plaintext_cache();
    EXPECT_EQ(b->plaintext_cache_bytes(), 0u);
}

TEST(Backend, CacheFlushDuringDotProduct) {
    // a budget of two encodings forces flushes while one product is being built
    CkksBackendConfig cc;
    cc.cache_bytes = 2 * 10 * 4096 * sizeof(std::uint64_t);
    auto b = make_ckks_backend(env().ctx, env().keys, cc);
    std::vector<CipherVector> xs;
    std::vector<std::vector<double>> ws;
    double want = 0;
    for (int i = 0; i < 6; ++i) {
        xs.push_back(b->encrypt(std::vector<double>(4, 1.0 + i)));
        ws.emplace_back(4, 0.1 * (i + 1));
        want += (1.0 + i) * 0.1 * (i + 1);
    }
    std::vector<const CipherVector*> xp;
    std::vector<const std::vector<double>*> wp;
    for (int i = 0; i < 6; ++i) {
        xp.push_back(&xs[i]);
        wp.push_back(&ws[i]);
    }
    const auto r = b->decrypt(b->dot_plain(xp, wp));
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(r[i], want, 1e-4);
}

TEST(Serialize, CiphertextRoundtrip) {
    const auto& e = env();
    ckks::Encryptor enc(e.ctx, e.keys->pk, 4);
    auto ct = enc.encrypt_values({0.5, -0.25}, 3);
    std::stringstream ss;
    ckks::save(ss, *e.ctx, ct);
    auto back = ckks::load_ciphertext(ss, *e.ctx);
    EXPECT_EQ(back.level, ct.level);
    EXPECT_EQ(back.scale, ct.scale);
    EXPECT_TRUE(back.c0 == ct.c0);
    EXPECT_TRUE(back.c1 == ct.c1);
    EXPECT_EQ(ckks::digest(*e.ctx, back), ckks::digest(*e.ctx, ct));
}

TEST(Serialize, RejectsBadMagicAndForeignParams) {
    const auto& e = env();
    std::stringstream bad("not a ckks file at all");
    EXPECT_THROW(ckks::load_ciphertext(bad, *e.ctx), FormatError);

    ckks::CkksParams p = ckks::CkksParams::profile("test");
    p.depth = 4;
    auto other = std::make_shared<const ckks::CkksContext>(p);
    ckks::Encryptor enc(e.ctx, e.keys->pk, 4);
    std::stringstream ss;
    ckks::save(ss, *e.ctx, enc.encrypt_values({1.0}));
    EXPECT_THROW(ckks::load_ciphertext(ss, *other), FormatError);
}

TEST(Serialize, KeyDirectoryRoundtrip) {
    const auto& e = env();
    const auto dir = std::filesystem::temp_directory_path() / "spikehe_keys_test";
    std::filesystem::remove_all(dir);
    save_keys(dir.string(), *e.ctx, *e.keys);
    ckks::ContextRef ctx;
    auto keys = load_keys(dir.string(), ctx);
    EXPECT_EQ(ctx->digest(), e.ctx->digest());
    EXPECT_EQ(keys->gk.indices(), e.keys->gk.indices());
    ASSERT_TRUE(keys->sk.has_value());
    EXPECT_TRUE(keys->sk->s == e.keys->sk->s);

    // loaded keys still rotate correctly
    auto b = make_ckks_backend(ctx, keys, {});
    auto r = b->decrypt(b->rotate(b->encrypt({1, 2, 3, 4, 5}), 2));
    EXPECT_NEAR(r[0], 3, 1e-4);

    std::filesystem::remove(dir / "relin.key");
    EXPECT_THROW(load_keys(dir.string(), ctx), LoadError);
    std::filesystem::remove_all(dir);
}

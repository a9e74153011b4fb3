#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "spikehe/backend/ckks_backend.hpp"
#include "spikehe/common/errors.hpp"
#include "spikehe/lif/lif.hpp"

using namespace spikehe;
using namespace spikehe::lif;
using backend::Backend;
using backend::CipherVector;

namespace {

std::unique_ptr<Backend> sim(std::size_t slots = 512, int depth = 12) {
    backend::SimBackendConfig c;
    c.slots = slots;
    c.depth = depth;
    return backend::make_sim_backend(c);
}

}  // namespace

TEST(LifPlain, ZeroInputNeverSpikes) {
    LifConfig cfg;
    std::vector<double> v;
    for (int t = 1; t <= 5; ++t) {
        auto s = lif_plain_step(v, {0, 0, 0}, t, cfg);
        EXPECT_EQ(s, (std::vector<double>{0, 0, 0}));
        EXPECT_EQ(v, (std::vector<double>{0, 0, 0}));
    }
}

TEST(LifPlain, HandTrace) {
    LifConfig cfg;  // tau 0.25, Th 0.5
    std::vector<double> v;
    EXPECT_EQ(lif_plain_step(v, {0.6}, 1, cfg)[0], 1.0);
    EXPECT_EQ(v[0], 0.0);
    EXPECT_EQ(lif_plain_step(v, {0.1}, 2, cfg)[0], 0.0);
    EXPECT_DOUBLE_EQ(v[0], 0.1);
    // leak then integrate: 0.25 * 0.1 + 0.45 = 0.475, still below
    EXPECT_EQ(lif_plain_step(v, {0.45}, 3, cfg)[0], 0.0);
    EXPECT_DOUBLE_EQ(v[0], 0.475);
}

TEST(LifPlain, StrictThreshold) {
    LifConfig cfg;
    std::vector<double> v;
    EXPECT_EQ(lif_plain_step(v, {0.5 + 1e-9}, 1, cfg)[0], 1.0);
    EXPECT_EQ(lif_plain_step(v, {0.5}, 1, cfg)[0], 0.0);
}

TEST(LifConfig, Validation) {
    LifConfig c;
    c.tau = 1.0;
    EXPECT_THROW(c.validate(), ParameterError);
    c = LifConfig{};
    c.scale_value = 0.4;  // 0.5 / 0.4 > 1
    EXPECT_THROW(c.validate(), DomainError);
    c.mode = Mode::Switch;
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(parse_mode("approx"), Mode::Approx);
    EXPECT_THROW(parse_mode("exact"), ValidationError);
}

TEST(LifSwitch, ConstantExamples) {
    auto b = sim(16);
    LifConfig cfg;
    cfg.mode = Mode::Switch;
    auto tc = b->encrypt(std::vector<double>(16, 0.5));
    auto low = lif_switch_step(*b, nullptr, b->encrypt(std::vector<double>(16, 0.4)), tc, 1, cfg);
    for (double s : b->decrypt(low.spikes)) EXPECT_EQ(s, 0.0);
    for (double v : b->decrypt(low.v)) EXPECT_EQ(v, 0.4);
    auto high = lif_switch_step(*b, nullptr, b->encrypt(std::vector<double>(16, 0.6)), tc, 1, cfg);
    for (double s : b->decrypt(high.spikes)) EXPECT_EQ(s, 1.0);
    for (double v : b->decrypt(high.v)) EXPECT_EQ(v, 0.0);
}

TEST(LifSwitch, RandomTracesExactOnSim) {
    auto b = sim(512);
    LifConfig cfg;
    cfg.mode = Mode::Switch;
    LifEvaluator ev(cfg);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> d(-0.5, 1.0);
    std::vector<double> pv;
    CipherVector v;
    for (int t = 1; t <= 5; ++t) {
        std::vector<double> in(512);
        for (auto& x : in) x = d(rng);
        auto want = lif_plain_step(pv, in, t, cfg);
        auto out = ev.step(*b, b->encrypt(in), t > 1 ? &v : nullptr, t);
        EXPECT_EQ(b->decrypt(out.spikes), want) << "t=" << t;
        v = out.v;
        // a slot that spiked enters the next step at exactly zero
        const auto dv = b->decrypt(v);
        for (std::size_t i = 0; i < dv.size(); ++i)
            if (want[i] == 1.0) ASSERT_EQ(dv[i], 0.0);
    }
    EXPECT_EQ(b->counters().compare, 5u);
}

TEST(LifSwitch, RandomTracesOnCkks) {
    auto ctx = std::make_shared<const ckks::CkksContext>(ckks::CkksParams::profile("test"));
    auto b = backend::make_ckks_backend(ctx, backend::generate_keys(ctx, {}, 1), {});
    LifConfig cfg;
    cfg.mode = Mode::Switch;
    LifEvaluator ev(cfg);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> d(-0.5, 1.0);
    std::vector<double> pv;
    CipherVector v;
    for (int t = 1; t <= 5; ++t) {
        std::vector<double> in(b->slots());
        for (auto& x : in) x = d(rng);
        auto want = lif_plain_step(pv, in, t, cfg);
        auto out = ev.step(*b, b->encrypt(in), t > 1 ? &v : nullptr, t);
        const auto got = b->decrypt(out.spikes);
        for (std::size_t i = 0; i < got.size(); ++i) {
            ASSERT_NEAR(got[i], want[i], 1e-4);
        }
        v = out.v;
    }
}

TEST(LifApprox, LevelLedgerPerStep) {
    auto b = sim(64, 12);
    LifConfig cfg;
    cfg.scale_value = 4.0;
    LifEvaluator ev(cfg);
    auto in = b->encrypt(std::vector<double>(64, 0.1), 11);
    auto out = ev.step(*b, in, nullptr, 1);
    EXPECT_EQ(out.spikes.level, 11 - 1 - 7);
    EXPECT_EQ(out.v.level, 11 - 9);
    EXPECT_EQ(out.v.domain, backend::ScaleDomain::Scaled);
    EXPECT_EQ(out.spikes.domain, backend::ScaleDomain::Raw);
    EXPECT_EQ(site_need(Site::PreSpike, cfg), 8);
}

TEST(LifApprox, FarBelowThreshold) {
    auto b = sim(64, 12);
    LifConfig cfg;
    cfg.scale_value = 2.0;
    LifEvaluator ev(cfg);
    auto out = ev.step(*b, b->encrypt(std::vector<double>(64, -1.0)), nullptr, 1);
    for (double s : b->decrypt(out.spikes)) EXPECT_NEAR(s, 0.0, 0.05);
    for (double v : b->decrypt(out.v)) EXPECT_NEAR(v, -0.5, 0.05 * 0.5);  // scaled by 1/2
}

TEST(LifApprox, AgreementOffDeadZone) {
    auto b = sim(2048, 12);
    LifConfig cfg;
    cfg.scale_value = 2.0;
    LifEvaluator ev(cfg);
    const double dz = ev.series().dead_zone * cfg.scale_value;  // natural units
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> d(-1.0, 1.6);
    std::vector<double> pv;
    CipherVector v;
    int agree = 0, total = 0;
    auto refresh_at_spike = [&](const CipherVector& x, Site s) { return s == Site::PreSpike ? b->refresh(x) : x; };
    for (int t = 1; t <= 5; ++t) {
        std::vector<double> in(2048);
        for (auto& x : in) x = d(rng);
        std::vector<double> pre(2048);
        for (std::size_t i = 0; i < in.size(); ++i) pre[i] = t == 1 ? in[i] : cfg.tau * pv[i] + in[i];
        auto want = lif_plain_step(pv, in, t, cfg);
        auto out = ev.step(*b, b->encrypt(in), t > 1 ? &v : nullptr, t, nullptr, refresh_at_spike);
        const auto got = b->decrypt(out.spikes);
        for (std::size_t i = 0; i < got.size(); ++i) {
            ASSERT_GE(got[i], -0.05);
            ASSERT_LE(got[i], 1.05);
            if (std::fabs(pre[i] - cfg.threshold) <= dz) continue;
            ++total;
            agree += std::round(got[i]) == want[i];
        }
        // keep the encrypted membrane on the plaintext trace so the comparison is per step
        std::vector<double> scaled(pv);
        for (auto& x : scaled) x /= cfg.scale_value;
        v = backend::Backend::retag(b->encrypt(scaled), backend::ScaleDomain::Scaled, cfg.scale_value);
    }
    EXPECT_GE(static_cast<double>(agree) / total, 0.99);
}

TEST(Decode, SumThenArgmax) {
    auto b = sim(8);
    std::vector<CipherVector> steps{b->encrypt({1, 0, 0}), b->encrypt({0, 3, 0})};
    EXPECT_EQ(decode_output(*b, steps, 3), 1);
    EXPECT_EQ(decode_output(*b, {b->encrypt({0.1, 0.5, 0.2})}, 3), 1);
    EXPECT_THROW(decode_output(*b, {}, 3), ContractError);
}

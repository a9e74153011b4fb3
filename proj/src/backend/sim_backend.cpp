#include <random>

#include "spikehe/backend/backend.hpp"
#include "spikehe/common/errors.hpp"

namespace spikehe::backend {

namespace {

/// Exact slot simulator: plain vectors with the CKKS level ledger.
class SimBackend final : public Backend {
public:
    explicit SimBackend(const SimBackendConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
        if (cfg.noise_stddev < 0) throw ParameterError("simulator noise stddev must be >= 0");
        if (cfg.slots == 0) throw ParameterError("simulator needs at least one slot");
        if (cfg.depth < 1) throw ParameterError("simulator depth must be >= 1");
    }

    std::string name() const override { return "sim"; }
    std::size_t slots() const override { return cfg_.slots; }
    int max_level() const override { return cfg_.depth; }
    std::size_t ciphertext_bytes(int) const override { return cfg_.slots * sizeof(double); }

protected:
    static const std::vector<double>& v(const CipherVector& a) {
        const auto* p = std::get_if<std::vector<double>>(&a.payload);
        if (!p) throw StructuralError("simulator received a foreign ciphertext");
        return *p;
    }

    CipherVector with(const CipherVector& meta, std::vector<double> vals, bool noisy = true) {
        if (noisy && cfg_.noise_stddev > 0) {
            std::normal_distribution<double> d(0.0, cfg_.noise_stddev);
            for (auto& x : vals) x += d(rng_);
        }
        CipherVector r = meta;
        r.payload = std::move(vals);
        return r;
    }

    CipherVector do_encrypt(const std::vector<double>& values, int level) override {
        std::vector<double> x(cfg_.slots, 0.0);
        std::copy(values.begin(), values.end(), x.begin());
        CipherVector r;
        r.level = level;
        r.slots = cfg_.slots;
        return with(r, std::move(x));
    }

    std::vector<double> do_decrypt(const CipherVector& a) override { return v(a); }

    CipherVector do_add(const CipherVector& a, const CipherVector& b, bool subtract) override {
        std::vector<double> x = v(a);
        const auto& y = v(b);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = subtract ? x[i] - y[i] : x[i] + y[i];
        return with(a, std::move(x), false);
    }

    CipherVector do_add_plain(const CipherVector& a, const std::vector<double>& w) override {
        std::vector<double> x = v(a);
        for (std::size_t i = 0; i < w.size(); ++i) x[i] += w[i];
        return with(a, std::move(x), false);
    }

    CipherVector do_add_const(const CipherVector& a, double c) override {
        std::vector<double> x = v(a);
        for (auto& e : x) e += c;
        return with(a, std::move(x), false);
    }

    CipherVector do_mul(const CipherVector& a, const CipherVector& b) override {
        std::vector<double> x = v(a);
        const auto& y = v(b);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] *= y[i];
        return with(a, std::move(x));
    }

    CipherVector do_mul_const(const CipherVector& a, double c) override {
        std::vector<double> x = v(a);
        for (auto& e : x) e *= c;
        return with(a, std::move(x));
    }

    CipherVector do_dot_plain(const std::vector<const CipherVector*>& xs,
                              const std::vector<const std::vector<double>*>& ws) override {
        std::vector<double> acc(cfg_.slots, 0.0);
        for (std::size_t t = 0; t < xs.size(); ++t) {
            const auto& x = v(*xs[t]);
            const auto& w = *ws[t];
            for (std::size_t i = 0; i < w.size(); ++i) acc[i] += x[i] * w[i];
        }
        return with(*xs[0], std::move(acc));
    }

    CipherVector do_rotate(const CipherVector& a, long k) override {
        const long s = static_cast<long>(cfg_.slots);
        const long r = ((k % s) + s) % s;
        if (cfg_.rotation_keys) {
            const auto& keys = *cfg_.rotation_keys;
            if (!keys.count(k) && !keys.count(r) && !keys.count(r - s)) {
                throw MissingKeyError(k, "missing rotation key for index " + std::to_string(k) + site());
            }
        }
        const auto& x = v(a);
        std::vector<double> y(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[(i + static_cast<std::size_t>(r)) % x.size()];
        return with(a, std::move(y));
    }

    CipherVector do_level_down(const CipherVector& a, int) override { return with(a, v(a)); }

    CipherVector do_refresh(const CipherVector& a) override {
        if (!cfg_.refresh_authority) throw RefreshUnavailable("no recryption authority configured" + site());
        return with(a, v(a));
    }

    CipherVector do_compare(const CipherVector& a, const CipherVector& t) override {
        if (!cfg_.compare_authority) throw CompareUnavailable("no comparison authority configured" + site());
        const auto& x = v(a);
        const auto& y = v(t);
        std::vector<double> c(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) c[i] = x[i] <= y[i] ? 1.0 : 0.0;
        return with(a, std::move(c), false);
    }

private:
    SimBackendConfig cfg_;
    std::mt19937_64 rng_;
};

}  // namespace

std::unique_ptr<Backend> make_sim_backend(const SimBackendConfig& cfg) { return std::make_unique<SimBackend>(cfg); }

}  // namespace spikehe::backend

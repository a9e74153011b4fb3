#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "spikehe/approx/chebyshev.hpp"
#include "spikehe/backend/backend.hpp"

namespace spikehe::lif {

enum class Mode { Approx, Switch };

Mode parse_mode(const std::string& s);
std::string mode_name(Mode m);

struct LifConfig {
    /// Leak multiplier applied to the carried membrane.
    double tau = 0.25;
    /// Natural-units threshold; approx mode compares against threshold / scale_value.
    double threshold = 0.5;
    double v_rest = 0.0;
    double scale_value = 1.0;
    int degree = 50;
    Mode mode = Mode::Approx;

    void validate() const;
};

/// Reference neuron. Updates `v` in place and returns the spikes.
std::vector<double> lif_plain_step(std::vector<double>& v, const std::vector<double>& input, int t,
                                   const LifConfig& cfg);

/// Points inside a step where the caller may refresh an operand.
enum class Site { Input, Carry, PreSpike };

const char* site_name(Site s);
/// Levels the operand must hold when it leaves `s`.
int site_need(Site s, const LifConfig& cfg);

using SiteHook = std::function<backend::CipherVector(const backend::CipherVector&, Site)>;

struct LifOutput {
    backend::CipherVector spikes;
    /// Carried membrane; Scaled in approx mode, Raw in switch mode.
    backend::CipherVector v;
};

class LifEvaluator {
public:
    explicit LifEvaluator(const LifConfig& cfg);

    const LifConfig& config() const { return cfg_; }
    /// Step series at threshold / scale_value (approx mode only).
    const approx::ChebyshevSeries& series() const;

    /// One timestep on one ciphertext. `v_prev` is required for t > 1. `mask`
    /// zeroes spikes on padding slots. `tc` is the encrypted threshold vector for
    /// switch mode; it is encrypted on demand when absent.
    LifOutput step(backend::Backend& b, const backend::CipherVector& input, const backend::CipherVector* v_prev, int t,
                   const std::vector<double>* mask = nullptr, const SiteHook& hook = {},
                   const backend::CipherVector* tc = nullptr) const;

private:
    LifOutput approx_step(backend::Backend& b, const backend::CipherVector& input, const backend::CipherVector* v_prev,
                          int t, const std::vector<double>* mask, const SiteHook& hook) const;
    LifOutput switch_step(backend::Backend& b, const backend::CipherVector& input, const backend::CipherVector* v_prev,
                          int t, const std::vector<double>* mask, const SiteHook& hook,
                          const backend::CipherVector* tc) const;

    LifConfig cfg_;
    std::optional<approx::ChebyshevSeries> series_;
};

/// Threshold vector for switch mode. Slots outside `mask` get a threshold no
/// membrane there can exceed, which keeps their spikes at zero.
std::vector<double> switch_thresholds(const LifConfig& cfg, std::size_t slots, const std::vector<double>* mask);

LifOutput lif_approx_step(backend::Backend& b, const backend::CipherVector* v_prev, const backend::CipherVector& input,
                          int t, const LifConfig& cfg);
LifOutput lif_switch_step(backend::Backend& b, const backend::CipherVector* v_prev, const backend::CipherVector& input,
                          const backend::CipherVector& tc, int t, const LifConfig& cfg);

/// Sums per-timestep class scores homomorphically, decrypts once and returns the
/// argmax over the first `classes` slots.
int decode_output(backend::Backend& b, const std::vector<backend::CipherVector>& per_step, int classes);
/// Plain twin: argmax of the element-wise sum.
int argmax_sum(const std::vector<std::vector<double>>& per_step, int classes);

}  // namespace spikehe::lif

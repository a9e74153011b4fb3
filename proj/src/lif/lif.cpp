#include "spikehe/lif/lif.hpp"

#include <cmath>

#include "spikehe/common/errors.hpp"

namespace spikehe::lif {

using backend::Backend;
using backend::CipherVector;

Mode parse_mode(const std::string& s) {
    if (s == "approx") return Mode::Approx;
    if (s == "switch") return Mode::Switch;
    throw ValidationError("unknown LIF mode '" + s + "' (expected approx or switch)");
}

std::string mode_name(Mode m) { return m == Mode::Approx ? "approx" : "switch"; }

void LifConfig::validate() const {
    if (!(tau > 0.0 && tau < 1.0)) throw ParameterError("LIF tau must lie in (0, 1)");
    if (!(scale_value > 0.0) || !std::isfinite(scale_value)) throw ParameterError("LIF scaleValue must be positive");
    if (v_rest != 0.0) throw ParameterError("only V_rest = 0 is supported (reset is multiplicative)");
    if (mode == Mode::Approx) {
        if (degree < 3) throw ParameterError("LIF series degree must be >= 3");
        const double th = threshold / scale_value;
        if (!(th > -1.0 && th < 1.0)) {
            throw DomainError("scaled threshold " + std::to_string(th) + " falls outside (-1, 1); raise scaleValue");
        }
    }
}

std::vector<double> lif_plain_step(std::vector<double>& v, const std::vector<double>& input, int t,
                                   const LifConfig& cfg) {
    if (t < 1) throw ContractError("timesteps start at 1");
    if (t == 1) v.assign(input.size(), 0.0);
    if (v.size() != input.size()) throw StructuralError("membrane and input sizes differ");
    std::vector<double> s(input.size());
    for (std::size_t i = 0; i < input.size(); ++i) {
        v[i] = t == 1 ? input[i] : cfg.tau * v[i] + input[i];
        s[i] = v[i] > cfg.threshold ? 1.0 : 0.0;
        v[i] = (1.0 - s[i]) * v[i];
    }
    return s;
}

const char* site_name(Site s) {
    switch (s) {
        case Site::Input: return "input";
        case Site::Carry: return "carry";
        case Site::PreSpike: return "pre-spike";
    }
    return "?";
}

int site_need(Site s, const LifConfig& cfg) {
    switch (s) {
        case Site::Input: return cfg.mode == Mode::Approx ? 1 : 0;
        case Site::Carry: return 1;
        case Site::PreSpike: return cfg.mode == Mode::Approx ? approx::series_depth(cfg.degree) + 1 : 1;
    }
    return 0;
}

LifEvaluator::LifEvaluator(const LifConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    if (cfg_.mode == Mode::Approx) series_ = approx::fit_step(cfg_.threshold / cfg_.scale_value, cfg_.degree);
}

const approx::ChebyshevSeries& LifEvaluator::series() const {
    if (!series_) throw ContractError("switch-mode LIF has no series");
    return *series_;
}

LifOutput LifEvaluator::step(Backend& b, const CipherVector& input, const CipherVector* v_prev, int t,
                             const std::vector<double>* mask, const SiteHook& hook, const CipherVector* tc) const {
    if (t < 1) throw ContractError("timesteps start at 1");
    if (t > 1 && !v_prev) throw ContractError("membrane state missing at t=" + std::to_string(t));
    return cfg_.mode == Mode::Approx ? approx_step(b, input, v_prev, t, mask, hook)
                                     : switch_step(b, input, v_prev, t, mask, hook, tc);
}

LifOutput LifEvaluator::approx_step(Backend& b, const CipherVector& input, const CipherVector* v_prev, int t,
                                    const std::vector<double>* mask, const SiteHook& hook) const {
    auto at = [&](const CipherVector& x, Site s) { return hook ? hook(x, s) : x; };
    CipherVector vs = approx::scale_to_interval(b, at(input, Site::Input), cfg_.scale_value);
    if (t > 1) {
        // membrane stays in the scaled domain between steps
        const CipherVector vp = at(*v_prev, Site::Carry);
        vs = b.add(b.mul_const(vp, cfg_.tau), vs);
    }
    vs = at(vs, Site::PreSpike);
    LifOutput out;
    out.spikes = approx::eval_series_encrypted(b, vs, *series_, mask);
    out.v = b.sub(vs, b.mul(out.spikes, vs));
    return out;
}

LifOutput LifEvaluator::switch_step(Backend& b, const CipherVector& input, const CipherVector* v_prev, int t,
                                    const std::vector<double>* mask, const SiteHook& hook,
                                    const CipherVector* tc) const {
    auto at = [&](const CipherVector& x, Site s) { return hook ? hook(x, s) : x; };
    CipherVector v = at(input, Site::Input);
    if (t > 1) v = b.add(b.mul_const(at(*v_prev, Site::Carry), cfg_.tau), v);
    v = at(v, Site::PreSpike);
    const CipherVector thr = tc ? *tc : b.encrypt(switch_thresholds(cfg_, b.slots(), mask));
    const CipherVector c = b.exact_compare(v, thr);
    LifOutput out;
    // padding slots compare against an unreachable threshold, so 1 - c is zero there
    out.spikes = b.add_plain(b.mul_const(c, -1.0), std::vector<double>(b.tracks_values() ? b.slots() : 0, 1.0));
    out.v = b.mul(c, v);
    return out;
}

std::vector<double> switch_thresholds(const LifConfig& cfg, std::size_t slots, const std::vector<double>* mask) {
    std::vector<double> t(slots, cfg.threshold);
    if (mask) {
        const double unreachable = std::fabs(cfg.threshold) + 1.0;
        for (std::size_t i = 0; i < slots; ++i)
            if (i >= mask->size() || (*mask)[i] == 0.0) t[i] = unreachable;
    }
    return t;
}

LifOutput lif_approx_step(Backend& b, const CipherVector* v_prev, const CipherVector& input, int t,
                          const LifConfig& cfg) {
    LifConfig c = cfg;
    c.mode = Mode::Approx;
    return LifEvaluator(c).step(b, input, v_prev, t);
}

LifOutput lif_switch_step(Backend& b, const CipherVector* v_prev, const CipherVector& input, const CipherVector& tc,
                          int t, const LifConfig& cfg) {
    LifConfig c = cfg;
    c.mode = Mode::Switch;
    return LifEvaluator(c).step(b, input, v_prev, t, nullptr, {}, &tc);
}

int decode_output(Backend& b, const std::vector<CipherVector>& per_step, int classes) {
    if (per_step.empty()) throw ContractError("decode_output needs at least one timestep");
    CipherVector sum = per_step[0];
    for (std::size_t t = 1; t < per_step.size(); ++t) sum = b.add(sum, per_step[t]);
    const auto v = b.decrypt(sum);
    std::vector<std::vector<double>> one{std::vector<double>(v.begin(), v.begin() + std::min<std::size_t>(classes, v.size()))};
    return argmax_sum(one, classes);
}

int argmax_sum(const std::vector<std::vector<double>>& per_step, int classes) {
    if (per_step.empty()) throw ContractError("argmax over zero timesteps");
    std::vector<double> acc(classes, 0.0);
    for (const auto& s : per_step)
        for (int i = 0; i < classes && i < static_cast<int>(s.size()); ++i) acc[i] += s[i];
    int best = 0;
    for (int i = 1; i < classes; ++i)
        if (acc[i] > acc[best]) best = i;
    return best;
}

}  // namespace spikehe::lif

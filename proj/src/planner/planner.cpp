#include "spikehe/planner/planner.hpp"

#include <algorithm>
#include <chrono>

#include "spikehe/common/errors.hpp"

namespace spikehe::planner {

using backend::Backend;
using backend::CipherVector;
using layers::Layout;
using layers::PackedTensor;
using layers::Tensor;
using model::LayerType;
using model::NetworkSpec;

std::string stage_name(std::size_t layer, const char* part) { return "L" + std::to_string(layer) + "." + part; }

NetworkPlan plan_network(const NetworkSpec& net, std::size_t slots) {
    const int pad = net.uniform_padding();
    NetworkPlan np;
    np.slots = slots;
    try {
        np.input = layers::make_layout(net.input.c, net.input.h, net.input.w, 1, pad, slots);
    } catch (const CapacityError& e) {
        throw CapacityError(std::string("input: ") + e.what());
    }
    Layout cur = np.input;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const auto& l = net.layers[i];
        LayerPlan lp;
        lp.in = cur;
        try {
            switch (l.type) {
                case LayerType::Conv:
                    lp.window = layers::plan_conv(cur, l.out_ch, l.kernel, l.stride, l.padding, pad, slots);
                    lp.out = lp.window->out;
                    break;
                case LayerType::AvgPool:
                    lp.window = layers::plan_pool(cur, {l.kernel, l.stride, l.padding}, pad, slots);
                    lp.out = lp.window->out;
                    break;
                case LayerType::Fc:
                    if (static_cast<std::size_t>(l.out_ch) > slots) {
                        throw CapacityError(std::to_string(l.out_ch) + " outputs exceed " + std::to_string(slots) + " slots");
                    }
                    lp.fc = layers::plan_fc(cur, l.out_ch, slots);
                    lp.out = lp.fc->out;
                    break;
                case LayerType::Lif:
                    lp.out = cur;
                    break;
                case LayerType::Residual:
                    lp.conv1 = layers::plan_conv(cur, l.out_ch, l.kernel, l.stride, l.padding, pad, slots);
                    lp.conv2 = layers::plan_conv(lp.conv1->out, l.out_ch, l.kernel, 1, l.padding, pad, slots);
                    if (l.has_shortcut_conv()) {
                        lp.shortcut = layers::plan_conv(cur, l.out_ch, 1, l.stride, 0, pad, slots);
                        if (!(lp.shortcut->out == lp.conv2->out)) throw StructuralError("shortcut and main path layouts differ");
                    } else if (!(cur == lp.conv2->out)) {
                        throw StructuralError("identity shortcut layout differs from the main path");
                    }
                    lp.out = lp.conv2->out;
                    break;
            }
        } catch (const CapacityError& e) {
            throw CapacityError("layer " + std::to_string(i) + " (" + model::layer_type_name(l.type) + "): " + e.what());
        }
        cur = lp.out;
        np.layers.push_back(std::move(lp));
    }
    return np;
}

RotationPlan harvest_rotations(const NetworkSpec& net, std::size_t slots) {
    const NetworkPlan np = plan_network(net, slots);
    RotationPlan rp;
    std::set<long> all;
    auto put = [&](const std::string& stage, const std::set<long>& idx) {
        if (idx.empty()) return;
        rp.per_stage[stage] = std::vector<long>(idx.begin(), idx.end());
        all.insert(idx.begin(), idx.end());
    };
    for (std::size_t i = 0; i < np.layers.size(); ++i) {
        const auto& lp = np.layers[i];
        switch (net.layers[i].type) {
            case LayerType::Conv: put(stage_name(i, "conv"), layers::rotation_indices(*lp.window, slots)); break;
            case LayerType::AvgPool: put(stage_name(i, "pool"), layers::rotation_indices(*lp.window, slots)); break;
            case LayerType::Fc: put(stage_name(i, "fc"), layers::rotation_indices(*lp.fc, slots)); break;
            case LayerType::Residual:
                put(stage_name(i, "conv1"), layers::rotation_indices(*lp.conv1, slots));
                put(stage_name(i, "conv2"), layers::rotation_indices(*lp.conv2, slots));
                if (lp.shortcut) put(stage_name(i, "shortcut"), layers::rotation_indices(*lp.shortcut, slots));
                break;
            case LayerType::Lif: break;
        }
    }
    all.erase(0);
    rp.indices.assign(all.begin(), all.end());
    return rp;
}

bool RefreshSchedule::contains(const std::string& stage, int t, const std::string& site) const {
    return keys_.count({stage, t, site}) > 0;
}

void RefreshSchedule::add(const RefreshPoint& p) {
    if (keys_.insert({p.stage, p.timestep, p.site}).second) points.push_back(p);
}

std::size_t RefreshSchedule::refreshes() const {
    return std::count_if(events.begin(), events.end(), [](const auto& e) { return e.op == "refresh"; });
}

std::size_t RefreshSchedule::switches() const {
    return std::count_if(events.begin(), events.end(), [](const auto& e) { return e.op == "switch"; });
}

namespace {

using Clock = std::chrono::steady_clock;

class Executor {
public:
    Executor(Backend& b, const NetworkSpec& net, const model::Weights& w, const NetworkPlan& plan, lif::Mode mode,
             int timesteps, RefreshSchedule* record, const RefreshSchedule* follow)
        : b_(b), net_(net), w_(w), plan_(plan), mode_(mode), T_(timesteps), record_(record), follow_(follow) {}

    std::vector<PackedTensor> run(std::vector<PackedTensor> cur) {
        std::vector<bool> prev_lif_refresh(T_, false);
        for (std::size_t i = 0; i < net_.layers.size(); ++i) {
            const auto& l = net_.layers[i];
            const auto& lp = plan_.layers[i];
            const auto& lw = w_.layers[i];
            std::vector<bool> lif_refresh(T_, false);
            const std::size_t in_cts = count(cur);
            switch (l.type) {
                case LayerType::Conv: {
                    const std::string name = stage_name(i, "conv");
                    for (int t = 1; t <= T_; ++t) {
                        const auto start = Clock::now();
                        PackedTensor x = gate_all(cur[t - 1], name, t, 1, nullptr);
                        b_.set_site(name, t);
                        cur[t - 1] = layers::conv2d_enc(b_, x, *lw.conv, *lp.window);
                        done(name, t, start, cur[t - 1]);
                    }
                    release(in_cts + count(cur));
                    if (l.lif) lif_sweep(stage_name(i, "lif"), cur, l.scale_value, lif_refresh);
                    break;
                }
                case LayerType::AvgPool: {
                    const std::string name = stage_name(i, "pool");
                    for (int t = 1; t <= T_; ++t) {
                        const auto start = Clock::now();
                        const char* why = mode_ == lif::Mode::Approx && prev_lif_refresh[t - 1] ? "pre-pool" : nullptr;
                        PackedTensor x = gate_all(cur[t - 1], name, t, 1, why);
                        b_.set_site(name, t);
                        cur[t - 1] = layers::avgpool_enc(b_, x, *lp.window);
                        done(name, t, start, cur[t - 1]);
                    }
                    release(in_cts + count(cur));
                    break;
                }
                case LayerType::Fc: {
                    const std::string name = stage_name(i, "fc");
                    for (int t = 1; t <= T_; ++t) {
                        const auto start = Clock::now();
                        PackedTensor x = gate_all(cur[t - 1], name, t, 2, nullptr);
                        b_.set_site(name, t);
                        cur[t - 1] = layers::fc_enc(b_, x, *lw.fc, *lp.fc);
                        done(name, t, start, cur[t - 1]);
                    }
                    release(in_cts + count(cur));
                    if (l.lif) lif_sweep(stage_name(i, "lif"), cur, l.scale_value, lif_refresh);
                    break;
                }
                case LayerType::Lif:
                    lif_sweep(stage_name(i, "lif"), cur, l.scale_value, lif_refresh);
                    break;
                case LayerType::Residual:
                    residual(i, l, lp, *lw.residual, cur, lif_refresh);
                    break;
            }
            prev_lif_refresh = lif_refresh;
        }
        return cur;
    }

    std::vector<CellStats> cells;
    std::size_t peak_bytes = 0;

private:
    struct LifStage {
        std::string name;
        lif::LifEvaluator ev;
        std::vector<std::vector<double>> masks;
        std::vector<CipherVector> tc;
        std::vector<CipherVector> v;
        bool refreshed = false;
    };

    static std::size_t count(const std::vector<PackedTensor>& xs) {
        std::size_t n = 0;
        for (const auto& x : xs) n += x.parts.size();
        return n;
    }

    lif::LifConfig lif_config(double scale) const {
        lif::LifConfig c;
        c.tau = net_.lif.tau;
        c.threshold = net_.lif.threshold;
        c.degree = net_.lif.degree;
        c.scale_value = scale;
        c.mode = mode_;
        return c;
    }

    LifStage make_lif(const std::string& name, const Layout& l, double scale) {
        LifStage s{name, lif::LifEvaluator(lif_config(scale)), {}, {}, {}, false};
        if (b_.tracks_values()) s.masks = layers::valid_mask(l, b_.slots());
        if (mode_ == lif::Mode::Switch) {
            b_.set_site(name, 0);
            for (int p = 0; p < l.parts; ++p) {
                const auto* m = s.masks.empty() ? nullptr : &s.masks[p];
                s.tc.push_back(b_.encrypt(lif::switch_thresholds(s.ev.config(), b_.tracks_values() ? b_.slots() : 0, m)));
            }
        }
        return s;
    }

    CipherVector gate(const CipherVector& x, const std::string& stage, int t, const char* site, int need,
                      const char* mandatory, bool* did = nullptr) {
        bool go;
        if (record_) {
            if (need > b_.max_level()) {
                throw ParameterError(stage + " needs " + std::to_string(need) + " levels at its " + site +
                                     " but the depth is " + std::to_string(b_.max_level()));
            }
            go = mandatory || x.level < need;
            if (go) record_->add({stage, t, site, mandatory ? mandatory : "interval"});
        } else {
            go = follow_->contains(stage, t, site);
        }
        if (!go) return x;
        if (did) *did = true;
        b_.set_site(stage, t);
        return b_.refresh(x);
    }

    PackedTensor gate_all(const PackedTensor& x, const std::string& stage, int t, int need, const char* mandatory) {
        PackedTensor r = x;
        for (auto& p : r.parts) p = gate(p, stage, t, "input", need, mandatory);
        return r;
    }

    PackedTensor lif_cell(LifStage& s, const PackedTensor& x, int t) {
        const auto start = Clock::now();
        s.refreshed = false;
        if (t == 1) s.v.assign(x.parts.size(), CipherVector{});
        const auto& cfg = s.ev.config();
        lif::SiteHook hook = [&](const CipherVector& c, lif::Site site) {
            const char* why = mode_ == lif::Mode::Approx && site == lif::Site::PreSpike && t > 1 ? "pre-spike" : nullptr;
            return gate(c, s.name, t, lif::site_name(site), lif::site_need(site, cfg), why, &s.refreshed);
        };
        PackedTensor out;
        out.layout = x.layout;
        for (std::size_t p = 0; p < x.parts.size(); ++p) {
            b_.set_site(s.name, t);
            const auto* mask = s.masks.empty() ? nullptr : &s.masks[p];
            const auto* tc = s.tc.empty() ? nullptr : &s.tc[p];
            auto r = s.ev.step(b_, x.parts[p], t > 1 ? &s.v[p] : nullptr, t, mask, hook, tc);
            out.parts.push_back(std::move(r.spikes));
            s.v[p] = std::move(r.v);
        }
        done(s.name, t, start, out);
        return out;
    }

    void lif_sweep(const std::string& name, std::vector<PackedTensor>& cur, double scale, std::vector<bool>& refreshed) {
        LifStage s = make_lif(name, cur[0].layout, scale);
        const std::size_t in_cts = count(cur);
        for (int t = 1; t <= T_; ++t) {
            cur[t - 1] = lif_cell(s, cur[t - 1], t);
            refreshed[t - 1] = s.refreshed;
        }
        release(in_cts + count(cur) + s.v.size() + s.tc.size());
    }

    void residual(std::size_t i, const model::LayerSpec& l, const LayerPlan& lp, const model::ResidualWeights& rw,
                  std::vector<PackedTensor>& cur, std::vector<bool>& refreshed) {
        LifStage s1 = make_lif(stage_name(i, "lif1"), lp.conv1->out, l.scale_values[0]);
        LifStage s2 = make_lif(stage_name(i, "lif2"), lp.conv2->out, l.scale_values[1]);
        const std::string n1 = stage_name(i, "conv1"), n2 = stage_name(i, "conv2"), ns = stage_name(i, "shortcut"),
                          nj = stage_name(i, "join");
        const std::size_t in_cts = count(cur);
        for (int t = 1; t <= T_; ++t) {
            const PackedTensor& x = cur[t - 1];
            auto start = Clock::now();
            PackedTensor y = gate_all(x, n1, t, 1, nullptr);
            b_.set_site(n1, t);
            y = layers::conv2d_enc(b_, y, rw.conv1, *lp.conv1);
            done(n1, t, start, y);
            y = lif_cell(s1, y, t);
            start = Clock::now();
            y = gate_all(y, n2, t, 1, nullptr);
            b_.set_site(n2, t);
            y = layers::conv2d_enc(b_, y, rw.conv2, *lp.conv2);
            done(n2, t, start, y);
            PackedTensor sc = x;
            if (lp.shortcut) {
                start = Clock::now();
                sc = gate_all(x, ns, t, 1, nullptr);
                b_.set_site(ns, t);
                sc = layers::conv2d_enc(b_, sc, *rw.shortcut, *lp.shortcut);
                done(ns, t, start, sc);
            }
            b_.set_site(nj, t);
            y = layers::add(b_, y, sc);
            cur[t - 1] = lif_cell(s2, y, t);
            refreshed[t - 1] = s2.refreshed;
        }
        release(in_cts + count(cur) + s1.v.size() + s2.v.size() + s1.tc.size() + s2.tc.size());
    }

    void done(const std::string& stage, int t, Clock::time_point start, const PackedTensor& out) {
        const double ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
        cells.push_back({stage, t, ms, out.parts.empty() ? 0 : out.level()});
    }

    /// Accounts a finished layer sweep and drops its cached plaintext encodings.
    void release(std::size_t live_cts) {
        const std::size_t bytes =
            live_cts * b_.ciphertext_bytes(b_.max_level()) + b_.key_bytes() + b_.plaintext_cache_bytes();
        peak_bytes = std::max(peak_bytes, bytes);
        b_.release_plaintext_cache();
    }

    Backend& b_;
    const NetworkSpec& net_;
    const model::Weights& w_;
    const NetworkPlan& plan_;
    lif::Mode mode_;
    int T_;
    RefreshSchedule* record_;
    const RefreshSchedule* follow_;
};

PackedTensor sum_over_time(Backend& b, const std::vector<PackedTensor>& xs) {
    PackedTensor s = xs.at(0);
    b.set_site("decode", 0);
    for (std::size_t t = 1; t < xs.size(); ++t) s = layers::add(b, s, xs[t]);
    return s;
}

}  // namespace

RefreshSchedule schedule_refresh(const NetworkSpec& net, std::size_t slots, int depth, lif::Mode mode, int timesteps) {
    if (timesteps <= 0) timesteps = net.timesteps;
    const NetworkPlan np = plan_network(net, slots);
    const model::Weights w = model::shape_only_weights(net);
    auto b = backend::make_ledger_backend(slots, depth);
    RefreshSchedule s;
    s.mode = mode;
    s.timesteps = timesteps;
    s.depth = depth;
    s.slots = slots;
    std::vector<PackedTensor> input;
    for (int t = 0; t < timesteps; ++t) {
        PackedTensor x;
        x.layout = np.input;
        for (int p = 0; p < np.input.parts; ++p) x.parts.push_back(b->encrypt({}));
        input.push_back(std::move(x));
    }
    Executor ex(*b, net, w, np, mode, timesteps, &s, nullptr);
    try {
        ex.run(std::move(input));
    } catch (const LevelExhausted& e) {
        throw ParameterError(std::string("no refresh placement satisfies the level budget: ") + e.what());
    }
    s.events = b->audit();
    return s;
}

InferenceResult run_inference(Backend& b, const NetworkSpec& net, const model::Weights& w,
                              const std::vector<PackedTensor>& input, const RunOptions& opt) {
    if (input.empty()) throw ContractError("run_inference needs at least one timestep");
    if (w.layers.size() != net.layers.size()) throw StructuralError("weights do not match the network");
    const int T = static_cast<int>(input.size());
    InferenceResult r;
    if (opt.schedule) {
        const auto& s = *opt.schedule;
        if (s.mode != opt.mode || s.timesteps != T || s.depth != b.max_level() || s.slots != b.slots()) {
            throw ContractError("refresh schedule was made for a different mode, timestep count or parameter set");
        }
        r.schedule = s;
    } else {
        r.schedule = schedule_refresh(net, b.slots(), b.max_level(), opt.mode, T);
    }
    const NetworkPlan np = plan_network(net, b.slots());
    for (const auto& x : input) {
        if (!(x.layout == np.input)) throw StructuralError("encrypted input layout does not match the network");
    }
    Executor ex(b, net, w, np, opt.mode, T, nullptr, &r.schedule);
    r.outputs = ex.run(input);
    r.sum = sum_over_time(b, r.outputs);
    r.cells = std::move(ex.cells);
    r.peak_bytes = ex.peak_bytes;
    return r;
}

std::vector<double> decrypt_scores(Backend& b, const InferenceResult& r) { return layers::decrypt_unpack(b, r.sum).v; }

int argmax(const std::vector<double>& v) {
    if (v.empty()) throw ContractError("argmax of an empty vector");
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

std::vector<Tensor> frames_for(const NetworkSpec& net, const model::Sample& s) {
    for (const auto& f : s.frames) {
        if (f.c != net.input.c || f.h != net.input.h || f.w != net.input.w) {
            throw ValidationError("frame " + std::to_string(f.c) + "x" + std::to_string(f.h) + "x" + std::to_string(f.w) +
                                  " does not match the network input");
        }
    }
    if (s.frames.size() == 1) return std::vector<Tensor>(net.timesteps, s.frames[0]);
    if (static_cast<int>(s.frames.size()) != net.timesteps) {
        throw ValidationError("sample has " + std::to_string(s.frames.size()) + " frames, network expects " +
                              std::to_string(net.timesteps));
    }
    return s.frames;
}

PlainResult run_inference_plain(const NetworkSpec& net, const model::Weights& w, const std::vector<Tensor>& frames) {
    if (frames.empty()) throw ContractError("plain inference needs at least one timestep");
    if (w.layers.size() != net.layers.size()) throw StructuralError("weights do not match the network");
    const int T = static_cast<int>(frames.size());
    PlainResult r;
    std::vector<Tensor> cur = frames;
    lif::LifConfig cfg;
    cfg.tau = net.lif.tau;
    cfg.threshold = net.lif.threshold;
    auto trace = [&](const std::string& stage, int t, const Tensor& x) { r.trace.push_back({stage, t, x.v}); };
    auto lif_step = [&](const std::string& stage, std::vector<double>& v, Tensor& x, int t) {
        x.v = lif::lif_plain_step(v, x.v, t, cfg);
        trace(stage, t, x);
        r.trace.push_back({stage + ".v", t, v});
    };
    auto lif_sweep = [&](const std::string& stage) {
        std::vector<double> v;
        for (int t = 1; t <= T; ++t) lif_step(stage, v, cur[t - 1], t);
    };
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const auto& l = net.layers[i];
        const auto& lw = w.layers[i];
        switch (l.type) {
            case LayerType::Conv:
                for (int t = 1; t <= T; ++t) {
                    cur[t - 1] = layers::conv2d_plain(cur[t - 1], *lw.conv);
                    trace(stage_name(i, "conv"), t, cur[t - 1]);
                }
                if (l.lif) lif_sweep(stage_name(i, "lif"));
                break;
            case LayerType::AvgPool:
                for (int t = 1; t <= T; ++t) {
                    cur[t - 1] = layers::avgpool_plain(cur[t - 1], {l.kernel, l.stride, l.padding});
                    trace(stage_name(i, "pool"), t, cur[t - 1]);
                }
                break;
            case LayerType::Fc:
                for (int t = 1; t <= T; ++t) {
                    Tensor y(l.out_ch, 1, 1);
                    y.v = layers::fc_plain(cur[t - 1].v, *lw.fc);
                    cur[t - 1] = std::move(y);
                    trace(stage_name(i, "fc"), t, cur[t - 1]);
                }
                if (l.lif) lif_sweep(stage_name(i, "lif"));
                break;
            case LayerType::Lif:
                lif_sweep(stage_name(i, "lif"));
                break;
            case LayerType::Residual: {
                const auto& rw = *lw.residual;
                std::vector<double> v1, v2;
                for (int t = 1; t <= T; ++t) {
                    const Tensor& x = cur[t - 1];
                    Tensor y = layers::conv2d_plain(x, rw.conv1);
                    trace(stage_name(i, "conv1"), t, y);
                    lif_step(stage_name(i, "lif1"), v1, y, t);
                    y = layers::conv2d_plain(y, rw.conv2);
                    trace(stage_name(i, "conv2"), t, y);
                    Tensor sc = x;
                    if (rw.shortcut) {
                        sc = layers::conv2d_plain(x, *rw.shortcut);
                        trace(stage_name(i, "shortcut"), t, sc);
                    }
                    for (std::size_t k = 0; k < y.v.size(); ++k) y.v[k] += sc.v[k];
                    trace(stage_name(i, "join"), t, y);
                    lif_step(stage_name(i, "lif2"), v2, y, t);
                    cur[t - 1] = std::move(y);
                }
                break;
            }
        }
    }
    r.scores.assign(cur[0].size(), 0.0);
    for (const auto& x : cur)
        for (std::size_t k = 0; k < x.v.size(); ++k) r.scores[k] += x.v[k];
    r.outputs = std::move(cur);
    return r;
}

}  // namespace spikehe::planner

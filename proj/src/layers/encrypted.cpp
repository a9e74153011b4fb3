#include <algorithm>

#include "spikehe/common/errors.hpp"
#include "spikehe/layers/layers.hpp"

namespace spikehe::layers {

using backend::Backend;
using backend::CipherVector;

namespace {

void check_input(const PackedTensor& x, const Layout& l, const char* what) {
    if (!(x.layout == l) || static_cast<int>(x.parts.size()) != l.parts) {
        throw StructuralError(std::string(what) + ": input layout does not match the layer plan");
    }
}

void accumulate(Backend& b, std::vector<CipherVector>& acc, std::vector<bool>& have, int part, CipherVector z) {
    if (!have[part]) {
        acc[part] = std::move(z);
        have[part] = true;
    } else {
        acc[part] = b.add(acc[part], z);
    }
}

PackedTensor finish(Backend& b, const Layout& out, std::vector<CipherVector> acc, const std::vector<double>* bias) {
    PackedTensor y;
    y.layout = out;
    if (bias && std::any_of(bias->begin(), bias->end(), [](double v) { return v != 0.0; })) {
        Tensor bt(out.c, out.h, out.w);
        for (int o = 0; o < out.c; ++o)
            for (int i = 0; i < out.h; ++i)
                for (int j = 0; j < out.w; ++j) bt.at(o, i, j) = (*bias)[o];
        const auto pv = b.tracks_values() ? pack_values(out, bt, b.slots())
                                          : std::vector<std::vector<double>>(out.parts);
        for (int p = 0; p < out.parts; ++p) acc[p] = b.add_plain(acc[p], pv[p]);
    }
    y.parts = std::move(acc);
    return y;
}

}  // namespace

PackedTensor conv2d_enc(Backend& b, const PackedTensor& x, const ConvSpec& s, const WindowPlan& plan) {
    check_input(x, plan.in, "conv");
    if (plan.depthwise || s.c_in != plan.in.c || s.c_out != plan.out.c || s.k != plan.k || s.stride != plan.stride ||
        s.padding != plan.padding) {
        throw StructuralError("conv: spec does not match the layer plan");
    }
    if (b.tracks_values() && s.kernel.size() != static_cast<std::size_t>(s.c_out) * s.c_in * s.k * s.k) {
        throw StructuralError("conv: kernel tensor has the wrong size");
    }
    const std::size_t slots = b.slots();
    const int k = plan.k;

    std::vector<std::vector<CipherVector>> rot(plan.in.parts);
    for (int p = 0; p < plan.in.parts; ++p)
        for (long d : plan.offsets[p]) rot[p].push_back(b.rotate(x.parts[p], d));

    std::vector<CipherVector> acc(plan.out.parts);
    std::vector<bool> have(plan.out.parts, false);
    if (!b.tracks_values()) {
        // level-only run: one placeholder product per group
        const std::vector<double> none;
        for (const auto& g : plan.groups) {
            CipherVector z = b.dot_plain({&rot[0][0]}, {&none});
            accumulate(b, acc, have, g.out_part, b.rotate(z, g.shift));
        }
        return finish(b, plan.out, std::move(acc), &s.bias);
    }
    for (const auto& g : plan.groups) {
        std::vector<std::vector<double>> ws;
        std::vector<const CipherVector*> xs;
        for (int p = 0; p < plan.in.parts; ++p) {
            for (std::size_t t = 0; t < plan.offsets[p].size(); ++t) {
                const int blk = static_cast<int>(t) / (k * k), a = static_cast<int>(t) / k % k, bb = static_cast<int>(t) % k;
                const int c = blk * plan.in.parts + p;
                std::vector<double> w;
                for (const auto& [o, y] : g.members) {
                    const double kv = s.weight(o, c, a, bb);
                    if (kv == 0.0) continue;
                    if (w.empty()) w.assign(slots, 0.0);
                    for (int xo = 0; xo < plan.out.w; ++xo) w[plan.anchor(0, y, xo)] = kv;
                }
                if (w.empty()) continue;
                ws.push_back(std::move(w));
                xs.push_back(&rot[p][t]);
            }
        }
        if (xs.empty()) {
            ws.emplace_back(slots, 0.0);
            xs.push_back(&rot[0][0]);
        }
        std::vector<const std::vector<double>*> wp;
        for (const auto& w : ws) wp.push_back(&w);
        CipherVector z = b.dot_plain(xs, wp);
        accumulate(b, acc, have, g.out_part, b.rotate(z, g.shift));
    }
    return finish(b, plan.out, std::move(acc), &s.bias);
}

PackedTensor avgpool_enc(Backend& b, const PackedTensor& x, const WindowPlan& plan) {
    check_input(x, plan.in, "avgpool");
    if (!plan.depthwise) throw StructuralError("avgpool: plan is not a pooling plan");
    const std::size_t slots = b.slots();

    std::vector<CipherVector> sums(plan.in.parts);
    for (int p = 0; p < plan.in.parts; ++p) {
        sums[p] = x.parts[p];
        for (long d : plan.offsets[p]) {
            if (d != 0) sums[p] = b.add(sums[p], b.rotate(x.parts[p], d));
        }
    }
    const double inv = 1.0 / (plan.k * plan.k);
    std::vector<CipherVector> acc(plan.out.parts);
    std::vector<bool> have(plan.out.parts, false);
    for (const auto& g : plan.groups) {
        std::vector<double> m;
        if (b.tracks_values()) {
            m.assign(slots, 0.0);
            for (const auto& [o, y] : g.members)
                for (int xo = 0; xo < plan.out.w; ++xo) m[plan.anchor(plan.in.block_of(o), y, xo)] = inv;
        }
        accumulate(b, acc, have, g.out_part, b.rotate(b.mul_plain(sums[g.src_part], m), g.shift));
    }
    return finish(b, plan.out, std::move(acc), nullptr);
}

PackedTensor fc_enc(Backend& b, const PackedTensor& x, const FcSpec& s, const FcPlan& plan) {
    check_input(x, plan.in, "fc");
    const Layout& in = plan.in;
    if (s.n_in != in.c * in.h * in.w || s.n_out != plan.n_out) throw StructuralError("fc: spec does not match the layer plan");
    if (b.tracks_values() && s.weight.size() != static_cast<std::size_t>(s.n_in) * s.n_out) throw StructuralError("fc: weight matrix has the wrong size");
    const std::size_t slots = b.slots();

    const bool values = b.tracks_values();
    std::vector<double> pick;
    if (values) {
        pick.assign(slots, 0.0);
        pick[plan.collector] = 1.0;
    }
    CipherVector acc;
    bool have = false;
    for (int o = 0; o < s.n_out; ++o) {
        std::vector<std::vector<double>> ws(in.parts, std::vector<double>(values ? slots : 0, 0.0));
        for (int c = 0; c < in.c && values; ++c)
            for (int i = 0; i < in.h; ++i)
                for (int j = 0; j < in.w; ++j) {
                    const std::size_t flat = (static_cast<std::size_t>(c) * in.h + i) * in.w + j;
                    ws[in.part_of(c)][in.position(c, i, j)] = s.weight[static_cast<std::size_t>(o) * s.n_in + flat];
                }
        std::vector<const CipherVector*> xs;
        std::vector<const std::vector<double>*> wp;
        for (int p = 0; p < in.parts; ++p) {
            xs.push_back(&x.parts[p]);
            wp.push_back(&ws[p]);
        }
        CipherVector z = b.dot_plain(xs, wp);
        for (long step : plan.tree) z = b.add(z, b.rotate(z, step));
        z = b.rotate(b.mul_plain(z, pick), plan.combine[o]);
        if (!have) {
            acc = std::move(z);
            have = true;
        } else {
            acc = b.add(acc, z);
        }
    }
    std::vector<CipherVector> parts{std::move(acc)};
    return finish(b, plan.out, std::move(parts), &s.bias);
}

PackedTensor conv2d_enc(Backend& b, const PackedTensor& x, const ConvSpec& s, int out_pad) {
    return conv2d_enc(b, x, s, plan_conv(x.layout, s.c_out, s.k, s.stride, s.padding, out_pad, b.slots()));
}

PackedTensor avgpool_enc(Backend& b, const PackedTensor& x, const PoolSpec& s, int out_pad) {
    return avgpool_enc(b, x, plan_pool(x.layout, s, out_pad, b.slots()));
}

PackedTensor fc_enc(Backend& b, const PackedTensor& x, const FcSpec& s) {
    return fc_enc(b, x, s, plan_fc(x.layout, s.n_out, b.slots()));
}

PackedTensor add(Backend& b, const PackedTensor& x, const PackedTensor& y) {
    if (!(x.layout == y.layout) || x.parts.size() != y.parts.size()) {
        throw StructuralError("residual join: operand layouts differ");
    }
    PackedTensor r;
    r.layout = x.layout;
    for (std::size_t p = 0; p < x.parts.size(); ++p) r.parts.push_back(b.add(x.parts[p], y.parts[p]));
    return r;
}

}  // namespace spikehe::layers

#include <algorithm>

#include "spikehe/common/errors.hpp"
#include "spikehe/layers/layers.hpp"

namespace spikehe::layers {

long Layout::span() const {
    if (c == 0) return 0;
    return (blocks(0) - 1) * cs + offset(h - 1, w - 1) + 1;
}

Layout make_layout(int c, int h, int w, long g, int pad, std::size_t slots) {
    if (c < 1 || h < 1 || w < 1 || g < 1 || pad < 0) throw StructuralError("invalid tensor layout dimensions");
    Layout l;
    l.c = c;
    l.h = h;
    l.w = w;
    l.g = g;
    l.pad = pad;
    l.rs = (w + 2L * pad) * g;
    l.cs = (h + 2L * pad) * l.rs;
    if (l.cs > static_cast<long>(slots)) {
        throw CapacityError("one channel of " + std::to_string(h) + "x" + std::to_string(w) + " (stride " +
                            std::to_string(g) + ", pad " + std::to_string(pad) + ") needs " + std::to_string(l.cs) +
                            " slots, only " + std::to_string(slots) + " available");
    }
    const long per = static_cast<long>(slots) / l.cs;
    l.parts = static_cast<int>((c + per - 1) / per);
    return l;
}

Layout flat_layout(int n) {
    Layout l;
    l.c = n;
    l.h = l.w = 1;
    l.cs = l.rs = l.g = 1;
    return l;
}

int PackedTensor::level() const {
    int lv = parts.empty() ? 0 : parts[0].level;
    for (const auto& p : parts) lv = std::min(lv, p.level);
    return lv;
}

std::vector<std::vector<double>> pack_values(const Layout& l, const Tensor& t, std::size_t slots) {
    if (t.c != l.c || t.h != l.h || t.w != l.w) throw StructuralError("tensor shape does not match its layout");
    std::vector<std::vector<double>> parts(l.parts, std::vector<double>(slots, 0.0));
    for (int ch = 0; ch < l.c; ++ch)
        for (int i = 0; i < l.h; ++i)
            for (int j = 0; j < l.w; ++j) parts[l.part_of(ch)][l.position(ch, i, j)] = t.at(ch, i, j);
    return parts;
}

Tensor unpack_values(const Layout& l, const std::vector<std::vector<double>>& parts) {
    Tensor t(l.c, l.h, l.w);
    for (int ch = 0; ch < l.c; ++ch)
        for (int i = 0; i < l.h; ++i)
            for (int j = 0; j < l.w; ++j) t.at(ch, i, j) = parts.at(l.part_of(ch)).at(l.position(ch, i, j));
    return t;
}

std::vector<std::vector<double>> valid_mask(const Layout& l, std::size_t slots) {
    Tensor ones(l.c, l.h, l.w);
    std::fill(ones.v.begin(), ones.v.end(), 1.0);
    return pack_values(l, ones, slots);
}

PackedTensor pack_encrypt(backend::Backend& b, const Layout& l, const Tensor& t, int level) {
    PackedTensor x;
    x.layout = l;
    for (const auto& v : pack_values(l, t, b.slots())) x.parts.push_back(b.encrypt(v, level));
    return x;
}

Tensor decrypt_unpack(backend::Backend& b, const PackedTensor& x) {
    std::vector<std::vector<double>> vals;
    for (const auto& p : x.parts) vals.push_back(b.decrypt(p));
    return unpack_values(x.layout, vals);
}

Tensor conv2d_plain(const Tensor& x, const ConvSpec& s) {
    if (x.c != s.c_in) throw StructuralError("conv input has " + std::to_string(x.c) + " channels, spec expects " +
                                             std::to_string(s.c_in));
    const int ho = (x.h + 2 * s.padding - s.k) / s.stride + 1;
    const int wo = (x.w + 2 * s.padding - s.k) / s.stride + 1;
    if (ho < 1 || wo < 1) throw StructuralError("conv kernel larger than padded input");
    Tensor y(s.c_out, ho, wo);
    for (int o = 0; o < s.c_out; ++o)
        for (int i = 0; i < ho; ++i)
            for (int j = 0; j < wo; ++j) {
                double acc = s.bias.empty() ? 0.0 : s.bias[o];
                for (int c = 0; c < s.c_in; ++c)
                    for (int a = 0; a < s.k; ++a)
                        for (int bb = 0; bb < s.k; ++bb) {
                            const int r = i * s.stride - s.padding + a, q = j * s.stride - s.padding + bb;
                            if (r < 0 || q < 0 || r >= x.h || q >= x.w) continue;
                            acc += x.at(c, r, q) * s.weight(o, c, a, bb);
                        }
                y.at(o, i, j) = acc;
            }
    return y;
}

Tensor avgpool_plain(const Tensor& x, const PoolSpec& s) {
    const int ho = (x.h + 2 * s.padding - s.k) / s.stride + 1;
    const int wo = (x.w + 2 * s.padding - s.k) / s.stride + 1;
    if (ho < 1 || wo < 1) throw StructuralError("pool window larger than padded input");
    Tensor y(x.c, ho, wo);
    const double inv = 1.0 / (s.k * s.k);
    for (int c = 0; c < x.c; ++c)
        for (int i = 0; i < ho; ++i)
            for (int j = 0; j < wo; ++j) {
                double acc = 0.0;
                for (int a = 0; a < s.k; ++a)
                    for (int bb = 0; bb < s.k; ++bb) {
                        const int r = i * s.stride - s.padding + a, q = j * s.stride - s.padding + bb;
                        if (r < 0 || q < 0 || r >= x.h || q >= x.w) continue;
                        acc += x.at(c, r, q);
                    }
                y.at(c, i, j) = acc * inv;
            }
    return y;
}

std::vector<double> fc_plain(const std::vector<double>& x, const FcSpec& s) {
    if (static_cast<int>(x.size()) != s.n_in) {
        throw StructuralError("fc input has " + std::to_string(x.size()) + " values, spec expects " +
                              std::to_string(s.n_in));
    }
    std::vector<double> y(s.n_out);
    for (int o = 0; o < s.n_out; ++o) {
        double acc = s.bias.empty() ? 0.0 : s.bias[o];
        for (int i = 0; i < s.n_in; ++i) acc += s.weight[static_cast<std::size_t>(o) * s.n_in + i] * x[i];
        y[o] = acc;
    }
    return y;
}

}  // namespace spikehe::layers

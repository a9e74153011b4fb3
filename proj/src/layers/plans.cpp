#include <map>
#include <tuple>

#include "spikehe/common/errors.hpp"
#include "spikehe/layers/layers.hpp"

namespace spikehe::layers {

long normalize_rotation(long k, std::size_t slots) {
    const long s = static_cast<long>(slots);
    long r = ((k % s) + s) % s;
    if (r > s / 2) r -= s;
    return r;
}

long WindowPlan::anchor(int block, int y, int x) const {
    return block * in.cs + (static_cast<long>(y) * stride - padding + in.pad) * in.rs +
           (static_cast<long>(x) * stride - padding + in.pad) * in.g;
}

namespace {

WindowPlan window_common(const Layout& in, int c_out, int k, int stride, int padding, int out_pad,
                         std::size_t slots, const char* what) {
    if (k < 1 || stride < 1 || padding < 0) throw StructuralError(std::string(what) + ": invalid window");
    if (padding > in.pad) {
        throw StructuralError(std::string(what) + ": padding " + std::to_string(padding) +
                              " exceeds the packed padding " + std::to_string(in.pad));
    }
    const int ho = (in.h + 2 * padding - k) / stride + 1;
    const int wo = (in.w + 2 * padding - k) / stride + 1;
    if (in.h + 2 * padding < k || in.w + 2 * padding < k) {
        throw StructuralError(std::string(what) + ": window larger than padded input");
    }
    WindowPlan p;
    p.in = in;
    p.k = k;
    p.stride = stride;
    p.padding = padding;
    p.out = make_layout(c_out, ho, wo, in.g * stride, out_pad, slots);
    return p;
}

}  // namespace

WindowPlan plan_conv(const Layout& in, int c_out, int k, int stride, int padding, int out_pad, std::size_t slots) {
    WindowPlan p = window_common(in, c_out, k, stride, padding, out_pad, slots, "conv");
    p.offsets.resize(in.parts);
    for (int part = 0; part < in.parts; ++part)
        for (int blk = 0; blk < in.blocks(part); ++blk)
            for (int a = 0; a < k; ++a)
                for (int b = 0; b < k; ++b) p.offsets[part].push_back(blk * in.cs + a * in.rs + b * in.g);

    // products for every output channel accumulate at block-0 anchors, then move to their home slots
    std::map<std::pair<int, long>, Group> groups;
    for (int o = 0; o < c_out; ++o)
        for (int y = 0; y < p.out.h; ++y) {
            const int op = p.out.part_of(o);
            const long shift = p.anchor(0, y, 0) - p.out.position(o, y, 0);
            auto& g = groups[{op, shift}];
            g.out_part = op;
            g.shift = shift;
            g.members.emplace_back(o, y);
        }
    for (auto& [_, g] : groups) p.groups.push_back(std::move(g));
    return p;
}

WindowPlan plan_pool(const Layout& in, const PoolSpec& s, int out_pad, std::size_t slots) {
    WindowPlan p = window_common(in, in.c, s.k, s.stride, s.padding, out_pad, slots, "avgpool");
    p.depthwise = true;
    p.offsets.resize(in.parts);
    for (int part = 0; part < in.parts; ++part)
        for (int a = 0; a < s.k; ++a)
            for (int b = 0; b < s.k; ++b) p.offsets[part].push_back(a * in.rs + b * in.g);

    std::map<std::tuple<int, int, long>, Group> groups;
    for (int o = 0; o < in.c; ++o)
        for (int y = 0; y < p.out.h; ++y) {
            const int op = p.out.part_of(o), sp = in.part_of(o);
            const long shift = p.anchor(in.block_of(o), y, 0) - p.out.position(o, y, 0);
            auto& g = groups[{op, sp, shift}];
            g.out_part = op;
            g.src_part = sp;
            g.shift = shift;
            g.members.emplace_back(o, y);
        }
    for (auto& [_, g] : groups) p.groups.push_back(std::move(g));
    return p;
}

std::size_t WindowPlan::input_rotations() const {
    std::size_t n = 0;
    for (const auto& v : offsets)
        for (long d : v) n += d != 0;
    return n;
}

std::size_t WindowPlan::compaction_rotations() const {
    std::size_t n = 0;
    for (const auto& g : groups) n += g.shift != 0;
    return n;
}

FcPlan plan_fc(const Layout& in, int n_out, std::size_t slots) {
    if (n_out < 1) throw StructuralError("fc: n_out must be >= 1");
    FcPlan p;
    p.in = in;
    p.n_out = n_out;
    p.out = flat_layout(n_out);
    const long span = in.span();
    long width = 1;
    int t = 0;
    while (width < span || width <= n_out) {
        width *= 2;
        ++t;
    }
    if (width > static_cast<long>(slots)) {
        throw CapacityError("fc: summation tree of width " + std::to_string(width) + " exceeds " +
                            std::to_string(slots) + " slots");
    }
    p.collector = width - 1;
    for (int i = 0; i < t; ++i) p.tree.push_back(-(1L << i));
    for (int o = 0; o < n_out; ++o) p.combine.push_back(p.collector - o);
    return p;
}

std::set<long> rotation_indices(const WindowPlan& p, std::size_t slots) {
    std::set<long> r;
    for (const auto& v : p.offsets)
        for (long d : v) r.insert(normalize_rotation(d, slots));
    for (const auto& g : p.groups) r.insert(normalize_rotation(g.shift, slots));
    r.erase(0);
    return r;
}

std::set<long> rotation_indices(const FcPlan& p, std::size_t slots) {
    std::set<long> r;
    for (long d : p.tree) r.insert(normalize_rotation(d, slots));
    for (long d : p.combine) r.insert(normalize_rotation(d, slots));
    r.erase(0);
    return r;
}

}  // namespace spikehe::layers

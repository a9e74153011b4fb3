#pragma once

#include <cstddef>
#include <set>
#include <vector>

#include "spikehe/backend/backend.hpp"

namespace spikehe::layers {

/// Dense c x h x w tensor, channel-major.
struct Tensor {
    int c = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int c_, int h_, int w_) : c(c_), h(h_), w(w_), v(static_cast<std::size_t>(c_) * h_ * w_, 0.0) {}
    double& at(int ch, int i, int j) { return v[(static_cast<std::size_t>(ch) * h + i) * w + j]; }
    double at(int ch, int i, int j) const { return v[(static_cast<std::size_t>(ch) * h + i) * w + j]; }
    std::size_t size() const { return v.size(); }
};

/// Slot layout of a packed tensor. Channel ch lives in ciphertext ch % parts, block
/// ch / parts; element (ch, i, j) sits at block * cs + (i + pad) * rs + (j + pad) * g.
/// Padding and gap slots hold zeros.
struct Layout {
    int c = 0, h = 0, w = 0;
    long cs = 0, rs = 0, g = 1;
    int pad = 0;
    int parts = 1;

    int part_of(int ch) const { return ch % parts; }
    int block_of(int ch) const { return ch / parts; }
    int blocks(int part) const { return (c - part + parts - 1) / parts; }
    long offset(int i, int j) const { return (i + pad) * rs + (j + pad) * g; }
    long position(int ch, int i, int j) const { return block_of(ch) * cs + offset(i, j); }
    /// One past the highest slot any part uses.
    long span() const;
    bool operator==(const Layout&) const = default;
};

/// Smallest part count for which the channel blocks fit in `slots`.
Layout make_layout(int c, int h, int w, long g, int pad, std::size_t slots);
/// Leading-slot vector layout used for FC outputs.
Layout flat_layout(int n);

/// Per-part slot vectors holding `t` in layout `l` (zeros elsewhere).
std::vector<std::vector<double>> pack_values(const Layout& l, const Tensor& t, std::size_t slots);
Tensor unpack_values(const Layout& l, const std::vector<std::vector<double>>& parts);
/// 1 on valid slots, 0 on padding and gaps, per part.
std::vector<std::vector<double>> valid_mask(const Layout& l, std::size_t slots);

struct PackedTensor {
    Layout layout;
    std::vector<backend::CipherVector> parts;

    int level() const;
};

PackedTensor pack_encrypt(backend::Backend& b, const Layout& l, const Tensor& t, int level = -1);
Tensor decrypt_unpack(backend::Backend& b, const PackedTensor& x);

struct ConvSpec {
    int c_in = 1, c_out = 1, k = 1, stride = 1, padding = 0;
    /// K[o][c][a][b], row-major.
    std::vector<double> kernel;
    std::vector<double> bias;

    double weight(int o, int c, int a, int b) const { return kernel[((static_cast<std::size_t>(o) * c_in + c) * k + a) * k + b]; }
};

struct PoolSpec {
    int k = 2, stride = 2, padding = 0;
};

struct FcSpec {
    int n_in = 1, n_out = 1;
    /// W[o][i], row-major.
    std::vector<double> weight;
    std::vector<double> bias;
};

Tensor conv2d_plain(const Tensor& x, const ConvSpec& s);
Tensor avgpool_plain(const Tensor& x, const PoolSpec& s);
std::vector<double> fc_plain(const std::vector<double>& x, const FcSpec& s);

/// One compaction rotation: accumulated products at anchor slots move by `shift`.
struct Group {
    int out_part = 0;
    int src_part = 0;  // pool only
    long shift = 0;
    std::vector<std::pair<int, int>> members;  // (output channel, output row)
};

/// Static plan shared by execution and rotation harvesting.
struct WindowPlan {
    Layout in, out;
    int k = 1, stride = 1, padding = 0;
    bool depthwise = false;
    /// Input rotation offsets per input part (zero offset included).
    std::vector<std::vector<long>> offsets;
    std::vector<Group> groups;

    std::size_t input_rotations() const;
    std::size_t compaction_rotations() const;
    long anchor(int block, int y, int x) const;
};

WindowPlan plan_conv(const Layout& in, int c_out, int k, int stride, int padding, int out_pad, std::size_t slots);
WindowPlan plan_pool(const Layout& in, const PoolSpec& s, int out_pad, std::size_t slots);

struct FcPlan {
    Layout in, out;
    int n_out = 0;
    /// Tree sums land in this slot.
    long collector = 0;
    std::vector<long> tree;     // -1, -2, -4, ...
    std::vector<long> combine;  // collector - o
};

FcPlan plan_fc(const Layout& in, int n_out, std::size_t slots);

/// Rotation indices a plan executes, normalized to (-slots/2, slots/2], zero removed.
std::set<long> rotation_indices(const WindowPlan& p, std::size_t slots);
std::set<long> rotation_indices(const FcPlan& p, std::size_t slots);
long normalize_rotation(long k, std::size_t slots);

PackedTensor conv2d_enc(backend::Backend& b, const PackedTensor& x, const ConvSpec& s, const WindowPlan& plan);
PackedTensor avgpool_enc(backend::Backend& b, const PackedTensor& x, const WindowPlan& plan);
PackedTensor fc_enc(backend::Backend& b, const PackedTensor& x, const FcSpec& s, const FcPlan& plan);

/// Convenience wrappers that plan on the fly.
PackedTensor conv2d_enc(backend::Backend& b, const PackedTensor& x, const ConvSpec& s, int out_pad);
PackedTensor avgpool_enc(backend::Backend& b, const PackedTensor& x, const PoolSpec& s, int out_pad);
PackedTensor fc_enc(backend::Backend& b, const PackedTensor& x, const FcSpec& s);

/// Slot-wise sum of two tensors with identical layouts (residual joins).
PackedTensor add(backend::Backend& b, const PackedTensor& x, const PackedTensor& y);

}  // namespace spikehe::layers

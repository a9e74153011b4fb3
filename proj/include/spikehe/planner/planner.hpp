#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "spikehe/backend/backend.hpp"
#include "spikehe/layers/layers.hpp"
#include "spikehe/lif/lif.hpp"
#include "spikehe/model/model.hpp"

namespace spikehe::planner {

/// Packing and slot plans for one network layer.
struct LayerPlan {
    layers::Layout in, out;
    /// conv or pool
    std::optional<layers::WindowPlan> window;
    std::optional<layers::FcPlan> fc;
    /// residual block
    std::optional<layers::WindowPlan> conv1, conv2, shortcut;
};

struct NetworkPlan {
    std::size_t slots = 0;
    layers::Layout input;
    std::vector<LayerPlan> layers;

    const layers::Layout& output() const { return layers.empty() ? input : layers.back().out; }
};

/// Capacity errors name the offending layer.
NetworkPlan plan_network(const model::NetworkSpec& net, std::size_t slots);

/// "L<i>.<part>", e.g. L0.conv, L0.lif, L3.conv1, L3.lif2.
std::string stage_name(std::size_t layer, const char* part);

struct RotationPlan {
    /// Sorted, deduplicated, no zero.
    std::vector<long> indices;
    /// Indices each stage needs.
    std::map<std::string, std::vector<long>> per_stage;
};

RotationPlan harvest_rotations(const model::NetworkSpec& net, std::size_t slots);

struct RefreshPoint {
    std::string stage;
    int timestep = 0;
    /// "input", "carry" or "pre-spike"
    std::string site;
    /// "pre-spike", "pre-pool" or "interval"
    std::string reason;
};

struct RefreshSchedule {
    lif::Mode mode = lif::Mode::Approx;
    int timesteps = 0;
    int depth = 0;
    std::size_t slots = 0;
    std::vector<RefreshPoint> points;
    /// Audit log a run that follows this schedule produces.
    std::vector<backend::AuditEvent> events;

    bool contains(const std::string& stage, int t, const std::string& site) const;
    /// Ciphertext refreshes (one point may refresh several ciphertexts).
    std::size_t refreshes() const;
    std::size_t switches() const;
    void add(const RefreshPoint& p);

private:
    std::set<std::tuple<std::string, int, std::string>> keys_;
};

/// Level-only dry run of the inference driver. Each operand is refreshed when a
/// mandatory rule applies (approx mode: pre-spike at t > 1, pre-pool after a LIF
/// that refreshed in the same step) or when it would otherwise underflow.
/// Throws ParameterError when an operation needs more levels than `depth`.
RefreshSchedule schedule_refresh(const model::NetworkSpec& net, std::size_t slots, int depth, lif::Mode mode,
                                 int timesteps = 0);

struct CellStats {
    std::string stage;
    int timestep = 0;
    double ms = 0.0;
    /// Lowest level among the stage's output ciphertexts.
    int level_out = 0;
};

struct RunOptions {
    lif::Mode mode = lif::Mode::Approx;
    /// Schedule to follow; computed on the fly when null.
    const RefreshSchedule* schedule = nullptr;
};

struct InferenceResult {
    /// Last-layer output per timestep.
    std::vector<layers::PackedTensor> outputs;
    /// Sum over timesteps of `outputs`.
    layers::PackedTensor sum;
    std::vector<CellStats> cells;
    /// Ciphertexts alive at once plus keys and cached plaintexts, in bytes.
    std::size_t peak_bytes = 0;
    RefreshSchedule schedule;
};

/// Layer-wise evaluation: each layer runs over all timesteps before the next
/// starts, with one membrane state per LIF stage.
InferenceResult run_inference(backend::Backend& b, const model::NetworkSpec& net, const model::Weights& w,
                              const std::vector<layers::PackedTensor>& input, const RunOptions& opt);

/// Decrypted class scores (flattened network output summed over timesteps).
std::vector<double> decrypt_scores(backend::Backend& b, const InferenceResult& r);
int argmax(const std::vector<double>& v);

struct TraceEntry {
    std::string stage;
    int timestep = 0;
    std::vector<double> values;
};

struct PlainResult {
    std::vector<layers::Tensor> outputs;
    std::vector<double> scores;
    /// Every stage output per timestep (LIF stages record spikes, then membranes under "<stage>.v").
    std::vector<TraceEntry> trace;
};

/// Floating-point forward pass with the same stage structure.
PlainResult run_inference_plain(const model::NetworkSpec& net, const model::Weights& w,
                                const std::vector<layers::Tensor>& frames);

/// Frames for `net.timesteps` steps: a single frame is repeated, otherwise the counts must match.
std::vector<layers::Tensor> frames_for(const model::NetworkSpec& net, const model::Sample& s);

}  // namespace spikehe::planner

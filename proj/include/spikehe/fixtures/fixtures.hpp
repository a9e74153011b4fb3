#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spikehe/model/model.hpp"
#include "spikehe/planner/planner.hpp"

namespace spikehe::fixtures {

/// 1x8x8 -> conv 1->4 k3 + LIF -> avgpool 2 -> fc 36->64 + LIF -> fc 64->10, T=2.
model::NetworkSpec lenet_tiny();
/// 1x4x4 -> conv 1->2 k3 + LIF -> fc 8->2, T=2.
model::NetworkSpec micro();

/// Zero-mean Gaussian weights with std 1/sqrt(fan_in), zero bias.
model::Weights gaussian_weights(const model::NetworkSpec& net, std::uint64_t seed);

/// `count` samples of uniform [0, 1) frames, one frame per timestep, labels 0.
model::Dataset random_inputs(const model::NetworkSpec& net, int count, std::uint64_t seed);

/// `count` noisy samples of per-class prototype frames: sample i has label i % classes and
/// frame t = clamp(prototype + N(0, noise^2), 0, 1) with fresh noise per timestep.
model::Dataset class_inputs(const model::NetworkSpec& net, int count, int classes, std::uint64_t seed,
                            double noise = 0.2);

struct CalibrationOptions {
    /// Fraction of currents (all timesteps) left below the threshold.
    double quiet_fraction = 0.75;
    /// Scaling interval = margin * largest |pre-spike membrane| seen.
    double margin = 1.25;
};

/// Layer by layer, normalizes each output channel of a LIF-driving layer (gain and
/// bias) so that `quiet_fraction` of its currents stay below the threshold, then sets
/// the LIF scaling interval from the membranes the calibration inputs produce.
void calibrate(model::NetworkSpec& net, model::Weights& w, const model::Dataset& inputs,
               const CalibrationOptions& opt = {});

/// Refits the final FC layer (no LIF) by ridge regression of one-hot labels on the
/// timestep-summed features feeding it. `ridge` is relative to the mean feature energy.
void fit_readout(const model::NetworkSpec& net, model::Weights& w, const model::Dataset& train, double ridge = 1e-2);

/// Golden trace file: one line per entry, "<stage> <t> v0 v1 ..." with %.17g values.
void write_trace(const std::filesystem::path& p, const std::vector<planner::TraceEntry>& trace);
std::vector<planner::TraceEntry> read_trace(const std::filesystem::path& p);

struct Fixture {
    model::NetworkSpec net;
    model::Weights weights;
    model::Dataset inputs;
};

/// Builds a fixture in memory. Profiles: "lenet-tiny", "micro", "zero" (lenet-tiny, all-zero weights).
/// Gaussian weights are calibrated and the readout fitted on 200 extra samples drawn
/// from the same class prototypes; `inputs` holds `count` held-out samples with their classes.
Fixture make_fixture(std::uint64_t seed, const std::string& profile, int count = 32);

/// Writes net.json, weights/, inputs.spkf and golden/<i>.trace under `dir`; returns
/// a hex digest over the written bytes.
std::string gen_fixture(const std::filesystem::path& dir, std::uint64_t seed, const std::string& profile, int count = 32);

/// FNV-1a over relative paths and contents of every file under `dir`, sorted by path.
std::string digest_dir(const std::filesystem::path& dir);

}  // namespace spikehe::fixtures

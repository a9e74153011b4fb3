#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spikehe/layers/layers.hpp"

namespace spikehe::model {

enum class LayerType { Conv, AvgPool, Fc, Lif, Residual };

const char* layer_type_name(LayerType t);

struct Shape {
    int c = 0, h = 0, w = 0;
    int size() const { return c * h * w; }
    bool operator==(const Shape&) const = default;
};

struct LayerSpec {
    LayerType type = LayerType::Conv;
    /// FC: input / output neuron counts.
    int in_ch = 0, out_ch = 0;
    int kernel = 1, stride = 1, padding = 0;
    /// conv / fc followed by a LIF neuron.
    bool lif = false;
    /// Scaling interval of the LIF that follows (approx mode).
    double scale_value = 1.0;
    /// Residual blocks: intervals for the LIF after conv1 and after the join.
    std::array<double, 2> scale_values{1.0, 1.0};

    bool has_shortcut_conv() const { return type == LayerType::Residual && (in_ch != out_ch || stride != 1); }
};

struct LifParams {
    double tau = 0.25;
    double threshold = 0.5;
    int degree = 50;
};

struct NetworkSpec {
    std::string name;
    Shape input;
    int timesteps = 1;
    /// CKKS parameter profile the network is meant for.
    std::string profile = "test";
    LifParams lif;
    std::vector<LayerSpec> layers;
    /// shapes[i] is the input of layer i; shapes.back() is the network output.
    /// Filled by validate().
    std::vector<Shape> shapes;

    /// Checks shape composition and fills `shapes`. Errors name the layer index.
    void validate();
    Shape output_shape() const { return shapes.empty() ? input : shapes.back(); }
    /// Physical padding shared by every packed tensor (largest conv padding).
    int uniform_padding() const;
};

NetworkSpec parse_network(const std::string& json_text);
NetworkSpec load_network(const std::filesystem::path& path);
std::string network_to_json(const NetworkSpec& net);

struct ResidualWeights {
    layers::ConvSpec conv1, conv2;
    std::optional<layers::ConvSpec> shortcut;
};

/// Parameters of one layer; which member is set depends on the layer type.
struct LayerWeights {
    std::optional<layers::ConvSpec> conv;
    std::optional<layers::FcSpec> fc;
    std::optional<ResidualWeights> residual;
};

struct Weights {
    std::vector<LayerWeights> layers;
};

/// Specs with dimensions set and no values; enough for level-only execution.
Weights shape_only_weights(const NetworkSpec& net);
/// All-zero weights with the right shapes.
Weights zero_weights(const NetworkSpec& net);

/// Reads layer<i>_weight.csv / layer<i>_bias.csv (residual blocks use
/// layer<i>_conv1_weight.csv and so on). Missing bias files mean zero bias.
Weights load_weights_csv(const std::filesystem::path& dir, const NetworkSpec& net);
void save_weights_csv(const std::filesystem::path& dir, const NetworkSpec& net, const Weights& w);

struct Sample {
    /// One tensor per timestep.
    std::vector<layers::Tensor> frames;
    int label = 0;
};

struct Dataset {
    int timesteps = 0;
    Shape shape;
    std::vector<Sample> samples;
};

/// IDX image/label pair. Pixels are divided by 255 and each image is repeated
/// over `timesteps` frames.
Dataset read_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels, int timesteps);
void write_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                     const std::vector<std::vector<std::uint8_t>>& pixels, const std::vector<std::uint8_t>& label_bytes,
                     int rows, int cols);

/// SPKF v1: "SPKF v1 T c h w count\n", count*T*c*h*w little-endian f32, count u8 labels.
Dataset read_frames_bin(const std::filesystem::path& path);
void write_frames_bin(const std::filesystem::path& path, const Dataset& d);

/// Loads by extension: ".spkf" for frame files, otherwise an IDX pair given as
/// "<images>,<labels>".
Dataset load_dataset(const std::string& spec, int timesteps);

/// Encrypts each timestep of `s` in layout `l`.
std::vector<layers::PackedTensor> pack_encrypt(backend::Backend& b, const layers::Layout& l, const Sample& s);

}  // namespace spikehe::model

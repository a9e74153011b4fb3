#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <random>

#include "spikehe/backend/ckks_backend.hpp"
#include "spikehe/common/errors.hpp"
#include "spikehe/model/model.hpp"
#include "spikehe/planner/planner.hpp"

using namespace spikehe;
using namespace spikehe::model;
namespace fs = std::filesystem;

namespace {

std::string config_path(const char* name) { return std::string(SPIKEHE_SOURCE_DIR) + "/configs/" + name; }

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path = fs::temp_directory_path() / ("spikehe-" + tag + "-" + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_text(const fs::path& p, const std::string& s) {
    std::ofstream f(p);
    f << s;
}

std::string csv(int rows, int cols, double base = 0.0) {
    std::string s;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) s += (c ? "," : "") + std::to_string(base + r * cols + c);
        s += "\n";
    }
    return s;
}

NetworkSpec fc_net(int in, int out) {
    NetworkSpec n;
    n.input = {1, 1, in};
    LayerSpec l;
    l.type = LayerType::Fc;
    l.in_ch = in;
    l.out_ch = out;
    n.layers = {l};
    n.validate();
    return n;
}

const char* kMinimal = R"({"name": "x", "input": {"c": 1, "h": 8, "w": 8}, "timesteps": 1, "layers": [)";

}  // namespace

TEST(Network, ShippedLeNetMatchesLayerTable) {
    const auto net = load_network(config_path("lenet5-mnist.json"));
    ASSERT_EQ(net.layers.size(), 7u);
    const LayerType types[] = {LayerType::Conv, LayerType::AvgPool, LayerType::Conv, LayerType::AvgPool,
                               LayerType::Fc,   LayerType::Fc,      LayerType::Fc};
    for (int i = 0; i < 7; ++i) EXPECT_EQ(net.layers[i].type, types[i]) << i;
    EXPECT_EQ(net.layers[0].out_ch, 6);
    EXPECT_EQ(net.layers[0].kernel, 5);
    EXPECT_EQ(net.layers[2].out_ch, 16);
    EXPECT_EQ(net.layers[4].in_ch, 256);
    EXPECT_EQ(net.layers[4].out_ch, 120);
    EXPECT_EQ(net.layers[5].out_ch, 84);
    EXPECT_EQ(net.layers[6].out_ch, 10);
    EXPECT_EQ(net.shapes[1], (Shape{6, 24, 24}));
    EXPECT_EQ(net.shapes[4], (Shape{16, 4, 4}));
    EXPECT_EQ(net.output_shape(), (Shape{10, 1, 1}));

    const auto nm = load_network(config_path("lenet5-nmnist.json"));
    EXPECT_EQ(nm.input, (Shape{2, 36, 36}));
    EXPECT_EQ(nm.timesteps, 5);
    EXPECT_EQ(nm.layers[4].in_ch, 576);
}

TEST(Network, ShippedResNetComposes) {
    for (const char* cfg : {"resnet19-cifar10.json", "resnet19-cifar10dvs.json"}) {
        const auto net = load_network(config_path(cfg));
        EXPECT_EQ(net.output_shape(), (Shape{10, 1, 1})) << cfg;
        EXPECT_EQ(net.uniform_padding(), 1);
    }
    EXPECT_EQ(load_network(config_path("resnet19-cifar10dvs.json")).input, (Shape{2, 32, 32}));
}

TEST(Network, EmptyLayersIsIdentity) {
    const auto net = parse_network(std::string(kMinimal) + "]}");
    EXPECT_TRUE(net.layers.empty());
    EXPECT_EQ(net.output_shape(), (Shape{1, 8, 8}));
}

TEST(Network, ChannelMismatchNamesLayer) {
    const std::string j = std::string(kMinimal) +
                          R"({"type": "conv", "in_ch": 1, "out_ch": 4, "kernel": 3},
                             {"type": "conv", "in_ch": 3, "out_ch": 4, "kernel": 3}]})";
    try {
        parse_network(j);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("layer 1"), std::string::npos) << e.what();
    }
}

TEST(Network, MalformedJsonIsFormatError) {
    EXPECT_THROW(parse_network("{\"name\": "), FormatError);
    EXPECT_THROW(parse_network(std::string(kMinimal) + R"({"type": "dense"}]})"), ValidationError);
}

TEST(Network, JsonRoundTrip) {
    const auto net = load_network(config_path("resnet19-cifar10.json"));
    const auto back = parse_network(network_to_json(net));
    EXPECT_EQ(network_to_json(back), network_to_json(net));
    EXPECT_EQ(back.shapes, net.shapes);
}

TEST(WeightsCsv, IdentityFc) {
    TempDir d("w");
    write_text(d.path / "layer0_weight.csv", "1,0\n0,1\n");
    const auto w = load_weights_csv(d.path, fc_net(2, 2));
    EXPECT_EQ(w.layers[0].fc->weight, (std::vector<double>{1, 0, 0, 1}));
    EXPECT_EQ(w.layers[0].fc->bias, (std::vector<double>{0, 0}));
}

TEST(WeightsCsv, LeNetConv1Shape) {
    TempDir d("w");
    const auto net = load_network(config_path("lenet5-mnist.json"));
    save_weights_csv(d.path, net, zero_weights(net));
    write_text(d.path / "layer0_weight.csv", csv(6, 25));
    const auto w = load_weights_csv(d.path, net);
    const auto& k = *w.layers[0].conv;
    EXPECT_EQ(k.kernel.size(), 6u * 1 * 5 * 5);
    // row o, column a*5+b is K[o][0][a][b]
    EXPECT_EQ(k.weight(3, 0, 2, 4), 3 * 25 + 2 * 5 + 4);
}

TEST(WeightsCsv, TruncatedAndOffByOneRejected) {
    TempDir d("w");
    const auto net = load_network(config_path("lenet5-mnist.json"));
    save_weights_csv(d.path, net, zero_weights(net));
    const fs::path wf = d.path / "layer0_weight.csv", bf = d.path / "layer0_bias.csv";
    const std::string good_w = csv(6, 25), good_b = csv(6, 1);
    const std::vector<std::pair<fs::path, std::string>> bad = {
        {wf, csv(5, 25)},           {wf, csv(7, 25)}, {wf, csv(6, 24)}, {wf, csv(6, 26)},
        {wf, good_w.substr(0, 40)},  // truncated mid-row
        {wf, csv(5, 25) + std::string(24, '1')},
        {bf, csv(5, 1)},            {bf, csv(7, 1)},  {wf, "1,2,x\n"},
    };
    for (const auto& [file, text] : bad) {
        write_text(wf, good_w);
        write_text(bf, good_b);
        write_text(file, text);
        try {
            load_weights_csv(d.path, net);
            ADD_FAILURE() << "accepted " << file.filename() << ": " << text.substr(0, 30);
        } catch (const LoadError& e) {
            if (file == wf && text != "1,2,x\n") EXPECT_NE(std::string(e.what()).find("expected 6x25"), std::string::npos) << e.what();
        }
    }
    write_text(wf, good_w);
    write_text(bf, good_b);
    EXPECT_NO_THROW(load_weights_csv(d.path, net));
}

TEST(WeightsCsv, RoundTripExact) {
    TempDir d("w");
    const auto net = load_network(config_path("resnet19-cifar10.json"));
    auto w = zero_weights(net);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    for (auto& lw : w.layers) {
        if (lw.residual) {
            for (auto& x : lw.residual->conv1.kernel) x = g(rng);
            if (lw.residual->shortcut)
                for (auto& x : lw.residual->shortcut->bias) x = g(rng);
        }
        if (lw.fc)
            for (auto& x : lw.fc->weight) x = g(rng);
    }
    save_weights_csv(d.path, net, w);
    const auto back = load_weights_csv(d.path, net);
    for (std::size_t i = 0; i < w.layers.size(); ++i) {
        if (w.layers[i].residual) {
            EXPECT_EQ(back.layers[i].residual->conv1.kernel, w.layers[i].residual->conv1.kernel);
            EXPECT_EQ(back.layers[i].residual->shortcut.has_value(), w.layers[i].residual->shortcut.has_value());
            if (w.layers[i].residual->shortcut)
                EXPECT_EQ(back.layers[i].residual->shortcut->bias, w.layers[i].residual->shortcut->bias);
        }
        if (w.layers[i].fc) EXPECT_EQ(back.layers[i].fc->weight, w.layers[i].fc->weight);
    }
}

TEST(Idx, SingleZeroImage) {
    TempDir d("idx");
    write_mnist_idx(d.path / "i", d.path / "l", {std::vector<std::uint8_t>(4, 0)}, {0}, 2, 2);
    const auto ds = read_mnist_idx(d.path / "i", d.path / "l", 3);
    ASSERT_EQ(ds.samples.size(), 1u);
    ASSERT_EQ(ds.samples[0].frames.size(), 3u);
    for (const auto& f : ds.samples[0].frames) EXPECT_EQ(f.v, std::vector<double>(4, 0.0));
}

TEST(Idx, MnistDimsAndLabel) {
    TempDir d("idx");
    std::vector<std::uint8_t> px(28 * 28);
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<std::uint8_t>(i % 256);
    write_mnist_idx(d.path / "i", d.path / "l", {px, px}, {7, 3}, 28, 28);
    const auto ds = read_mnist_idx(d.path / "i", d.path / "l", 2);
    EXPECT_EQ(ds.shape, (Shape{1, 28, 28}));
    EXPECT_EQ(ds.samples[0].label, 7);
    EXPECT_EQ(ds.samples[1].label, 3);
    const auto& f = ds.samples[0].frames[1];
    EXPECT_EQ(f.c, 1);
    EXPECT_EQ(f.h, 28);
    EXPECT_DOUBLE_EQ(f.at(0, 0, 255), 255 / 255.0);
    EXPECT_DOUBLE_EQ(f.at(0, 1, 0), 28 / 255.0);
    const auto via = load_dataset((d.path / "i").string() + "," + (d.path / "l").string(), 2);
    EXPECT_EQ(via.samples.size(), 2u);
}

TEST(Idx, BadMagicAndSizeRejected) {
    TempDir d("idx");
    write_mnist_idx(d.path / "i", d.path / "l", {std::vector<std::uint8_t>(4, 9)}, {1}, 2, 2);
    // labels file passed as images: magic 0x801
    EXPECT_THROW(read_mnist_idx(d.path / "l", d.path / "l", 1), FormatError);
    EXPECT_THROW(read_mnist_idx(d.path / "i", d.path / "i", 1), FormatError);
    {
        std::fstream f(d.path / "i", std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(3);
        f.put(0x02);
    }
    EXPECT_THROW(read_mnist_idx(d.path / "i", d.path / "l", 1), FormatError);
    write_mnist_idx(d.path / "i", d.path / "l", {std::vector<std::uint8_t>(4, 9)}, {1}, 2, 2);
    fs::resize_file(d.path / "i", fs::file_size(d.path / "i") - 1);
    EXPECT_THROW(read_mnist_idx(d.path / "i", d.path / "l", 1), FormatError);
    EXPECT_THROW(read_mnist_idx(d.path / "missing", d.path / "l", 1), LoadError);
}

TEST(Spkf, NmnistHeaderWithZeros) {
    TempDir d("spkf");
    {
        std::ofstream f(d.path / "z.spkf", std::ios::binary);
        f << "SPKF v1 5 2 36 36 1\n";
        const std::string zeros(5 * 2 * 36 * 36 * 4 + 1, '\0');
        f.write(zeros.data(), static_cast<std::streamsize>(zeros.size()));
    }
    const auto ds = read_frames_bin(d.path / "z.spkf");
    EXPECT_EQ(ds.timesteps, 5);
    EXPECT_EQ(ds.shape, (Shape{2, 36, 36}));
    ASSERT_EQ(ds.samples.size(), 1u);
    EXPECT_EQ(ds.samples[0].frames.size(), 5u);
    for (const auto& fr : ds.samples[0].frames) EXPECT_EQ(fr.v, std::vector<double>(2 * 36 * 36, 0.0));
    EXPECT_EQ(ds.samples[0].label, 0);
}

TEST(Spkf, RoundTripBitExact) {
    TempDir d("spkf");
    Dataset ds;
    ds.timesteps = 5;
    ds.shape = {2, 32, 32};
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<float> u(-3.0f, 3.0f);
    for (int s = 0; s < 3; ++s) {
        Sample smp;
        smp.label = 250 - s;
        for (int t = 0; t < 5; ++t) {
            layers::Tensor x(2, 32, 32);
            for (auto& v : x.v) v = u(rng);
            smp.frames.push_back(x);
        }
        ds.samples.push_back(smp);
    }
    write_frames_bin(d.path / "r.spkf", ds);
    const auto back = load_dataset((d.path / "r.spkf").string(), 1);
    ASSERT_EQ(back.samples.size(), 3u);
    EXPECT_EQ(back.shape, (Shape{2, 32, 32}));
    for (int s = 0; s < 3; ++s) {
        EXPECT_EQ(back.samples[s].label, 250 - s);
        for (int t = 0; t < 5; ++t) {
            const auto& a = ds.samples[s].frames[t].v;
            const auto& b = back.samples[s].frames[t].v;
            ASSERT_EQ(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)), 0);
        }
    }
}

TEST(Spkf, SizeMismatchAndBadHeader) {
    TempDir d("spkf");
    const auto put = [&](const std::string& header, std::size_t body) {
        std::ofstream f(d.path / "b.spkf", std::ios::binary);
        f << header;
        const std::string z(body, '\0');
        f.write(z.data(), static_cast<std::streamsize>(z.size()));
    };
    put("SPKF v1 5 2 32 32 1\n", 5 * 2 * 32 * 32 * 4 + 1);
    EXPECT_NO_THROW(read_frames_bin(d.path / "b.spkf"));
    put("SPKF v1 5 2 32 32 1\n", 5 * 2 * 32 * 32 * 4);
    EXPECT_THROW(read_frames_bin(d.path / "b.spkf"), FormatError);
    put("SPKF v1 5 2 32 32 1\n", 5 * 2 * 32 * 32 * 4 + 2);
    EXPECT_THROW(read_frames_bin(d.path / "b.spkf"), FormatError);
    put("SPKF v2 1 1 1 1 1\n", 5);
    EXPECT_THROW(read_frames_bin(d.path / "b.spkf"), FormatError);
    put("SPKF v1 1 1 1 1\n", 4);
    EXPECT_THROW(read_frames_bin(d.path / "b.spkf"), FormatError);
    EXPECT_THROW(load_dataset("plain.bin", 1), ValidationError);
}

TEST(Pack, MnistOccupiesLeadingSlots) {
    const auto net = load_network(config_path("lenet5-mnist.json"));
    const auto np = planner::plan_network(net, 8192);
    layers::Tensor x(1, 28, 28);
    for (auto& v : x.v) v = 1.0;
    const auto slots = layers::pack_values(np.input, x, 8192);
    ASSERT_EQ(slots.size(), 1u);
    for (std::size_t i = 0; i < 8192; ++i) ASSERT_EQ(slots[0][i], i < 784 ? 1.0 : 0.0) << i;
}

TEST(Pack, CkksRoundTrip) {
    // an N-MNIST frame (2592 values) needs the lenet5 profile's 8192 slots
    auto ctx = std::make_shared<const ckks::CkksContext>(ckks::CkksParams::profile("lenet5"));
    auto b = backend::make_ckks_backend(ctx, backend::generate_keys(ctx, {}, 4), {});
    NetworkSpec net;
    net.input = {2, 36, 36};
    net.timesteps = 2;
    net.validate();
    const auto np = planner::plan_network(net, b->slots());
    Sample s;
    s.frames.emplace_back(2, 36, 36);
    layers::Tensor r(2, 36, 36);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : r.v) v = u(rng);
    s.frames.push_back(r);
    const auto cts = pack_encrypt(*b, np.input, s);
    ASSERT_EQ(cts.size(), 2u);
    for (double v : layers::decrypt_unpack(*b, cts[0]).v) ASSERT_NEAR(v, 0.0, 1e-4);
    const auto back = layers::decrypt_unpack(*b, cts[1]).v;
    for (std::size_t i = 0; i < back.size(); ++i) ASSERT_NEAR(back[i], r.v[i], 1e-4);
    Sample bs;
    bs.frames.emplace_back(3, 64, 64);
    EXPECT_THROW(pack_encrypt(*b, layers::make_layout(3, 64, 64, 1, 0, 16384), bs), CapacityError);
}

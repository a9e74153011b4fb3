#include "spikehe/fixtures/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "spikehe/common/errors.hpp"

namespace spikehe::fixtures {

namespace fs = std::filesystem;
using model::LayerSpec;
using model::LayerType;
using model::NetworkSpec;

namespace {

LayerSpec layer(LayerType t, int in, int out, int k = 1, int s = 1, int p = 0, bool lif = false) {
    LayerSpec l;
    l.type = t;
    l.in_ch = in;
    l.out_ch = out;
    l.kernel = k;
    l.stride = s;
    l.padding = p;
    l.lif = lif;
    return l;
}

void fill(std::vector<double>& v, std::size_t n, double sd, std::mt19937_64& rng) {
    std::normal_distribution<double> d(0.0, sd);
    v.resize(n);
    for (auto& x : v) x = d(rng);
}

void fill_conv(layers::ConvSpec& s, std::mt19937_64& rng) {
    fill(s.kernel, static_cast<std::size_t>(s.c_out) * s.c_in * s.k * s.k, 1.0 / std::sqrt(double(s.c_in) * s.k * s.k), rng);
    s.bias.assign(s.c_out, 0.0);
}

/// Copy of `net` holding layers [0, n).
NetworkSpec prefix(const NetworkSpec& net, std::size_t n) {
    NetworkSpec p = net;
    p.layers.resize(n);
    p.validate();
    return p;
}

model::Weights prefix(const model::Weights& w, std::size_t n) {
    model::Weights p = w;
    p.layers.resize(n);
    return p;
}

/// Values of every trace entry named `stage`, over all inputs and timesteps.
std::vector<double> collect(const NetworkSpec& net, const model::Weights& w, const model::Dataset& d,
                            const std::string& stage) {
    std::vector<double> out;
    for (const auto& s : d.samples) {
        const auto pr = planner::run_inference_plain(net, w, planner::frames_for(net, s));
        for (const auto& e : pr.trace)
            if (e.stage == stage) out.insert(out.end(), e.values.begin(), e.values.end());
    }
    return out;
}

/// Largest |tau * v_prev + I| seen by `lif`, whose input current is recorded as `current`.
double max_membrane(const NetworkSpec& net, const model::Weights& w, const model::Dataset& d, const std::string& current,
                    const std::string& lif) {
    double m = 0.0;
    for (const auto& s : d.samples) {
        const auto pr = planner::run_inference_plain(net, w, planner::frames_for(net, s));
        std::map<int, const std::vector<double>*> in, v;
        for (const auto& e : pr.trace) {
            if (e.stage == current) in[e.timestep] = &e.values;
            if (e.stage == lif + ".v") v[e.timestep] = &e.values;
        }
        for (const auto& [t, x] : in)
            for (std::size_t k = 0; k < x->size(); ++k) {
                const double vp = t > 1 ? net.lif.tau * (*v.at(t - 1))[k] : 0.0;
                m = std::max(m, std::fabs((*x)[k] + vp));
            }
    }
    return m;
}

constexpr int kTrain = 200;

double quantile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    const std::size_t k = std::min(v.size() - 1, static_cast<std::size_t>(q * (v.size() - 1)));
    std::nth_element(v.begin(), v.begin() + static_cast<long>(k), v.end());
    return v[k];
}

double interval(double m, double margin, double threshold) { return std::max(margin * m, 1.1 * std::fabs(threshold)); }

std::uint64_t fnv(std::uint64_t h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace

NetworkSpec lenet_tiny() {
    NetworkSpec n;
    n.name = "lenet-tiny";
    n.input = {1, 8, 8};
    n.timesteps = 2;
    n.profile = "test";
    n.layers = {layer(LayerType::Conv, 1, 4, 3, 1, 0, true), layer(LayerType::AvgPool, 4, 4, 2, 2, 0),
                layer(LayerType::Fc, 36, 64, 1, 1, 0, true), layer(LayerType::Fc, 64, 10)};
    n.validate();
    return n;
}

NetworkSpec micro() {
    NetworkSpec n;
    n.name = "micro";
    n.input = {1, 4, 4};
    n.timesteps = 2;
    n.profile = "test";
    n.layers = {layer(LayerType::Conv, 1, 2, 3, 1, 0, true), layer(LayerType::Fc, 8, 2)};
    n.validate();
    return n;
}

model::Weights gaussian_weights(const NetworkSpec& net, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    model::Weights w = model::shape_only_weights(net);
    for (auto& lw : w.layers) {
        if (lw.conv) fill_conv(*lw.conv, rng);
        if (lw.fc) {
            fill(lw.fc->weight, static_cast<std::size_t>(lw.fc->n_in) * lw.fc->n_out, 1.0 / std::sqrt(lw.fc->n_in), rng);
            lw.fc->bias.assign(lw.fc->n_out, 0.0);
        }
        if (lw.residual) {
            fill_conv(lw.residual->conv1, rng);
            fill_conv(lw.residual->conv2, rng);
            if (lw.residual->shortcut) fill_conv(*lw.residual->shortcut, rng);
        }
    }
    return w;
}

model::Dataset random_inputs(const NetworkSpec& net, int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    model::Dataset d;
    d.timesteps = net.timesteps;
    d.shape = net.input;
    for (int i = 0; i < count; ++i) {
        model::Sample s;
        for (int t = 0; t < net.timesteps; ++t) {
            layers::Tensor x(net.input.c, net.input.h, net.input.w);
            // float draws so the SPKF copy is exact
            for (auto& v : x.v) v = u(rng);
            s.frames.push_back(std::move(x));
        }
        d.samples.push_back(std::move(s));
    }
    return d;
}

model::Dataset class_inputs(const NetworkSpec& net, int count, int classes, std::uint64_t seed, double noise) {
    if (classes < 1) throw ContractError("class_inputs needs at least one class");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    std::normal_distribution<double> g(0.0, noise);
    std::vector<std::vector<double>> proto(static_cast<std::size_t>(classes));
    for (auto& p : proto) {
        p.resize(static_cast<std::size_t>(net.input.size()));
        for (auto& x : p) x = u(rng);
    }
    model::Dataset d;
    d.timesteps = net.timesteps;
    d.shape = net.input;
    for (int i = 0; i < count; ++i) {
        model::Sample s;
        s.label = i % classes;
        for (int t = 0; t < net.timesteps; ++t) {
            layers::Tensor x(net.input.c, net.input.h, net.input.w);
            for (std::size_t k = 0; k < x.v.size(); ++k)
                x.v[k] = static_cast<float>(std::clamp(proto[static_cast<std::size_t>(s.label)][k] + g(rng), 0.0, 1.0));
            s.frames.push_back(std::move(x));
        }
        d.samples.push_back(std::move(s));
    }
    return d;
}

void fit_readout(const NetworkSpec& net, model::Weights& w, const model::Dataset& train, double ridge) {
    if (net.layers.empty() || net.layers.back().type != LayerType::Fc || net.layers.back().lif)
        throw ContractError("fit_readout needs a final FC layer without LIF");
    if (train.samples.empty()) throw ContractError("fit_readout needs training samples");
    const std::size_t last = net.layers.size() - 1;
    const auto pn = prefix(net, last);
    const auto pw = prefix(w, last);
    auto& fc = *w.layers[last].fc;
    const int n = static_cast<int>(train.samples.size());
    // features plus a constant column for the bias
    Eigen::MatrixXd X(n, fc.n_in + 1);
    Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(n, fc.n_out);
    for (int i = 0; i < n; ++i) {
        const auto& s = train.samples[static_cast<std::size_t>(i)];
        X.row(i).setZero();
        for (const auto& o : planner::run_inference_plain(pn, pw, planner::frames_for(net, s)).outputs)
            for (int k = 0; k < fc.n_in; ++k) X(i, k) += o.v[static_cast<std::size_t>(k)];
        X(i, fc.n_in) = net.timesteps;
        if (s.label < 0 || s.label >= fc.n_out) throw ContractError("label out of range for readout");
        Y(i, s.label) = 1.0;
    }
    Eigen::MatrixXd A = X.transpose() * X;
    const double lambda = ridge * A.trace() / static_cast<double>(A.rows());
    A.diagonal().array() += lambda;
    const Eigen::MatrixXd B = A.ldlt().solve(X.transpose() * Y);
    for (int o = 0; o < fc.n_out; ++o) {
        for (int k = 0; k < fc.n_in; ++k) fc.weight[static_cast<std::size_t>(o) * fc.n_in + k] = B(k, o);
        fc.bias[static_cast<std::size_t>(o)] = B(fc.n_in, o);
    }
}

void calibrate(NetworkSpec& net, model::Weights& w, const model::Dataset& inputs, const CalibrationOptions& opt) {
    if (inputs.samples.empty()) throw ContractError("calibration needs at least one input");
    const double th = net.lif.threshold;
    // Per output channel: rescale to spread |th| and shift so the quiet_fraction
    // quantile sits on the threshold (a folded normalization). `apply(c, a, shift)`
    // maps the channel's current x to a * x + shift.
    auto fit_channels = [&](std::size_t i, const std::string& current, int channels, auto&& apply) {
        const auto vals = collect(prefix(net, i + 1), prefix(w, i + 1), inputs, current);
        const std::size_t per_entry = vals.size() / (inputs.samples.size() * static_cast<std::size_t>(net.timesteps));
        const std::size_t span = per_entry / static_cast<std::size_t>(channels);
        for (int c = 0; c < channels; ++c) {
            std::vector<double> x;
            for (std::size_t base = 0; base + per_entry <= vals.size(); base += per_entry)
                x.insert(x.end(), vals.begin() + static_cast<long>(base + c * span),
                         vals.begin() + static_cast<long>(base + (c + 1) * span));
            double mean = 0.0, var = 0.0;
            for (double v : x) mean += v;
            mean /= static_cast<double>(x.size());
            for (double v : x) var += (v - mean) * (v - mean);
            const double sd = std::sqrt(var / static_cast<double>(x.size()));
            if (sd < 1e-12) continue;
            const double a = std::fabs(th) / sd;
            apply(c, a, th - a * quantile(x, opt.quiet_fraction));
        }
    };
    auto fit_conv = [&](std::size_t i, const std::string& current, layers::ConvSpec& cs) {
        fit_channels(i, current, cs.c_out, [&](int c, double a, double shift) {
            const std::size_t n = static_cast<std::size_t>(cs.c_in) * cs.k * cs.k;
            for (std::size_t k = 0; k < n; ++k) cs.kernel[static_cast<std::size_t>(c) * n + k] *= a;
            cs.bias[static_cast<std::size_t>(c)] = a * cs.bias[static_cast<std::size_t>(c)] + shift;
        });
    };
    auto lif_interval = [&](std::size_t i, const std::string& current, const char* lif) {
        return interval(max_membrane(prefix(net, i + 1), prefix(w, i + 1), inputs, current, planner::stage_name(i, lif)),
                        opt.margin, th);
    };
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        auto& l = net.layers[i];
        auto& lw = w.layers[i];
        if (l.type == LayerType::Conv && l.lif) {
            const auto cur = planner::stage_name(i, "conv");
            fit_conv(i, cur, *lw.conv);
            l.scale_value = lif_interval(i, cur, "lif");
        } else if (l.type == LayerType::Fc && l.lif) {
            const auto cur = planner::stage_name(i, "fc");
            auto& f = *lw.fc;
            fit_channels(i, cur, f.n_out, [&](int o, double a, double shift) {
                for (int k = 0; k < f.n_in; ++k) f.weight[static_cast<std::size_t>(o) * f.n_in + k] *= a;
                f.bias[static_cast<std::size_t>(o)] = a * f.bias[static_cast<std::size_t>(o)] + shift;
            });
            l.scale_value = lif_interval(i, cur, "lif");
        } else if (l.type == LayerType::Residual) {
            auto& rw = *lw.residual;
            const auto c1 = planner::stage_name(i, "conv1"), j = planner::stage_name(i, "join");
            fit_conv(i, c1, rw.conv1);
            l.scale_values[0] = lif_interval(i, c1, "lif1");
            // the join also carries the shortcut; only conv2 (and a shortcut conv) are rescaled
            fit_channels(i, j, rw.conv2.c_out, [&](int c, double a, double shift) {
                auto sc = [&](layers::ConvSpec& cs, double add) {
                    const std::size_t n = static_cast<std::size_t>(cs.c_in) * cs.k * cs.k;
                    for (std::size_t k = 0; k < n; ++k) cs.kernel[static_cast<std::size_t>(c) * n + k] *= a;
                    cs.bias[static_cast<std::size_t>(c)] = a * cs.bias[static_cast<std::size_t>(c)] + add;
                };
                sc(rw.conv2, shift);
                if (rw.shortcut) sc(*rw.shortcut, 0.0);
            });
            l.scale_values[1] = lif_interval(i, j, "lif2");
        } else if (l.type == LayerType::Lif) {
            // bound |V| by max|I| / (1 - tau) over what the layers before it emit
            const auto pn = prefix(net, i);
            double m = 0.0;
            for (const auto& smp : inputs.samples)
                for (const auto& x : planner::run_inference_plain(pn, prefix(w, i), planner::frames_for(pn, smp)).outputs)
                    for (double v : x.v) m = std::max(m, std::fabs(v));
            l.scale_value = interval(m / (1.0 - net.lif.tau), opt.margin, th);
        }
    }
    net.validate();
}

void write_trace(const fs::path& p, const std::vector<planner::TraceEntry>& trace) {
    std::ofstream f(p);
    if (!f) throw LoadError("cannot write " + p.string());
    char buf[32];
    for (const auto& e : trace) {
        f << e.stage << ' ' << e.timestep;
        for (double v : e.values) {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            f << ' ' << buf;
        }
        f << '\n';
    }
}

std::vector<planner::TraceEntry> read_trace(const fs::path& p) {
    std::ifstream f(p);
    if (!f) throw LoadError("cannot open " + p.string());
    std::vector<planner::TraceEntry> out;
    std::string line;
    while (std::getline(f, line)) {
        std::istringstream ss(line);
        planner::TraceEntry e;
        if (!(ss >> e.stage >> e.timestep)) throw FormatError(p.string() + ": bad trace line");
        std::string tok;
        while (ss >> tok) e.values.push_back(std::strtod(tok.c_str(), nullptr));
        out.push_back(std::move(e));
    }
    return out;
}

Fixture make_fixture(std::uint64_t seed, const std::string& profile, int count) {
    Fixture fx;
    if (profile == "lenet-tiny" || profile == "zero") {
        fx.net = lenet_tiny();
    } else if (profile == "micro") {
        fx.net = micro();
    } else {
        throw ValidationError("unknown fixture profile '" + profile + "' (lenet-tiny, micro, zero)");
    }
    if (count < 0) throw ValidationError("fixture sample count must be non-negative");
    const int classes = fx.net.output_shape().size();
    // one draw so training and evaluation share prototypes; the first kTrain samples only calibrate
    auto all = class_inputs(fx.net, kTrain + count, classes, seed ^ 0x9e3779b97f4a7c15ull);
    model::Dataset train = all;
    train.samples.resize(kTrain);
    fx.inputs = all;
    fx.inputs.samples.erase(fx.inputs.samples.begin(), fx.inputs.samples.begin() + kTrain);
    if (profile == "zero") {
        fx.weights = model::zero_weights(fx.net);
        for (auto& l : fx.net.layers)
            if (l.lif) l.scale_value = 1.0;
        return fx;
    }
    fx.weights = gaussian_weights(fx.net, seed);
    calibrate(fx.net, fx.weights, train);
    fit_readout(fx.net, fx.weights, train);
    return fx;
}

std::string gen_fixture(const fs::path& dir, std::uint64_t seed, const std::string& profile, int count) {
    const Fixture fx = make_fixture(seed, profile, count);
    fs::create_directories(dir / "golden");
    {
        std::ofstream f(dir / "net.json");
        f << model::network_to_json(fx.net);
    }
    model::save_weights_csv(dir / "weights", fx.net, fx.weights);
    model::write_frames_bin(dir / "inputs.spkf", fx.inputs);
    for (std::size_t i = 0; i < fx.inputs.samples.size(); ++i) {
        const auto pr = planner::run_inference_plain(fx.net, fx.weights, planner::frames_for(fx.net, fx.inputs.samples[i]));
        write_trace(dir / "golden" / ("sample" + std::to_string(i) + ".trace"), pr.trace);
    }
    return digest_dir(dir);
}

std::string digest_dir(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files.push_back(fs::relative(e.path(), dir));
    std::sort(files.begin(), files.end());
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& rel : files) {
        const std::string name = rel.generic_string();
        h = fnv(h, name.data(), name.size() + 1);
        std::ifstream f(dir / rel, std::ios::binary);
        const std::string body((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        h = fnv(h, body.data(), body.size());
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace spikehe::fixtures

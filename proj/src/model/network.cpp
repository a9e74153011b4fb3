#include <fstream>
#include <sstream>

#include "json.hpp"
#include "spikehe/common/errors.hpp"
#include "spikehe/model/model.hpp"

namespace spikehe::model {

using nlohmann::json;

const char* layer_type_name(LayerType t) {
    switch (t) {
        case LayerType::Conv: return "conv";
        case LayerType::AvgPool: return "avgpool";
        case LayerType::Fc: return "fc";
        case LayerType::Lif: return "lif";
        case LayerType::Residual: return "residual";
    }
    return "?";
}

namespace {

LayerType parse_type(const std::string& s, std::size_t i) {
    if (s == "conv") return LayerType::Conv;
    if (s == "avgpool") return LayerType::AvgPool;
    if (s == "fc") return LayerType::Fc;
    if (s == "lif") return LayerType::Lif;
    if (s == "residual") return LayerType::Residual;
    throw ValidationError("layer " + std::to_string(i) + ": unknown type '" + s + "'");
}

[[noreturn]] void bad(std::size_t i, const LayerSpec& l, const std::string& what) {
    throw ValidationError("layer " + std::to_string(i) + " (" + layer_type_name(l.type) + "): " + what);
}

int window_out(int n, int k, int s, int p) { return (n + 2 * p - k) / s + 1; }

void check_window(std::size_t i, const LayerSpec& l, const Shape& in) {
    if (l.kernel < 1 || l.stride < 1 || l.padding < 0) bad(i, l, "kernel and stride must be >= 1, padding >= 0");
    if (in.h + 2 * l.padding < l.kernel || in.w + 2 * l.padding < l.kernel) {
        bad(i, l, "kernel " + std::to_string(l.kernel) + " larger than padded input " + std::to_string(in.h) + "x" +
                      std::to_string(in.w));
    }
}

void check_scale(std::size_t i, const LayerSpec& l, double s) {
    if (!(s > 0.0)) bad(i, l, "scale_value must be positive");
}

}  // namespace

void NetworkSpec::validate() {
    if (input.c < 1 || input.h < 1 || input.w < 1) throw ValidationError("input shape must be positive");
    if (timesteps < 1) throw ValidationError("timesteps must be >= 1");
    if (!(lif.tau > 0.0 && lif.tau < 1.0)) throw ValidationError("lif.tau must lie in (0, 1)");
    if (lif.degree < 3) throw ValidationError("lif.degree must be >= 3");
    shapes.assign(1, input);
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& l = layers[i];
        const Shape in = shapes.back();
        Shape out = in;
        switch (l.type) {
            case LayerType::Conv:
            case LayerType::Residual:
                if (l.in_ch != in.c) {
                    bad(i, l, "in_ch " + std::to_string(l.in_ch) + " does not match the " + std::to_string(in.c) +
                                  " incoming channels");
                }
                if (l.out_ch < 1) bad(i, l, "out_ch must be >= 1");
                check_window(i, l, in);
                if (l.type == LayerType::Residual && l.kernel != 2 * l.padding + 1) {
                    bad(i, l, "residual blocks need 'same' padding (kernel = 2*padding + 1)");
                }
                out = {l.out_ch, window_out(in.h, l.kernel, l.stride, l.padding),
                       window_out(in.w, l.kernel, l.stride, l.padding)};
                break;
            case LayerType::AvgPool:
                if ((l.in_ch && l.in_ch != in.c) || (l.out_ch && l.out_ch != in.c)) {
                    bad(i, l, "pooling keeps the channel count (" + std::to_string(in.c) + ")");
                }
                check_window(i, l, in);
                out = {in.c, window_out(in.h, l.kernel, l.stride, l.padding),
                       window_out(in.w, l.kernel, l.stride, l.padding)};
                break;
            case LayerType::Fc:
                if (l.in_ch != in.size()) {
                    bad(i, l, "in_ch " + std::to_string(l.in_ch) + " does not match the " + std::to_string(in.size()) +
                                  " incoming values (" + std::to_string(in.c) + "x" + std::to_string(in.h) + "x" +
                                  std::to_string(in.w) + ")");
                }
                if (l.out_ch < 1) bad(i, l, "out_ch must be >= 1");
                out = {l.out_ch, 1, 1};
                break;
            case LayerType::Lif:
                if ((l.in_ch && l.in_ch != in.c) || (l.out_ch && l.out_ch != in.c)) {
                    bad(i, l, "LIF keeps the channel count (" + std::to_string(in.c) + ")");
                }
                break;
        }
        if (l.type == LayerType::Residual) {
            check_scale(i, l, l.scale_values[0]);
            check_scale(i, l, l.scale_values[1]);
        } else if (l.lif || l.type == LayerType::Lif) {
            check_scale(i, l, l.scale_value);
        }
        if (l.lif && l.type != LayerType::Conv && l.type != LayerType::Fc) bad(i, l, "only conv and fc take \"lif\": true");
        shapes.push_back(out);
    }
    const int pad = uniform_padding();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].type == LayerType::AvgPool && layers[i].padding > pad) {
            bad(i, layers[i], "pool padding exceeds the network's packing padding " + std::to_string(pad));
        }
    }
}

int NetworkSpec::uniform_padding() const {
    int p = 0;
    for (const auto& l : layers)
        if (l.type == LayerType::Conv || l.type == LayerType::Residual) p = std::max(p, l.padding);
    return p;
}

NetworkSpec parse_network(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("network config is not valid JSON: ") + e.what());
    }
    NetworkSpec n;
    try {
        n.name = j.value("name", "");
        const auto& in = j.at("input");
        n.input = {in.at("c").get<int>(), in.at("h").get<int>(), in.at("w").get<int>()};
        n.timesteps = j.value("timesteps", 1);
        n.profile = j.value("profile", "test");
        if (j.contains("lif")) {
            const auto& l = j["lif"];
            n.lif.tau = l.value("tau", n.lif.tau);
            n.lif.threshold = l.value("threshold", n.lif.threshold);
            n.lif.degree = l.value("degree", n.lif.degree);
        }
        const json layers = j.value("layers", json::array());
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const auto& x = layers[i];
            LayerSpec l;
            l.type = parse_type(x.at("type").get<std::string>(), i);
            l.in_ch = x.value("in_ch", 0);
            l.out_ch = x.value("out_ch", 0);
            l.kernel = x.value("kernel", 1);
            l.stride = x.value("stride", 1);
            l.padding = x.value("padding", 0);
            l.lif = x.value("lif", false);
            l.scale_value = x.value("scale_value", 1.0);
            if (x.contains("scale_values")) {
                const auto sv = x["scale_values"].get<std::vector<double>>();
                if (sv.size() != 2) throw ValidationError("layer " + std::to_string(i) + ": scale_values needs 2 entries");
                l.scale_values = {sv[0], sv[1]};
            }
            n.layers.push_back(l);
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("network config: ") + e.what());
    }
    n.validate();
    return n;
}

NetworkSpec load_network(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw LoadError("cannot open network config " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_network(ss.str());
}

std::string network_to_json(const NetworkSpec& n) {
    json j;
    j["name"] = n.name;
    j["input"] = {{"c", n.input.c}, {"h", n.input.h}, {"w", n.input.w}};
    j["timesteps"] = n.timesteps;
    j["profile"] = n.profile;
    j["lif"] = {{"tau", n.lif.tau}, {"threshold", n.lif.threshold}, {"degree", n.lif.degree}};
    j["layers"] = json::array();
    for (const auto& l : n.layers) {
        json x{{"type", layer_type_name(l.type)}, {"in_ch", l.in_ch}, {"out_ch", l.out_ch}};
        if (l.type != LayerType::Fc && l.type != LayerType::Lif) {
            x["kernel"] = l.kernel;
            x["stride"] = l.stride;
            x["padding"] = l.padding;
        }
        if (l.type == LayerType::Residual) {
            x["scale_values"] = {l.scale_values[0], l.scale_values[1]};
        } else if (l.lif || l.type == LayerType::Lif) {
            if (l.lif) x["lif"] = true;
            x["scale_value"] = l.scale_value;
        }
        j["layers"].push_back(x);
    }
    return j.dump(2) + "\n";
}

}  // namespace spikehe::model

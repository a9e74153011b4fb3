#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "spikehe/common/errors.hpp"
#include "spikehe/model/model.hpp"

namespace spikehe::model {

namespace fs = std::filesystem;
using layers::ConvSpec;
using layers::FcSpec;

namespace {

ConvSpec conv_shape(int c_in, int c_out, int k, int stride, int padding) {
    ConvSpec s;
    s.c_in = c_in;
    s.c_out = c_out;
    s.k = k;
    s.stride = stride;
    s.padding = padding;
    return s;
}

using Rows = std::vector<std::vector<double>>;

Rows read_csv(const fs::path& p) {
    std::ifstream f(p);
    if (!f) throw LoadError("cannot open " + p.string());
    Rows rows;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            const char* s = cell.c_str();
            char* end = nullptr;
            errno = 0;
            const double v = std::strtod(s, &end);
            while (end && (*end == ' ' || *end == '\t')) ++end;
            if (end == s || *end != '\0' || errno == ERANGE) {
                throw LoadError(p.string() + ":" + std::to_string(lineno) + ": not a number: '" + cell + "'");
            }
            row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<double> read_matrix(const fs::path& p, std::size_t rows, std::size_t cols) {
    const Rows r = read_csv(p);
    auto dims = [](std::size_t a, std::size_t b) { return std::to_string(a) + "x" + std::to_string(b); };
    if (r.size() != rows) {
        throw LoadError(p.string() + ": expected " + dims(rows, cols) + ", found " + std::to_string(r.size()) + " rows");
    }
    std::vector<double> out;
    out.reserve(rows * cols);
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (r[i].size() != cols) {
            throw LoadError(p.string() + ": expected " + dims(rows, cols) + ", row " + std::to_string(i + 1) + " has " +
                            std::to_string(r[i].size()) + " columns");
        }
        out.insert(out.end(), r[i].begin(), r[i].end());
    }
    return out;
}

std::vector<double> read_bias(const fs::path& p, std::size_t n) {
    if (!fs::exists(p)) return std::vector<double>(n, 0.0);
    const Rows r = read_csv(p);
    std::vector<double> out;
    for (const auto& row : r) out.insert(out.end(), row.begin(), row.end());
    if (out.size() != n) {
        throw LoadError(p.string() + ": expected " + std::to_string(n) + " bias values, found " + std::to_string(out.size()));
    }
    return out;
}

void write_matrix(const fs::path& p, const std::vector<double>& v, std::size_t rows, std::size_t cols) {
    std::ofstream f(p);
    if (!f) throw LoadError("cannot write " + p.string());
    char buf[32];
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", v[i * cols + j]);
            f << (j ? "," : "") << buf;
        }
        f << '\n';
    }
}

void load_conv(const fs::path& dir, const std::string& stem, ConvSpec& s) {
    s.kernel = read_matrix(dir / (stem + "_weight.csv"), s.c_out, static_cast<std::size_t>(s.c_in) * s.k * s.k);
    s.bias = read_bias(dir / (stem + "_bias.csv"), s.c_out);
}

void save_conv(const fs::path& dir, const std::string& stem, const ConvSpec& s) {
    write_matrix(dir / (stem + "_weight.csv"), s.kernel, s.c_out, static_cast<std::size_t>(s.c_in) * s.k * s.k);
    write_matrix(dir / (stem + "_bias.csv"), s.bias, s.c_out, 1);
}

}  // namespace

Weights shape_only_weights(const NetworkSpec& net) {
    Weights w;
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& l = net.layers[i];
        LayerWeights lw;
        switch (l.type) {
            case LayerType::Conv:
                lw.conv = conv_shape(l.in_ch, l.out_ch, l.kernel, l.stride, l.padding);
                break;
            case LayerType::Fc: {
                FcSpec f;
                f.n_in = l.in_ch;
                f.n_out = l.out_ch;
                lw.fc = f;
                break;
            }
            case LayerType::Residual: {
                ResidualWeights r;
                r.conv1 = conv_shape(l.in_ch, l.out_ch, l.kernel, l.stride, l.padding);
                r.conv2 = conv_shape(l.out_ch, l.out_ch, l.kernel, 1, l.padding);
                if (l.has_shortcut_conv()) r.shortcut = conv_shape(l.in_ch, l.out_ch, 1, l.stride, 0);
                lw.residual = r;
                break;
            }
            default:
                break;
        }
        w.layers.push_back(std::move(lw));
    }
    return w;
}

Weights zero_weights(const NetworkSpec& net) {
    Weights w = shape_only_weights(net);
    auto fill = [](ConvSpec& s) {
        s.kernel.assign(static_cast<std::size_t>(s.c_out) * s.c_in * s.k * s.k, 0.0);
        s.bias.assign(s.c_out, 0.0);
    };
    for (auto& lw : w.layers) {
        if (lw.conv) fill(*lw.conv);
        if (lw.fc) {
            lw.fc->weight.assign(static_cast<std::size_t>(lw.fc->n_in) * lw.fc->n_out, 0.0);
            lw.fc->bias.assign(lw.fc->n_out, 0.0);
        }
        if (lw.residual) {
            fill(lw.residual->conv1);
            fill(lw.residual->conv2);
            if (lw.residual->shortcut) fill(*lw.residual->shortcut);
        }
    }
    return w;
}

Weights load_weights_csv(const fs::path& dir, const NetworkSpec& net) {
    Weights w = shape_only_weights(net);
    for (std::size_t i = 0; i < w.layers.size(); ++i) {
        const std::string stem = "layer" + std::to_string(i);
        auto& lw = w.layers[i];
        if (lw.conv) load_conv(dir, stem, *lw.conv);
        if (lw.fc) {
            lw.fc->weight = read_matrix(dir / (stem + "_weight.csv"), lw.fc->n_out, lw.fc->n_in);
            lw.fc->bias = read_bias(dir / (stem + "_bias.csv"), lw.fc->n_out);
        }
        if (lw.residual) {
            load_conv(dir, stem + "_conv1", lw.residual->conv1);
            load_conv(dir, stem + "_conv2", lw.residual->conv2);
            if (lw.residual->shortcut) load_conv(dir, stem + "_shortcut", *lw.residual->shortcut);
        }
    }
    return w;
}

void save_weights_csv(const fs::path& dir, const NetworkSpec& net, const Weights& w) {
    if (w.layers.size() != net.layers.size()) throw StructuralError("weights do not match the network");
    fs::create_directories(dir);
    for (std::size_t i = 0; i < w.layers.size(); ++i) {
        const std::string stem = "layer" + std::to_string(i);
        const auto& lw = w.layers[i];
        if (lw.conv) save_conv(dir, stem, *lw.conv);
        if (lw.fc) {
            write_matrix(dir / (stem + "_weight.csv"), lw.fc->weight, lw.fc->n_out, lw.fc->n_in);
            write_matrix(dir / (stem + "_bias.csv"), lw.fc->bias, lw.fc->n_out, 1);
        }
        if (lw.residual) {
            save_conv(dir, stem + "_conv1", lw.residual->conv1);
            save_conv(dir, stem + "_conv2", lw.residual->conv2);
            if (lw.residual->shortcut) save_conv(dir, stem + "_shortcut", *lw.residual->shortcut);
        }
    }
}

}  // namespace spikehe::model

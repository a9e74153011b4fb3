#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "spikehe/common/errors.hpp"
#include "spikehe/model/model.hpp"

namespace spikehe::model {

namespace fs = std::filesystem;
using layers::Tensor;

static_assert(std::endian::native == std::endian::little, "SPKF reader assumes a little-endian host");

namespace {

std::vector<std::uint8_t> slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw LoadError("cannot open " + p.string());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t at, const fs::path& p) {
    if (at + 4 > b.size()) throw FormatError(p.string() + ": truncated IDX header");
    return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) | b[at + 3];
}

void put_be32(std::ofstream& f, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                       static_cast<char>(v)};
    f.write(b, 4);
}

}  // namespace

Dataset read_mnist_idx(const fs::path& images, const fs::path& labels, int timesteps) {
    if (timesteps < 1) throw ValidationError("timesteps must be >= 1");
    const auto img = slurp(images);
    const auto lab = slurp(labels);
    if (be32(img, 0, images) != 0x00000803u) throw FormatError(images.string() + ": bad IDX image magic");
    if (be32(lab, 0, labels) != 0x00000801u) throw FormatError(labels.string() + ": bad IDX label magic");
    const std::uint32_t n = be32(img, 4, images), rows = be32(img, 8, images), cols = be32(img, 12, images);
    const std::uint32_t nl = be32(lab, 4, labels);
    if (n != nl) throw FormatError("IDX image count " + std::to_string(n) + " != label count " + std::to_string(nl));
    const std::size_t px = std::size_t{rows} * cols;
    if (img.size() != 16 + std::size_t{n} * px) throw FormatError(images.string() + ": size does not match its header");
    if (lab.size() != 8 + std::size_t{n}) throw FormatError(labels.string() + ": size does not match its header");
    Dataset d;
    d.timesteps = timesteps;
    d.shape = {1, static_cast<int>(rows), static_cast<int>(cols)};
    d.samples.reserve(n);
    for (std::uint32_t s = 0; s < n; ++s) {
        Tensor t(1, rows, cols);
        for (std::size_t i = 0; i < px; ++i) t.v[i] = img[16 + s * px + i] / 255.0;
        Sample smp;
        smp.frames.assign(timesteps, t);
        smp.label = lab[8 + s];
        d.samples.push_back(std::move(smp));
    }
    return d;
}

void write_mnist_idx(const fs::path& images, const fs::path& labels, const std::vector<std::vector<std::uint8_t>>& pixels,
                     const std::vector<std::uint8_t>& label_bytes, int rows, int cols) {
    std::ofstream fi(images, std::ios::binary), fl(labels, std::ios::binary);
    if (!fi || !fl) throw LoadError("cannot write IDX files");
    put_be32(fi, 0x00000803u);
    put_be32(fi, static_cast<std::uint32_t>(pixels.size()));
    put_be32(fi, rows);
    put_be32(fi, cols);
    for (const auto& p : pixels) {
        if (p.size() != static_cast<std::size_t>(rows) * cols) throw StructuralError("IDX image has the wrong size");
        fi.write(reinterpret_cast<const char*>(p.data()), static_cast<std::streamsize>(p.size()));
    }
    put_be32(fl, 0x00000801u);
    put_be32(fl, static_cast<std::uint32_t>(label_bytes.size()));
    fl.write(reinterpret_cast<const char*>(label_bytes.data()), static_cast<std::streamsize>(label_bytes.size()));
}

Dataset read_frames_bin(const fs::path& path) {
    const auto raw = slurp(path);
    const auto nl = std::find(raw.begin(), raw.end(), std::uint8_t{'\n'});
    if (nl == raw.end()) throw FormatError(path.string() + ": missing SPKF header line");
    std::istringstream hs(std::string(raw.begin(), nl));
    std::string magic, ver;
    long T = -1, c = -1, h = -1, w = -1, count = -1;
    hs >> magic >> ver >> T >> c >> h >> w >> count;
    std::string extra;
    if (!hs || magic != "SPKF" || ver != "v1" || (hs >> extra)) throw FormatError(path.string() + ": bad SPKF header");
    if (T < 1 || c < 1 || h < 1 || w < 1 || count < 0) throw FormatError(path.string() + ": bad SPKF dimensions");
    const std::size_t per = static_cast<std::size_t>(c) * h * w;
    const std::size_t nvals = static_cast<std::size_t>(count) * T * per;
    const std::size_t body = static_cast<std::size_t>(raw.end() - nl - 1);
    if (body != nvals * 4 + static_cast<std::size_t>(count)) {
        throw FormatError(path.string() + ": payload is " + std::to_string(body) + " bytes, header implies " +
                          std::to_string(nvals * 4 + count));
    }
    const std::uint8_t* p = &*nl + 1;
    Dataset d;
    d.timesteps = static_cast<int>(T);
    d.shape = {static_cast<int>(c), static_cast<int>(h), static_cast<int>(w)};
    for (long s = 0; s < count; ++s) {
        Sample smp;
        for (long t = 0; t < T; ++t) {
            Tensor x(c, h, w);
            for (std::size_t i = 0; i < per; ++i, p += 4) {
                float f;
                std::memcpy(&f, p, 4);
                x.v[i] = f;
            }
            smp.frames.push_back(std::move(x));
        }
        d.samples.push_back(std::move(smp));
    }
    for (auto& smp : d.samples) smp.label = *p++;
    return d;
}

void write_frames_bin(const fs::path& path, const Dataset& d) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw LoadError("cannot write " + path.string());
    f << "SPKF v1 " << d.timesteps << ' ' << d.shape.c << ' ' << d.shape.h << ' ' << d.shape.w << ' ' << d.samples.size()
      << '\n';
    for (const auto& s : d.samples) {
        if (static_cast<int>(s.frames.size()) != d.timesteps) throw StructuralError("sample has the wrong number of frames");
        for (const auto& x : s.frames) {
            if (x.c != d.shape.c || x.h != d.shape.h || x.w != d.shape.w) throw StructuralError("frame has the wrong shape");
            for (double v : x.v) {
                const float fv = static_cast<float>(v);
                f.write(reinterpret_cast<const char*>(&fv), 4);
            }
        }
    }
    for (const auto& s : d.samples) {
        if (s.label < 0 || s.label > 255) throw StructuralError("SPKF labels are single bytes");
        f.put(static_cast<char>(s.label));
    }
}

Dataset load_dataset(const std::string& spec, int timesteps) {
    if (spec.size() > 5 && spec.substr(spec.size() - 5) == ".spkf") return read_frames_bin(spec);
    const auto comma = spec.find(',');
    if (comma == std::string::npos) {
        throw ValidationError("dataset must be a .spkf file or '<images.idx>,<labels.idx>'");
    }
    return read_mnist_idx(spec.substr(0, comma), spec.substr(comma + 1), timesteps);
}

std::vector<layers::PackedTensor> pack_encrypt(backend::Backend& b, const layers::Layout& l, const Sample& s) {
    if (static_cast<std::size_t>(l.c) * l.h * l.w > b.slots()) {
        throw CapacityError("input of " + std::to_string(l.c * l.h * l.w) + " values exceeds " +
                            std::to_string(b.slots()) + " slots");
    }
    std::vector<layers::PackedTensor> out;
    for (const auto& x : s.frames) {
        if (x.c != l.c || x.h != l.h || x.w != l.w) throw StructuralError("frame shape does not match the input layout");
        out.push_back(layers::pack_encrypt(b, l, x));
    }
    return out;
}

}  // namespace spikehe::model

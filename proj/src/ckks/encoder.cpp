#include "spikehe/ckks/encoder.hpp"

#include <cmath>
#include <numbers>

#include "spikehe/common/errors.hpp"

namespace spikehe::ckks {

namespace {

void bit_reverse_permute(std::vector<std::complex<double>>& v) {
    const std::size_t size = v.size();
    for (std::size_t i = 1, j = 0; i < size; ++i) {
        std::size_t bit = size >> 1;
        for (; j >= bit; bit >>= 1) j -= bit;
        j += bit;
        if (i < j) std::swap(v[i], v[j]);
    }
}

}  // namespace

SlotTransform::SlotTransform(std::size_t n) : n_(n), m_(2 * n) {
    const std::size_t nh = n / 2;
    rot_group_.resize(nh);
    std::uint64_t g = 1;
    for (std::size_t j = 0; j < nh; ++j) {
        rot_group_[j] = g;
        g = (g * 5) % m_;
    }
    ksi_.resize(m_ + 1);
    for (std::size_t j = 0; j <= m_; ++j) {
        const double a = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(m_);
        ksi_[j] = {std::cos(a), std::sin(a)};
    }
}

std::uint64_t SlotTransform::galois_element(long k) const {
    const long nh = static_cast<long>(slots());
    long r = k % nh;
    if (r < 0) r += nh;
    return rot_group_[static_cast<std::size_t>(r)];
}

void SlotTransform::emb(std::vector<std::complex<double>>& v) const {
    const std::size_t size = v.size();
    bit_reverse_permute(v);
    for (std::size_t len = 2; len <= size; len <<= 1) {
        const std::size_t lenh = len >> 1;
        const std::size_t lenq = len << 2;
        const std::size_t gap = m_ / lenq;
        for (std::size_t i = 0; i < size; i += len) {
            for (std::size_t j = 0; j < lenh; ++j) {
                const std::size_t idx = (rot_group_[j] % lenq) * gap;
                const std::complex<double> u = v[i + j];
                const std::complex<double> w = v[i + j + lenh] * ksi_[idx];
                v[i + j] = u + w;
                v[i + j + lenh] = u - w;
            }
        }
    }
}

void SlotTransform::emb_inv(std::vector<std::complex<double>>& v) const {
    const std::size_t size = v.size();
    for (std::size_t len = size; len >= 2; len >>= 1) {
        const std::size_t lenh = len >> 1;
        const std::size_t lenq = len << 2;
        const std::size_t gap = m_ / lenq;
        for (std::size_t i = 0; i < size; i += len) {
            for (std::size_t j = 0; j < lenh; ++j) {
                const std::size_t idx = (lenq - (rot_group_[j] % lenq)) * gap;
                const std::complex<double> u = v[i + j] + v[i + j + lenh];
                const std::complex<double> w = (v[i + j] - v[i + j + lenh]) * ksi_[idx];
                v[i + j] = u;
                v[i + j + lenh] = w;
            }
        }
    }
    bit_reverse_permute(v);
    const double inv = 1.0 / static_cast<double>(size);
    for (auto& x : v) x *= inv;
}

std::vector<double> SlotTransform::to_coeffs(const std::vector<double>& values) const {
    const std::size_t nh = slots();
    if (values.size() > nh) {
        throw CapacityError("encode: " + std::to_string(values.size()) + " values exceed " +
                            std::to_string(nh) + " slots");
    }
    std::vector<std::complex<double>> v(nh);
    for (std::size_t i = 0; i < values.size(); ++i) v[i] = values[i];
    emb_inv(v);
    std::vector<double> c(n_);
    for (std::size_t i = 0; i < nh; ++i) {
        c[i] = v[i].real();
        c[i + nh] = v[i].imag();
    }
    return c;
}

std::vector<double> SlotTransform::to_slots(const std::vector<double>& coeffs) const {
    const std::size_t nh = slots();
    std::vector<std::complex<double>> v(nh);
    for (std::size_t i = 0; i < nh; ++i) v[i] = {coeffs[i], coeffs[i + nh]};
    emb(v);
    std::vector<double> out(nh);
    for (std::size_t i = 0; i < nh; ++i) out[i] = v[i].real();
    return out;
}

}  // namespace spikehe::ckks

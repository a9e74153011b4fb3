#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace spikehe::ckks {

/// Canonical-embedding transform between N/2 complex slots and N real coefficients.
/// Slot j holds m(zeta^(5^j)), so X -> X^(5^k) shifts slots left by k.
class SlotTransform {
public:
    explicit SlotTransform(std::size_t n);

    std::size_t n() const { return n_; }
    std::size_t slots() const { return n_ / 2; }

    /// Real slot values (zero-padded) to unscaled real coefficients.
    std::vector<double> to_coeffs(const std::vector<double>& values) const;
    /// Unscaled real coefficients to real parts of the slots.
    std::vector<double> to_slots(const std::vector<double>& coeffs) const;

    /// 5^k mod 2N for rotation by k (k taken mod N/2).
    std::uint64_t galois_element(long k) const;

private:
    void emb(std::vector<std::complex<double>>& v) const;
    void emb_inv(std::vector<std::complex<double>>& v) const;

    std::size_t n_;
    std::size_t m_;
    std::vector<std::uint64_t> rot_group_;
    std::vector<std::complex<double>> ksi_;
};

}  // namespace spikehe::ckks

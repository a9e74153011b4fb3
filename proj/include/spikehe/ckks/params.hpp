#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace spikehe::ckks {

/// Parameter set. `depth` is the number of rescales a fresh ciphertext can absorb.
struct CkksParams {
    std::string name = "custom";
    std::size_t n = 4096;
    int depth = 9;
    int scale_bits = 40;
    int base_bits = 60;     // q_0
    int special_bits = 61;  // key-switching primes
    int dnum = 1;           // key-switching digits
    double sigma = 3.2;

    std::size_t slots() const { return n / 2; }
    void validate() const;

    /// "test" (N=4096, depth 9, 40-bit scale), "lenet5" (16384, 12, 56), "resnet19" (32768, 12, 56).
    static CkksParams profile(const std::string& name);
    static std::vector<std::string> profile_names();
};

}  // namespace spikehe::ckks

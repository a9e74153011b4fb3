#include "spikehe/ckks/params.hpp"

#include "spikehe/common/errors.hpp"

namespace spikehe::ckks {

void CkksParams::validate() const {
    if (n < 8 || (n & (n - 1)) != 0) throw ParameterError("N must be a power of two >= 8");
    if (depth < 1) throw ParameterError("depth must be >= 1");
    if (scale_bits < 20 || scale_bits > 60) throw ParameterError("scale bits must be in [20, 60]");
    if (base_bits <= scale_bits || base_bits > 61) {
        throw ParameterError("base prime must be wider than the scale and at most 61 bits");
    }
    if (special_bits < scale_bits || special_bits > 61) throw ParameterError("special prime bits out of range");
    if (dnum < 1 || dnum > depth + 1) throw ParameterError("dnum must be in [1, depth+1]");
    if (!(sigma > 0)) throw ParameterError("sigma must be positive");
}

CkksParams CkksParams::profile(const std::string& name) {
    CkksParams p;
    p.name = name;
    if (name == "test") {
        p.n = 4096;
        p.depth = 9;
        p.scale_bits = 40;
        p.dnum = 1;
    } else if (name == "lenet5") {
        p.n = 16384;
        p.depth = 12;
        p.scale_bits = 56;
        p.dnum = 3;
    } else if (name == "resnet19") {
        p.n = 32768;
        p.depth = 12;
        p.scale_bits = 56;
        p.dnum = 3;
    } else {
        throw ParameterError("unknown parameter profile '" + name + "'");
    }
    return p;
}

std::vector<std::string> CkksParams::profile_names() { return {"test", "lenet5", "resnet19"}; }

}  // namespace spikehe::ckks

#include <cmath>
#include <map>
#include <stdexcept>

#include "spikehe/approx/chebyshev.hpp"
#include "spikehe/common/errors.hpp"

namespace spikehe::approx {

using backend::Backend;
using backend::CipherVector;
using backend::ScaleDomain;

int series_depth(int degree) {
    if (degree <= 0) return 0;
    int lg = 0;
    while ((1 << lg) < degree + 1) ++lg;
    return lg + 1;
}

namespace {

class Bsgs {
public:
    Bsgs(Backend& b, const CipherVector& x, int degree, const std::vector<double>* mask) : b_(b) {
        if (mask) unit_ = *mask;
        else if (b.tracks_values()) unit_.assign(b.slots(), 1.0);
        masked_ = mask != nullptr;

        int lg = 0;
        while ((1 << lg) < degree + 1) ++lg;
        m_ = 1 << ((lg + 1) / 2);
        const int baby = std::min(m_, degree);
        T_.resize(baby + 1);
        T_[1] = Backend::retag(x, ScaleDomain::Raw, 1.0);
        for (int j = 2; j <= baby; ++j) {
            // T_2k = 2 T_k^2 - 1, T_2k+1 = 2 T_k T_k+1 - x
            CipherVector y = b_.mul(T_[j / 2], T_[j - j / 2]);
            y = b_.add(y, y);
            T_[j] = (j % 2 == 0) ? b_.add_const(y, -1.0) : b_.sub(y, T_[1]);
        }
        if (m_ <= degree) {
            giants_.emplace(m_, T_[m_]);
            for (int g = m_; 2 * g <= degree; g *= 2) {
                const CipherVector& t = giants_.at(g);
                CipherVector y = b_.mul(t, t);
                y = b_.add(y, y);
                giants_.emplace(2 * g, b_.add_const(y, -1.0));
            }
        }
    }

    CipherVector eval(const std::vector<double>& c) {
        const int d = static_cast<int>(c.size()) - 1;
        if (d < static_cast<int>(T_.size())) return leaf(c);
        auto it = giants_.upper_bound(d);
        --it;
        const int k = it->first;
        const CipherVector& g = it->second;
        std::vector<double> q(d - k + 1), r(c.begin(), c.begin() + k);
        // T_{k+j} = 2 T_k T_j - T_{k-j}
        q[0] = c[k];
        for (int j = 1; j <= d - k; ++j) {
            q[j] = 2.0 * c[k + j];
            r[k - j] -= c[k + j];
        }
        CipherVector qk = d == k ? b_.mul_plain(g, weights(c[k])) : b_.mul(eval(q), g);
        return b_.add(qk, eval(r));
    }

private:
    std::vector<double> weights(double c) const {
        std::vector<double> w(unit_);
        for (auto& v : w) v *= c;
        return w;
    }

    CipherVector leaf(const std::vector<double>& c) {
        const int d = static_cast<int>(c.size()) - 1;
        std::vector<std::vector<double>> ws;
        std::vector<const CipherVector*> xs;
        ws.reserve(d + 1);
        for (int j = 1; j <= d; ++j) {
            if (c[j] == 0.0) continue;
            ws.push_back(weights(c[j]));
            xs.push_back(&T_[j]);
        }
        if (xs.empty()) {
            ws.push_back(weights(0.0));
            xs.push_back(&T_[1]);
        }
        std::vector<const std::vector<double>*> wp;
        for (const auto& w : ws) wp.push_back(&w);
        CipherVector r = b_.dot_plain(xs, wp);
        if (c[0] != 0.0) r = masked_ ? b_.add_plain(r, weights(c[0])) : b_.add_const(r, c[0]);
        return r;
    }

    Backend& b_;
    std::vector<double> unit_;
    bool masked_ = false;
    int m_ = 1;
    std::vector<CipherVector> T_;
    std::map<int, CipherVector> giants_;
};

}  // namespace

CipherVector eval_series_encrypted(Backend& b, const CipherVector& x, const ChebyshevSeries& s,
                                   const std::vector<double>* mask) {
    if (s.coeffs.empty()) throw ParameterError("empty Chebyshev series");
    const int degree = static_cast<int>(s.coeffs.size()) - 1;
    const int depth = series_depth(degree);
    if (x.level < depth) {
        throw LevelExhausted("series of degree " + std::to_string(degree) + " needs " + std::to_string(depth) +
                             " levels, input has " + std::to_string(x.level));
    }
    const CipherVector xr = Backend::retag(x, ScaleDomain::Raw, 1.0);
    if (degree == 0) {
        CipherVector z = b.sub(xr, xr);
        if (!mask) return b.add_const(z, s.coeffs[0]);
        std::vector<double> w(*mask);
        for (auto& v : w) v *= s.coeffs[0];
        return b.add_plain(z, w);
    }
    Bsgs ev(b, xr, degree, mask);
    CipherVector r = ev.eval(s.coeffs);
    const int target = x.level - depth;
    if (r.level < target) throw std::logic_error("series evaluation exceeded its canonical depth");
    return b.level_down(r, target);
}

CipherVector scale_to_interval(Backend& b, const CipherVector& x, double scale_value) {
    if (!(scale_value > 0.0) || !std::isfinite(scale_value)) throw DomainError("scaleValue must be positive");
    CipherVector r = b.mul_const(x, 1.0 / scale_value);
    const double interval = x.domain == ScaleDomain::Scaled ? x.interval * scale_value : scale_value;
    return Backend::retag(r, ScaleDomain::Scaled, interval);
}

}  // namespace spikehe::approx

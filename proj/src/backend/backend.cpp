#include "spikehe/backend/backend.hpp"

#include <algorithm>
#include <sstream>

#include "spikehe/common/errors.hpp"

namespace spikehe::backend {

namespace {

void same_domain(const CipherVector& a, const CipherVector& b, const char* op) {
    if (a.domain != b.domain || (a.domain == ScaleDomain::Scaled && a.interval != b.interval)) {
        throw StructuralError(std::string(op) + ": mixing scaled and unscaled operands");
    }
}

void check_len(std::size_t n, std::size_t slots, const char* op) {
    if (n > slots) {
        throw CapacityError(std::string(op) + ": " + std::to_string(n) + " values exceed " + std::to_string(slots) +
                            " slots");
    }
}

}  // namespace

std::string Backend::site() const { return " [layer " + layer_ + ", t=" + std::to_string(timestep_) + "]"; }

void Backend::set_site(const std::string& layer, int timestep) {
    layer_ = layer.empty() ? "-" : layer;
    timestep_ = timestep;
}

void Backend::need(const CipherVector& a, int levels, const char* op) const {
    if (a.level < levels) {
        throw LevelExhausted(std::string(op) + " needs " + std::to_string(levels) + " level(s), operand has " +
                             std::to_string(a.level) + site());
    }
}

void Backend::align(CipherVector& a, CipherVector& b) {
    if (a.level > b.level) a = level_down(a, b.level);
    if (b.level > a.level) b = level_down(b, a.level);
}

CipherVector Backend::encrypt(const std::vector<double>& values, int level) {
    if (level < 0) level = max_level();
    if (level > max_level()) throw StructuralError("encrypt: level above depth");
    check_len(values.size(), slots(), "encrypt");
    ++counters_.encrypt;
    CipherVector r = do_encrypt(values, level);
    r.level = level;
    r.slots = slots();
    return r;
}

std::vector<double> Backend::decrypt(const CipherVector& a) {
    ++counters_.decrypt;
    return do_decrypt(a);
}

CipherVector Backend::add(const CipherVector& a0, const CipherVector& b0) {
    same_domain(a0, b0, "add");
    CipherVector a = a0, b = b0;
    align(a, b);
    ++counters_.add;
    return do_add(a, b, false);
}

CipherVector Backend::sub(const CipherVector& a0, const CipherVector& b0) {
    same_domain(a0, b0, "sub");
    CipherVector a = a0, b = b0;
    align(a, b);
    ++counters_.add;
    return do_add(a, b, true);
}

CipherVector Backend::add_plain(const CipherVector& a, const std::vector<double>& w) {
    check_len(w.size(), slots(), "add_plain");
    ++counters_.add_plain;
    return do_add_plain(a, w);
}

CipherVector Backend::add_const(const CipherVector& a, double c) {
    ++counters_.add_const;
    return do_add_const(a, c);
}

CipherVector Backend::mul(const CipherVector& a0, const CipherVector& b0) {
    if (a0.domain == ScaleDomain::Scaled && b0.domain == ScaleDomain::Scaled) {
        throw StructuralError("mul: both operands in the scaled domain");
    }
    CipherVector a = a0, b = b0;
    align(a, b);
    need(a, 1, "mul");
    ++counters_.mul;
    CipherVector r = do_mul(a, b);
    r.level = a.level - 1;
    if (b.domain == ScaleDomain::Scaled) {
        r.domain = b.domain;
        r.interval = b.interval;
    } else {
        r.domain = a.domain;
        r.interval = a.interval;
    }
    return r;
}

CipherVector Backend::mul_plain(const CipherVector& a, const std::vector<double>& w) {
    check_len(w.size(), slots(), "mul_plain");
    need(a, 1, "mul_plain");
    ++counters_.mul_plain;
    CipherVector r = do_dot_plain({&a}, {&w});
    r.level = a.level - 1;
    r.domain = a.domain;
    r.interval = a.interval;
    return r;
}

CipherVector Backend::mul_const(const CipherVector& a, double c) {
    need(a, 1, "mul_const");
    ++counters_.mul_const;
    CipherVector r = do_mul_const(a, c);
    r.level = a.level - 1;
    r.domain = a.domain;
    r.interval = a.interval;
    return r;
}

CipherVector Backend::dot_plain(const std::vector<const CipherVector*>& xs,
                                const std::vector<const std::vector<double>*>& ws) {
    if (xs.empty() || xs.size() != ws.size()) throw StructuralError("dot_plain: operand count mismatch");
    int low = xs[0]->level;
    for (const auto* x : xs) {
        same_domain(*xs[0], *x, "dot_plain");
        low = std::min(low, x->level);
    }
    for (const auto* w : ws) check_len(w->size(), slots(), "dot_plain");
    std::vector<CipherVector> lowered;
    lowered.reserve(xs.size());
    std::vector<const CipherVector*> aligned;
    for (const auto* x : xs) {
        if (x->level != low) {
            lowered.push_back(level_down(*x, low));
            aligned.push_back(&lowered.back());
        } else {
            aligned.push_back(x);
        }
    }
    need(*aligned[0], 1, "dot_plain");
    counters_.mul_plain += xs.size();
    CipherVector r = do_dot_plain(aligned, ws);
    r.level = low - 1;
    r.domain = xs[0]->domain;
    r.interval = xs[0]->interval;
    return r;
}

CipherVector Backend::rotate(const CipherVector& a, long k) {
    const long s = static_cast<long>(slots());
    if (((k % s) + s) % s == 0) return a;
    ++counters_.rotate;
    return do_rotate(a, k);
}

CipherVector Backend::level_down(const CipherVector& a, int target) {
    if (target == a.level) return a;
    if (target > a.level) throw StructuralError("level_down: target above current level" + site());
    if (target < 0) throw LevelExhausted("level_down: negative target" + site());
    ++counters_.level_down;
    CipherVector r = do_level_down(a, target);
    r.level = target;
    return r;
}

CipherVector Backend::refresh(const CipherVector& a) {
    CipherVector r = do_refresh(a);
    ++counters_.refresh;
    r.level = max_level();
    r.domain = a.domain;
    r.interval = a.interval;
    audit_.push_back({"refresh", layer_, timestep_, a.level, r.level});
    return r;
}

CipherVector Backend::exact_compare(const CipherVector& v, const CipherVector& t) {
    same_domain(v, t, "exact_compare");
    if (v.slots != t.slots) throw StructuralError("exact_compare: slot counts differ");
    CipherVector r = do_compare(v, t);
    ++counters_.compare;
    r.level = max_level();
    r.domain = ScaleDomain::Raw;
    r.interval = 1.0;
    audit_.push_back({"switch", layer_, timestep_, std::min(v.level, t.level), r.level});
    return r;
}

CipherVector Backend::retag(CipherVector a, ScaleDomain d, double interval) {
    a.domain = d;
    a.interval = d == ScaleDomain::Raw ? 1.0 : interval;
    return a;
}

std::string Backend::audit_text() const {
    std::ostringstream os;
    os << "# TEST-MODE RECRYPTION / TEST-MODE SWITCH events (authority holds the secret key)\n";
    for (const auto& e : audit_) {
        os << e.op << ' ' << e.layer << ' ' << e.timestep << ' ' << e.level_before << ' ' << e.level_after << '\n';
    }
    return os.str();
}

}  // namespace spikehe::backend

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "spikehe/ckks/context.hpp"

namespace spikehe::backend {

/// Raw values, or values multiplied by 1/interval for polynomial evaluation.
enum class ScaleDomain { Raw, Scaled };

/// One encrypted SIMD vector. The payload is backend specific.
struct CipherVector {
    std::variant<std::vector<double>, ckks::Ciphertext> payload;
    std::size_t slots = 0;
    int level = 0;
    ScaleDomain domain = ScaleDomain::Raw;
    double interval = 1.0;
};

struct OpCounters {
    std::uint64_t encrypt = 0, decrypt = 0;
    std::uint64_t add = 0, add_plain = 0, add_const = 0;
    std::uint64_t mul = 0, mul_plain = 0, mul_const = 0;
    std::uint64_t rotate = 0, level_down = 0;
    std::uint64_t refresh = 0, compare = 0;
};

/// One refresh or comparison round-trip through the authority.
struct AuditEvent {
    std::string op;  // "refresh" | "switch"
    std::string layer;
    int timestep = 0;
    int level_before = 0;
    int level_after = 0;
};

/// Encrypted-vector operations shared by the CKKS scheme and the exact simulator.
/// Level accounting, scale-domain tags and the audit log live here so both
/// backends follow one ledger.
class Backend {
public:
    virtual ~Backend() = default;

    virtual std::string name() const = 0;
    virtual std::size_t slots() const = 0;
    virtual int max_level() const = 0;
    /// False for backends that only track levels and tags; callers may then skip
    /// building plaintext operands (empty vectors are accepted).
    virtual bool tracks_values() const { return true; }

    CipherVector encrypt(const std::vector<double>& values, int level = -1);
    std::vector<double> decrypt(const CipherVector& a);

    CipherVector add(const CipherVector& a, const CipherVector& b);
    CipherVector sub(const CipherVector& a, const CipherVector& b);
    CipherVector add_plain(const CipherVector& a, const std::vector<double>& w);
    CipherVector add_const(const CipherVector& a, double c);
    CipherVector mul(const CipherVector& a, const CipherVector& b);
    CipherVector mul_plain(const CipherVector& a, const std::vector<double>& w);
    CipherVector mul_const(const CipherVector& a, double c);
    /// sum_i x_i * w_i for one level; operands are aligned to the lowest level first.
    CipherVector dot_plain(const std::vector<const CipherVector*>& xs,
                           const std::vector<const std::vector<double>*>& ws);
    /// Slot i takes slot (i + k) mod slots.
    CipherVector rotate(const CipherVector& a, long k);
    CipherVector level_down(const CipherVector& a, int target);
    /// Test-mode recryption to the maximum level. Logged.
    CipherVector refresh(const CipherVector& a);
    /// c_i = 1 if values_i <= thresholds_i else 0, at the maximum level. Logged.
    CipherVector exact_compare(const CipherVector& values, const CipherVector& thresholds);

    /// Reinterpret the scale-domain tag (values unchanged).
    static CipherVector retag(CipherVector a, ScaleDomain d, double interval);

    const OpCounters& counters() const { return counters_; }
    void reset_counters() { counters_ = OpCounters{}; }

    /// Attribution for audit events and error messages.
    void set_site(const std::string& layer, int timestep);
    const std::vector<AuditEvent>& audit() const { return audit_; }
    void clear_audit() { audit_.clear(); }
    /// `<op> <layer> <timestep> <level-before> <level-after>` per line, after a TEST-MODE header.
    std::string audit_text() const;

    /// Drops cached encodings of weight vectors (called when a layer is unloaded).
    virtual void release_plaintext_cache() {}
    virtual std::size_t plaintext_cache_bytes() const { return 0; }
    /// Memory footprint of one ciphertext at `level`.
    virtual std::size_t ciphertext_bytes(int level) const = 0;
    /// Key material held by this backend.
    virtual std::size_t key_bytes() const { return 0; }

protected:
    virtual CipherVector do_encrypt(const std::vector<double>& values, int level) = 0;
    virtual std::vector<double> do_decrypt(const CipherVector& a) = 0;
    virtual CipherVector do_add(const CipherVector& a, const CipherVector& b, bool subtract) = 0;
    virtual CipherVector do_add_plain(const CipherVector& a, const std::vector<double>& w) = 0;
    virtual CipherVector do_add_const(const CipherVector& a, double c) = 0;
    virtual CipherVector do_mul(const CipherVector& a, const CipherVector& b) = 0;
    virtual CipherVector do_mul_const(const CipherVector& a, double c) = 0;
    virtual CipherVector do_dot_plain(const std::vector<const CipherVector*>& xs,
                                      const std::vector<const std::vector<double>*>& ws) = 0;
    virtual CipherVector do_rotate(const CipherVector& a, long k) = 0;
    virtual CipherVector do_level_down(const CipherVector& a, int target) = 0;
    virtual CipherVector do_refresh(const CipherVector& a) = 0;
    virtual CipherVector do_compare(const CipherVector& v, const CipherVector& t) = 0;

    std::string site() const;

private:
    void need(const CipherVector& a, int levels, const char* op) const;
    void align(CipherVector& a, CipherVector& b);

    OpCounters counters_;
    std::vector<AuditEvent> audit_;
    std::string layer_ = "-";
    int timestep_ = 0;
};

struct SimBackendConfig {
    std::size_t slots = 2048;
    int depth = 9;
    /// Gaussian noise added to every slot after each arithmetic op.
    double noise_stddev = 0.0;
    std::uint64_t seed = 1;
    /// When set, rotations outside this set raise MissingKeyError.
    std::shared_ptr<const std::set<long>> rotation_keys;
    bool refresh_authority = true;
    bool compare_authority = true;
};

std::unique_ptr<Backend> make_sim_backend(const SimBackendConfig& cfg);

/// Level-only backend: tags, levels, counters and audit, no slot values.
/// Decryption returns zeros. Used for static ledger simulation.
std::unique_ptr<Backend> make_ledger_backend(std::size_t slots, int depth);

struct CkksBackendConfig {
    std::uint64_t seed = 1;
    /// Plaintext-encoding cache budget in bytes.
    std::size_t cache_bytes = std::size_t{256} << 20;
    bool refresh_authority = true;
    bool compare_authority = true;
};

struct CkksKeys;  // defined in ckks_backend.hpp

std::unique_ptr<Backend> make_ckks_backend(ckks::ContextRef ctx, std::shared_ptr<const CkksKeys> keys,
                                           const CkksBackendConfig& cfg);

}  // namespace spikehe::backend

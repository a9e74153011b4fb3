#include "spikehe/backend/backend.hpp"
#include "spikehe/common/errors.hpp"

namespace spikehe::backend {

namespace {

class LedgerBackend final : public Backend {
public:
    LedgerBackend(std::size_t slots, int depth) : slots_(slots), depth_(depth) {
        if (slots == 0) throw ParameterError("ledger backend needs at least one slot");
        if (depth < 1) throw ParameterError("ledger backend depth must be >= 1");
    }

    std::string name() const override { return "ledger"; }
    std::size_t slots() const override { return slots_; }
    int max_level() const override { return depth_; }
    bool tracks_values() const override { return false; }
    std::size_t ciphertext_bytes(int) const override { return 0; }

protected:
    CipherVector do_encrypt(const std::vector<double>&, int level) override {
        CipherVector r;
        r.level = level;
        r.slots = slots_;
        return r;
    }
    std::vector<double> do_decrypt(const CipherVector&) override { return std::vector<double>(slots_, 0.0); }
    CipherVector do_add(const CipherVector& a, const CipherVector&, bool) override { return a; }
    CipherVector do_add_plain(const CipherVector& a, const std::vector<double>&) override { return a; }
    CipherVector do_add_const(const CipherVector& a, double) override { return a; }
    CipherVector do_mul(const CipherVector& a, const CipherVector&) override { return a; }
    CipherVector do_mul_const(const CipherVector& a, double) override { return a; }
    CipherVector do_dot_plain(const std::vector<const CipherVector*>& xs,
                              const std::vector<const std::vector<double>*>&) override {
        return *xs[0];
    }
    CipherVector do_rotate(const CipherVector& a, long) override { return a; }
    CipherVector do_level_down(const CipherVector& a, int) override { return a; }
    CipherVector do_refresh(const CipherVector& a) override { return a; }
    CipherVector do_compare(const CipherVector& v, const CipherVector&) override { return v; }

private:
    std::size_t slots_;
    int depth_;
};

}  // namespace

std::unique_ptr<Backend> make_ledger_backend(std::size_t slots, int depth) {
    return std::make_unique<LedgerBackend>(slots, depth);
}

}  // namespace spikehe::backend

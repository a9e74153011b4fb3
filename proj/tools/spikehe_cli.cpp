// spikehe: key generation, encrypted inference and evaluation against the plaintext runner.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "spikehe/backend/ckks_backend.hpp"
#include "spikehe/common/errors.hpp"
#include "spikehe/fixtures/fixtures.hpp"
#include "spikehe/planner/planner.hpp"

using namespace spikehe;
using nlohmann::json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitContract = 3;

using lif::mode_name;
using lif::parse_mode;

struct Session {
    std::unique_ptr<backend::Backend> b;
    std::string profile;
    bool keys_from_disk = false;
};

/// Backend for `net`. CKKS keys come from `keys_dir`, or are generated in memory
/// for the harvested rotations when `keys_dir` is empty and `allow_keygen` is set.
Session open_backend(const model::NetworkSpec& net, const std::string& kind, const std::string& keys_dir,
                     bool allow_keygen) {
    Session s;
    ckks::ContextRef ctx;
    std::shared_ptr<const backend::CkksKeys> keys;
    if (!keys_dir.empty()) {
        keys = backend::load_keys(keys_dir, ctx);
        s.keys_from_disk = true;
    } else {
        ctx = std::make_shared<const ckks::CkksContext>(ckks::CkksParams::profile(net.profile));
    }
    s.profile = ctx->params().name;
    if (kind == "sim") {
        backend::SimBackendConfig c;
        c.slots = ctx->slots();
        c.depth = ctx->max_level();
        if (keys) c.rotation_keys = std::make_shared<const std::set<long>>(keys->gk.indices());
        s.b = backend::make_sim_backend(c);
    } else if (kind == "ckks") {
        if (!keys) {
            if (!allow_keygen) throw ValidationError("the ckks backend needs --keys (see 'spikehe keygen')");
            keys = backend::generate_keys(ctx, planner::harvest_rotations(net, ctx->slots()).indices, 1);
        }
        s.b = backend::make_ckks_backend(ctx, keys, {});
    } else {
        throw ValidationError("unknown backend '" + kind + "' (ckks, sim)");
    }
    return s;
}

json schedule_json(const planner::RefreshSchedule& s) {
    json pts = json::array();
    for (const auto& p : s.points)
        pts.push_back({{"stage", p.stage}, {"timestep", p.timestep}, {"site", p.site}, {"reason", p.reason}});
    return {{"mode", mode_name(s.mode)}, {"refreshes", s.refreshes()}, {"switches", s.switches()}, {"points", pts}};
}

json events_json(const std::vector<backend::AuditEvent>& ev) {
    json out = json::array();
    for (const auto& e : ev)
        out.push_back({{"op", e.op}, {"layer", e.layer}, {"timestep", e.timestep}, {"level_before", e.level_before},
                       {"level_after", e.level_after}});
    return out;
}

struct SampleRun {
    json j;
    int prediction = -1;
    int plain_prediction = -1;
};

SampleRun run_sample(backend::Backend& b, const model::NetworkSpec& net, const model::Weights& w,
                     const planner::NetworkPlan& np, const planner::RefreshSchedule& sched, lif::Mode mode,
                     const model::Sample& smp, std::size_t index) {
    const auto frames = planner::frames_for(net, smp);
    model::Sample s{frames, smp.label};
    b.clear_audit();
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = planner::run_inference(b, net, w, model::pack_encrypt(b, np.input, s), {mode, &sched});
    const auto scores = planner::decrypt_scores(b, r);
    const double total_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    const auto plain = planner::run_inference_plain(net, w, frames);

    SampleRun out;
    out.prediction = planner::argmax(scores);
    out.plain_prediction = planner::argmax(plain.scores);
    json cells = json::array();
    for (const auto& c : r.cells)
        cells.push_back({{"stage", c.stage}, {"timestep", c.timestep}, {"ms", c.ms}, {"level_out", c.level_out}});
    out.j = {{"index", index},
             {"label", smp.label},
             {"prediction", out.prediction},
             {"plain_prediction", out.plain_prediction},
             {"scores", scores},
             {"total_ms", total_ms},
             {"peak_bytes", r.peak_bytes},
             {"cells", cells},
             {"events", events_json(b.audit())}};
    return out;
}

void write_report(const std::string& path, const std::string& text, const json& j) {
    std::cout << text;
    if (path.empty()) return;
    std::ofstream f(path);
    if (!f) throw LoadError("cannot write report '" + path + "'");
    f << text << "BEGIN JSON\n" << j.dump(2) << "\nEND JSON\n";
}

json header(const model::NetworkSpec& net, const Session& s, const std::string& backend, lif::Mode mode) {
    return {{"network", net.name},
            {"profile", s.profile},
            {"backend", backend},
            {"mode", mode_name(mode)},
            {"slots", s.b->slots()},
            {"depth", s.b->max_level()},
            {"timesteps", net.timesteps}};
}

/// Every refresh and comparison decrypts with the harness-held secret key.
json authority_json(std::uint64_t uses) {
    return {{"secret_key_uses", uses}, {"role", "test-mode refresh/compare authority holding the client key"}};
}

int cmd_keygen(const std::string& net_path, const std::string& profile, std::uint64_t seed, const std::string& out) {
    const auto net = model::load_network(net_path);
    auto ctx = std::make_shared<const ckks::CkksContext>(ckks::CkksParams::profile(profile));
    const auto rp = planner::harvest_rotations(net, ctx->slots());
    const auto keys = backend::generate_keys(ctx, rp.indices, seed);
    backend::save_keys(out, *ctx, *keys);
    std::printf("profile %s slots %zu\n", profile.c_str(), ctx->slots());
    std::printf("rotation keys %zu\n", rp.indices.size());
    std::printf("digest %s\n", fixtures::digest_dir(out).c_str());
    return 0;
}

int cmd_infer(const std::string& net_path, const std::string& weights_dir, const std::string& input,
              const std::string& mode_s, const std::string& backend_s, const std::string& keys_dir,
              const std::string& report) {
    const auto mode = parse_mode(mode_s);
    const auto net = model::load_network(net_path);
    const auto w = model::load_weights_csv(weights_dir, net);
    const auto data = model::load_dataset(input, net.timesteps);
    auto s = open_backend(net, backend_s, keys_dir, false);
    const auto np = planner::plan_network(net, s.b->slots());
    const auto sched = planner::schedule_refresh(net, s.b->slots(), s.b->max_level(), mode);

    json j = header(net, s, backend_s, mode);
    j["command"] = "infer";
    j["schedule"] = schedule_json(sched);
    j["samples"] = json::array();
    std::ostringstream text;
    text << "network " << net.name << " backend " << backend_s << " mode " << mode_name(mode) << " profile "
         << s.profile << "\n";
    text << "schedule refreshes " << sched.refreshes() << " switches " << sched.switches() << "\n";
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        const auto r = run_sample(*s.b, net, w, np, sched, mode, data.samples[i], i);
        for (const auto& c : r.j["cells"])
            text << "cell " << c["stage"].get<std::string>() << " t=" << c["timestep"].get<int>() << " ms "
                 << c["ms"].get<double>() << " level " << c["level_out"].get<int>() << "\n";
        for (const auto& e : r.j["events"])
            text << "event " << e["op"].get<std::string>() << " " << e["layer"].get<std::string>() << " t="
                 << e["timestep"].get<int>() << " level " << e["level_before"].get<int>() << "->"
                 << e["level_after"].get<int>() << "\n";
        text << "sample " << i << " prediction " << r.prediction << " plaintext " << r.plain_prediction << " peak_bytes "
             << r.j["peak_bytes"].get<std::size_t>() << "\n";
        j["samples"].push_back(r.j);
    }
    j["authority"] = authority_json(s.b->counters().refresh + s.b->counters().compare);
    text << "authority secret-key uses " << j["authority"]["secret_key_uses"].get<std::uint64_t>() << "\n";
    write_report(report, text.str(), j);
    return 0;
}

int cmd_evaluate(const std::string& net_path, const std::string& weights_dir, const std::string& dataset, int count,
                 const std::string& mode_s, const std::string& backend_s, const std::string& report) {
    if (count < 0) throw ValidationError("--count must be non-negative");
    const auto mode = parse_mode(mode_s);
    const auto net = model::load_network(net_path);
    const auto w = model::load_weights_csv(weights_dir, net);
    const auto data = model::load_dataset(dataset, net.timesteps);
    const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(count), data.samples.size());
    auto s = open_backend(net, backend_s, "", true);
    json j = header(net, s, backend_s, mode);
    j["command"] = "evaluate";
    j["samples"] = json::array();
    int plain_ok = 0, enc_ok = 0, agree = 0;
    if (n > 0) {
        const auto np = planner::plan_network(net, s.b->slots());
        const auto sched = planner::schedule_refresh(net, s.b->slots(), s.b->max_level(), mode);
        j["schedule"] = schedule_json(sched);
        for (std::size_t i = 0; i < n; ++i) {
            auto r = run_sample(*s.b, net, w, np, sched, mode, data.samples[i], i);
            plain_ok += r.plain_prediction == data.samples[i].label;
            enc_ok += r.prediction == data.samples[i].label;
            agree += r.prediction == r.plain_prediction;
            r.j.erase("cells");
            r.j.erase("events");
            j["samples"].push_back(r.j);
        }
    }
    auto rate = [&](int k) { return n ? static_cast<double>(k) / static_cast<double>(n) : 0.0; };
    j["count"] = n;
    j["plaintext_accuracy"] = rate(plain_ok);
    j["encrypted_accuracy"] = rate(enc_ok);
    j["agreement"] = rate(agree);
    j["authority"] = authority_json(s.b->counters().refresh + s.b->counters().compare);
    std::ostringstream text;
    text << "network " << net.name << " backend " << backend_s << " mode " << mode_name(mode) << " samples " << n << "\n";
    text << "plaintext accuracy " << rate(plain_ok) << "\n";
    text << "encrypted accuracy " << rate(enc_ok) << "\n";
    text << "agreement " << rate(agree) << " (" << agree << "/" << n << ")\n";
    write_report(report, text.str(), j);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Encrypted spiking-network inference over CKKS"};
    app.require_subcommand(1);

    std::string net, profile = "test", out, weights, input, mode = "switch", backend_kind = "sim", keys, report;
    std::string dataset, fx_profile = "lenet-tiny";
    std::uint64_t seed = 1;
    int count = 100;

    auto* kg = app.add_subcommand("keygen", "Generate keys for the rotations a network needs");
    kg->add_option("--net", net, "Network config (JSON)")->required();
    kg->add_option("--profile", profile, "CKKS profile: test, lenet5, resnet19");
    kg->add_option("--seed", seed, "Key generation seed");
    kg->add_option("--out", out, "Output key directory")->required();

    auto* inf = app.add_subcommand("infer", "Encrypted inference over every sample of an input file");
    inf->add_option("--net", net)->required();
    inf->add_option("--weights", weights, "Weight CSV directory")->required();
    inf->add_option("--input", input, "Input .spkf file or '<images>,<labels>' IDX pair")->required();
    inf->add_option("--mode", mode, "approx or switch");
    inf->add_option("--backend", backend_kind, "ckks or sim");
    inf->add_option("--keys", keys, "Key directory from keygen");
    inf->add_option("--report", report, "Report file (text plus a JSON block)");

    auto* ev = app.add_subcommand("evaluate", "Plaintext vs encrypted accuracy and agreement");
    ev->add_option("--net", net)->required();
    ev->add_option("--weights", weights)->required();
    ev->add_option("--dataset", dataset, "Dataset .spkf file or '<images>,<labels>' IDX pair")->required();
    ev->add_option("--count", count, "Samples to evaluate");
    ev->add_option("--mode", mode);
    ev->add_option("--backend", backend_kind);
    ev->add_option("--report", report);

    auto* gf = app.add_subcommand("gen-fixture", "Write a calibrated fixture network, inputs and golden traces");
    gf->add_option("--seed", seed);
    gf->add_option("--profile", fx_profile, "lenet-tiny, micro or zero");
    gf->add_option("--count", count, "Input samples");
    gf->add_option("--out", out)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*kg) return cmd_keygen(net, profile, seed, out);
        if (*inf) return cmd_infer(net, weights, input, mode, backend_kind, keys, report);
        if (*ev) return cmd_evaluate(net, weights, dataset, count, mode, backend_kind, report);
        if (*gf) {
            std::printf("digest %s\n", fixtures::gen_fixture(out, seed, fx_profile, count).c_str());
            return 0;
        }
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const LoadError& e) {
        std::cerr << "load error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const ParameterError& e) {
        std::cerr << "parameter error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const CapacityError& e) {
        std::cerr << "capacity error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const Error& e) {
        std::cerr << "HE contract error: " << e.what() << "\n";
        return kExitContract;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

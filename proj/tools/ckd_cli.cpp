// Command-line driver: regenerates the experiment curves and reports as CSV / JSON.
//
// Exit codes: 0 = all checks pass, 1 = a check failed, 2 = configuration error.

#include "ckd/experiments.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>

namespace {

constexpr int kExitCheckFailed = 1;
constexpr int kExitConfigError = 2;

struct Flags {
    std::string config_path;
    std::optional<int> instance, dim, length, period, repeats, depth, seeds, draws;
    std::optional<std::string> kernel, variant, eta;
    std::optional<std::uint64_t> seed;
    std::optional<double> q;
    bool ablate_bos = false;
    std::string out;
};

void add_common(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config_path, "JSON config file; flags override its values");
    cmd->add_option("--instance", f.instance, "sequence instance 1-4");
    cmd->add_option("--dim", f.dim, "token dimension d");
    cmd->add_option("--length", f.length, "sequence length T");
    cmd->add_option("--period", f.period, "period t_p (instance 3)");
    cmd->add_option("--repeats", f.repeats, "number of periods (instance 3)");
    cmd->add_option("--kernel", f.kernel, "id | exp");
    cmd->add_option("--variant", f.variant, "raw | softmax");
    cmd->add_option("--eta", f.eta, "auto | nilpotent | <number>");
    cmd->add_option("--depth", f.depth, "number of layers / descent steps n");
    cmd->add_option("--seeds", f.seeds, "number of sequences to average");
    cmd->add_option("--seed", f.seed, "base random seed");
    cmd->add_option("--q", f.q, "phase exponent (instance 4)");
    cmd->add_option("--draws", f.draws, "number of random draws (spectral)");
    cmd->add_flag("--ablate-bos", f.ablate_bos, "drop the BOS positional term from the softmax construction");
    cmd->add_option("--out", f.out, "output file (stdout when omitted)");
}

ckd::ExperimentConfig resolve(const Flags& f, ckd::ExperimentConfig defaults = {}) {
    ckd::ExperimentConfig c = std::move(defaults);
    if (!f.config_path.empty()) {
        std::ifstream in(f.config_path);
        if (!in) throw ckd::Error("cannot open config file " + f.config_path);
        c = ckd::config_from_json(nlohmann::json::parse(in), c);
    }
    if (f.instance) c.instance = *f.instance;
    if (f.dim) c.dim = *f.dim;
    if (f.length) c.length = *f.length;
    if (f.period) c.period = *f.period;
    if (f.repeats) c.repeats = *f.repeats;
    if (f.depth) c.depth = *f.depth;
    if (f.seeds) c.num_sequences = *f.seeds;
    if (f.draws) c.draws = *f.draws;
    if (f.kernel) c.kernel = ckd::parse_kernel(*f.kernel);
    if (f.variant) c.variant = ckd::parse_variant(*f.variant);
    if (f.eta) c.eta = *f.eta;
    if (f.seed) c.seed = *f.seed;
    if (f.q) c.q = *f.q;
    if (f.ablate_bos) c.ablate_bos = true;
    return c;
}

class Output {
public:
    explicit Output(const std::string& path) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_) throw ckd::Error("cannot open output file " + path);
        }
    }
    std::ostream& stream() { return file_ ? *file_ : std::cout; }

private:
    std::unique_ptr<std::ofstream> file_;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Causal kernel descent laboratory"};
    app.require_subcommand(1);
    app.set_version_flag("--version", ckd::kVersion);

    Flags f;
    auto* figure2 = app.add_subcommand("figure2", "squared error ‖u*_t - x_{t+1}‖² against t, averaged over seeds");
    auto* equivalence = app.add_subcommand("equivalence", "transformer vs causal descent gaps for id/exp/softmax");
    auto* spectral = app.add_subcommand("spectral", "fraction of random (W, x1) with rho(W(I - x1 x1^T)) < 1");
    auto* projector = app.add_subcommand("projector-demo", "norms of successive projections P_j...P_t nu");
    auto* depth_gap = app.add_subcommand("depth-gap", "softmax depth gap ‖u^k_t - u*_t‖ with the (1-1/t)^k reference");
    auto* gen = app.add_subcommand("gen", "emit a generated sequence as JSON");
    for (auto* cmd : {figure2, equivalence, spectral, projector, depth_gap, gen}) add_common(cmd, f);

    bool force_identity = false;
    int rotation_grid = 0;
    spectral->add_flag("--force-identity", force_identity, "append the degenerate draw W = I");
    spectral->add_option("--rotation-grid", rotation_grid, "check rho = |cos theta| on this many 2-d rotations");
    std::optional<int> nu_token;
    projector->add_option("--nu-from-token", nu_token, "start from nu_j instead of a random vector");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*figure2) {
            ckd::ExperimentConfig defaults;
            if (f.instance.value_or(1) == 4) defaults.dim = 4;
            const auto c = resolve(f, defaults);
            const auto curve = ckd::run_figure2(c);
            Output out(f.out);
            ckd::write_curve_csv(out.stream(), curve);
            return 0;
        }
        if (*equivalence) {
            ckd::ExperimentConfig defaults;
            defaults.instance = 2;
            defaults.dim = 8;
            defaults.length = 12;
            defaults.depth = 15;
            const auto report = ckd::run_equivalence(resolve(f, defaults));
            Output(f.out).stream() << report.dump(2) << '\n';
            return report.at("pass").get<bool>() ? 0 : kExitCheckFailed;
        }
        if (*spectral) {
            const auto report = ckd::run_spectral(resolve(f), {force_identity, rotation_grid});
            Output(f.out).stream() << report.dump(2) << '\n';
            bool ok = report.at("fraction_below_one").get<double>() >= 0.99;
            if (report.contains("rotation_grid")) ok = ok && report["rotation_grid"]["max_abs_error"].get<double>() <= 1e-10;
            return ok ? 0 : kExitCheckFailed;
        }
        if (*projector) {
            ckd::ExperimentConfig defaults;
            defaults.dim = 3;
            defaults.length = 6;
            const auto c = resolve(f, defaults);
            const auto demo = ckd::run_projector_demo(c.dim, c.length, c.seed, nu_token);
            Output out(f.out);
            ckd::write_projector_csv(out.stream(), demo);
            for (std::size_t i = 1; i < demo.norms.size(); ++i)
                if (demo.norms[i] > demo.norms[i - 1] + 1e-12) return kExitCheckFailed;
            return 0;
        }
        if (*depth_gap) {
            ckd::ExperimentConfig defaults;
            defaults.instance = 2;
            defaults.dim = 8;
            defaults.length = 20;
            defaults.depth = 50;
            const auto result = ckd::run_depth_gap(resolve(f, defaults));
            Output out(f.out);
            ckd::write_depth_gap_csv(out.stream(), result);
            return 0;
        }
        if (*gen) {
            const auto c = resolve(f);
            ckd::validate(c);
            Output(f.out).stream() << ckd::to_json(ckd::make_sequence(c, c.seed)).dump() << '\n';
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfigError;
    }
    return kExitConfigError;
}

#include "ckd/experiments.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace ckd {

ExperimentConfig config_from_json(const nlohmann::json& doc, ExperimentConfig base) {
    if (!doc.is_object()) throw Error("config: expected a JSON object");
    ExperimentConfig c = std::move(base);
    for (const auto& [key, value] : doc.items()) {
        if (key == "instance") c.instance = value.get<int>();
        else if (key == "dim") c.dim = value.get<int>();
        else if (key == "length") c.length = value.get<int>();
        else if (key == "period") c.period = value.get<int>();
        else if (key == "repeats") c.repeats = value.get<int>();
        else if (key == "kernel") c.kernel = parse_kernel(value.get<std::string>());
        else if (key == "variant") c.variant = parse_variant(value.get<std::string>());
        else if (key == "eta") c.eta = value.is_number() ? nlohmann::json(value).dump() : value.get<std::string>();
        else if (key == "depth") c.depth = value.get<int>();
        else if (key == "seeds" || key == "num_sequences") c.num_sequences = value.get<int>();
        else if (key == "seed") c.seed = value.get<std::uint64_t>();
        else if (key == "q") c.q = value.get<double>();
        else if (key == "ablate_bos") c.ablate_bos = value.get<bool>();
        else if (key == "draws") c.draws = value.get<int>();
        else throw Error("config: unknown key '" + key + "'");
    }
    return c;
}

nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json doc = {{"instance", c.instance},   {"dim", c.dim},
                          {"length", c.length},       {"variant", to_string(c.variant)},
                          {"eta", c.eta},             {"depth", c.depth},
                          {"num_sequences", c.num_sequences}, {"seed", c.seed},
                          {"q", c.q},                 {"ablate_bos", c.ablate_bos},
                          {"draws", c.draws},         {"kernel", to_string(resolved_kernel(c))}};
    if (c.instance == 3) {
        doc["period"] = resolved_period(c);
        doc["repeats"] = c.repeats.value_or(resolved_period(c));
    }
    return doc;
}

Kernel resolved_kernel(const ExperimentConfig& c) {
    if (c.kernel) return *c.kernel;
    return c.instance == 1 ? Kernel::Id : Kernel::Exp;
}

int resolved_period(const ExperimentConfig& c) {
    if (c.period) return *c.period;
    // One period per command, drawn from the base seed, so every sequence has the same length.
    Rng rng(c.seed ^ 0x9e3779b97f4a7c15ULL);
    return std::uniform_int_distribution<int>(20, 40)(rng);
}

void validate(const ExperimentConfig& c) {
    if (c.instance < 1 || c.instance > 4) throw Error("instance must be 1, 2, 3 or 4");
    if (c.dim < 1) throw Error("dim must be >= 1");
    if (c.instance != 3 && c.length < 2) throw Error("length must be >= 2");
    if (c.instance == 4 && c.dim % 2 != 0) throw Error("instance 4 needs an even dimension (tokens live in R^{2p})");
    if (c.instance == 3) {
        if (resolved_period(c) < 2) throw Error("period must be >= 2");
        if (c.repeats && *c.repeats < 1) throw Error("repeats must be >= 1");
    }
    if (c.num_sequences < 1) throw Error("seeds must be >= 1");
    if (c.depth < 0) throw Error("depth must be >= 0");
    const Kernel k = resolved_kernel(c);
    if (c.instance == 1 && k != Kernel::Id)
        throw Error("instance 1 (linear recursion) is defined with the id kernel; use instance 2 for exp");
    if ((c.instance == 2 || c.instance == 3) && k != Kernel::Exp)
        throw Error("instances 2 and 3 are defined with the exp kernel");
    if (c.variant == Variant::SoftmaxNormalized && k != Kernel::Exp)
        throw Error("the softmax-normalized variant requires the exp kernel");
    if (c.eta == "nilpotent" && c.variant != Variant::Raw)
        throw Error("eta=nilpotent only applies to the raw variant");
    if (c.eta != "auto" && c.eta != "nilpotent") {
        std::size_t used = 0;
        double value = 0;
        try {
            value = std::stod(c.eta, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != c.eta.size() || !(value > 0)) throw Error("eta must be auto, nilpotent or a positive number");
    }
}

double resolve_eta(const std::string& eta, const AttentionMatrix& matrix) {
    if (eta == "auto") return step_size_limit(matrix) / 2.0;
    if (eta == "nilpotent") {
        if (matrix.variant != Variant::Raw) throw Error("eta=nilpotent only applies to the raw variant");
        return 1.0 / matrix.entries(0, 0);
    }
    return std::stod(eta);
}

Sequence make_sequence(const ExperimentConfig& c, std::uint64_t seed) {
    switch (c.instance) {
        case 1: return generate_linear(c.dim, c.length, seed, Instance::LinearOrthogonal);
        case 2: return generate_linear(c.dim, c.length, seed, Instance::ExpOrthogonal);
        case 3: {
            const int period = resolved_period(c);
            return generate_periodic(c.dim, period, c.repeats.value_or(period), seed);
        }
        case 4: return generate_phase_modulated(c.dim / 2, c.length, c.q, seed);
        default: throw Error("instance must be 1, 2, 3 or 4");
    }
}

CurveOutput run_figure2(const ExperimentConfig& c) {
    validate(c);
    CurveOutput out;
    out.config = to_json(c);
    const Kernel kernel = resolved_kernel(c);
    for (int i = 0; i < c.num_sequences; ++i) {
        const std::uint64_t seed = c.seed + static_cast<std::uint64_t>(i);
        out.seeds.push_back(seed);
        out.per_seed.push_back(error_curve(make_sequence(c, seed), kernel, c.variant));
    }
    const std::size_t rows = out.per_seed.front().size();
    out.mean.assign(rows, 0.0);
    for (std::size_t t = 0; t < rows; ++t) {
        for (const auto& curve : out.per_seed) out.mean[t] += curve[t];
        out.mean[t] /= static_cast<double>(out.per_seed.size());
    }
    return out;
}

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

namespace {

void write_header(std::ostream& os, const nlohmann::json& config, bool with_timestamp) {
    os << "# ckd " << kVersion << '\n';
    os << "# config " << config.dump() << '\n';
    if (with_timestamp) os << "# generated_at " << timestamp_utc() << '\n';
}

}  // namespace

void write_curve_csv(std::ostream& os, const CurveOutput& curve, bool with_timestamp) {
    write_header(os, curve.config, with_timestamp);
    os << "t,mean";
    for (auto seed : curve.seeds) os << ",seed_" << seed;
    os << '\n';
    os << std::setprecision(17);
    for (std::size_t t = 0; t < curve.mean.size(); ++t) {
        os << (t + 1) << ',' << curve.mean[t];
        for (const auto& per : curve.per_seed) os << ',' << per[t];
        os << '\n';
    }
}

nlohmann::json run_equivalence(const ExperimentConfig& c) {
    ExperimentConfig base = c;
    base.kernel.reset();
    validate(base);
    nlohmann::json report = {{"config", to_json(base)}, {"tolerance", kEquivalenceTolerance}};
    bool all_pass = true;
    for (Normalization n : {Normalization::Id, Normalization::Exp, Normalization::Softmax}) {
        double worst = 0.0;
        double eta_used = 0.0;
        for (int i = 0; i < c.num_sequences; ++i) {
            const Sequence seq = make_sequence(base, c.seed + static_cast<std::uint64_t>(i));
            const AttentionMatrix a = build_attention_matrix(kernel_for(n), variant_for(n), seq.tokens);
            std::string eta = c.eta;
            if (eta == "nilpotent" && variant_for(n) != Variant::Raw) eta = "auto";
            eta_used = resolve_eta(eta, a);
            const auto rep = equivalence_report(seq.tokens, n, eta_used, c.depth, {c.ablate_bos, false});
            worst = std::max(worst, rep.max_gap);
        }
        const bool pass = worst <= kEquivalenceTolerance;
        all_pass = all_pass && pass;
        report["gaps"][std::string(to_string(n))] = {{"max_gap", worst}, {"eta", eta_used}, {"pass", pass}};
    }
    report["pass"] = all_pass;
    report["ablate_bos"] = c.ablate_bos;
    return report;
}

nlohmann::json run_spectral(const ExperimentConfig& c, const SpectralOptions& options) {
    if (c.dim < 1 || c.draws < 0) throw Error("spectral: need dim >= 1 and draws >= 0");
    constexpr int kBins = 10;
    std::vector<int> histogram(kBins, 0);
    int at_least_one = 0;
    int below_one = 0;
    int total = 0;
    double rho_max = 0.0;
    auto record = [&](double rho) {
        ++total;
        rho_max = std::max(rho_max, rho);
        if (rho < 1.0 - kSpectralGapMargin) {
            ++below_one;
            histogram[static_cast<std::size_t>(std::min(kBins - 1, static_cast<int>(rho * kBins)))]++;
        } else {
            ++at_least_one;
        }
    };
    Rng rng(c.seed);
    for (int i = 0; i < c.draws; ++i) {
        const Matrix w = sample_orthogonal(c.dim, rng);
        const Vector x1 = sample_sphere(c.dim, rng);
        record(linear_spectral_radius(w, x1));
    }
    if (options.force_identity) record(linear_spectral_radius(Matrix::Identity(c.dim, c.dim), sample_sphere(c.dim, rng)));

    nlohmann::json out = {{"config", {{"dim", c.dim}, {"draws", c.draws}, {"seed", c.seed},
                                      {"force_identity", options.force_identity}}},
                          {"total", total},
                          {"below_one", below_one},
                          {"fraction_below_one", total ? static_cast<double>(below_one) / total : 0.0},
                          {"rho_max", rho_max},
                          {"histogram", {{"bin_width", 1.0 / kBins}, {"counts", histogram}, {"at_least_one", at_least_one}}}};
    if (options.rotation_grid > 0) {
        double worst = 0.0;
        const Vector e1 = Vector::Unit(2, 0);
        for (int i = 1; i <= options.rotation_grid; ++i) {
            const double theta = std::acos(-1.0) * i / (options.rotation_grid + 1);
            Matrix r(2, 2);
            r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
            worst = std::max(worst, std::abs(linear_spectral_radius(r, e1) - std::abs(std::cos(theta))));
        }
        out["rotation_grid"] = {{"points", options.rotation_grid}, {"max_abs_error", worst}};
    }
    return out;
}

ProjectorDemo run_projector_demo(int d, int t, std::uint64_t seed, std::optional<int> start_at_token) {
    if (d < 1 || t < 1) throw Error("projector-demo: need d >= 1 and t >= 1");
    Rng rng(seed);
    ProjectorDemo demo;
    demo.directions.resize(t, d);
    for (int s = 0; s < t; ++s) demo.directions.row(s) = sample_sphere(d, rng).transpose();
    if (start_at_token) {
        if (*start_at_token < 1 || *start_at_token > t) throw Error("projector-demo: token index out of range");
        demo.start = demo.directions.row(*start_at_token - 1).transpose();
    } else {
        demo.start = sample_sphere(d, rng);
    }
    // k_id on unit vectors: the span coordinates reduce to plain R^d projections.
    Vector v = demo.start;
    for (int j = t - 1; j >= 0; --j) {
        const Vector nu = demo.directions.row(j).transpose();
        v -= nu * nu.dot(v);
        demo.steps.push_back(v);
        demo.norms.push_back(v.norm());
    }
    return demo;
}

void write_projector_csv(std::ostream& os, const ProjectorDemo& demo) {
    const auto t = demo.directions.rows();
    os << "j,norm";
    for (Eigen::Index i = 0; i < demo.start.size(); ++i) os << ",v" << i;
    os << '\n' << std::setprecision(17);
    os << "start," << demo.start.norm();
    for (Eigen::Index i = 0; i < demo.start.size(); ++i) os << ',' << demo.start(i);
    os << '\n';
    for (std::size_t i = 0; i < demo.steps.size(); ++i) {
        os << (t - static_cast<Eigen::Index>(i)) << ',' << demo.norms[i];
        for (Eigen::Index k = 0; k < demo.steps[i].size(); ++k) os << ',' << demo.steps[i](k);
        os << '\n';
    }
}

DepthGapOutput run_depth_gap(const ExperimentConfig& c) {
    ExperimentConfig base = c;
    if (!base.kernel) base.kernel = Kernel::Exp;
    if (base.instance == 1) base.instance = 2;
    base.variant = Variant::SoftmaxNormalized;
    base.eta = "1";
    validate(base);
    const Sequence seq = make_sequence(base, base.seed);
    return {to_json(base), softmax_depth_gap(seq.tokens, base.depth)};
}

void write_depth_gap_csv(std::ostream& os, const DepthGapOutput& out) {
    write_header(os, out.config, true);
    os << "k,t,gap,reference\n" << std::setprecision(17);
    for (std::size_t k = 0; k < out.gap.gap.size(); ++k)
        for (std::size_t t = 0; t < out.gap.gap[k].size(); ++t)
            os << k << ',' << (t + 1) << ',' << out.gap.gap[k][t] << ',' << out.gap.reference[k][t] << '\n';
}

}  // namespace ckd

#include "ckd/experiments.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace ckd;

namespace {

AttentionMatrix attention(const std::string& kernel, const std::string& variant, const Matrix& tokens) {
    return build_attention_matrix(parse_kernel(kernel), parse_variant(variant), tokens);
}

ExperimentConfig config_from(const std::string& json_text) {
    return config_from_json(json_text.empty() ? nlohmann::json::object() : nlohmann::json::parse(json_text));
}

py::dict sequence_dict(const Sequence& seq) {
    py::dict out;
    out["tokens"] = seq.tokens;
    out["json"] = to_json(seq).dump();
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Causal kernel descent core";
    m.attr("__version__") = std::string(kVersion);
    py::register_exception<Error>(m, "CkdError", PyExc_ValueError);

    m.def("attention_matrix",
          [](const std::string& kernel, const std::string& variant, const Matrix& tokens) {
              return attention(kernel, variant, tokens).entries;
          },
          py::arg("kernel"), py::arg("variant"), py::arg("tokens"));
    m.def("fixed_point",
          [](const std::string& kernel, const std::string& variant, const Matrix& tokens, const Matrix& targets) {
              return fixed_point(attention(kernel, variant, tokens), targets);
          },
          py::arg("kernel"), py::arg("variant"), py::arg("tokens"), py::arg("targets"));
    m.def("descent",
          [](const std::string& kernel, const std::string& variant, const Matrix& tokens, const Matrix& targets,
             double eta, int steps) {
              const AttentionMatrix a = attention(kernel, variant, tokens);
              DescentState s = initial_state(a, targets.cols(), eta);
              for (int k = 0; k < steps; ++k) s = step(s, a, targets);
              return s.u;
          },
          py::arg("kernel"), py::arg("variant"), py::arg("tokens"), py::arg("targets"), py::arg("eta"), py::arg("steps"));
    m.def("step_size_limit",
          [](const std::string& kernel, const std::string& variant, const Matrix& tokens) {
              return step_size_limit(attention(kernel, variant, tokens));
          });
    m.def("error_curve",
          [](const Matrix& tokens, const std::string& kernel, const std::string& variant) {
              return error_curve(tokens, parse_kernel(kernel), parse_variant(variant));
          },
          py::arg("tokens"), py::arg("kernel"), py::arg("variant") = "raw");
    m.def("dual_coefficients",
          [](const std::string& kernel, const Matrix& tokens, const Matrix& targets) {
              const auto mu = dual_coefficients(parse_kernel(kernel), tokens, targets);
              return py::make_tuple(mu.mu, mu.consistency_gap);
          });
    m.def("shifted_targets", &shifted_targets);

    m.def("linear_delta", &linear_delta, py::arg("w"), py::arg("x1"), py::arg("t"));
    m.def("linear_delta_by_projectors", &linear_delta_by_projectors, py::arg("w"), py::arg("x1"), py::arg("t"));
    m.def("linear_spectral_radius", &linear_spectral_radius, py::arg("w"), py::arg("x1"));
    m.def("periodic_contraction_norm",
          [](const Matrix& tokens, int period, const std::string& kernel) {
              return periodic_contraction_norm(make_frame(parse_kernel(kernel), tokens), period).norm;
          },
          py::arg("tokens"), py::arg("period"), py::arg("kernel") = "exp");

    m.def("generate_linear",
          [](int d, int length, std::uint64_t seed, int instance) {
              return sequence_dict(generate_linear(d, length, seed, instance_from_number(instance)));
          },
          py::arg("d"), py::arg("length"), py::arg("seed"), py::arg("instance") = 1);
    m.def("generate_periodic",
          [](int d, int period, int repeats, std::uint64_t seed) {
              return sequence_dict(generate_periodic(d, period, repeats, seed));
          });
    m.def("generate_phase_modulated",
          [](int p, int length, double q, std::uint64_t seed) {
              return sequence_dict(generate_phase_modulated(p, length, q, seed));
          },
          py::arg("p"), py::arg("length"), py::arg("q") = 2.0, py::arg("seed") = 0);

    m.def("build_t0_exact", &build_t0_exact);
    m.def("build_t0_approx", [](const Matrix& tokens, double sharpness) { return build_t0_approx(tokens, sharpness).tokens; });
    m.def("descent_layer_json",
          [](Eigen::Index d, double eta, const std::string& normalization, bool ablate_bos) {
              return to_json(build_descent_layer(d, eta, parse_normalization(normalization), {ablate_bos, false})).dump();
          },
          py::arg("d"), py::arg("eta"), py::arg("normalization"), py::arg("ablate_bos") = false);
    m.def("transformer_forward",
          [](const Matrix& tokens, const std::string& normalization, double eta, int depth,
             std::optional<double> t0_sharpness) {
              const TransformerModel model{build_descent_layer(tokens.cols(), eta, parse_normalization(normalization)),
                                           depth, t0_sharpness};
              return model_forward(model, tokens);
          },
          py::arg("tokens"), py::arg("normalization"), py::arg("eta"), py::arg("depth"),
          py::arg("t0_sharpness") = std::nullopt);
    m.def("equivalence_gap",
          [](const Matrix& tokens, const std::string& normalization, double eta, int depth, bool ablate_bos) {
              return equivalence_report(tokens, parse_normalization(normalization), eta, depth, {ablate_bos, false})
                  .gap_per_depth;
          },
          py::arg("tokens"), py::arg("normalization"), py::arg("eta"), py::arg("depth"), py::arg("ablate_bos") = false);

    m.def("_figure2", [](const std::string& config) {
        const CurveOutput curve = run_figure2(config_from(config));
        return py::make_tuple(curve.config.dump(), curve.mean, curve.per_seed);
    });
    m.def("_equivalence", [](const std::string& config) { return run_equivalence(config_from(config)).dump(); });
    m.def("_spectral", [](const std::string& config, bool force_identity, int rotation_grid) {
        return run_spectral(config_from(config), {force_identity, rotation_grid}).dump();
    });
}

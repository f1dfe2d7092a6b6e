#pragma once

#include "ckd/descent.hpp"
#include "ckd/kernels.hpp"

#include <nlohmann/json_fwd.hpp>

#include <optional>
#include <vector>

namespace ckd {

enum class Normalization { Id, Exp, Softmax };

std::string_view to_string(Normalization n);
Normalization parse_normalization(std::string_view name);

/// Kernel and attention-matrix variant implemented by a descent layer with normalization n.
Kernel kernel_for(Normalization n);
Variant variant_for(Normalization n);

/// Block offsets of the augmented token (prev, p1, cur, p2, cur_copy, u) in R^{4d+2}.
struct TokenLayout {
    Eigen::Index d;

    Eigen::Index prev() const { return 0; }
    Eigen::Index p1() const { return d; }
    Eigen::Index cur() const { return d + 1; }
    Eigen::Index p2() const { return 2 * d + 1; }
    Eigen::Index cur_copy() const { return 2 * d + 2; }
    Eigen::Index u() const { return 3 * d + 2; }
    Eigen::Index width() const { return 4 * d + 2; }
};

struct AttentionHead {
    Matrix wq;  // m x D
    Matrix wk;  // m x D
    Matrix wv;  // D x D
};

/// Causal multi-head attention update (rows are tokens):
///   out_t = sum_h sum_{s<=t} A^h[t][s] W_V^h e_s,  A^h[t,:] = N(<W_Q^h e_t, W_K^h e_:>).
/// The residual addition is left to the caller.
Matrix attention_forward(const std::vector<AttentionHead>& heads, const Matrix& e, Normalization n);

/// Normalized causal attention weights of a single head.
Matrix attention_weights(const AttentionHead& head, const Matrix& e, Normalization n);

struct DescentLayerOptions {
    // Drop the BOS term delta_{s=1} from the head-2 keys. Exists to show that
    // softmax normalization then no longer matches the descent.
    bool ablate_bos = false;
    // Zero-pad W_Q and W_K to (4d+2) x (4d+2).
    bool square = false;
};

/// One attention-only, two-head layer whose residual update is one step of the
/// causal kernel descent on the u-slot.
struct DescentLayer {
    Eigen::Index d = 0;
    double eta = 0.0;
    Normalization normalization = Normalization::Softmax;
    std::vector<AttentionHead> heads;
};

DescentLayer build_descent_layer(Eigen::Index d, double eta, Normalization n, DescentLayerOptions options = {});

/// e^0_t = (x_{t-1}, 0, x_t, 1, x_t, 0_d) for t > 1 and e^0_1 = (0_d, 1, x_1, 1, 0_d, 0_d).
Matrix build_t0_exact(const Tokens& tokens);

struct T0Approximation {
    Matrix tokens;  // T x (4d+2)
    // Attention of the two heads over the BOS-extended sequence x_{0:T};
    // row/column 0 is the BOS token x_0 = 0.
    Matrix head1;
    Matrix head2;
};

/// Finite-sharpness softmax layer with positions p_t = (-1)^t n t followed by
/// the sigmoid gate 2 / (1 + e^{n ‖a‖}); tends to build_t0_exact as n grows.
T0Approximation build_t0_approx(const Tokens& tokens, double sharpness);

struct TransformerModel {
    DescentLayer layer;
    int depth = 0;
    // When set, the augmentation uses build_t0_approx with this sharpness.
    std::optional<double> t0_sharpness;
};

/// e^0 .. e^n under e^{k+1} = e^k + T(e^k).
std::vector<Matrix> forward_trace(const TransformerModel& model, const Tokens& tokens);

/// M^n(x_{1:t}) = P e^n_t for every t (rows).
Matrix model_forward(const TransformerModel& model, const Tokens& tokens);

struct EquivalenceReport {
    std::vector<double> gap_per_depth;  // max_t ‖u-slot(e^k_t) - u^k_t‖, k = 0..n
    double max_gap = 0.0;
};

/// Runs the transformer and the descent side by side with matching kernel,
/// variant and step size.
EquivalenceReport equivalence_report(const Tokens& tokens, Normalization n, double eta, int depth,
                                     DescentLayerOptions options = {});

nlohmann::json to_json(const DescentLayer& layer);
DescentLayer descent_layer_from_json(const nlohmann::json& doc);

}  // namespace ckd

#pragma once

#include "ckd/kernels.hpp"
#include "ckd/seqgen.hpp"

#include <optional>
#include <vector>

namespace ckd {

// Targets passed to the descent routines are x_{2:t+1}, one row per token of
// the attention matrix. The last row never enters an update (the indicator
// 1_{s<t} drops it), so callers may leave it zero when x_{t+1} is unknown.

/// Predictions u^k_{1:t} of the causal kernel descent.
struct DescentState {
    Matrix u;  // t x d
    int k = 0;
    double eta = 0.0;
};

DescentState initial_state(const AttentionMatrix& matrix, Eigen::Index dim, double eta);

/// One synchronous update
///   u^{k+1}_t = u^k_t - eta * sum_{s<=t} A[t][s] (u^k_s - 1_{s<t} x_{s+1}).
DescentState step(const DescentState& state, const AttentionMatrix& matrix, const Matrix& targets);

/// u* = A^{-1} (A - diag A) x_{2:t+1} by forward substitution. Row t is
/// computed from rows < t only, in a fixed order, so a prefix of the
/// result is bit-identical to the result on the prefix.
Matrix fixed_point(const AttentionMatrix& matrix, const Matrix& targets);

/// Largest admissible step size: 2 / k(x_1, x_1) for Raw, 2 for SoftmaxNormalized.
double step_size_limit(const AttentionMatrix& matrix);

struct NilpotentRun {
    Matrix u;
    Matrix fixed_point;
    double max_abs_gap = 0.0;
    bool reached_fixed_point = false;  // max_abs_gap <= 1e-10
};

/// n steps with eta = 1 / k(x_1, x_1), from zero unless `start` is given. Raw variant only.
/// From zero the first row already sits at its fixed point, so t - 1 steps suffice;
/// a generic start needs the full t.
NilpotentRun nilpotent_run(const AttentionMatrix& matrix, const Matrix& targets, int n,
                           const std::optional<Matrix>& start = std::nullopt);

struct DualCoefficients {
    Matrix mu;  // t x d
    // max_t ‖(x_{t+1} - u*_t) - k(x_1,x_1) mu_t‖ between the two routes.
    double consistency_gap = 0.0;
};

/// Solves sum_{s<=t} mu_s k(x_s, x_t) = x_{t+1} for every t, and also forms
/// mu_t = (x_{t+1} - u*_t) / k(x_1, x_1) from the fixed point to report the gap.
DualCoefficients dual_coefficients(Kernel kernel, const Tokens& tokens, const Matrix& targets);

/// ‖u*_t - x_{t+1}‖² for t = 1..T-1.
std::vector<double> error_curve(const Tokens& tokens, Kernel kernel, Variant variant = Variant::Raw);
std::vector<double> error_curve(const Sequence& sequence, Kernel kernel, Variant variant = Variant::Raw);

/// Targets x_{2:T} for tokens x_{1:T}, with a zero final row.
Matrix shifted_targets(const Tokens& tokens);

struct DepthGap {
    // gap[k][t] = ‖u^k_t - u*_t‖, reference[k][t] = (1 - 1/(t+1))^k, k = 0..n.
    std::vector<std::vector<double>> gap;
    std::vector<std::vector<double>> reference;
};

/// Softmax-normalized exp kernel, eta = 1, u^0 = 0.
DepthGap softmax_depth_gap(const Tokens& tokens, int n);

/// ‖u^k - u*‖_max for k = 0..n from u^0 = 0.
std::vector<double> iterate_gaps(const AttentionMatrix& matrix, const Matrix& targets, double eta, int n);

struct LogLinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t points = 0;
};

/// Least squares of log(values[i]) against i over entries above `floor`.
LogLinearFit fit_log_linear(const std::vector<double>& values, double floor = 1e-12);

}  // namespace ckd

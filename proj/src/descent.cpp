#include "ckd/descent.hpp"

#include <cmath>

namespace ckd {

namespace {

void check_shapes(const AttentionMatrix& matrix, const Matrix& targets, const char* who) {
    if (matrix.entries.rows() != matrix.entries.cols() || targets.rows() != matrix.size())
        throw Error(std::string(who) + ": targets must have one row per token of the attention matrix");
}

// rhs_t = sum_{s<t} A[t][s] x_{s+1}
Matrix off_diagonal_rhs(const AttentionMatrix& matrix, const Matrix& targets) {
    const Eigen::Index n = matrix.size();
    Matrix rhs = Matrix::Zero(n, targets.cols());
    for (Eigen::Index t = 0; t < n; ++t)
        for (Eigen::Index s = 0; s < t; ++s) rhs.row(t) += matrix.entries(t, s) * targets.row(s);
    return rhs;
}

}  // namespace

DescentState initial_state(const AttentionMatrix& matrix, Eigen::Index dim, double eta) {
    return {Matrix::Zero(matrix.size(), dim), 0, eta};
}

DescentState step(const DescentState& state, const AttentionMatrix& matrix, const Matrix& targets) {
    check_shapes(matrix, targets, "step");
    if (state.u.rows() != matrix.size() || state.u.cols() != targets.cols())
        throw Error("step: prediction shape does not match the attention matrix and targets");
    if (!(state.eta >= 0.0)) throw Error("step: eta must be non-negative");

    const Eigen::Index n = matrix.size();
    DescentState next{state.u, state.k + 1, state.eta};
    Eigen::RowVectorXd grad(targets.cols());
    for (Eigen::Index t = 0; t < n; ++t) {
        grad.setZero();
        for (Eigen::Index s = 0; s < t; ++s) grad += matrix.entries(t, s) * (state.u.row(s) - targets.row(s));
        grad += matrix.entries(t, t) * state.u.row(t);
        next.u.row(t) -= state.eta * grad;
    }
    return next;
}

Matrix fixed_point(const AttentionMatrix& matrix, const Matrix& targets) {
    check_shapes(matrix, targets, "fixed_point");
    const Eigen::Index n = matrix.size();
    Matrix u = off_diagonal_rhs(matrix, targets);
    for (Eigen::Index t = 0; t < n; ++t) {
        const double diag = matrix.entries(t, t);
        if (diag == 0.0 || !std::isfinite(diag)) throw Error("fixed_point: zero diagonal entry in the attention matrix");
        for (Eigen::Index s = 0; s < t; ++s) u.row(t) -= matrix.entries(t, s) * u.row(s);
        u.row(t) /= diag;
    }
    return u;
}

double step_size_limit(const AttentionMatrix& matrix) {
    if (matrix.variant == Variant::SoftmaxNormalized) return 2.0;
    return 2.0 / matrix.entries(0, 0);
}

NilpotentRun nilpotent_run(const AttentionMatrix& matrix, const Matrix& targets, int n,
                           const std::optional<Matrix>& start) {
    if (matrix.variant != Variant::Raw) throw Error("nilpotent_run: only the raw attention matrix is nilpotent-reachable");
    if (n < 0) throw Error("nilpotent_run: negative iteration count");
    check_shapes(matrix, targets, "nilpotent_run");
    DescentState state = initial_state(matrix, targets.cols(), 1.0 / matrix.entries(0, 0));
    if (start) {
        if (start->rows() != state.u.rows() || start->cols() != state.u.cols())
            throw Error("nilpotent_run: start has the wrong shape");
        state.u = *start;
    }
    for (int k = 0; k < n; ++k) state = step(state, matrix, targets);
    NilpotentRun run{std::move(state.u), fixed_point(matrix, targets)};
    run.max_abs_gap = (run.u - run.fixed_point).cwiseAbs().maxCoeff();
    run.reached_fixed_point = run.max_abs_gap <= 1e-10;
    return run;
}

DualCoefficients dual_coefficients(Kernel kernel, const Tokens& tokens, const Matrix& targets) {
    const AttentionMatrix a = build_attention_matrix(kernel, Variant::Raw, tokens);
    check_shapes(a, targets, "dual_coefficients");
    const Eigen::Index n = a.size();
    const double scale = std::sqrt(a.entries.diagonal().cwiseAbs().maxCoeff());
    DualCoefficients out{Matrix(n, targets.cols())};
    for (Eigen::Index t = 0; t < n; ++t) {
        const double diag = a.entries(t, t);
        if (!(std::abs(diag) > 1e-12 * std::max(scale * scale, 1.0)))
            throw Error("dual_coefficients: singular interpolation system at t=" + std::to_string(t + 1) +
                        " (token has vanishing kernel norm)");
        out.mu.row(t) = targets.row(t);
        for (Eigen::Index s = 0; s < t; ++s) out.mu.row(t) -= a.entries(t, s) * out.mu.row(s);
        out.mu.row(t) /= diag;
    }
    const Matrix u_star = fixed_point(a, targets);
    const double k11 = a.entries(0, 0);
    for (Eigen::Index t = 0; t < n; ++t)
        out.consistency_gap =
            std::max(out.consistency_gap, ((targets.row(t) - u_star.row(t)) - k11 * out.mu.row(t)).norm());
    return out;
}

Matrix shifted_targets(const Tokens& tokens) {
    Matrix targets = Matrix::Zero(tokens.rows(), tokens.cols());
    if (tokens.rows() > 1) targets.topRows(tokens.rows() - 1) = tokens.bottomRows(tokens.rows() - 1);
    return targets;
}

std::vector<double> error_curve(const Tokens& tokens, Kernel kernel, Variant variant) {
    if (tokens.rows() < 2) throw Error("error_curve: need at least two tokens");
    const Eigen::Index t_max = tokens.rows() - 1;
    const Tokens prefix = tokens.topRows(t_max);
    const Matrix targets = tokens.bottomRows(t_max);
    const Matrix u = fixed_point(build_attention_matrix(kernel, variant, prefix), targets);
    std::vector<double> curve(static_cast<std::size_t>(t_max));
    for (Eigen::Index t = 0; t < t_max; ++t) curve[static_cast<std::size_t>(t)] = (u.row(t) - targets.row(t)).squaredNorm();
    return curve;
}

std::vector<double> error_curve(const Sequence& sequence, Kernel kernel, Variant variant) {
    return error_curve(sequence.tokens, kernel, variant);
}

std::vector<double> iterate_gaps(const AttentionMatrix& matrix, const Matrix& targets, double eta, int n) {
    const Matrix u_star = fixed_point(matrix, targets);
    DescentState state = initial_state(matrix, targets.cols(), eta);
    std::vector<double> gaps;
    gaps.reserve(static_cast<std::size_t>(n) + 1);
    gaps.push_back(u_star.cwiseAbs().maxCoeff());
    for (int k = 0; k < n; ++k) {
        state = step(state, matrix, targets);
        gaps.push_back((state.u - u_star).cwiseAbs().maxCoeff());
    }
    return gaps;
}

DepthGap softmax_depth_gap(const Tokens& tokens, int n) {
    if (n < 0) throw Error("softmax_depth_gap: negative depth");
    const AttentionMatrix a = build_attention_matrix(Kernel::Exp, Variant::SoftmaxNormalized, tokens);
    const Matrix targets = shifted_targets(tokens);
    const Matrix u_star = fixed_point(a, targets);
    const Eigen::Index len = a.size();

    DepthGap out;
    DescentState state = initial_state(a, tokens.cols(), 1.0);
    for (int k = 0; k <= n; ++k) {
        if (k > 0) state = step(state, a, targets);
        std::vector<double> gap(static_cast<std::size_t>(len));
        std::vector<double> ref(static_cast<std::size_t>(len));
        for (Eigen::Index t = 0; t < len; ++t) {
            gap[static_cast<std::size_t>(t)] = (state.u.row(t) - u_star.row(t)).norm();
            ref[static_cast<std::size_t>(t)] = std::pow(1.0 - 1.0 / static_cast<double>(t + 1), k);
        }
        out.gap.push_back(std::move(gap));
        out.reference.push_back(std::move(ref));
    }
    return out;
}

LogLinearFit fit_log_linear(const std::vector<double>& values, double floor) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(values[i] > floor)) continue;
        const double x = static_cast<double>(i);
        const double y = std::log(values[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        syy += y * y;
        ++count;
    }
    LogLinearFit fit;
    fit.points = count;
    if (count < 2) return fit;
    const double n = static_cast<double>(count);
    const double cov = sxy - sx * sy / n;
    const double var_x = sxx - sx * sx / n;
    const double var_y = syy - sy * sy / n;
    fit.slope = cov / var_x;
    fit.intercept = (sy - fit.slope * sx) / n;
    fit.r_squared = var_y > 0 ? (cov * cov) / (var_x * var_y) : 1.0;
    return fit;
}

}  // namespace ckd

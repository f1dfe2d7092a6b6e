#pragma once

#include "ckd/descent.hpp"
#include "ckd/kernels.hpp"

#include <optional>
#include <vector>

namespace ckd {

/// Finite coordinates for span{phi(x_1), ..., phi(x_T)}.
///
/// A coefficient vector c represents v = sum_s c_s phi(x_s); inner products
/// are <a, b> = a^T G b. Projectors map the span into itself, so every
/// operation below is exact in these coordinates.
struct GramFrame {
    Tokens tokens;
    Kernel kernel = Kernel::Exp;
    Matrix g;
    Vector normalizers;  // sqrt(k(x_t, x_t))

    Eigen::Index size() const { return g.rows(); }
};

GramFrame make_frame(Kernel kernel, const Tokens& tokens);

/// Frame over an explicitly given PD Gram matrix (no tokens attached).
GramFrame frame_from_gram(const Matrix& g);

/// Coefficients of nu_t = phi(x_t) / sqrt(k(x_t, x_t)) (0-based t).
Vector unit_feature(const GramFrame& frame, Eigen::Index t);

double inner(const GramFrame& frame, const Vector& a, const Vector& b);
double norm(const GramFrame& frame, const Vector& c);

/// P_t c = c - e_t (G[t,:] c) / G[t][t]  (0-based t).
Vector apply_projector(const GramFrame& frame, Eigen::Index t, const Vector& c);

/// P_{order[0]} P_{order[1]} ... P_{order[m-1]} v; the last listed projector acts first.
Vector projector_product(const GramFrame& frame, const std::vector<Eigen::Index>& order, const Vector& v);

/// Coefficient matrix of P_t: I - e_t G[t,:] / G[t][t].
Matrix projector_matrix(const GramFrame& frame, Eigen::Index t);

/// Delta_t = W_t - W for the linear instance with k_id, via the closed form
/// -(W (I - x_1 x_1^T))^t W^{-t+1}.
Matrix linear_delta(const Matrix& w, const Vector& x1, int t);

/// The same Delta_t as -W P_1 ... P_t with P_s = I - x_s x_s^T, x_s = W^{s-1} x_1.
Matrix linear_delta_by_projectors(const Matrix& w, const Vector& x1, int t);

/// rho(W (I - x_1 x_1^T)).
double linear_spectral_radius(const Matrix& w, const Vector& x1);

/// W_t phi(x) = sum_s mu_s k(x_s, x).
Vector wt_apply(const GramFrame& frame, const DualCoefficients& mu, const Vector& x);

/// max over s, t, r of |<nu_{s+r}, nu_{t+r}> - <nu_s, nu_t>| with shifts up to max_shift
/// (all admissible shifts when not given).
double stationarity_check(const GramFrame& frame, std::optional<int> max_shift = std::nullopt);

struct ContractionNorm {
    double norm = 0.0;
    double condition_number = 0.0;
};

/// Operator norm of P_1 P_2 ... P_{t_p} on the span of the first t_p features:
/// sqrt of the largest generalized eigenvalue of (M^T G M, G), solved by
/// Cholesky whitening. Rejects Gram matrices with condition number > 1e12.
ContractionNorm periodic_contraction_norm(const GramFrame& frame, int period);

}  // namespace ckd

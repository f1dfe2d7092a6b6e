#include "ckd/rkhs.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <sstream>

namespace ckd {

namespace {

void check_index(const GramFrame& frame, Eigen::Index t) {
    if (t < 0 || t >= frame.size()) throw Error("projector index out of range");
}

void check_orthogonal(const Matrix& w) {
    if (w.rows() != w.cols()) throw Error("expected a square matrix");
    const double dev = (w.transpose() * w - Matrix::Identity(w.rows(), w.cols())).norm();
    if (dev > 1e-8) {
        std::ostringstream os;
        os << "matrix is not orthogonal (‖WᵀW - I‖_F = " << dev << ")";
        throw Error(os.str());
    }
}

}  // namespace

GramFrame make_frame(Kernel kernel, const Tokens& tokens) {
    GramFrame frame{tokens, kernel, gram(kernel, tokens), {}};
    frame.normalizers = frame.g.diagonal().cwiseSqrt();
    return frame;
}

GramFrame frame_from_gram(const Matrix& g) {
    if (g.rows() != g.cols() || g.rows() == 0) throw Error("frame_from_gram: expected a nonempty square matrix");
    GramFrame frame{Tokens(), Kernel::Id, g, g.diagonal().cwiseSqrt()};
    return frame;
}

Vector unit_feature(const GramFrame& frame, Eigen::Index t) {
    check_index(frame, t);
    Vector c = Vector::Zero(frame.size());
    c(t) = 1.0 / frame.normalizers(t);
    return c;
}

double inner(const GramFrame& frame, const Vector& a, const Vector& b) { return a.dot(frame.g * b); }

double norm(const GramFrame& frame, const Vector& c) { return std::sqrt(std::max(0.0, inner(frame, c, c))); }

Vector apply_projector(const GramFrame& frame, Eigen::Index t, const Vector& c) {
    check_index(frame, t);
    if (c.size() != frame.size()) throw Error("apply_projector: coefficient vector has the wrong length");
    Vector out = c;
    out(t) -= frame.g.row(t).dot(c) / frame.g(t, t);
    return out;
}

Vector projector_product(const GramFrame& frame, const std::vector<Eigen::Index>& order, const Vector& v) {
    Vector out = v;
    for (auto it = order.rbegin(); it != order.rend(); ++it) out = apply_projector(frame, *it, out);
    return out;
}

Matrix projector_matrix(const GramFrame& frame, Eigen::Index t) {
    check_index(frame, t);
    Matrix m = Matrix::Identity(frame.size(), frame.size());
    m.row(t) -= frame.g.row(t) / frame.g(t, t);
    return m;
}

Matrix linear_delta(const Matrix& w, const Vector& x1, int t) {
    check_orthogonal(w);
    if (t < 1) throw Error("linear_delta: t must be >= 1");
    const Eigen::Index d = w.rows();
    const Matrix contraction = w * (Matrix::Identity(d, d) - x1 * x1.transpose());
    Matrix power = Matrix::Identity(d, d);
    for (int i = 0; i < t; ++i) power = power * contraction;
    Matrix inverse_power = Matrix::Identity(d, d);
    const Matrix wt = w.transpose();
    for (int i = 0; i < t - 1; ++i) inverse_power = inverse_power * wt;
    return -power * inverse_power;
}

Matrix linear_delta_by_projectors(const Matrix& w, const Vector& x1, int t) {
    check_orthogonal(w);
    if (t < 1) throw Error("linear_delta_by_projectors: t must be >= 1");
    const Eigen::Index d = w.rows();
    Matrix product = w;
    Vector x = x1;
    for (int s = 1; s <= t; ++s) {
        product = product * (Matrix::Identity(d, d) - x * x.transpose());
        x = w * x;
    }
    return -product;
}

double linear_spectral_radius(const Matrix& w, const Vector& x1) {
    const Eigen::Index d = w.rows();
    const Matrix m = w * (Matrix::Identity(d, d) - x1 * x1.transpose());
    Eigen::EigenSolver<Matrix> solver(m, false);
    if (solver.info() != Eigen::Success) throw Error("linear_spectral_radius: eigenvalue computation failed");
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

Vector wt_apply(const GramFrame& frame, const DualCoefficients& mu, const Vector& x) {
    if (mu.mu.rows() > frame.tokens.rows()) throw Error("wt_apply: more coefficients than frame tokens");
    Vector out = Vector::Zero(mu.mu.cols());
    for (Eigen::Index s = 0; s < mu.mu.rows(); ++s)
        out += mu.mu.row(s).transpose() * eval_kernel(frame.kernel, frame.tokens.row(s), x);
    return out;
}

double stationarity_check(const GramFrame& frame, std::optional<int> max_shift) {
    const Eigen::Index n = frame.size();
    Matrix cosine(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            cosine(i, j) = frame.g(i, j) / (frame.normalizers(i) * frame.normalizers(j));
    const Eigen::Index shifts = max_shift ? std::min<Eigen::Index>(*max_shift, n - 1) : n - 1;
    double worst = 0.0;
    for (Eigen::Index r = 1; r <= shifts; ++r)
        for (Eigen::Index s = 0; s + r < n; ++s)
            for (Eigen::Index t = 0; t + r < n; ++t)
                worst = std::max(worst, std::abs(cosine(s + r, t + r) - cosine(s, t)));
    return worst;
}

ContractionNorm periodic_contraction_norm(const GramFrame& frame, int period) {
    if (period < 1 || period > frame.size()) throw Error("periodic_contraction_norm: period out of range");
    const Matrix g = frame.g.topLeftCorner(period, period);

    Eigen::SelfAdjointEigenSolver<Matrix> spectrum(g, Eigen::EigenvaluesOnly);
    const double lo = spectrum.eigenvalues().minCoeff();
    const double hi = spectrum.eigenvalues().maxCoeff();
    ContractionNorm out;
    out.condition_number = lo > 0 ? hi / lo : std::numeric_limits<double>::infinity();
    if (!(out.condition_number <= 1e12)) {
        std::ostringstream os;
        os << "periodic_contraction_norm: Gram condition number " << out.condition_number
           << " exceeds 1e12 (are the period tokens distinct?)";
        throw Error(os.str());
    }

    GramFrame sub = frame_from_gram(g);
    Matrix m = Matrix::Identity(period, period);
    for (Eigen::Index i = 0; i < period; ++i) m = m * projector_matrix(sub, i);

    // Whiten: with G = L L^T the generalized problem becomes the symmetric
    // eigenproblem of (L^T M L^{-T})^T (L^T M L^{-T}).
    Eigen::LLT<Matrix> llt(g);
    if (llt.info() != Eigen::Success) throw Error("periodic_contraction_norm: Gram matrix is not positive definite");
    const Matrix lt = llt.matrixU();  // L^T
    const Matrix b = lt * m * llt.matrixU().solve(Matrix::Identity(period, period));
    Eigen::SelfAdjointEigenSolver<Matrix> whitened(b.transpose() * b, Eigen::EigenvaluesOnly);
    out.norm = std::sqrt(std::max(0.0, whitened.eigenvalues().maxCoeff()));
    return out;
}

}  // namespace ckd

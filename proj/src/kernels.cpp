#include "ckd/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <limits>
#include <sstream>

namespace ckd {

namespace {

constexpr double kUnitNormTolerance = 1e-8;

void default_warning(const std::string& message) { std::cerr << "warning: " << message << '\n'; }

std::atomic<WarningHandler> g_warning_handler{&default_warning};

void check_unit_tokens(const Tokens& tokens, const char* who) {
    const double dev = max_unit_norm_deviation(tokens);
    if (dev > kUnitNormTolerance) {
        std::ostringstream os;
        os << who << ": tokens deviate from the unit sphere by " << dev;
        warn(os.str());
    }
}

}  // namespace

void set_warning_handler(WarningHandler handler) { g_warning_handler.store(handler); }

void warn(const std::string& message) {
    if (auto handler = g_warning_handler.load()) handler(message);
}

std::string_view to_string(Kernel kernel) { return kernel == Kernel::Id ? "id" : "exp"; }

std::string_view to_string(Variant variant) { return variant == Variant::Raw ? "raw" : "softmax"; }

Kernel parse_kernel(std::string_view name) {
    if (name == "id") return Kernel::Id;
    if (name == "exp") return Kernel::Exp;
    throw Error("unknown kernel '" + std::string(name) + "' (expected id or exp)");
}

Variant parse_variant(std::string_view name) {
    if (name == "raw") return Variant::Raw;
    if (name == "softmax" || name == "normalized") return Variant::SoftmaxNormalized;
    throw Error("unknown variant '" + std::string(name) + "' (expected raw or softmax)");
}

double eval_kernel(Kernel kernel, const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) {
    const double dot = x.dot(y);
    return kernel == Kernel::Id ? dot : std::exp(dot);
}

double max_unit_norm_deviation(const Tokens& tokens) {
    double dev = 0.0;
    for (Eigen::Index t = 0; t < tokens.rows(); ++t) dev = std::max(dev, std::abs(tokens.row(t).norm() - 1.0));
    return dev;
}

AttentionMatrix build_attention_matrix(Kernel kernel, Variant variant, const Tokens& tokens) {
    if (tokens.rows() == 0) throw Error("build_attention_matrix: empty token list");
    if (variant == Variant::SoftmaxNormalized && kernel != Kernel::Exp)
        throw Error("build_attention_matrix: softmax normalization is only defined for the exp kernel");
    check_unit_tokens(tokens, "build_attention_matrix");

    const Eigen::Index n = tokens.rows();
    AttentionMatrix a{Matrix::Zero(n, n), variant, kernel};
    for (Eigen::Index t = 0; t < n; ++t) {
        if (variant == Variant::Raw) {
            for (Eigen::Index s = 0; s <= t; ++s) a.entries(t, s) = eval_kernel(kernel, tokens.row(t), tokens.row(s));
            continue;
        }
        // Row-wise softmax of the scores <x_t, x_s> with max-subtraction.
        double max_score = -std::numeric_limits<double>::infinity();
        for (Eigen::Index s = 0; s <= t; ++s) max_score = std::max(max_score, tokens.row(t).dot(tokens.row(s)));
        double sum = 0.0;
        for (Eigen::Index s = 0; s <= t; ++s) {
            const double w = std::exp(tokens.row(t).dot(tokens.row(s)) - max_score);
            a.entries(t, s) = w;
            sum += w;
        }
        a.entries.row(t).head(t + 1) /= sum;
    }
    return a;
}

Matrix gram(Kernel kernel, const Tokens& tokens) {
    if (tokens.rows() == 0) throw Error("gram: empty token list");
    check_unit_tokens(tokens, "gram");
    const Eigen::Index n = tokens.rows();
    Matrix g(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j <= i; ++j) {
            g(i, j) = eval_kernel(kernel, tokens.row(i), tokens.row(j));
            g(j, i) = g(i, j);
        }
    }
    return g;
}

}  // namespace ckd

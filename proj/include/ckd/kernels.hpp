#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <string_view>

namespace ckd {

// Rows of a Tokens matrix are the tokens x_1..x_T.
using Tokens = Eigen::MatrixXd;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Kernel { Id, Exp };

enum class Variant { Raw, SoftmaxNormalized };

std::string_view to_string(Kernel kernel);
std::string_view to_string(Variant variant);
Kernel parse_kernel(std::string_view name);
Variant parse_variant(std::string_view name);

/// k_id(x, y) = <x, y>, k_exp(x, y) = exp(<x, y>).
double eval_kernel(Kernel kernel, const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y);

/// Lower-triangular causal attention matrix over a token list.
///
/// Raw:               A[t][s] = k(x_t, x_s) for s <= t.
/// SoftmaxNormalized: A[t][s] = k(x_t, x_s) / sum_{tau <= t} k(x_t, x_tau), exp kernel only.
struct AttentionMatrix {
    Matrix entries;
    Variant variant = Variant::Raw;
    Kernel kernel = Kernel::Id;

    Eigen::Index size() const { return entries.rows(); }
};

AttentionMatrix build_attention_matrix(Kernel kernel, Variant variant, const Tokens& tokens);

/// Symmetric Gram matrix G[i][j] = k(x_i, x_j).
Matrix gram(Kernel kernel, const Tokens& tokens);

/// Largest |‖x_t‖ - 1| over the rows.
double max_unit_norm_deviation(const Tokens& tokens);

// Called with a message whenever a matrix builder sees tokens off the unit sphere.
// Defaults to printing on stderr; pass nullptr to silence.
using WarningHandler = void (*)(const std::string&);
void set_warning_handler(WarningHandler handler);
void warn(const std::string& message);

}  // namespace ckd

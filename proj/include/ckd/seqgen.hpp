#pragma once

#include "ckd/kernels.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <random>
#include <variant>

namespace ckd {

enum class Instance { LinearOrthogonal = 1, ExpOrthogonal = 2, Periodic = 3, PhaseModulated = 4 };

std::string_view to_string(Instance instance);
Instance instance_from_number(int number);

// Hidden map x -> W x, W in O(d). Instances 1 and 2.
struct OrthogonalHidden {
    Matrix w;
};

// Base cycle of length `period`, one token per row. Instance 3.
struct PeriodicHidden {
    int period = 0;
    Matrix base;
};

// Unitary mixing, phase bias and phase exponent of instance 4.
struct PhaseHidden {
    Eigen::MatrixXcd u;
    Vector theta;
    double q = 2.0;
};

using HiddenParams = std::variant<OrthogonalHidden, PeriodicHidden, PhaseHidden>;

struct Sequence {
    Tokens tokens;  // T x d
    int dim = 0;
    Instance instance = Instance::LinearOrthogonal;
    HiddenParams hidden;
    std::uint64_t seed = 0;

    Eigen::Index length() const { return tokens.rows(); }
};

using Rng = std::mt19937_64;

/// Haar-distributed orthogonal matrix: QR of a standard Gaussian matrix with
/// the signs of diag(R) folded into Q.
Matrix sample_orthogonal(int d, std::uint64_t seed);
Matrix sample_orthogonal(int d, Rng& rng);

/// Haar-distributed unitary matrix, complex analogue of sample_orthogonal.
Eigen::MatrixXcd sample_unitary(int p, Rng& rng);

/// Uniform point on S^{d-1} (normalized Gaussian).
Vector sample_sphere(int d, Rng& rng);

/// x_{t+1} = W x_t with W Haar on O(d) and x_1 uniform on the sphere.
/// `instance` only tags the result (1 for k_id experiments, 2 for k_exp).
Sequence generate_linear(int d, int length, std::uint64_t seed, Instance instance = Instance::LinearOrthogonal);

/// Orbit of a given orthogonal map from a given start point.
Sequence generate_from_map(const Matrix& w, const Vector& x1, int length,
                           Instance instance = Instance::LinearOrthogonal);

/// Base cycle of `period` distinct sphere points tiled `repeats` times.
Sequence generate_periodic(int d, int period, int repeats, std::uint64_t seed);

/// Instance 4 on R^{2p}: z' = U z, z'' = e^{i theta} |z'| e^{i q arg z'}, z_next = U^* z''.
Sequence generate_phase_modulated(int p, int length, double q, std::uint64_t seed);

/// One application of the instance-4 map.
Vector phase_modulated_step(const PhaseHidden& hidden, const Vector& x);

nlohmann::json to_json(const Sequence& sequence);
Sequence sequence_from_json(const nlohmann::json& doc);

}  // namespace ckd

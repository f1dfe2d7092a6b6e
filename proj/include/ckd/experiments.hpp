#pragma once

#include "ckd/descent.hpp"
#include "ckd/rkhs.hpp"
#include "ckd/seqgen.hpp"
#include "ckd/transformer.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ckd {

inline constexpr const char* kVersion = "0.1.0";

// Thresholds shared by the CLI and the acceptance suite.
inline constexpr double kEquivalenceTolerance = 1e-10;
inline constexpr double kSpectralGapMargin = 1e-12;

struct ExperimentConfig {
    int instance = 1;
    int dim = 15;
    int length = 100;
    std::optional<int> period;   // instance 3; drawn in [20, 40] from the seed when unset
    std::optional<int> repeats;  // instance 3; defaults to the period
    std::optional<Kernel> kernel;  // defaults to id for instance 1, exp otherwise
    Variant variant = Variant::Raw;
    std::string eta = "auto";  // "auto" = eta*/2, "nilpotent" = 1/k(x1,x1), or a number
    int depth = 10;
    int num_sequences = 5;
    std::uint64_t seed = 0;
    double q = 2.0;
    bool ablate_bos = false;
    int draws = 1000;
};

/// Applies the JSON keys present in `doc` on top of `base`.
ExperimentConfig config_from_json(const nlohmann::json& doc, ExperimentConfig base = {});
nlohmann::json to_json(const ExperimentConfig& config);

/// Checks instance/kernel/variant/eta combinations; throws ckd::Error.
void validate(const ExperimentConfig& config);

Kernel resolved_kernel(const ExperimentConfig& config);
int resolved_period(const ExperimentConfig& config);

/// Numeric step size for the given attention matrix.
double resolve_eta(const std::string& eta, const AttentionMatrix& matrix);

Sequence make_sequence(const ExperimentConfig& config, std::uint64_t seed);

struct CurveOutput {
    nlohmann::json config;  // resolved config echo
    std::vector<std::uint64_t> seeds;
    std::vector<std::vector<double>> per_seed;  // [seed][t-1]
    std::vector<double> mean;
};

CurveOutput run_figure2(const ExperimentConfig& config);

/// Comment header with the config echo, then `t,mean,seed_<s>...` rows.
/// The timestamp line is the only part that varies between identical runs.
void write_curve_csv(std::ostream& os, const CurveOutput& curve, bool with_timestamp = true);

/// Max transformer/descent gaps per normalization.
nlohmann::json run_equivalence(const ExperimentConfig& config);

struct SpectralOptions {
    bool force_identity = false;
    int rotation_grid = 0;
};

nlohmann::json run_spectral(const ExperimentConfig& config, const SpectralOptions& options = {});

struct ProjectorDemo {
    Matrix directions;  // nu_1..nu_t as rows
    Vector start;       // nu
    // steps[i] = P_{t-i} ... P_t nu for i = 0..t-1, norms[i] its length.
    std::vector<Vector> steps;
    std::vector<double> norms;
};

ProjectorDemo run_projector_demo(int d, int t, std::uint64_t seed, std::optional<int> start_at_token = std::nullopt);
void write_projector_csv(std::ostream& os, const ProjectorDemo& demo);

struct DepthGapOutput {
    nlohmann::json config;
    DepthGap gap;
};

DepthGapOutput run_depth_gap(const ExperimentConfig& config);
void write_depth_gap_csv(std::ostream& os, const DepthGapOutput& out);

std::string timestamp_utc();

}  // namespace ckd

#include "ckd/seqgen.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <complex>
#include <numbers>

namespace ckd {

std::string_view to_string(Instance instance) {
    switch (instance) {
        case Instance::LinearOrthogonal: return "linear";
        case Instance::ExpOrthogonal: return "exp-orthogonal";
        case Instance::Periodic: return "periodic";
        case Instance::PhaseModulated: return "phase-modulated";
    }
    return "unknown";
}

Instance instance_from_number(int number) {
    if (number < 1 || number > 4) throw Error("instance must be 1, 2, 3 or 4 (got " + std::to_string(number) + ")");
    return static_cast<Instance>(number);
}

Matrix sample_orthogonal(int d, std::uint64_t seed) {
    Rng rng(seed);
    return sample_orthogonal(d, rng);
}

Matrix sample_orthogonal(int d, Rng& rng) {
    if (d < 1) throw Error("sample_orthogonal: dimension must be >= 1");
    std::normal_distribution<double> normal;
    Matrix g(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) g(i, j) = normal(rng);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    const Matrix& r = qr.matrixQR();
    for (int j = 0; j < d; ++j)
        if (r(j, j) < 0) q.col(j) = -q.col(j);
    return q;
}

Eigen::MatrixXcd sample_unitary(int p, Rng& rng) {
    if (p < 1) throw Error("sample_unitary: dimension must be >= 1");
    std::normal_distribution<double> normal;
    Eigen::MatrixXcd g(p, p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) {
            const double re = normal(rng);
            g(i, j) = {re, normal(rng)};
        }
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(g);
    Eigen::MatrixXcd q = qr.householderQ();
    const Eigen::MatrixXcd& r = qr.matrixQR();
    for (int j = 0; j < p; ++j) {
        const double mag = std::abs(r(j, j));
        if (mag > 0) q.col(j) *= r(j, j) / mag;
    }
    return q;
}

Vector sample_sphere(int d, Rng& rng) {
    std::normal_distribution<double> normal;
    Vector v(d);
    do {
        for (int i = 0; i < d; ++i) v(i) = normal(rng);
    } while (v.norm() == 0.0);
    return v / v.norm();
}

Sequence generate_from_map(const Matrix& w, const Vector& x1, int length, Instance instance) {
    if (length < 2) throw Error("sequence length must be >= 2");
    if (w.rows() != w.cols() || w.rows() != x1.size()) throw Error("generate_from_map: shape mismatch");
    const auto d = static_cast<int>(x1.size());
    Sequence seq;
    seq.dim = d;
    seq.instance = instance;
    seq.hidden = OrthogonalHidden{w};
    seq.tokens.resize(length, d);
    seq.tokens.row(0) = x1.transpose();
    for (int t = 1; t < length; ++t) seq.tokens.row(t) = (w * seq.tokens.row(t - 1).transpose()).transpose();
    return seq;
}

Sequence generate_linear(int d, int length, std::uint64_t seed, Instance instance) {
    if (instance != Instance::LinearOrthogonal && instance != Instance::ExpOrthogonal)
        throw Error("generate_linear: instance must be 1 or 2");
    Rng rng(seed);
    Matrix w = sample_orthogonal(d, rng);
    Vector x1 = sample_sphere(d, rng);
    Sequence seq = generate_from_map(w, x1, length, instance);
    seq.seed = seed;
    return seq;
}

Sequence generate_periodic(int d, int period, int repeats, std::uint64_t seed) {
    if (period < 2) throw Error("generate_periodic: period must be >= 2");
    if (repeats < 1) throw Error("generate_periodic: repeats must be >= 1");
    if (d < 1) throw Error("generate_periodic: dimension must be >= 1");
    Rng rng(seed);
    Matrix base(period, d);
    int filled = 0;
    int attempts = 0;
    while (filled < period) {
        if (++attempts > 1000 * period)
            throw Error("generate_periodic: could not draw distinct tokens (dimension too small?)");
        Vector x = sample_sphere(d, rng);
        bool distinct = true;
        for (int i = 0; i < filled && distinct; ++i) distinct = std::abs(base.row(i).dot(x) - 1.0) >= 1e-6;
        if (distinct) base.row(filled++) = x.transpose();
    }
    Sequence seq;
    seq.dim = d;
    seq.instance = Instance::Periodic;
    seq.seed = seed;
    seq.tokens.resize(static_cast<Eigen::Index>(period) * repeats, d);
    for (int r = 0; r < repeats; ++r) seq.tokens.middleRows(static_cast<Eigen::Index>(r) * period, period) = base;
    seq.hidden = PeriodicHidden{period, std::move(base)};
    return seq;
}

Vector phase_modulated_step(const PhaseHidden& hidden, const Vector& x) {
    const Eigen::Index p = hidden.u.rows();
    if (x.size() != 2 * p) throw Error("phase_modulated_step: token dimension must be 2p");
    Eigen::VectorXcd z(p);
    for (Eigen::Index j = 0; j < p; ++j) z(j) = {x(2 * j), x(2 * j + 1)};
    const Eigen::VectorXcd zp = hidden.u * z;
    Eigen::VectorXcd zpp(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        // std::arg(0) == 0, so vanishing components stay at magnitude 0.
        const double phase = hidden.theta(j) + hidden.q * std::arg(zp(j));
        zpp(j) = std::polar(std::abs(zp(j)), phase);
    }
    const Eigen::VectorXcd next = hidden.u.adjoint() * zpp;
    Vector out(2 * p);
    for (Eigen::Index j = 0; j < p; ++j) {
        out(2 * j) = next(j).real();
        out(2 * j + 1) = next(j).imag();
    }
    return out;
}

Sequence generate_phase_modulated(int p, int length, double q, std::uint64_t seed) {
    if (p < 1) throw Error("generate_phase_modulated: p must be >= 1");
    if (length < 2) throw Error("sequence length must be >= 2");
    Rng rng(seed);
    PhaseHidden hidden;
    hidden.u = sample_unitary(p, rng);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    hidden.theta.resize(p);
    for (int j = 0; j < p; ++j) hidden.theta(j) = phase(rng);
    hidden.q = q;

    Sequence seq;
    seq.dim = 2 * p;
    seq.instance = Instance::PhaseModulated;
    seq.seed = seed;
    seq.tokens.resize(length, 2 * p);
    Vector x = sample_sphere(2 * p, rng);
    for (int t = 0; t < length; ++t) {
        seq.tokens.row(t) = x.transpose();
        if (t + 1 < length) x = phase_modulated_step(hidden, x);
    }
    seq.hidden = std::move(hidden);
    return seq;
}

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
    auto rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        auto row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const nlohmann::json& rows) {
    if (!rows.is_array()) throw Error("expected a matrix as an array of rows");
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto m = n == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(rows.at(0).size());
    Matrix out(n, m);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (static_cast<Eigen::Index>(rows[i].size()) != m) throw Error("ragged matrix in JSON");
        for (Eigen::Index j = 0; j < m; ++j) out(i, j) = rows[i][j].get<double>();
    }
    return out;
}

}  // namespace

nlohmann::json to_json(const Sequence& sequence) {
    nlohmann::json hidden;
    if (const auto* h = std::get_if<OrthogonalHidden>(&sequence.hidden)) {
        hidden = {{"kind", "orthogonal"}, {"W", matrix_to_json(h->w)}};
    } else if (const auto* h = std::get_if<PeriodicHidden>(&sequence.hidden)) {
        hidden = {{"kind", "periodic"}, {"period", h->period}, {"base", matrix_to_json(h->base)}};
    } else {
        const auto& ph = std::get<PhaseHidden>(sequence.hidden);
        std::vector<double> theta(ph.theta.data(), ph.theta.data() + ph.theta.size());
        hidden = {{"kind", "phase"},
                  {"U_re", matrix_to_json(ph.u.real())},
                  {"U_im", matrix_to_json(ph.u.imag())},
                  {"theta", theta},
                  {"q", ph.q}};
    }
    return {{"dim", sequence.dim},
            {"instance", static_cast<int>(sequence.instance)},
            {"seed", sequence.seed},
            {"tokens", matrix_to_json(sequence.tokens)},
            {"hidden", std::move(hidden)}};
}

Sequence sequence_from_json(const nlohmann::json& doc) {
    Sequence seq;
    seq.dim = doc.at("dim").get<int>();
    seq.instance = instance_from_number(doc.at("instance").get<int>());
    seq.seed = doc.value("seed", std::uint64_t{0});
    seq.tokens = matrix_from_json(doc.at("tokens"));
    if (seq.tokens.cols() != seq.dim) throw Error("sequence JSON: token width differs from dim");
    const auto& hidden = doc.at("hidden");
    const auto kind = hidden.at("kind").get<std::string>();
    if (kind == "orthogonal") {
        seq.hidden = OrthogonalHidden{matrix_from_json(hidden.at("W"))};
    } else if (kind == "periodic") {
        seq.hidden = PeriodicHidden{hidden.at("period").get<int>(), matrix_from_json(hidden.at("base"))};
    } else if (kind == "phase") {
        PhaseHidden ph;
        const Matrix re = matrix_from_json(hidden.at("U_re"));
        const Matrix im = matrix_from_json(hidden.at("U_im"));
        ph.u = re.cast<std::complex<double>>() + std::complex<double>(0, 1) * im.cast<std::complex<double>>();
        const auto theta = hidden.at("theta").get<std::vector<double>>();
        ph.theta = Eigen::Map<const Vector>(theta.data(), static_cast<Eigen::Index>(theta.size()));
        ph.q = hidden.at("q").get<double>();
        seq.hidden = std::move(ph);
    } else {
        throw Error("sequence JSON: unknown hidden kind '" + kind + "'");
    }
    return seq;
}

}  // namespace ckd

#include "ckd/seqgen.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cmath>

using namespace ckd;

namespace {

double max_norm_dev(const Tokens& x) { return max_unit_norm_deviation(x); }

}  // namespace

TEST_CASE("sample_orthogonal") {
    for (std::uint64_t seed : {0u, 1u, 7u}) {
        const Matrix w1 = sample_orthogonal(1, seed);
        CHECK(std::abs(std::abs(w1(0, 0)) - 1.0) <= 1e-15);
    }
    const Matrix a = sample_orthogonal(6, 42);
    const Matrix b = sample_orthogonal(6, 42);
    CHECK(a == b);
    CHECK(a != sample_orthogonal(6, 43));
    const Matrix w = sample_orthogonal(15, 3);
    CHECK((w.transpose() * w - Matrix::Identity(15, 15)).norm() <= 1e-10);
    CHECK_THROWS_AS(sample_orthogonal(0, 1), Error);
}

TEST_CASE("generate_linear") {
    const Sequence seq = generate_linear(15, 60, 11);
    CHECK(seq.tokens.rows() == 60);
    CHECK(max_norm_dev(seq.tokens) <= 1e-10);
    const Matrix& w = std::get<OrthogonalHidden>(seq.hidden).w;
    for (Eigen::Index t = 0; t + 1 < seq.length(); ++t)
        CHECK((seq.tokens.row(t + 1).transpose() - w * seq.tokens.row(t).transpose()).norm() <= 1e-10);

    const Sequence again = generate_linear(15, 60, 11);
    CHECK(again.tokens == seq.tokens);
    CHECK_THROWS_AS(generate_linear(3, 1, 0), Error);
}

TEST_CASE("identity map gives a constant sequence") {
    Vector x1(3);
    x1 << 0.0, 0.6, 0.8;
    const Sequence seq = generate_from_map(Matrix::Identity(3, 3), x1, 5);
    for (Eigen::Index t = 0; t < 5; ++t) CHECK(seq.tokens.row(t) == x1.transpose());
}

TEST_CASE("planar rotation keeps a constant step angle") {
    const double theta = 0.3;
    Matrix r(2, 2);
    r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    Vector x1(2);
    x1 << 1.0, 0.0;
    const Sequence seq = generate_from_map(r, x1, 40);
    for (Eigen::Index t = 0; t + 1 < 40; ++t)
        CHECK(seq.tokens.row(t + 1).dot(seq.tokens.row(t)) == doctest::Approx(std::cos(theta)).epsilon(1e-12));
}

TEST_CASE("generate_periodic") {
    const Sequence small = generate_periodic(3, 2, 3, 5);
    REQUIRE(small.length() == 6);
    for (Eigen::Index t = 0; t + 2 < 6; ++t) CHECK(small.tokens.row(t) == small.tokens.row(t + 2));
    CHECK(small.tokens.row(0) != small.tokens.row(1));

    const Sequence seq = generate_periodic(15, 27, 27, 9);
    CHECK(seq.length() == 27 * 27);
    for (Eigen::Index t = 0; t + 27 < seq.length(); ++t) CHECK(seq.tokens.row(t) == seq.tokens.row(t + 27));
    CHECK(max_norm_dev(seq.tokens) <= 1e-10);
    const auto& hidden = std::get<PeriodicHidden>(seq.hidden);
    CHECK(hidden.period == 27);
    for (int i = 0; i < 27; ++i)
        for (int j = 0; j < i; ++j) CHECK(std::abs(hidden.base.row(i).dot(hidden.base.row(j)) - 1.0) >= 1e-6);

    CHECK_THROWS_AS(generate_periodic(3, 1, 4, 0), Error);
}

TEST_CASE("phase-modulated sequences") {
    SUBCASE("q = 1 and theta = 0 is the identity map") {
        Rng rng(4);
        PhaseHidden hidden{sample_unitary(3, rng), Vector::Zero(3), 1.0};
        const Vector x = sample_sphere(6, rng);
        CHECK((phase_modulated_step(hidden, x) - x).norm() <= 1e-12);
    }
    SUBCASE("unitary sample") {
        Rng rng(8);
        const Eigen::MatrixXcd u = sample_unitary(4, rng);
        CHECK((u.adjoint() * u - Eigen::MatrixXcd::Identity(4, 4)).norm() <= 1e-10);
    }
    SUBCASE("norm preservation and reconstruction") {
        const Sequence seq = generate_phase_modulated(2, 200, 2.0, 17);
        CHECK(seq.dim == 4);
        CHECK(max_norm_dev(seq.tokens) <= 1e-10);
        const auto& hidden = std::get<PhaseHidden>(seq.hidden);
        for (Eigen::Index t = 0; t + 1 < seq.length(); ++t) {
            CHECK((seq.tokens.row(t + 1).transpose() - phase_modulated_step(hidden, seq.tokens.row(t).transpose()))
                      .norm() <= 1e-10);
        }
        for (int j = 0; j < 2; ++j) {
            CHECK(hidden.theta(j) >= 0.0);
            CHECK(hidden.theta(j) < 2 * std::acos(-1.0));
        }
    }
    SUBCASE("vanishing component keeps zero magnitude") {
        PhaseHidden hidden{Eigen::MatrixXcd::Identity(2, 2), Vector::Constant(2, 1.3), 2.0};
        Vector x(4);
        x << 0.0, 0.0, 0.6, 0.8;
        const Vector y = phase_modulated_step(hidden, x);
        CHECK(y.head(2).norm() == 0.0);
        CHECK(y.norm() == doctest::Approx(1.0));
    }
}

TEST_CASE("sequence JSON round trip") {
    for (const Sequence& seq : {generate_linear(4, 6, 1, Instance::ExpOrthogonal), generate_periodic(3, 4, 2, 2),
                                generate_phase_modulated(2, 5, 2.0, 3)}) {
        const auto doc = to_json(seq);
        const Sequence back = sequence_from_json(nlohmann::json::parse(doc.dump()));
        CHECK(back.tokens == seq.tokens);
        CHECK(back.instance == seq.instance);
        CHECK(back.seed == seq.seed);
        CHECK(back.hidden.index() == seq.hidden.index());
        CHECK(to_json(back) == doc);
    }
    CHECK_THROWS_AS(sequence_from_json(nlohmann::json{{"dim", 2}, {"instance", 9}}), Error);
}

#include "ckd/descent.hpp"
#include "ckd/rkhs.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace ckd;

namespace {

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

struct Case {
    Kernel kernel;
    Variant variant;
};

const Case kCases[] = {{Kernel::Id, Variant::Raw}, {Kernel::Exp, Variant::Raw}, {Kernel::Exp, Variant::SoftmaxNormalized}};

}  // namespace

TEST_CASE("first step from zero") {
    const Tokens x = oracle::random_unit_tokens(7, 3, 1);
    const Matrix targets = oracle::shift(x);
    for (const auto& c : kCases) {
        const auto a = build_attention_matrix(c.kernel, c.variant, x);
        const double eta = 0.3;
        const DescentState one = step(initial_state(a, 3, eta), a, targets);
        CHECK(one.k == 1);
        CHECK(one.u.row(0).norm() == 0.0);
        const Matrix expected = eta * oracle::strip_diagonal(a.entries) * targets;
        CHECK(max_abs(one.u - expected) <= 1e-15);

        DescentState frozen{Matrix::Random(7, 3), 0, 0.0};
        CHECK(step(frozen, a, targets).u == frozen.u);
    }
}

TEST_CASE("single token stays at zero") {
    const Tokens x = oracle::random_unit_tokens(1, 4, 2);
    const auto a = build_attention_matrix(Kernel::Exp, Variant::Raw, x);
    const Matrix targets = Matrix::Random(1, 4);
    DescentState s = initial_state(a, 4, 0.5);
    for (int k = 0; k < 5; ++k) s = step(s, a, targets);
    CHECK(s.u.norm() == 0.0);
    CHECK(fixed_point(a, targets).norm() == 0.0);
}

TEST_CASE("step matches the dense matrix recursion") {
    const Tokens x = oracle::random_unit_tokens(10, 4, 3);
    const Matrix targets = oracle::shift(x);
    for (const auto& c : kCases) {
        const auto a = build_attention_matrix(c.kernel, c.variant, x);
        const double eta = 0.8 * step_size_limit(a);
        DescentState s = initial_state(a, 4, eta);
        for (int k = 0; k < 12; ++k) s = step(s, a, targets);
        CHECK(max_abs(s.u - oracle::dense_iterate(a.entries, targets, eta, 12, Matrix::Zero(10, 4))) <= 1e-10);
    }
}

TEST_CASE("step rejects mismatched shapes") {
    const Tokens x = oracle::random_unit_tokens(4, 2, 4);
    const auto a = build_attention_matrix(Kernel::Id, Variant::Raw, x);
    CHECK_THROWS_AS(step(initial_state(a, 2, 0.1), a, Matrix::Zero(3, 2)), Error);
    CHECK_THROWS_AS(step(DescentState{Matrix::Zero(4, 3), 0, 0.1}, a, Matrix::Zero(4, 2)), Error);
    CHECK_THROWS_AS(fixed_point(a, Matrix::Zero(5, 2)), Error);
}

TEST_CASE("two-token fixed point for the id kernel is a * x2") {
    const double angle = 1.1;
    Tokens x(2, 2);
    x << 1.0, 0.0, std::cos(angle), std::sin(angle);
    Matrix targets(2, 2);
    targets.row(0) = x.row(1);
    targets.row(1) << -0.3, 0.2;  // x3, irrelevant to u*
    const Matrix u = fixed_point(build_attention_matrix(Kernel::Id, Variant::Raw, x), targets);
    CHECK(u.row(0).norm() == 0.0);
    CHECK((u.row(1) - std::cos(angle) * x.row(1)).norm() <= 1e-15);
}

TEST_CASE("fixed point agrees with dense inversion and is a fixed point of step") {
    for (unsigned seed = 0; seed < 10; ++seed) {
        for (int t = 1; t <= 6; ++t) {
            const Tokens x = oracle::random_unit_tokens(t, 3, 50 + seed);
            const Matrix targets = Matrix::Random(t, 3);
            for (const auto& c : kCases) {
                const auto a = build_attention_matrix(c.kernel, c.variant, x);
                const Matrix u = fixed_point(a, targets);
                CHECK(max_abs(u - oracle::dense_fixed_point(a.entries, targets)) <= 1e-9);
                CHECK(max_abs(step(DescentState{u, 0, 0.7 * step_size_limit(a)}, a, targets).u - u) <= 1e-10);
            }
        }
    }
}

TEST_CASE("prefix invariance is bit exact") {
    const Tokens x = oracle::random_unit_tokens(40, 5, 9);
    const Matrix targets = oracle::shift(x);
    for (const auto& c : kCases) {
        const Matrix full = fixed_point(build_attention_matrix(c.kernel, c.variant, x), targets);
        for (int t : {1, 7, 23, 39}) {
            const Matrix prefix = fixed_point(build_attention_matrix(c.kernel, c.variant, x.topRows(t)), targets.topRows(t));
            CHECK(prefix == full.topRows(t));
        }
    }
}

TEST_CASE("step size limits") {
    const Tokens x = oracle::random_unit_tokens(3, 3, 2);
    CHECK(step_size_limit(build_attention_matrix(Kernel::Id, Variant::Raw, x)) == doctest::Approx(2.0));
    CHECK(step_size_limit(build_attention_matrix(Kernel::Exp, Variant::Raw, x)) == doctest::Approx(0.7357588823428847));
    CHECK(step_size_limit(build_attention_matrix(Kernel::Exp, Variant::SoftmaxNormalized, x)) == 2.0);
}

TEST_CASE("descent converges for 0 < eta < eta* and diverges beyond") {
    const Tokens x = oracle::random_unit_tokens(5, 4, 21);
    const Matrix targets = oracle::shift(x);
    for (const auto& c : kCases) {
        const auto a = build_attention_matrix(c.kernel, c.variant, x);
        const double limit = step_size_limit(a);
        const auto gaps = iterate_gaps(a, targets, 0.5 * limit, 400);
        CHECK(gaps.back() <= 1e-12);
        if (c.variant == Variant::Raw) {
            // All eigenvalues of I - eta A equal 1 - eta k(x1,x1); past eta* they exceed 1 in modulus.
            CHECK(iterate_gaps(a, targets, 1.05 * limit, 400).back() > 1.0);
        }
    }
}

TEST_CASE("log error decays affinely in the iteration count") {
    const Tokens x = oracle::random_unit_tokens(3, 4, 22);
    const Matrix targets = oracle::shift(x);
    const auto a = build_attention_matrix(Kernel::Exp, Variant::Raw, x);
    const auto gaps = iterate_gaps(a, targets, 0.25 * step_size_limit(a), 300);
    const std::vector<double> tail(gaps.begin() + 20, gaps.end());
    const auto fit = fit_log_linear(tail);
    CHECK(fit.points > 20);
    CHECK(fit.slope < 0.0);
    CHECK(fit.r_squared > 0.99);
}

TEST_CASE("nilpotent run reaches the fixed point after t steps") {
    const Tokens x3 = oracle::random_unit_tokens(3, 4, 31);
    const auto a = build_attention_matrix(Kernel::Id, Variant::Raw, x3);
    const Matrix targets = oracle::shift(x3) + oracle::random_unit_tokens(3, 4, 32);
    const auto exact = nilpotent_run(a, targets, 3);
    CHECK(exact.reached_fixed_point);
    CHECK(exact.max_abs_gap <= 1e-12);
    // From zero the first row starts at its fixed point, so t - 1 steps already suffice.
    CHECK(nilpotent_run(a, targets, 2).reached_fixed_point);
    const Matrix start = oracle::random_unit_tokens(3, 4, 34);
    CHECK(nilpotent_run(a, targets, 3, start).max_abs_gap <= 1e-12);
    const auto early = nilpotent_run(a, targets, 2, start);
    CHECK_FALSE(early.reached_fixed_point);
    CHECK(early.max_abs_gap > 1e-6);
    CHECK_THROWS_AS(nilpotent_run(a, targets, 2, Matrix::Zero(2, 4)), Error);

    const Tokens x1 = oracle::random_unit_tokens(1, 4, 33);
    const auto one = nilpotent_run(build_attention_matrix(Kernel::Exp, Variant::Raw, x1), Matrix::Ones(1, 4), 1);
    CHECK(one.reached_fixed_point);
    CHECK(one.u.norm() == 0.0);

    CHECK_THROWS_AS(nilpotent_run(build_attention_matrix(Kernel::Exp, Variant::SoftmaxNormalized, x3), targets, 3),
                    Error);
}

TEST_CASE("dual coefficients") {
    SUBCASE("single token") {
        const Tokens x = oracle::random_unit_tokens(1, 3, 40);
        const Matrix target = oracle::random_unit_tokens(1, 3, 41);
        const auto mu = dual_coefficients(Kernel::Exp, x, target);
        CHECK((mu.mu - target / std::exp(1.0)).norm() <= 1e-15);
    }
    SUBCASE("interpolation residual and the u* identity") {
        const Sequence seq = generate_linear(6, 40, 3, Instance::ExpOrthogonal);
        const Tokens x = seq.tokens.topRows(39);
        const Matrix targets = seq.tokens.bottomRows(39);
        for (Kernel k : {Kernel::Id, Kernel::Exp}) {
            const auto mu = dual_coefficients(k, x, targets);
            CHECK(mu.consistency_gap <= 1e-8);
            for (Eigen::Index t = 0; t < x.rows(); ++t) {
                Vector sum = Vector::Zero(6);
                for (Eigen::Index s = 0; s <= t; ++s) sum += mu.mu.row(s).transpose() * eval_kernel(k, x.row(s), x.row(t));
                CHECK((sum - targets.row(t).transpose()).cwiseAbs().maxCoeff() <= 1e-8);
            }
        }
    }
    SUBCASE("periodic sequences drive mu to zero") {
        const Sequence seq = generate_periodic(15, 20, 12, 6);
        const Eigen::Index t = seq.length() - 1;
        const auto mu = dual_coefficients(Kernel::Exp, seq.tokens.topRows(t), seq.tokens.bottomRows(t));
        const double early = mu.mu.row(20).norm();
        const double late = mu.mu.row(t - 1).norm();
        CHECK(late < 0.25 * early);
    }
    SUBCASE("vanishing token is singular") {
        Tokens x = Tokens::Zero(2, 2);
        x(0, 0) = 1.0;
        CHECK_THROWS_AS(dual_coefficients(Kernel::Id, x, Matrix::Ones(2, 2)), Error);
    }
}

TEST_CASE("error curve of a constant sequence") {
    // A = c * ones (lower), rhs_t = c (t-1) x, so u*_1 = 0 and u*_t = x for t >= 2.
    Vector x1(3);
    x1 << 0.0, 0.6, 0.8;
    const Sequence seq = generate_from_map(Matrix::Identity(3, 3), x1, 8);
    for (Kernel k : {Kernel::Id, Kernel::Exp}) {
        const auto curve = error_curve(seq, k);
        REQUIRE(curve.size() == 7);
        CHECK(curve[0] == doctest::Approx(1.0));
        for (std::size_t t = 1; t < curve.size(); ++t) CHECK(curve[t] <= 1e-28);
    }
    CHECK_THROWS_AS(error_curve(seq.tokens.topRows(1), Kernel::Id), Error);
}

TEST_CASE("error curves decay for the linear and phase-modulated instances") {
    const Sequence seq = generate_linear(15, 601, 1);
    const auto linear = error_curve(seq, Kernel::Id);
    CHECK(linear.back() < 1e-3 * linear[9]);
    // Asymptotic squared-error rate is twice the log spectral radius of W(I - x1 x1^T).
    const double rho = linear_spectral_radius(std::get<OrthogonalHidden>(seq.hidden).w, seq.tokens.row(0).transpose());
    const std::vector<double> tail(linear.begin() + 300, linear.end());
    CHECK(fit_log_linear(tail).slope == doctest::Approx(2.0 * std::log(rho)).epsilon(0.25));
    const auto phase = error_curve(generate_phase_modulated(2, 150, 2.0, 1), Kernel::Exp);
    CHECK(phase.back() < phase[9]);
}

TEST_CASE("softmax depth gap") {
    const Sequence seq = generate_linear(6, 15, 5, Instance::ExpOrthogonal);
    const auto gap = softmax_depth_gap(seq.tokens, 60);
    REQUIRE(gap.gap.size() == 61);
    const auto a = build_attention_matrix(Kernel::Exp, Variant::SoftmaxNormalized, seq.tokens);
    const Matrix u_star = fixed_point(a, shifted_targets(seq.tokens));
    for (Eigen::Index t = 0; t < 15; ++t) {
        const auto ti = static_cast<std::size_t>(t);
        CHECK(gap.gap[0][ti] == u_star.row(t).norm());
        CHECK(gap.reference[0][ti] == 1.0);
        for (std::size_t k = 1; k < gap.gap.size(); ++k) CHECK(gap.gap[k][ti] <= gap.gap[k - 1][ti] + 1e-12);
    }
    CHECK(gap.reference[3][1] == doctest::Approx(0.125));

    // Contrast: raw exp attention with the nilpotent step size is exact at n = t.
    const auto raw = build_attention_matrix(Kernel::Exp, Variant::Raw, seq.tokens);
    const auto run = nilpotent_run(raw, shifted_targets(seq.tokens), 15);
    CHECK(run.max_abs_gap <= 1e-10);
}

TEST_CASE("log-linear fit") {
    std::vector<double> v;
    for (int i = 0; i < 30; ++i) v.push_back(3.0 * std::exp(-0.4 * i));
    v.push_back(1e-20);  // floor, ignored
    const auto fit = fit_log_linear(v);
    CHECK(fit.points == 30);
    CHECK(fit.slope == doctest::Approx(-0.4).epsilon(1e-12));
    CHECK(fit.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
    CHECK(fit.r_squared == doctest::Approx(1.0));
}

#include <catch2/catch.hpp>

#include <cmath>

#include "peakscope/radial.hpp"
#include "peakscope/rng.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "support/test_helpers.hpp"

using namespace peakscope;

TEST_CASE("1-D soliton: shooting recovers the closed form", "[radial]") {
    const radial_profile& w = helpers::soliton_profile();
    CHECK(std::abs(w.shooting_value - fixtures::soliton_w0) < 1e-8);

    // w(x) = sqrt(2) sech(x) pointwise on the reliable range
    for (std::size_t i = 0; i < w.size(); i += 50) {
        if (w.r[i] > 8.0) break;
        const double exact = std::sqrt(2.0) / std::cosh(w.r[i]);
        REQUIRE(w.w[i] == Approx(exact).margin(1e-7));
    }
    CHECK(ode_residual(w, frozen_coefficients{}) < 1e-6);
}

TEST_CASE("profile invariants hold after convergence", "[radial]") {
    const radial_profile& w = helpers::canonical_profile();
    REQUIRE(w.size() > 100);
    for (std::size_t i = 0; i < w.size(); ++i) {
        REQUIRE(w.w[i] > 0.0);
        if (i) REQUIRE(w.w[i] < w.w[i - 1]);
    }
    CHECK(w.w.back() < 1e-8 * w.shooting_value);
    CHECK(w.w_prime[1] < 0.0);

    // w'(r0) follows the integrated-flux start
    const auto& params = w.params;
    const double r0 = w.r.front();
    const double m0 = -(r0 / params.n) * (params.f(w.w.front()) -
                                          std::pow(w.w.front(), params.p - 1.0));
    const double m_stored = detail::phi_p(w.w_prime.front(), params.p);
    CHECK(m_stored == Approx(m0).epsilon(1e-6));
}

TEST_CASE("canonical 3-D shooting value matches the pre-registered oracle", "[radial]") {
    const radial_profile& w = helpers::canonical_profile();
    CHECK(std::abs(w.shooting_value - fixtures::canonical_w0_p2_n3_q4) < 1e-8);
    CHECK(ode_residual(w, frozen_coefficients{}) < 1e-6);
}

TEST_CASE("oracle shooter reproduces its frozen fixture", "[radial][slow]") {
    oracle::shoot_problem pb;  // p=2 q=4 n=3
    const double w0 = oracle::brute_force_w0(pb);
    CHECK(std::abs(w0 - fixtures::canonical_w0_p2_n3_q4) < 1e-9);
}

TEST_CASE("undershoot/overshoot dichotomy around the bracket", "[radial]") {
    const problem_params params = helpers::canonical_params();
    detail::radial_workspace ws(params, frozen_coefficients{}, shoot_options{});
    const double w0 = helpers::canonical_profile().shooting_value;
    // below the bracket the profile turns back upward, above it w crosses zero
    CHECK(ws.classify(0.9 * w0) == detail::shot_class::undershoot);
    CHECK(ws.classify(0.2 * w0) == detail::shot_class::undershoot);
    CHECK(ws.classify(1.1 * w0) == detail::shot_class::overshoot);
    CHECK(ws.classify(3.0 * w0) == detail::shot_class::overshoot);
}

TEST_CASE("frozen-coefficient rescaling", "[radial]") {
    const radial_profile& w = helpers::canonical_profile();

    SECTION("identity coefficients return the canonical profile") {
        radial_profile u = solve_frozen(w, frozen_coefficients{});
        REQUIRE(u.size() == w.size());
        CHECK(u.w[100] == w.w[100]);
        CHECK(u.r[100] == w.r[100]);
    }
    SECTION("(1,4,1): gamma = 2, lambda = 1/2") {
        frozen_coefficients fro{1.0, 4.0, 1.0};
        radial_profile u = solve_frozen(w, fro);
        CHECK(u.shooting_value == Approx(2.0 * w.shooting_value));
        CHECK(u.r[200] == Approx(0.5 * w.r[200]));
        CHECK(u.w[200] == Approx(2.0 * w.w[200]));
        CHECK(ode_residual(u, fro) < 1e-6);
    }
    SECTION("(4,1,1): gamma = 1, lambda = 2") {
        frozen_coefficients fro{4.0, 1.0, 1.0};
        radial_profile u = solve_frozen(w, fro);
        CHECK(u.shooting_value == Approx(w.shooting_value));
        CHECK(u.r[200] == Approx(2.0 * w.r[200]));
        CHECK(u.w[200] == Approx(w.w[200]));
        CHECK(ode_residual(u, fro) < 1e-6);
    }
}

TEST_CASE("scaling invariance of the residual over random triples", "[radial]") {
    const radial_profile& w = helpers::canonical_profile();
    rng gen(11);
    for (int trial = 0; trial < 10; ++trial) {
        frozen_coefficients fro{gen.uniform(0.3, 3.0), gen.uniform(0.3, 3.0), gen.uniform(0.3, 3.0)};
        radial_profile u = solve_frozen(w, fro);
        REQUIRE(ode_residual(u, fro) < 1e-6);
        const auto fit = fit_decay_rate(u, fro);
        REQUIRE(std::abs(fit.fitted - fit.predicted) <= 0.02 * std::abs(fit.predicted));
    }
}

TEST_CASE("grid refinement leaves the shooting value stable", "[radial]") {
    const problem_params params = helpers::canonical_params();
    shoot_options coarse;
    coarse.bracket_tol = 1e-10;
    shoot_options fine = coarse;
    fine.max_step_scale = 0.5;
    fine.abs_tol = 0.5e-10;
    fine.rel_tol = 0.5e-10;
    const double w1 = shoot_ground_state(params, frozen_coefficients{}, coarse).shooting_value;
    const double w2 = shoot_ground_state(params, frozen_coefficients{}, fine).shooting_value;
    CHECK(std::abs(w1 - w2) <= 10.0 * coarse.bracket_tol);
}

TEST_CASE("ode_residual flags perturbed profiles and accepts the trivial one", "[radial]") {
    radial_profile w = helpers::canonical_profile();
    const frozen_coefficients unit;

    SECTION("single-node perturbation is visible") {
        std::size_t mid = 0;
        while (mid < w.size() && w.r[mid] < 5.0) ++mid;
        w.w[mid] += 1e-2;
        CHECK(ode_residual(w, unit) > 1e-3);
    }
    SECTION("zero profile solves the equation") {
        for (auto& v : w.w) v = 0.0;
        for (auto& v : w.w_prime) v = 0.0;
        w.shooting_value = 0.0;
        CHECK(ode_residual(w, unit) == 0.0);
    }
}

TEST_CASE("decay-rate fit", "[radial]") {
    const frozen_coefficients unit;
    SECTION("soliton tail slope is -1") {
        const auto fit = fit_decay_rate(helpers::soliton_profile(), unit);
        CHECK(fit.predicted == Approx(-1.0));
        CHECK(fit.fitted == Approx(-1.0).epsilon(0.02));
    }
    SECTION("canonical 3-D within 2%") {
        const auto fit = fit_decay_rate(helpers::canonical_profile(), unit);
        CHECK(std::abs(fit.fitted - fit.predicted) <= 0.02 * std::abs(fit.predicted));
    }
    SECTION("frozen (1,4,1) doubles the rate") {
        frozen_coefficients fro{1.0, 4.0, 1.0};
        radial_profile u = solve_frozen(helpers::canonical_profile(), fro);
        const auto fit = fit_decay_rate(u, fro);
        CHECK(fit.predicted == Approx(-2.0));
        CHECK(fit.fitted == Approx(-2.0).epsilon(0.02));
    }
}

TEST_CASE("degenerate exponents shoot cleanly", "[radial][slow]") {
    for (double p : {1.5, 3.0}) {
        problem_params params;
        params.p = p;
        params.q = p == 1.5 ? 2.5 : 4.0;
        params.theta = params.q;
        params.low_dim_test_mode = p >= 3.0;
        const radial_profile w = shoot_ground_state(params, frozen_coefficients{}, shoot_options{});
        CHECK(ode_residual(w, frozen_coefficients{}) < 1e-6);
        const auto fit = fit_decay_rate(w, frozen_coefficients{});
        CHECK(std::abs(fit.fitted - fit.predicted) <= 0.02 * std::abs(fit.predicted));
        for (std::size_t i = 1; i < w.size(); ++i) REQUIRE(w.w[i] < w.w[i - 1]);
    }
}

TEST_CASE("power-sum problems fall back to direct shooting", "[radial]") {
    problem_params ps;
    ps.kind = nonlinearity_kind::power_sum;
    ps.terms = {{1.0, 3.0}, {1.0, 4.0}};
    ps.theta = 3.0;
    const frozen_coefficients fro{1.0, 2.0, 1.0};
    radial_profile canonical = shoot_ground_state(ps, frozen_coefficients{}, shoot_options{});
    radial_profile u = solve_frozen(canonical, fro);  // no scaling reduction: reshoots
    CHECK(ode_residual(u, fro) < 1e-6);
    CHECK(u.shooting_value != Approx(canonical.shooting_value));
}

TEST_CASE("invalid inputs are rejected", "[radial]") {
    problem_params bad;
    bad.q = 7.0;  // beyond p* = 6
    CHECK_THROWS_AS(shoot_ground_state(bad, frozen_coefficients{}, shoot_options{}), input_error);
    CHECK_THROWS_AS(shoot_ground_state(helpers::canonical_params(), frozen_coefficients{-1.0, 1.0, 1.0},
                                       shoot_options{}),
                    input_error);
    radial_profile not_canonical = helpers::canonical_profile();
    not_canonical.frozen = {2.0, 1.0, 1.0};
    CHECK_THROWS_AS(solve_frozen(not_canonical, frozen_coefficients{}), input_error);
}

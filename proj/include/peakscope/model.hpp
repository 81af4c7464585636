#pragma once

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace peakscope {

/// Thrown when a caller hands in data that violates a precondition.
struct input_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Thrown when an iterative solve fails to converge or produces an
/// inconsistent result.
struct solver_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline bool is_finite(double x) { return std::isfinite(x); }

enum class nonlinearity_kind { pure_power, power_sum };

struct power_term {
    double coeff;     // >= 0
    double exponent;  // in (p, p*)
};

/// Fixed data of the problem: dimension, exponents, the superlinear
/// nonlinearity f and its Ambrosetti-Rabinowitz constant theta.
///
/// The gradient integrand is always beta(xi) = |xi|^p / p, so
/// grad beta(xi) = |xi|^{p-2} xi and grad beta(xi) . xi = p beta(xi).
struct problem_params {
    int n = 3;           // space dimension (>= 3 unless low_dim_test_mode)
    double p = 2.0;      // quasi-linear exponent, 1 < p
    double q = 4.0;      // growth exponent, p < q < p*
    double theta = 4.0;  // AR constant, p < theta
    nonlinearity_kind kind = nonlinearity_kind::pure_power;
    std::vector<power_term> terms;  // power_sum only
    // Allows n in {1,2} and p >= n for closed-form oracle runs. Landscape
    // scans stay restricted to n >= 3.
    bool low_dim_test_mode = false;

    /// Sobolev critical exponent p* = np/(n-p); +inf when n <= p.
    double critical_exponent() const {
        if (static_cast<double>(n) <= p) return std::numeric_limits<double>::infinity();
        return static_cast<double>(n) * p / (static_cast<double>(n) - p);
    }

    bool pure_power() const { return kind == nonlinearity_kind::pure_power; }

    double f(double s) const {
        if (pure_power()) return std::pow(s, q - 1.0);
        double acc = 0.0;
        for (const auto& t : terms) acc += t.coeff * std::pow(s, t.exponent - 1.0);
        return acc;
    }

    /// Antiderivative of f with F(0) = 0.
    double F(double s) const {
        if (pure_power()) return std::pow(s, q) / q;
        double acc = 0.0;
        for (const auto& t : terms) acc += t.coeff * std::pow(s, t.exponent) / t.exponent;
        return acc;
    }

    double fprime(double s) const {
        if (pure_power()) return (q - 1.0) * std::pow(s, q - 2.0);
        double acc = 0.0;
        for (const auto& t : terms) acc += t.coeff * (t.exponent - 1.0) * std::pow(s, t.exponent - 2.0);
        return acc;
    }
};

struct nonlinearity_eval {
    double f;
    double F;
    double fprime;
};

/// f, F and f' at s >= 0. For s = 0 with an exponent below 2 the derivative
/// is unbounded and comes back as +inf.
inline nonlinearity_eval eval_nonlinearity(const problem_params& params, double s) {
    if (!is_finite(s) || s < 0.0) throw input_error("eval_nonlinearity: s must be finite and >= 0");
    if (s == 0.0) {
        double min_e = params.q;
        if (!params.pure_power()) {
            for (const auto& t : params.terms) min_e = std::min(min_e, t.exponent);
        }
        double fp = min_e > 2.0 ? 0.0
                  : min_e == 2.0 ? params.fprime(0.0)
                                 : std::numeric_limits<double>::infinity();
        return {0.0, 0.0, fp};
    }
    return {params.f(s), params.F(s), params.fprime(s)};
}

namespace detail {

inline std::string fmt_g(double x) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", x);
    return buf;
}

}  // namespace detail

/// Checks every standing hypothesis; the report is empty iff the parameters
/// are admissible. Analytic inequalities are checked directly, the AR and
/// growth conditions by sampling on a log-spaced grid s in [1e-6, 1e6].
inline std::vector<std::string> validate_params(const problem_params& params) {
    if (!is_finite(params.p) || !is_finite(params.q) || !is_finite(params.theta))
        throw input_error("validate_params: non-finite parameter");
    for (const auto& t : params.terms)
        if (!is_finite(t.coeff) || !is_finite(t.exponent))
            throw input_error("validate_params: non-finite power term");

    std::vector<std::string> report;
    const double pstar = params.critical_exponent();

    if (params.n < 1) report.push_back("dimension n must be >= 1");
    if (params.n < 3 && !params.low_dim_test_mode)
        report.push_back("n < 3 requires low-dimension test mode");
    if (!(params.p > 1.0)) report.push_back("exponent p must satisfy p > 1");
    if (params.n >= 2 && !(params.p < params.n) && !params.low_dim_test_mode)
        report.push_back("p < n required (or enable low-dimension test mode)");
    if (!(params.q > params.p)) report.push_back("q must satisfy q > p");
    if (!(params.q < pstar)) report.push_back("q must satisfy q < p* (strict window)");
    if (!(params.theta > params.p)) report.push_back("AR constant theta must exceed p");

    if (params.kind == nonlinearity_kind::power_sum) {
        bool any_positive = false;
        for (const auto& t : params.terms) {
            if (t.coeff < 0.0)
                report.push_back("power-sum coefficient must be >= 0 (got " + detail::fmt_g(t.coeff) + ")");
            if (t.coeff > 0.0) any_positive = true;
            if (!(t.exponent > params.p) || !(t.exponent < pstar))
                report.push_back("power-sum exponent " + detail::fmt_g(t.exponent) +
                                 " outside the window (p, p*)");
            if (t.exponent > params.q && t.coeff > 0.0)
                report.push_back("power-sum exponent " + detail::fmt_g(t.exponent) +
                                 " exceeds q: f(s)/s^{q-1} unbounded at infinity");
        }
        if (params.terms.empty() || !any_positive)
            report.push_back("power-sum needs at least one term with positive coefficient");
    }

    // AR condition 0 < theta F(s) <= f(s) s on the sample grid. Anything
    // positive beyond 1e-12 relative is a violation.
    bool ar_ok = true;
    double worst = 0.0, worst_s = 0.0;
    for (int i = 0; i <= 120; ++i) {
        double s = std::pow(10.0, -6.0 + 0.1 * i);
        double lhs = params.theta * params.F(s);
        double rhs = params.f(s) * s;
        if (!(lhs > 0.0)) {
            report.push_back("AR condition: theta*F(s) not positive at s = " + detail::fmt_g(s));
            ar_ok = false;
            break;
        }
        double gap = (lhs - rhs) / std::max(std::abs(rhs), 1e-300);
        if (gap > worst) {
            worst = gap;
            worst_s = s;
        }
    }
    if (ar_ok && worst > 1e-12)
        report.push_back("AR condition theta*F(s) <= f(s)*s fails at s = " + detail::fmt_g(worst_s) +
                         " (relative excess " + detail::fmt_g(worst) + ")");

    // Growth at 0: f(s)/s^{p-1} must decrease to 0 as s -> 0+.
    {
        double r1 = params.f(1e-6) / std::pow(1e-6, params.p - 1.0);
        double r2 = params.f(1e-4) / std::pow(1e-4, params.p - 1.0);
        double r3 = params.f(1e-2) / std::pow(1e-2, params.p - 1.0);
        if (!(r1 < r2 && r2 < r3) || !(r1 < 1e-2 * r3))
            report.push_back("growth at 0: f(s)/s^{p-1} does not vanish as s -> 0+");
    }
    // Growth at infinity: f(s)/s^{q-1} stays bounded.
    {
        double r1 = params.f(1e2) / std::pow(1e2, params.q - 1.0);
        double r2 = params.f(1e4) / std::pow(1e4, params.q - 1.0);
        double r3 = params.f(1e6) / std::pow(1e6, params.q - 1.0);
        if (r3 > r2 * (1.0 + 1e-9) && r2 > r1 * (1.0 + 1e-9))
            report.push_back("growth at infinity: f(s)/s^{q-1} increases without bound");
    }

    return report;
}

}  // namespace peakscope

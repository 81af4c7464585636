#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "peakscope/quadrature.hpp"
#include "peakscope/radial.hpp"

namespace peakscope {

/// Surface measure of the unit sphere, omega_{n-1} = 2 pi^{n/2} / Gamma(n/2).
/// n = 1 gives 2 (both half-lines).
inline double surface_measure(int n) {
    return 2.0 * std::pow(M_PI, 0.5 * n) / std::tgamma(0.5 * n);
}

/// The energy integrals of the frozen functional
/// I(u) = a \int beta(grad u) + (V/p) \int |u|^p - K \int F(u),
/// with beta(xi) = |xi|^p / p. C is the pure q-power mass \int |u|^q.
struct energy_breakdown {
    double A = 0.0;
    double B = 0.0;
    double C = 0.0;
    double Phi = 0.0;
    double I_value = 0.0;
};

namespace detail {

struct tail_data {
    double R = 0.0;
    double wN = 0.0;
    double rate = 0.0;  // positive decay rate used for the closure
    bool usable = false;
};

inline tail_data tail_of(const radial_profile& profile, const frozen_coefficients& frozen) {
    tail_data t;
    if (profile.size() < 2 || !(profile.w.back() > 0.0)) return t;
    t.R = profile.r_back();
    t.wN = profile.w.back();
    const double pred = predicted_decay_rate(profile.params, frozen);
    const double fit = -profile.decay_rate_fit;
    t.rate = (is_finite(fit) && fit > 0.5 * pred && fit < 2.0 * pred) ? fit : pred;
    t.usable = t.rate > 0.0;
    return t;
}

/// \int_0^{r_0} y(r) r^{n-1} dr with y flat near the origin (w'(0) = 0).
inline double head_term(const radial_profile& profile, double y0) {
    const double r0 = profile.r.empty() ? 0.0 : profile.r.front();
    return y0 * std::pow(r0, profile.params.n) / profile.params.n;
}

/// omega * (head + \int_grid y r^{n-1} dr + analytic exponential closure),
/// where the closed tail is amp * e^{-c (r - R)} r^{n-1} and y0 is the
/// unweighted integrand at the first node.
inline double radial_integral(const radial_profile& profile, const std::vector<double>& y, double y0,
                              double tail_amp, double tail_c, const tail_data& tail) {
    double core = integrate_samples(profile.r, y) + head_term(profile, y0);
    double closure = 0.0;
    if (tail.usable && tail_c > 0.0)
        closure = tail_amp * exp_tail_moment(tail.R, tail_c, profile.params.n - 1);
    return surface_measure(profile.params.n) * (core + closure);
}

}  // namespace detail

/// Radial quadrature of the energy integrals with the r^{n-1} weight and the
/// surface measure; the tail beyond the grid is closed analytically with the
/// fitted exponential.
inline energy_breakdown integrate_energy(const radial_profile& profile,
                                         const frozen_coefficients& frozen) {
    frozen.validate();
    const problem_params& params = profile.params;
    const std::size_t n = profile.size();
    if (n < 3) throw input_error("integrate_energy: profile too short");

    std::vector<double> yA(n), yB(n), yC(n), yPhi(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double rw = std::pow(profile.r[i], params.n - 1.0);
        const double w = std::abs(profile.w[i]);
        const double dw = std::abs(profile.w_prime[i]);
        yA[i] = std::pow(dw, params.p) / params.p * rw;
        yB[i] = std::pow(w, params.p) * rw;
        yC[i] = std::pow(w, params.q) * rw;
        yPhi[i] = params.F(w) * rw;
    }

    const detail::tail_data tail = detail::tail_of(profile, frozen);
    energy_breakdown eb;
    const double kw = tail.rate * tail.wN;
    const double w0 = std::abs(profile.w.front());
    const double dw0 = std::abs(profile.w_prime.front());
    eb.A = detail::radial_integral(profile, yA, std::pow(dw0, params.p) / params.p,
                                   std::pow(kw, params.p) / params.p, params.p * tail.rate, tail);
    eb.B = detail::radial_integral(profile, yB, std::pow(w0, params.p), std::pow(tail.wN, params.p),
                                   params.p * tail.rate, tail);
    eb.C = detail::radial_integral(profile, yC, std::pow(w0, params.q), std::pow(tail.wN, params.q),
                                   params.q * tail.rate, tail);
    if (params.pure_power()) {
        eb.Phi = eb.C / params.q;
    } else {
        double core = integrate_samples(profile.r, yPhi) + detail::head_term(profile, params.F(w0));
        double closure = 0.0;
        if (tail.usable)
            for (const auto& t : profile.params.terms)
                closure += t.coeff / t.exponent * std::pow(tail.wN, t.exponent) *
                           exp_tail_moment(tail.R, t.exponent * tail.rate, params.n - 1);
        eb.Phi = surface_measure(params.n) * (core + closure);
    }
    eb.I_value = frozen.a * eb.A + frozen.V / params.p * eb.B - frozen.K * eb.Phi;
    return eb;
}

/// |p a A + V B - K \int f(u) u| / (K \int f(u) u); zero at critical points.
inline double nehari_residual(const radial_profile& profile, const frozen_coefficients& frozen) {
    const problem_params& params = profile.params;
    const std::size_t n = profile.size();
    std::vector<double> yfu(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double w = std::abs(profile.w[i]);
        yfu[i] = params.f(w) * w * std::pow(profile.r[i], params.n - 1.0);
    }
    const detail::tail_data tail = detail::tail_of(profile, frozen);
    const double w0 = std::abs(profile.w.front());
    double core = integrate_samples(profile.r, yfu) + detail::head_term(profile, params.f(w0) * w0);
    double closure = 0.0;
    if (tail.usable) {
        if (params.pure_power()) {
            closure = std::pow(tail.wN, params.q) *
                      exp_tail_moment(tail.R, params.q * tail.rate, params.n - 1);
        } else {
            for (const auto& t : params.terms)
                closure += t.coeff * std::pow(tail.wN, t.exponent) *
                           exp_tail_moment(tail.R, t.exponent * tail.rate, params.n - 1);
        }
    }
    const double fu = surface_measure(params.n) * (core + closure);
    const energy_breakdown eb = integrate_energy(profile, frozen);
    const double num = params.p * frozen.a * eb.A + frozen.V * eb.B - frozen.K * fu;
    const double den = frozen.K * fu;
    if (!(den > 0.0)) return std::abs(num) > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    return std::abs(num) / den;
}

/// Fiber maximizer theta* of theta -> I(theta u). Closed form for a pure
/// power; monotone bisection for a power sum.
inline double nehari_project(const radial_profile& direction, const frozen_coefficients& frozen) {
    frozen.validate();
    const problem_params& params = direction.params;
    const energy_breakdown eb = integrate_energy(direction, frozen);
    const double head = params.p * frozen.a * eb.A + frozen.V * eb.B;
    if (!(head > 0.0)) throw input_error("nehari_project: direction is trivial");

    if (params.pure_power()) {
        if (!(eb.C > 0.0)) throw input_error("nehari_project: direction has no q-power mass");
        return std::pow(head / (frozen.K * eb.C), 1.0 / (params.q - params.p));
    }

    // Moments M_e = \int |u|^e for each power-sum term.
    const std::size_t n = direction.size();
    std::vector<double> moments(params.terms.size(), 0.0);
    const detail::tail_data tail = detail::tail_of(direction, frozen);
    std::vector<double> y(n);
    for (std::size_t t = 0; t < params.terms.size(); ++t) {
        const double e = params.terms[t].exponent;
        for (std::size_t i = 0; i < n; ++i)
            y[i] = std::pow(std::abs(direction.w[i]), e) * std::pow(direction.r[i], params.n - 1.0);
        double closure = tail.usable ? std::pow(tail.wN, e) *
                                           exp_tail_moment(tail.R, e * tail.rate, params.n - 1)
                                     : 0.0;
        const double head = detail::head_term(direction, std::pow(std::abs(direction.w.front()), e));
        moments[t] = surface_measure(params.n) * (integrate_samples(direction.r, y) + head + closure);
    }
    bool any = false;
    for (std::size_t t = 0; t < params.terms.size(); ++t)
        any = any || (params.terms[t].coeff > 0.0 && moments[t] > 0.0);
    if (!any) throw input_error("nehari_project: direction has no superlinear mass");

    // g(theta) = theta^{p-1} head - K sum_e c_e theta^{e-1} M_e is positive for
    // small theta and eventually negative; its root is theta*.
    auto g = [&](double theta) {
        double acc = std::pow(theta, params.p - 1.0) * head;
        for (std::size_t t = 0; t < params.terms.size(); ++t)
            acc -= frozen.K * params.terms[t].coeff * std::pow(theta, params.terms[t].exponent - 1.0) *
                   moments[t];
        return acc;
    };
    double lo = 1.0, hi = 1.0;
    while (g(lo) <= 0.0) {
        lo *= 0.5;
        if (lo < 1e-12) throw solver_error("nehari_project: no positive bracket");
    }
    while (g(hi) >= 0.0) {
        hi *= 2.0;
        if (hi > 1e12) throw solver_error("nehari_project: no finite maximizer");
    }
    while (hi - lo > 1e-12 * hi) {
        const double mid = 0.5 * (lo + hi);
        (g(mid) >= 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

/// I(theta u) from the direction's integrals.
inline double fiber_energy(const radial_profile& direction, const frozen_coefficients& frozen,
                           double theta) {
    const problem_params& params = direction.params;
    const energy_breakdown eb = integrate_energy(direction, frozen);
    const double tp = std::pow(theta, params.p);
    double value = frozen.a * tp * eb.A + frozen.V / params.p * tp * eb.B;
    if (params.pure_power()) {
        value -= frozen.K / params.q * std::pow(theta, params.q) * eb.C;
    } else {
        const std::size_t n = direction.size();
        std::vector<double> y(n);
        const detail::tail_data tail = detail::tail_of(direction, frozen);
        for (const auto& t : params.terms) {
            for (std::size_t i = 0; i < n; ++i)
                y[i] = std::pow(std::abs(direction.w[i]), t.exponent) *
                       std::pow(direction.r[i], params.n - 1.0);
            double closure = tail.usable ? std::pow(tail.wN, t.exponent) *
                                               exp_tail_moment(tail.R, t.exponent * tail.rate,
                                                               params.n - 1)
                                         : 0.0;
            const double head =
                detail::head_term(direction, std::pow(std::abs(direction.w.front()), t.exponent));
            value -= frozen.K * t.coeff / t.exponent * std::pow(theta, t.exponent) *
                     surface_measure(params.n) * (integrate_samples(direction.r, y) + head + closure);
        }
    }
    return value;
}

/// Minimax level from the ground state: c = I(theta* v) with theta* ~ 1.
inline double mountain_pass_level(const radial_profile& ground_state,
                                  const frozen_coefficients& frozen) {
    const double theta = nehari_project(ground_state, frozen);
    return fiber_energy(ground_state, frozen, theta);
}

/// Convenience overload that solves the frozen problem first.
inline double mountain_pass_level(const problem_params& params, const frozen_coefficients& frozen,
                                  const shoot_options& opts = {}) {
    if (params.pure_power()) {
        radial_profile canonical = shoot_ground_state(params, frozen_coefficients{}, opts);
        return mountain_pass_level(solve_frozen(canonical, frozen, opts), frozen);
    }
    return mountain_pass_level(shoot_ground_state(params, frozen, opts), frozen);
}

/// Upper bounds on the minimax level from the perturbed direction family
/// {w (1 + s exp(-(r/rho)^2))}; the minimum over the family (s = 0 included)
/// reproduces the level itself.
inline double nehari_family_min(const radial_profile& ground_state, const frozen_coefficients& frozen,
                                const std::vector<double>& s_values,
                                const std::vector<double>& rho_values) {
    double best = mountain_pass_level(ground_state, frozen);
    radial_profile dir = ground_state;
    for (double rho : rho_values) {
        for (double s : s_values) {
            if (s == 0.0) continue;
            for (std::size_t i = 0; i < ground_state.size(); ++i) {
                const double x = ground_state.r[i] / rho;
                const double bump = std::exp(-x * x);
                dir.w[i] = ground_state.w[i] * (1.0 + s * bump);
                dir.w_prime[i] = ground_state.w_prime[i] * (1.0 + s * bump) +
                                 ground_state.w[i] * s * (-2.0 * x / rho) * bump;
            }
            const double theta = nehari_project(dir, frozen);
            best = std::min(best, fiber_energy(dir, frozen, theta));
        }
    }
    return best;
}

/// |(n-p) a A + n (V/p) B - n K Phi| / (n K Phi) — the dilation identity
/// residual; zero profiles return 0.
inline double pohozaev_residual(const radial_profile& profile, const frozen_coefficients& frozen) {
    const problem_params& params = profile.params;
    const energy_breakdown eb = integrate_energy(profile, frozen);
    const double num = (params.n - params.p) * frozen.a * eb.A +
                       params.n * frozen.V / params.p * eb.B - params.n * frozen.K * eb.Phi;
    const double den = params.n * frozen.K * eb.Phi;
    if (!(den > 0.0)) return std::abs(num) > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    return std::abs(num) / den;
}

/// Test vector fields for the variational identity.
struct h_field {
    enum kind_t { dilation, coordinate } kind = dilation;
    int k = 1;             // coordinate index, 1-based
    double cutoff = 0.0;   // radius where the plateau of T ends
};

/// Variational-identity residual for the test field. The dilation field
/// reproduces the Pohozaev combination. A coordinate field e_k T(|x|/cutoff)
/// has identically cancelling signed terms on a radial profile (odd angular
/// factor), so the residual reports the normalized cutoff-layer envelope
/// |T'| (a |grad beta(grad u) . partial_k u| + |L(u, grad u)|) — the quantity
/// whose decay with growing cutoff drives the identity in the limit. It
/// tends to 0 as the cutoff marches into the exponential tail.
inline double pucci_serrin_residual(const radial_profile& profile, const frozen_coefficients& frozen,
                                    const h_field& field) {
    const problem_params& params = profile.params;
    if (field.kind == h_field::dilation) return pohozaev_residual(profile, frozen);

    if (field.k < 1 || field.k > params.n) throw input_error("pucci_serrin_residual: bad coordinate");
    const double rho = field.cutoff;
    if (!(rho > 0.0) || rho > profile.r_back())
        throw input_error("pucci_serrin_residual: cutoff radius must lie within the grid");

    // mean of |omega_k| over the unit sphere
    const double mu = std::tgamma(0.5 * params.n) /
                      (std::sqrt(M_PI) * std::tgamma(0.5 * (params.n + 1.0)));

    std::vector<double> xs, ys;
    xs.reserve(profile.size());
    ys.reserve(profile.size());
    for (std::size_t i = 0; i < profile.size(); ++i) {
        const double r = profile.r[i];
        if (r < rho || r > 2.0 * rho) continue;
        const double t = (r - rho) / rho;
        const double dT = 6.0 * t * (1.0 - t) / rho;  // |T'| of the cubic bridge
        const double w = std::abs(profile.w[i]);
        const double dw = std::abs(profile.w_prime[i]);
        const double lag = frozen.a * std::pow(dw, params.p) / params.p +
                           frozen.V / params.p * std::pow(w, params.p) - frozen.K * params.F(w);
        ys.push_back(dT * (frozen.a * std::pow(dw, params.p) + std::abs(lag)) *
                     std::pow(r, params.n - 1.0));
        xs.push_back(r);
    }
    if (xs.size() < 8)
        throw input_error("pucci_serrin_residual: cutoff layer covers too few grid nodes");
    const double layer = surface_measure(params.n) * mu * integrate_samples(xs, ys);

    const energy_breakdown eb = integrate_energy(profile, frozen);
    const double den = params.n * frozen.K * eb.Phi;
    if (!(den > 0.0)) return layer > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    return layer / den;
}

}  // namespace peakscope

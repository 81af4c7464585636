#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "peakscope/energy.hpp"
#include "peakscope/expr.hpp"
#include "peakscope/radial.hpp"
#include "peakscope/rng.hpp"

namespace peakscope {

namespace detail {

inline double round_sig6(double x) {
    if (x == 0.0 || !is_finite(x)) return x;
    const double mag = std::pow(10.0, 5.0 - std::floor(std::log10(std::abs(x))));
    return std::round(x * mag) / mag;
}

}  // namespace detail

/// Shared state for evaluating the ground-state energy landscape: the
/// canonical profile (solved once) for pure powers, and a profile cache
/// keyed by rounded frozen triples for direct-shooting nonlinearities.
/// Immutable apart from the cache; safe to share across scan workers.
class sigma_context {
  public:
    explicit sigma_context(const problem_params& params, const shoot_options& opts = {})
        : params_(params), opts_(opts) {
        if (auto report = validate_params(params); !report.empty())
            throw input_error("sigma_context: invalid parameters: " + report.front());
        if (params_.pure_power()) {
            canonical_ = std::make_shared<const radial_profile>(
                shoot_ground_state(params_, frozen_coefficients{}, opts_));
            canonical_energy_ = integrate_energy(*canonical_, frozen_coefficients{});
        }
    }

    const problem_params& params() const { return params_; }
    const shoot_options& options() const { return opts_; }

    const radial_profile& canonical() const {
        if (!canonical_) throw solver_error("sigma_context: no canonical profile for this family");
        return *canonical_;
    }
    const energy_breakdown& canonical_energy() const {
        canonical();
        return canonical_energy_;
    }

    /// Ground state of the frozen problem (exact rescaling for pure powers;
    /// cached direct shooting otherwise).
    std::shared_ptr<const radial_profile> ground_state(const frozen_coefficients& frozen) const {
        frozen.validate();
        if (params_.pure_power())
            return std::make_shared<const radial_profile>(solve_frozen(*canonical_, frozen, opts_));
        return cached_shot(frozen);
    }

    /// Closed-form energy integrals of the frozen ground state (pure power):
    /// A = gamma^p lambda^{n-p} A1, B = gamma^p lambda^n B1,
    /// C = gamma^q lambda^n C1, Phi = C/q.
    energy_breakdown breakdown(const frozen_coefficients& frozen) const {
        frozen.validate();
        if (!params_.pure_power()) {
            // Evaluate at the rounded triple the cached profile solves, so
            // the result is a pure function of the cache key.
            const frozen_coefficients rounded{detail::round_sig6(frozen.a),
                                              detail::round_sig6(frozen.V),
                                              detail::round_sig6(frozen.K)};
            return integrate_energy(*cached_shot(rounded), rounded);
        }
        const double gamma = std::pow(frozen.V / frozen.K, 1.0 / (params_.q - params_.p));
        const double lambda = std::pow(frozen.a / frozen.V, 1.0 / params_.p);
        const double gp = std::pow(gamma, params_.p);
        const double ln = std::pow(lambda, static_cast<double>(params_.n));
        energy_breakdown eb;
        eb.A = gp * std::pow(lambda, params_.n - params_.p) * canonical_energy_.A;
        eb.B = gp * ln * canonical_energy_.B;
        eb.C = std::pow(gamma, params_.q) * ln * canonical_energy_.C;
        eb.Phi = eb.C / params_.q;
        eb.I_value = frozen.a * eb.A + frozen.V / params_.p * eb.B - frozen.K * eb.Phi;
        return eb;
    }

    /// The ground-state energy Sigma as a function of the frozen triple.
    double sigma(const frozen_coefficients& frozen) const { return breakdown(frozen).I_value; }

  private:
    problem_params params_;
    shoot_options opts_;
    std::shared_ptr<const radial_profile> canonical_;
    energy_breakdown canonical_energy_;

    mutable std::mutex cache_mutex_;
    mutable std::map<std::array<double, 3>, std::shared_ptr<const radial_profile>> cache_;

    // Direct-shooting cache: the key is the triple rounded to 6 significant
    // digits and the stored profile is solved for the rounded triple, so the
    // cache content is a pure function of the key (deterministic under any
    // scheduling).
    std::shared_ptr<const radial_profile> cached_shot(const frozen_coefficients& frozen) const {
        const std::array<double, 3> key{detail::round_sig6(frozen.a), detail::round_sig6(frozen.V),
                                        detail::round_sig6(frozen.K)};
        {
            std::lock_guard<std::mutex> lock(cache_mutex_);
            auto it = cache_.find(key);
            if (it != cache_.end()) return it->second;
        }
        frozen_coefficients rounded{key[0], key[1], key[2]};
        auto profile =
            std::make_shared<const radial_profile>(shoot_ground_state(params_, rounded, opts_));
        std::lock_guard<std::mutex> lock(cache_mutex_);
        auto [it, inserted] = cache_.emplace(key, profile);
        return it->second;
    }
};

/// Coefficient values frozen at a point; throws naming the first
/// nonpositive coefficient.
inline frozen_coefficients freeze_at(const coefficient_field& field, std::span<const double> z) {
    frozen_coefficients frozen;
    frozen.a = field.alpha.eval(z);
    frozen.V = field.V.eval(z);
    frozen.K = field.K.eval(z);
    const char* bad = frozen.a <= 0.0 ? "alpha" : frozen.V <= 0.0 ? "V" : frozen.K <= 0.0 ? "K" : nullptr;
    if (bad || !is_finite(frozen.a) || !is_finite(frozen.V) || !is_finite(frozen.K))
        throw input_error(std::string("rejected point: coefficient ") + (bad ? bad : "?") +
                          " is not positive here");
    return frozen;
}

inline double default_fd_step(std::span<const double> z) {
    double norm2 = 0.0;
    for (double v : z) norm2 += v * v;
    return 1e-4 * (1.0 + std::sqrt(norm2));
}

/// Central differences per coordinate at two step sizes, Richardson-
/// extrapolated when they disagree by more than 1e-4 relative. A positivity
/// failure at a stencil point shrinks the step once and retries.
inline std::vector<double> sigma_grad_fd(const coefficient_field& field, const sigma_context& ctx,
                                         std::span<const double> z, double step = 0.0) {
    if (step == 0.0) step = default_fd_step(z);
    if (!(step > 0.0)) throw input_error("sigma_grad_fd: step must be positive");
    const int n = field.dimension;
    std::vector<double> grad(static_cast<std::size_t>(n));
    std::vector<double> zp(z.begin(), z.end());

    auto value_at = [&](double& slot, double v) {
        slot = v;
        double out = ctx.sigma(freeze_at(field, zp));
        return out;
    };

    for (int k = 0; k < n; ++k) {
        double& slot = zp[static_cast<std::size_t>(k)];
        const double center = z[static_cast<std::size_t>(k)];
        double h = step;
        for (int attempt = 0;; ++attempt) {
            try {
                const double f_ph = value_at(slot, center + h);
                const double f_mh = value_at(slot, center - h);
                const double f_ph2 = value_at(slot, center + 0.5 * h);
                const double f_mh2 = value_at(slot, center - 0.5 * h);
                slot = center;
                const double d_h = (f_ph - f_mh) / (2.0 * h);
                const double d_h2 = (f_ph2 - f_mh2) / h;
                const double scale = std::max({std::abs(d_h), std::abs(d_h2), 1e-300});
                grad[static_cast<std::size_t>(k)] =
                    std::abs(d_h - d_h2) > 1e-4 * scale ? (4.0 * d_h2 - d_h) / 3.0 : d_h2;
                break;
            } catch (const input_error&) {
                slot = center;
                if (attempt >= 1) throw;
                h *= 0.125;  // shrink once, then give up
            }
        }
    }
    return grad;
}

/// One Sigma evaluation bundled with its diagnostics. The stored sigma comes
/// from the closed-form route; ground_energy is the independent quadrature
/// of the solved profile, and the two must agree to 1e-8 relative for pure
/// powers.
struct sigma_sample {
    std::vector<double> z;
    double sigma = 0.0;
    std::vector<double> grad_fd;
    frozen_coefficients frozen;
    energy_breakdown ground_energy;
};

inline sigma_sample sigma_at(const coefficient_field& field, const sigma_context& ctx,
                             std::span<const double> z) {
    sigma_sample sample;
    sample.z.assign(z.begin(), z.end());
    sample.frozen = freeze_at(field, z);
    auto gs = ctx.ground_state(sample.frozen);
    sample.ground_energy = integrate_energy(*gs, sample.frozen);
    sample.sigma = ctx.sigma(sample.frozen);
    if (ctx.params().pure_power()) {
        const double gap = std::abs(sample.sigma - sample.ground_energy.I_value);
        if (gap > 1e-8 * std::max(1.0, std::abs(sample.sigma)))
            throw solver_error("sigma_at: closed-form and quadrature energies disagree");
    }
    sample.grad_fd = sigma_grad_fd(field, ctx, z);
    return sample;
}

/// The vector grad_z I_z(v_z) on the ground-state branch:
/// (grad alpha) A + (grad V) B/p - (grad K) Phi, with the integrals taken
/// from the ground state frozen at z.
inline std::vector<double> nabla_z_energy(const coefficient_field& field, const sigma_context& ctx,
                                          std::span<const double> z) {
    const auto ga = field.alpha.eval_with_gradient(z);
    const auto gV = field.V.eval_with_gradient(z);
    const auto gK = field.K.eval_with_gradient(z);
    frozen_coefficients frozen{ga.value, gV.value, gK.value};
    const char* bad = frozen.a <= 0.0 ? "alpha" : frozen.V <= 0.0 ? "V" : frozen.K <= 0.0 ? "K" : nullptr;
    if (bad) throw input_error(std::string("rejected point: coefficient ") + bad + " is not positive here");

    auto gs = ctx.ground_state(frozen);
    const energy_breakdown eb = integrate_energy(*gs, frozen);
    std::vector<double> out(static_cast<std::size_t>(field.dimension));
    for (int k = 0; k < field.dimension; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        out[ku] = ga.gradient[ku] * eb.A + gV.gradient[ku] * eb.B / ctx.params().p -
                  gK.gradient[ku] * eb.Phi;
    }
    return out;
}

/// Directional derivative bracket of Sigma at z along a unit vector w on the
/// ground-state branch; the two components coincide on a singleton branch.
inline std::pair<double, double> gamma_pm(const coefficient_field& field, const sigma_context& ctx,
                                          std::span<const double> z, std::span<const double> w) {
    if (static_cast<int>(w.size()) != field.dimension)
        throw input_error("gamma_pm: direction has wrong dimension");
    double norm2 = 0.0;
    for (double v : w) norm2 += v * v;
    if (std::abs(norm2 - 1.0) > 1e-10) throw input_error("gamma_pm: direction must be unit length");
    const auto grad = nabla_z_energy(field, ctx, z);
    double value = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) value += grad[k] * w[k];
    return {value, value};
}

/// Sampled generalized-gradient estimate around a point.
struct clarke_estimate {
    std::vector<double> center;
    std::vector<std::vector<double>> gradients;  // sampled FD gradients
    std::vector<double> min_norm_point;          // convex combination of the samples
    double min_norm = 0.0;
    double tolerance = 0.0;
    bool contains_zero = false;
    bool degenerate = false;  // all samples identical up to noise
};

namespace detail {

/// Minimum-norm point of the convex hull by Frank-Wolfe with exact line
/// search; the iterate stays a convex combination throughout, which is the
/// feasibility certificate.
inline void min_norm_point(clarke_estimate& est) {
    const std::size_t m = est.gradients.size();
    const std::size_t n = est.center.size();
    std::vector<double> weights(m, 0.0);
    weights[0] = 1.0;
    std::vector<double> v = est.gradients[0];

    double max_norm2 = 0.0;
    for (const auto& g : est.gradients) {
        double s = 0.0;
        for (double gi : g) s += gi * gi;
        max_norm2 = std::max(max_norm2, s);
    }
    const double stop_gap = std::max(1e-30, 1e-14 * max_norm2);

    for (int iter = 0; iter < 20000; ++iter) {
        std::size_t best = 0;
        double best_dot = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < m; ++j) {
            double d = 0.0;
            for (std::size_t i = 0; i < n; ++i) d += est.gradients[j][i] * v[i];
            if (d < best_dot) {
                best_dot = d;
                best = j;
            }
        }
        double v2 = 0.0;
        for (double vi : v) v2 += vi * vi;
        if (v2 - best_dot <= stop_gap) break;  // duality gap

        // exact step toward the best vertex
        double diff2 = 0.0, diff_dot_v = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = est.gradients[best][i] - v[i];
            diff2 += d * d;
            diff_dot_v += d * v[i];
        }
        if (diff2 <= 0.0) break;
        double t = std::clamp(-diff_dot_v / diff2, 0.0, 1.0);
        if (t <= 0.0) break;
        for (std::size_t i = 0; i < n; ++i) v[i] += t * (est.gradients[best][i] - v[i]);
        for (std::size_t j = 0; j < m; ++j) weights[j] *= 1.0 - t;
        weights[best] += t;
    }
    est.min_norm_point = v;
    double v2 = 0.0;
    for (double vi : v) v2 += vi * vi;
    est.min_norm = std::sqrt(v2);
    est.tolerance = 1e-3 * std::sqrt(max_norm2);
    est.contains_zero = est.min_norm <= est.tolerance;

    est.degenerate = true;
    for (const auto& g : est.gradients) {
        for (std::size_t i = 0; i < n; ++i)
            if (std::abs(g[i] - est.gradients[0][i]) >
                1e-12 * std::max(1.0, std::sqrt(max_norm2)))
                est.degenerate = false;
    }
}

}  // namespace detail

/// Generalized-gradient estimate for an arbitrary objective (the test seam:
/// the production path plugs Sigma in, tests can inject surrogates).
inline clarke_estimate estimate_clarke_fn(const std::function<double(std::span<const double>)>& objective,
                                          int n, std::span<const double> z, double radius,
                                          int sample_count, std::uint64_t seed, double fd_step = 0.0) {
    if (!(radius > 0.0)) throw input_error("estimate_clarke: radius must be positive");
    if (sample_count < 2 * n + 1) throw input_error("estimate_clarke: need at least 2n+1 samples");
    if (fd_step == 0.0) fd_step = default_fd_step(z);

    auto grad_at = [&](std::span<const double> at) {
        std::vector<double> g(static_cast<std::size_t>(n));
        std::vector<double> zp(at.begin(), at.end());
        for (int k = 0; k < n; ++k) {
            const double center = at[static_cast<std::size_t>(k)];
            zp[static_cast<std::size_t>(k)] = center + fd_step;
            const double fp = objective(zp);
            zp[static_cast<std::size_t>(k)] = center - fd_step;
            const double fm = objective(zp);
            zp[static_cast<std::size_t>(k)] = center;
            g[static_cast<std::size_t>(k)] = (fp - fm) / (2.0 * fd_step);
        }
        return g;
    };

    clarke_estimate est;
    est.center.assign(z.begin(), z.end());
    est.gradients.push_back(grad_at(z));
    rng gen(seed);
    std::vector<double> at(z.begin(), z.end());
    for (int s = 1; s < sample_count; ++s) {
        const auto offset = gen.ball_point(n, radius);
        for (int k = 0; k < n; ++k)
            at[static_cast<std::size_t>(k)] = z[static_cast<std::size_t>(k)] + offset[static_cast<std::size_t>(k)];
        est.gradients.push_back(grad_at(at));
    }
    detail::min_norm_point(est);
    return est;
}

/// Clarke estimate of Sigma over the coefficient landscape.
inline clarke_estimate estimate_clarke(const coefficient_field& field, const sigma_context& ctx,
                                       std::span<const double> z, double radius, int sample_count,
                                       std::uint64_t seed) {
    auto objective = [&](std::span<const double> at) { return ctx.sigma(freeze_at(field, at)); };
    return estimate_clarke_fn(objective, field.dimension, z, radius, sample_count, seed);
}

/// Max difference quotient of Sigma over axis-adjacent grid pairs in the box.
inline double sigma_lipschitz_probe(const coefficient_field& field, const sigma_context& ctx,
                                    const scan_box& box, int grid_n) {
    box.validate();
    if (grid_n < 3) throw input_error("sigma_lipschitz_probe: need at least 3 nodes per axis");
    const int n = box.dimension();
    if (n != field.dimension) throw input_error("sigma_lipschitz_probe: box dimension mismatch");

    std::vector<long> strides(static_cast<std::size_t>(n), 1);
    for (int k = 1; k < n; ++k)
        strides[static_cast<std::size_t>(k)] = strides[static_cast<std::size_t>(k - 1)] * grid_n;
    const long total = strides[static_cast<std::size_t>(n - 1)] * grid_n;

    auto point_of = [&](long flat) {
        std::vector<double> z(static_cast<std::size_t>(n));
        for (int k = 0; k < n; ++k) {
            const long idx = (flat / strides[static_cast<std::size_t>(k)]) % grid_n;
            const auto& ax = box.axes[static_cast<std::size_t>(k)];
            z[static_cast<std::size_t>(k)] = ax[0] + (ax[1] - ax[0]) * idx / (grid_n - 1);
        }
        return z;
    };

    std::vector<double> values(static_cast<std::size_t>(total));
    for (long t = 0; t < total; ++t) values[static_cast<std::size_t>(t)] = ctx.sigma(freeze_at(field, point_of(t)));

    double worst = 0.0;
    for (long t = 0; t < total; ++t) {
        for (int k = 0; k < n; ++k) {
            const long idx = (t / strides[static_cast<std::size_t>(k)]) % grid_n;
            if (idx + 1 >= grid_n) continue;
            const long s = t + strides[static_cast<std::size_t>(k)];
            const auto& ax = box.axes[static_cast<std::size_t>(k)];
            const double dz = (ax[1] - ax[0]) / (grid_n - 1);
            worst = std::max(worst, std::abs(values[static_cast<std::size_t>(s)] -
                                             values[static_cast<std::size_t>(t)]) / dz);
        }
    }
    return worst;
}

}  // namespace peakscope

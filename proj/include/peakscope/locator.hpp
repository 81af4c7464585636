#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "peakscope/linalg.hpp"
#include "peakscope/sigma.hpp"

namespace peakscope {

/// Per-point diagnostics for a weak-concentration candidate.
struct candidate_report {
    std::vector<double> z;
    std::vector<double> N;        // necessary-condition vector at z
    double N_norm = 0.0;          // |N|_2
    int gram_rank = 0;            // rank of [grad alpha; grad V; grad K]
    bool lin_dep = false;         // rank <= 2
    std::vector<double> grad_sigma_fd;
    bool in_C_set = false;
    std::vector<std::pair<std::vector<double>, double>> refinement_trace;  // (point, |N|)
    bool refined = false;
    int degenerate_directions = 0;          // null directions of the N-Jacobian
    std::vector<double> null_basis;         // their basis, column list
    bool nonsmooth_coefficients = false;    // Clarke-only point
};

/// N(z) = (grad alpha) A + (grad V) B/p - (grad K) Phi on the ground-state
/// branch; the pairing N(z) . w gives the directional bracket.
inline std::vector<double> necessary_vector(const coefficient_field& field, const sigma_context& ctx,
                                            std::span<const double> z) {
    return nabla_z_energy(field, ctx, z);
}

struct gram_result {
    int rank = 0;
    bool lin_dep = false;
    std::array<double, 3> singular_values{0.0, 0.0, 0.0};  // descending
};

/// Numerical rank of the 3 x n matrix [grad alpha; grad V; grad K] through
/// the singular values of its 3 x 3 Gram matrix.
inline gram_result gram_rank(const coefficient_field& field, std::span<const double> z,
                             double tol = 1e-8) {
    const auto ga = field.alpha.eval_with_gradient(z);
    const auto gV = field.V.eval_with_gradient(z);
    const auto gK = field.K.eval_with_gradient(z);
    const std::array<const std::vector<double>*, 3> rows{&ga.gradient, &gV.gradient, &gK.gradient};

    std::vector<double> gram(9, 0.0);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < rows[i]->size(); ++k) s += (*rows[i])[k] * (*rows[j])[k];
            gram[i * 3 + j] = s;
        }
    const symmetric_eigen eig = jacobi_eigen(gram, 3);

    gram_result out;
    for (int i = 0; i < 3; ++i)
        out.singular_values[static_cast<std::size_t>(i)] =
            std::sqrt(std::max(eig.values[static_cast<std::size_t>(2 - i)], 0.0));
    const double smax = out.singular_values[0];
    if (smax > 0.0)
        for (double s : out.singular_values) out.rank += s > tol * smax ? 1 : 0;
    out.lin_dep = out.rank <= 2;
    return out;
}

struct scan_result {
    std::vector<candidate_report> candidates;
    bool degenerate_landscape = false;
    double median_abs_N = 0.0;
    double N_scale = 0.0;
    double tol = 0.0;
};

struct scan_options {
    double tol = 0.0;          // 0: auto, 1e-6 * grid scale of |N|
    double gram_tol = 1e-8;
    double positivity_floor = 1e-8;
    int max_iterations = 30;
    int jobs = 1;
    bool require_landscape_dimension = true;  // n >= 3 for landscape scans
};

namespace detail {

inline std::vector<double> grid_point(const scan_box& box, int grid_n, long flat) {
    const int n = box.dimension();
    std::vector<double> z(static_cast<std::size_t>(n));
    // lexicographic order: the last axis varies fastest
    for (int k = n - 1; k >= 0; --k) {
        const long idx = flat % grid_n;
        flat /= grid_n;
        const auto& ax = box.axes[static_cast<std::size_t>(k)];
        z[static_cast<std::size_t>(k)] = ax[0] + (ax[1] - ax[0]) * idx / (grid_n - 1);
    }
    return z;
}

inline double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

struct newton_step_result {
    std::vector<double> dz;
    int dropped = 0;
    std::vector<double> null_basis;
};

inline newton_step_result newton_direction(const coefficient_field& field, const sigma_context& ctx,
                                           const std::vector<double>& z, const std::vector<double>& N) {
    const std::size_t n = z.size();
    const double h = default_fd_step(z);
    std::vector<double> J(n * n, 0.0);
    std::vector<double> zp = z;
    for (std::size_t c = 0; c < n; ++c) {
        zp[c] = z[c] + h;
        const auto Np = necessary_vector(field, ctx, zp);
        zp[c] = z[c] - h;
        const auto Nm = necessary_vector(field, ctx, zp);
        zp[c] = z[c];
        for (std::size_t rrow = 0; rrow < n; ++rrow) J[rrow * n + c] = (Np[rrow] - Nm[rrow]) / (2.0 * h);
    }
    std::vector<double> b(n);
    for (std::size_t i = 0; i < n; ++i) b[i] = -N[i];
    auto solved = pinv_solve(J, n, b, 1e-9);
    return {std::move(solved.x), solved.dropped_directions, std::move(solved.null_basis)};
}

}  // namespace detail

/// Grid scan for zeros of the necessary-condition vector with damped
/// quasi-Newton refinement at local minima of |N|. Degenerate landscapes
/// (N identically zero, e.g. all coefficients constant) are reported as a
/// flag instead of a candidate list.
inline scan_result scan_candidates(const coefficient_field& field, const sigma_context& ctx,
                                   const scan_box& box, int grid_n, const scan_options& opts = {}) {
    box.validate();
    if (box.dimension() != field.dimension) throw input_error("scan_candidates: box dimension mismatch");
    if (grid_n < 4) throw input_error("scan_candidates: need grid_n >= 4 per axis");
    if (opts.require_landscape_dimension && ctx.params().n < 3)
        throw input_error("scan_candidates: landscape operations need n >= 3");
    field.certify_positive(box, std::max(grid_n, 9), opts.positivity_floor);

    const int n = box.dimension();
    long total = 1;
    for (int k = 0; k < n; ++k) total *= grid_n;

    std::vector<std::vector<double>> points(static_cast<std::size_t>(total));
    std::vector<std::vector<double>> Ns(static_cast<std::size_t>(total));
    std::vector<double> norms(static_cast<std::size_t>(total), 0.0);

    const int jobs = std::max(1, opts.jobs);
    auto worker = [&](long begin, long end) {
        for (long t = begin; t < end; ++t) {
            auto z = detail::grid_point(box, grid_n, t);
            auto N = necessary_vector(field, ctx, z);
            norms[static_cast<std::size_t>(t)] = detail::norm2(N);
            points[static_cast<std::size_t>(t)] = std::move(z);
            Ns[static_cast<std::size_t>(t)] = std::move(N);
        }
    };
    if (jobs == 1) {
        worker(0, total);
    } else {
        std::vector<std::thread> threads;
        const long chunk = (total + jobs - 1) / jobs;
        for (int j = 0; j < jobs; ++j) {
            const long b = j * chunk, e = std::min(total, b + chunk);
            if (b < e) threads.emplace_back(worker, b, e);
        }
        for (auto& th : threads) th.join();
    }

    scan_result result;
    {
        std::vector<double> sorted = norms;
        std::sort(sorted.begin(), sorted.end());
        result.median_abs_N = sorted[sorted.size() / 2];
        result.N_scale = sorted.back();
    }
    // Degeneracy reference: Sigma at the box center over the box diameter.
    {
        std::vector<double> center(static_cast<std::size_t>(n));
        for (int k = 0; k < n; ++k)
            center[static_cast<std::size_t>(k)] =
                0.5 * (box.axes[static_cast<std::size_t>(k)][0] + box.axes[static_cast<std::size_t>(k)][1]);
        const double ref =
            std::max(1e-300, std::abs(ctx.sigma(freeze_at(field, center))) / box.diameter());
        if (result.median_abs_N <= 1e-10 * ref && result.N_scale <= 1e-8 * ref) {
            result.degenerate_landscape = true;
            return result;
        }
    }
    result.tol = opts.tol > 0.0 ? opts.tol : 1e-6 * result.N_scale;

    // Seeds: grid-local minima of |N| over axis neighbors.
    std::vector<long> strides(static_cast<std::size_t>(n), 1);
    for (int k = n - 2; k >= 0; --k)
        strides[static_cast<std::size_t>(k)] = strides[static_cast<std::size_t>(k + 1)] * grid_n;
    std::vector<long> seeds;
    for (long t = 0; t < total; ++t) {
        bool is_min = true;
        bool strict_somewhere = false;
        for (int k = 0; k < n && is_min; ++k) {
            const long idx = (t / strides[static_cast<std::size_t>(k)]) % grid_n;
            for (int d : {-1, 1}) {
                if (idx + d < 0 || idx + d >= grid_n) continue;
                const double nb = norms[static_cast<std::size_t>(t + d * strides[static_cast<std::size_t>(k)])];
                if (nb < norms[static_cast<std::size_t>(t)]) {
                    is_min = false;
                    break;
                }
                if (nb > norms[static_cast<std::size_t>(t)]) strict_somewhere = true;
            }
        }
        if (is_min && strict_somewhere) seeds.push_back(t);
    }

    for (long seed : seeds) {
        candidate_report rep;
        const std::vector<double> z_seed = points[static_cast<std::size_t>(seed)];
        std::vector<double> z = z_seed;
        std::vector<double> N = Ns[static_cast<std::size_t>(seed)];
        double nn = detail::norm2(N);
        rep.refinement_trace.emplace_back(z, nn);

        int dropped = 0;
        std::vector<double> null_basis;
        // Damped Newton, halving the step whenever |N| fails to decrease;
        // iterations past the tolerance polish the root toward the FP floor.
        for (int iter = 0; iter < opts.max_iterations; ++iter) {
            auto dir = detail::newton_direction(field, ctx, z, N);
            dropped = dir.dropped;
            null_basis = dir.null_basis;
            double s = 1.0;
            bool accepted = false;
            std::vector<double> z_try(z.size());
            while (s >= 1.0 / 64.0) {
                for (std::size_t k = 0; k < z.size(); ++k) z_try[k] = z[k] + s * dir.dz[k];
                std::optional<std::vector<double>> N_try;
                try {
                    N_try = necessary_vector(field, ctx, z_try);
                } catch (const input_error&) {
                    s *= 0.5;  // stepped outside the positive region
                    continue;
                }
                const double nn_try = detail::norm2(*N_try);
                if (nn_try < nn) {
                    z = z_try;
                    N = std::move(*N_try);
                    nn = nn_try;
                    rep.refinement_trace.emplace_back(z, nn);
                    accepted = true;
                    break;
                }
                s *= 0.5;
            }
            if (!accepted) break;  // no further progress at any damping
            double drift = 0.0;
            for (std::size_t k = 0; k < z.size(); ++k) drift = std::max(drift, std::abs(z[k] - z_seed[k]));
            if (drift > 2.0 * box.diameter()) break;  // refinement diverged
        }

        rep.z = z;
        rep.N = N;
        rep.N_norm = nn;
        rep.refined = nn <= result.tol;
        rep.degenerate_directions = dropped;
        rep.null_basis = null_basis;
        const auto gr = gram_rank(field, z, opts.gram_tol);
        rep.gram_rank = gr.rank;
        rep.lin_dep = gr.lin_dep;
        rep.grad_sigma_fd = sigma_grad_fd(field, ctx, z);
        rep.in_C_set = rep.refined && rep.lin_dep;
        rep.nonsmooth_coefficients = field.alpha.eval_with_gradient(z).nonsmooth ||
                                     field.V.eval_with_gradient(z).nonsmooth ||
                                     field.K.eval_with_gradient(z).nonsmooth;

        // Deduplicate against kept candidates, ignoring differences along a
        // kept candidate's degenerate directions.
        const double merge_tol = 1e-5 * (1.0 + box.diameter());
        bool duplicate = false;
        for (const auto& kept : result.candidates) {
            if (kept.z.size() != rep.z.size()) continue;
            std::vector<double> d(rep.z.size());
            for (std::size_t k = 0; k < d.size(); ++k) d[k] = rep.z[k] - kept.z[k];
            const std::size_t nb = kept.z.size();
            for (int c = 0; c < kept.degenerate_directions; ++c) {
                double dot = 0.0;
                for (std::size_t k = 0; k < nb; ++k)
                    dot += d[k] * kept.null_basis[static_cast<std::size_t>(c) * nb + k];
                for (std::size_t k = 0; k < nb; ++k)
                    d[k] -= dot * kept.null_basis[static_cast<std::size_t>(c) * nb + k];
            }
            double dist = 0.0;
            for (double x : d) dist = std::max(dist, std::abs(x));
            if (dist <= merge_tol && kept.refined == rep.refined) {
                duplicate = true;
                break;
            }
        }
        if (!duplicate) result.candidates.push_back(std::move(rep));
    }
    return result;
}

struct certification_check {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    bool passed = false;
};

struct certification {
    std::vector<certification_check> checks;
    bool all_passed = false;
    bool unique_branch = false;  // exact branch value (pure power, p <= 2)
    bool clarke_only = false;    // coefficient kink at the point
    clarke_estimate clarke;
};

struct certify_options {
    double pohozaev_tol = 1e-5;
    double nehari_tol = 1e-5;
    double decay_tol = 0.02;
    double grad_tol = 1e-4;
    double clarke_radius = 1e-2;
    int clarke_samples = 0;  // 0: 2n+3
    std::uint64_t seed = 0x5eedULL;
};

/// Re-checks every necessary condition at a refined point; failures are
/// recorded, not thrown.
inline certification certify(const candidate_report& report, const coefficient_field& field,
                             const sigma_context& ctx, const certify_options& opts = {}) {
    certification cert;
    const auto& z = report.z;
    const frozen_coefficients frozen = freeze_at(field, z);
    auto gs = ctx.ground_state(frozen);

    auto push = [&](std::string name, double value, double threshold, bool passed) {
        cert.checks.push_back({std::move(name), value, threshold, passed});
    };

    const double poho = pohozaev_residual(*gs, frozen);
    push("pohozaev_residual", poho, opts.pohozaev_tol, poho <= opts.pohozaev_tol);
    const double neh = nehari_residual(*gs, frozen);
    push("nehari_residual", neh, opts.nehari_tol, neh <= opts.nehari_tol);
    const auto decay = fit_decay_rate(*gs, frozen);
    const double decay_err = std::abs(decay.fitted - decay.predicted) / std::abs(decay.predicted);
    push("decay_rate", decay_err, opts.decay_tol, decay_err <= opts.decay_tol);
    push("linear_dependence", static_cast<double>(report.gram_rank), 2.0, report.lin_dep);
    double gmax = 0.0;
    for (double g : report.grad_sigma_fd) gmax = std::max(gmax, std::abs(g));
    push("grad_sigma_fd", gmax, opts.grad_tol, gmax <= opts.grad_tol);

    const int samples = opts.clarke_samples > 0 ? opts.clarke_samples : 2 * field.dimension + 3;
    cert.clarke = estimate_clarke(field, ctx, z, opts.clarke_radius, samples, opts.seed);
    push("clarke_contains_zero", cert.clarke.min_norm, cert.clarke.tolerance,
         cert.clarke.contains_zero);

    cert.all_passed = true;
    for (const auto& c : cert.checks) cert.all_passed = cert.all_passed && c.passed;
    cert.unique_branch = ctx.params().pure_power() && ctx.params().p <= 2.0;
    cert.clarke_only = report.nonsmooth_coefficients;
    return cert;
}

}  // namespace peakscope

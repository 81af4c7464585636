// Acceptance suite: each numbered criterion prints one pass/fail line with
// its measured values and wall time; the process exits nonzero when any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "peakscope/energy.hpp"
#include "peakscope/locator.hpp"
#include "peakscope/radial.hpp"
#include "peakscope/sigma.hpp"
#include "support/fixtures.hpp"

using namespace peakscope;

namespace {

int g_failures = 0;

void run_criterion(int idx, const std::string& name, double time_budget_s,
                   const std::function<bool(std::string&)>& body) {
    std::string detail;
    bool ok = false;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        ok = body(detail);
    } catch (const std::exception& err) {
        detail = std::string("exception: ") + err.what();
        ok = false;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (time_budget_s > 0.0 && secs >= time_budget_s) {
        ok = false;
        detail += " [time budget " + std::to_string(time_budget_s) + " s exceeded]";
    }
    if (!ok) ++g_failures;
    std::printf("[%s] %02d %-28s %s (%.2f s)\n", ok ? "PASS" : "FAIL", idx, name.c_str(),
                detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), format, v);
    return buf;
}

problem_params params_for(double p, double q, int n, bool test_mode) {
    problem_params out;
    out.p = p;
    out.q = q;
    out.n = n;
    out.theta = q;
    out.low_dim_test_mode = test_mode;
    return out;
}

}  // namespace

int main() {
    const frozen_coefficients unit;

    run_criterion(1, "soliton-oracle", 1.0, [&](std::string& detail) {
        const problem_params p1 = params_for(2.0, 4.0, 1, true);
        const radial_profile w = shoot_canonical(p1);
        const double w0_err = std::abs(w.shooting_value - fixtures::soliton_w0);
        const double sigma = mountain_pass_level(w, unit);
        const double sigma_err = std::abs(sigma - fixtures::soliton_sigma);
        detail = "|w0-sqrt2|=" + fmt("%.2e", w0_err) + "<=1e-8, |Sigma-4/3|=" +
                 fmt("%.2e", sigma_err) + "<=1e-6";
        return w0_err <= 1e-8 && sigma_err <= 1e-6;
    });

    run_criterion(2, "canonical-3d-ground-state", 5.0, [&](std::string& detail) {
        const radial_profile w = shoot_canonical(problem_params{});
        const double w0_err = std::abs(w.shooting_value - fixtures::canonical_w0_p2_n3_q4);
        const double poho = pohozaev_residual(w, unit);
        const double neh = nehari_residual(w, unit);
        detail = "|w0-oracle|=" + fmt("%.2e", w0_err) + "<=1e-8, pohozaev=" + fmt("%.2e", poho) +
                 "<=1e-5, nehari=" + fmt("%.2e", neh) + "<=1e-5";
        return w0_err <= 1e-8 && poho <= 1e-5 && neh <= 1e-5;
    });

    run_criterion(3, "sigma-triangulation", 120.0, [&](std::string& detail) {
        const sigma_context ctx((problem_params()));
        rng gen(2026);
        double worst = 0.0;
        for (int trial = 0; trial < 25; ++trial) {
            const frozen_coefficients fro{gen.uniform(0.3, 3.0), gen.uniform(0.3, 3.0),
                                          gen.uniform(0.3, 3.0)};
            const double closed = ctx.sigma(fro);
            auto gs = ctx.ground_state(fro);
            const double direct = integrate_energy(*gs, fro).I_value;
            const double kappa = predicted_decay_rate(ctx.params(), fro);
            const double nehari = nehari_family_min(*gs, fro, {-0.1, -0.05, 0.0, 0.05, 0.1},
                                                    {0.7 / kappa, 1.4 / kappa});
            const double scale = std::abs(closed);
            worst = std::max({worst, std::abs(closed - direct) / scale,
                              std::abs(closed - nehari) / scale, std::abs(direct - nehari) / scale});
        }
        detail = "25 triples, worst pairwise rel=" + fmt("%.2e", worst) + "<=1e-5";
        return worst <= 1e-5;
    });

    run_criterion(4, "sigma-V-exponent", 0.0, [&](std::string& detail) {
        const sigma_context ctx((problem_params()));
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (double V : {1.0, 2.0, 4.0, 8.0}) {
            const frozen_coefficients fro{1.0, V, 1.0};
            const double sig = integrate_energy(*ctx.ground_state(fro), fro).I_value;
            const double x = std::log(V), y = std::log(sig);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        const double slope = (4.0 * sxy - sx * sy) / (4.0 * sxx - sx * sx);
        detail = "log-log slope=" + fmt("%.6f", slope) + ", |slope-0.5|=" +
                 fmt("%.2e", std::abs(slope - 0.5)) + "<=1e-3";
        return std::abs(slope - 0.5) <= 1e-3;
    });

    run_criterion(5, "sigma-monotonicity", 0.0, [&](std::string& detail) {
        const sigma_context ctx((problem_params()));
        const double vals[] = {0.5, 1.0, 2.0};
        int violations = 0;
        for (double x : vals)
            for (double y : vals)
                for (int k = 0; k + 1 < 3; ++k) {
                    if (ctx.sigma({vals[k + 1], x, y}) < ctx.sigma({vals[k], x, y})) ++violations;
                    if (ctx.sigma({x, vals[k + 1], y}) < ctx.sigma({x, vals[k], y})) ++violations;
                    if (ctx.sigma({x, y, vals[k + 1]}) > ctx.sigma({x, y, vals[k]})) ++violations;
                }
        detail = "3x3x3 grid, violations=" + std::to_string(violations);
        return violations == 0;
    });

    run_criterion(6, "decay-rates", 0.0, [&](std::string& detail) {
        double worst = 0.0;
        for (double p : {1.5, 2.0, 3.0}) {
            const problem_params params = params_for(p, p == 1.5 ? 2.5 : 4.0, 3, p >= 3.0);
            const radial_profile canonical = shoot_ground_state(params, unit, shoot_options{});
            for (const frozen_coefficients fro : {frozen_coefficients{1, 1, 1},
                                                  frozen_coefficients{1, 4, 1}}) {
                const radial_profile u = solve_frozen(canonical, fro);
                const auto fit = fit_decay_rate(u, fro);
                worst = std::max(worst, std::abs(fit.fitted - fit.predicted) / std::abs(fit.predicted));
            }
        }
        detail = "6 triples over p in {1.5,2,3}, worst rel err=" + fmt("%.4f", worst) + "<=0.02";
        return worst <= 0.02;
    });

    run_criterion(7, "locator-soundness", 180.0, [&](std::string& detail) {
        const sigma_context ctx((problem_params()));
        auto field = coefficient_field::from_strings(
            "1", "1 + (x1-0.2)^2 + (x2+0.15)^2 + (x3-0.1)^2", "1", 3);
        scan_box box;
        box.axes = {{-1.0, 1.0}, {-1.0, 1.0}, {-1.0, 1.0}};
        const auto scan = scan_candidates(field, ctx, box, 8, scan_options{});
        if (scan.candidates.size() != 1 || !scan.candidates.front().refined) {
            detail = "expected exactly one refined candidate, got " +
                     std::to_string(scan.candidates.size());
            return false;
        }
        const auto& c = scan.candidates.front();
        const double dz = std::max({std::abs(c.z[0] - 0.2), std::abs(c.z[1] + 0.15),
                                    std::abs(c.z[2] - 0.1)});
        double gmax = 0.0;
        for (double g : c.grad_sigma_fd) gmax = std::max(gmax, std::abs(g));
        const auto cert = certify(c, field, ctx, certify_options{});
        detail = "1 candidate, |z-z*|=" + fmt("%.2e", dz) + "<=1e-6, |grad Sigma|=" +
                 fmt("%.2e", gmax) + "<=1e-4, lin_dep=" + (c.lin_dep ? "true" : "false") +
                 ", certified=" + (cert.all_passed ? "true" : "false");
        return dz <= 1e-6 && gmax <= 1e-4 && c.lin_dep && cert.all_passed;
    });

    run_criterion(8, "gradient-consistency", 0.0, [&](std::string& detail) {
        const sigma_context ctx((problem_params()));
        auto field = coefficient_field::from_strings("1 + 0.25*exp(-(x1^2+x2^2+x3^2))",
                                                     "1.5 + 0.5*tanh(x1) + 0.1*x2^2",
                                                     "1 + 0.3/(1 + x3^2)", 3);
        rng gen(11);
        bool ok = true;
        double worst = 0.0;
        for (int trial = 0; trial < 10; ++trial) {
            std::vector<double> z{gen.uniform(-0.8, 0.8), gen.uniform(-0.8, 0.8),
                                  gen.uniform(-0.8, 0.8)};
            const auto N = necessary_vector(field, ctx, z);
            const auto g = sigma_grad_fd(field, ctx, z);
            for (int k = 0; k < 3; ++k) {
                const double tol = std::max(1e-3, 0.01 * std::max(std::abs(N[k]), std::abs(g[k])));
                worst = std::max(worst, std::abs(N[k] - g[k]) / tol);
                ok = ok && std::abs(N[k] - g[k]) <= tol;
            }
        }
        detail = "10 points, worst |N-grad|/tol=" + fmt("%.3f", worst) + "<1";
        return ok;
    });

    run_criterion(9, "gram-ranks", 0.0, [&](std::string& detail) {
        auto f1 = coefficient_field::from_strings("1", "1 + x1^2", "1 + 2*x1^2", 3);
        auto f2 = coefficient_field::from_strings("1 + x3^2", "1 + x1^2", "1 + x2^2", 3);
        auto f3 = coefficient_field::from_strings("1 + x1^2 + x2^2", "1 + x1^2", "1 + x2^2", 3);
        const int r1 = gram_rank(f1, std::vector<double>{1.0, 0.0, 0.0}).rank;
        const int r2 = gram_rank(f2, std::vector<double>{1.0, 1.0, 1.0}).rank;
        const int r3 = gram_rank(f3, std::vector<double>{1.0, 1.0, 0.0}).rank;
        detail = "ranks=" + std::to_string(r1) + "/" + std::to_string(r2) + "/" +
                 std::to_string(r3) + " (want 1/3/2)";
        return r1 == 1 && r2 == 3 && r3 == 2;
    });

    run_criterion(10, "clarke-estimator", 0.0, [&](std::string& detail) {
        auto surrogate = [](std::span<const double> z) { return std::abs(z[0]); };
        const std::vector<double> zero{0.0, 0.0, 0.0};
        const auto kink_a = estimate_clarke_fn(surrogate, 3, zero, 0.1, 9, 42);
        const auto kink_b = estimate_clarke_fn(surrogate, 3, zero, 0.1, 9, 42);

        auto well = [](std::span<const double> z) {
            return (z[0] - 0.1) * (z[0] - 0.1) + z[1] * z[1] + z[2] * z[2];
        };
        const std::vector<double> off{0.4, 0.0, 0.0};
        const std::vector<double> at{0.1, 0.0, 0.0};
        const bool off_min = estimate_clarke_fn(well, 3, off, 0.05, 9, 42).contains_zero;
        const bool at_min = estimate_clarke_fn(well, 3, at, 0.05, 9, 42).contains_zero;

        const bool stable = kink_a.min_norm == kink_b.min_norm &&
                            kink_a.gradients == kink_b.gradients;
        detail = std::string("|z1| at 0: ") + (kink_a.contains_zero ? "true" : "false") +
                 ", well off-min: " + (off_min ? "true" : "false") +
                 ", at min: " + (at_min ? "true" : "false") +
                 ", seed-stable: " + (stable ? "true" : "false");
        return kink_a.contains_zero && !off_min && at_min && stable;
    });

    run_criterion(11, "coordinate-field-cancellation", 0.0, [&](std::string& detail) {
        const radial_profile w = shoot_canonical(problem_params{});
        const double R = w.r_back();
        double prev = std::numeric_limits<double>::infinity();
        bool monotone = true;
        std::string values;
        double last = 0.0;
        for (double frac : {0.25, 0.5, 0.75}) {
            h_field hf{h_field::coordinate, 1, frac * R};
            const double res = pucci_serrin_residual(w, unit, hf);
            monotone = monotone && res <= prev;
            prev = res;
            last = res;
            values += fmt("%.1e", res) + (frac < 0.75 ? " > " : "");
        }
        detail = "residuals " + values + ", final<=1e-4, monotone=" + (monotone ? "true" : "false");
        return monotone && last <= 1e-4;
    });

    std::printf("%d/11 criteria passed\n", 11 - g_failures);
    return g_failures == 0 ? 0 : 1;
}

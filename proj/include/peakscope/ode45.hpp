#pragma once

#include <array>
#include <cmath>
#include <cstddef>

#include "peakscope/model.hpp"

namespace peakscope {

/// Controller settings for the embedded Dormand-Prince 5(4) pair.
struct step_controller {
    double abs_tol = 1e-10;
    double rel_tol = 1e-10;
    double max_step = 0.0;   // 0 = unlimited
    double init_step = 0.0;  // 0 = pick from max_step / 1e-3
};

/// Adaptive Dormand-Prince 5(4) on a 2-state system. Integrates from r to
/// r_target (either direction), forcing the final step onto r_target.
/// `observe(r, y)` runs after every accepted step; returning false aborts
/// the integration early (used for event classification).
template <class Rhs, class Observer>
inline void rk45_integrate(Rhs&& rhs, double& r, std::array<double, 2>& y, double r_target,
                           const step_controller& ctrl, Observer&& observe) {
    using state = std::array<double, 2>;
    if (r == r_target) return;
    const double dir = r_target > r ? 1.0 : -1.0;
    const double span = std::abs(r_target - r);
    double h = ctrl.init_step > 0.0 ? ctrl.init_step : std::min(span, ctrl.max_step > 0.0 ? ctrl.max_step : 1e-3);
    const double h_min = span * 1e-15 + 1e-300;

    state k1 = rhs(r, y);
    long rejects_in_row = 0;
    while (dir * (r_target - r) > 0.0) {
        if (ctrl.max_step > 0.0) h = std::min(h, ctrl.max_step);
        h = std::min(h, std::abs(r_target - r));
        const double dt = dir * h;

        state k2, k3, k4, k5, k6, k7, ytmp, y5, y4err;
        for (int i = 0; i < 2; ++i) ytmp[i] = y[i] + dt * (1.0 / 5.0) * k1[i];
        k2 = rhs(r + dt * (1.0 / 5.0), ytmp);
        for (int i = 0; i < 2; ++i) ytmp[i] = y[i] + dt * (3.0 / 40.0 * k1[i] + 9.0 / 40.0 * k2[i]);
        k3 = rhs(r + dt * (3.0 / 10.0), ytmp);
        for (int i = 0; i < 2; ++i)
            ytmp[i] = y[i] + dt * (44.0 / 45.0 * k1[i] - 56.0 / 15.0 * k2[i] + 32.0 / 9.0 * k3[i]);
        k4 = rhs(r + dt * (4.0 / 5.0), ytmp);
        for (int i = 0; i < 2; ++i)
            ytmp[i] = y[i] + dt * (19372.0 / 6561.0 * k1[i] - 25360.0 / 2187.0 * k2[i] +
                                   64448.0 / 6561.0 * k3[i] - 212.0 / 729.0 * k4[i]);
        k5 = rhs(r + dt * (8.0 / 9.0), ytmp);
        for (int i = 0; i < 2; ++i)
            ytmp[i] = y[i] + dt * (9017.0 / 3168.0 * k1[i] - 355.0 / 33.0 * k2[i] + 46732.0 / 5247.0 * k3[i] +
                                   49.0 / 176.0 * k4[i] - 5103.0 / 18656.0 * k5[i]);
        k6 = rhs(r + dt, ytmp);
        state y_new;
        for (int i = 0; i < 2; ++i)
            y_new[i] = y[i] + dt * (35.0 / 384.0 * k1[i] + 500.0 / 1113.0 * k3[i] + 125.0 / 192.0 * k4[i] -
                                    2187.0 / 6784.0 * k5[i] + 11.0 / 84.0 * k6[i]);
        k7 = rhs(r + dt, y_new);
        // 4th-order comparison solution for the error estimate.
        for (int i = 0; i < 2; ++i) {
            y5[i] = y_new[i];
            double y4 = y[i] + dt * (5179.0 / 57600.0 * k1[i] + 7571.0 / 16695.0 * k3[i] +
                                     393.0 / 640.0 * k4[i] - 92097.0 / 339200.0 * k5[i] +
                                     187.0 / 2100.0 * k6[i] + 1.0 / 40.0 * k7[i]);
            y4err[i] = y5[i] - y4;
        }

        double err = 0.0;
        for (int i = 0; i < 2; ++i) {
            double scale = ctrl.abs_tol + ctrl.rel_tol * std::max(std::abs(y[i]), std::abs(y5[i]));
            err = std::max(err, std::abs(y4err[i]) / scale);
        }
        if (!(err == err)) err = 1e6;  // NaN: reject hard

        if (err <= 1.0) {
            r = dir > 0.0 ? std::min(r + dt, r_target) : std::max(r + dt, r_target);
            y = y5;
            k1 = k7;  // FSAL
            rejects_in_row = 0;
            if (!observe(r, y)) return;
            double grow = err == 0.0 ? 5.0 : std::min(5.0, 0.9 * std::pow(err, -0.2));
            h *= std::max(grow, 1.0);
        } else {
            h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
            if (++rejects_in_row > 200 || h < h_min)
                throw solver_error("rk45: step size collapsed");
        }
    }
}

/// Integrate to r_target with no observer.
template <class Rhs>
inline void rk45_integrate_to(Rhs&& rhs, double& r, std::array<double, 2>& y, double r_target,
                              const step_controller& ctrl) {
    rk45_integrate(rhs, r, y, r_target, ctrl, [](double, const std::array<double, 2>&) { return true; });
}

}  // namespace peakscope

#pragma once

#include <cmath>
#include <cstddef>
#include <span>

#include "peakscope/model.hpp"

namespace peakscope {

/// Composite Simpson-type quadrature on a (possibly nonuniform) grid via
/// local quadratic fits over consecutive node triples.
inline double integrate_samples(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (y.size() != n) throw input_error("integrate_samples: size mismatch");
    if (n < 2) return 0.0;
    if (n == 2) return 0.5 * (x[1] - x[0]) * (y[0] + y[1]);

    // Integral of the quadratic through (x0,y0),(x1,y1),(x2,y2) over
    // [x0 + a, x0 + b], via Newton's divided differences around x0.
    auto quad_piece = [](double x0, double x1, double x2, double y0, double y1, double y2, double a,
                         double b) {
        const double h1 = x1 - x0;
        const double d1 = (y1 - y0) / h1;
        const double d2 = ((y2 - y1) / (x2 - x1) - d1) / (x2 - x0);
        const double iu1 = 0.5 * (b * b - a * a);                      // int u du
        const double iu2 = (b * b * b - a * a * a) / 3.0 - h1 * iu1;   // int u(u-h1) du
        return y0 * (b - a) + d1 * iu1 + d2 * iu2;
    };

    double total = 0.0;
    std::size_t i = 0;
    for (; i + 2 < n; i += 2)
        total += quad_piece(x[i], x[i + 1], x[i + 2], y[i], y[i + 1], y[i + 2], 0.0, x[i + 2] - x[i]);
    if (i + 1 < n) {
        // Odd interval count: integrate the quadratic through the last three
        // nodes over the final interval only.
        const std::size_t j = n - 3;
        total += quad_piece(x[j], x[j + 1], x[j + 2], y[j], y[j + 1], y[j + 2], x[j + 1] - x[j],
                            x[j + 2] - x[j]);
    }
    return total;
}

/// Derivative at node `at` from the quartic through nodes [at-2, at+2]
/// (window clamped at the ends). Lagrange differentiation, nonuniform-safe.
inline double differentiate_5pt(std::span<const double> x, std::span<const double> y, std::size_t at) {
    const std::size_t n = x.size();
    if (n < 5) throw input_error("differentiate_5pt: need at least 5 nodes");
    std::size_t lo = at >= 2 ? at - 2 : 0;
    if (lo + 5 > n) lo = n - 5;

    double deriv = 0.0;
    const double xc = x[at];
    for (std::size_t j = 0; j < 5; ++j) {
        const double xj = x[lo + j];
        double denom = 1.0;
        for (std::size_t m = 0; m < 5; ++m)
            if (m != j) denom *= xj - x[lo + m];
        double num = 0.0;
        for (std::size_t k = 0; k < 5; ++k) {
            if (k == j) continue;
            double prod = 1.0;
            for (std::size_t m = 0; m < 5; ++m) {
                if (m == j || m == k) continue;
                prod *= xc - x[lo + m];
            }
            num += prod;
        }
        deriv += y[lo + j] * num / denom;
    }
    return deriv;
}

/// Closed form of int_R^inf r^j exp(-c (r - R)) dr for integer j >= 0.
inline double exp_tail_moment(double R, double c, int j) {
    if (!(c > 0.0)) return 0.0;
    double sum = 0.0;
    double fact = 1.0;  // j! / (j-i)!
    for (int i = 0; i <= j; ++i) {
        if (i > 0) fact *= static_cast<double>(j - i + 1);
        sum += fact * std::pow(R, j - i) / std::pow(c, i + 1);
    }
    return sum;
}

}  // namespace peakscope

#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "peakscope/model.hpp"

namespace peakscope {

/// Eigen-decomposition of a symmetric n x n matrix (row-major) by cyclic
/// Jacobi rotations. Returns eigenvalues (ascending) and the matching
/// eigenvectors as columns of `vectors` (row-major).
struct symmetric_eigen {
    std::vector<double> values;
    std::vector<double> vectors;
};

inline symmetric_eigen jacobi_eigen(std::vector<double> a, std::size_t n) {
    if (a.size() != n * n) throw input_error("jacobi_eigen: shape mismatch");
    std::vector<double> v(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a[i * n + j] * a[i * n + j];
        if (off < 1e-300) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a[p * n + q];
                if (std::abs(apq) < 1e-300) continue;
                const double app = a[p * n + p], aqq = a[q * n + q];
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a[k * n + p], akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a[p * n + k], aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v[k * n + p], vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    symmetric_eigen out;
    out.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.values[i] = a[i * n + i];
    out.vectors = std::move(v);
    // insertion sort ascending, permuting columns alongside
    for (std::size_t i = 1; i < n; ++i) {
        for (std::size_t j = i; j > 0 && out.values[j] < out.values[j - 1]; --j) {
            std::swap(out.values[j], out.values[j - 1]);
            for (std::size_t k = 0; k < n; ++k)
                std::swap(out.vectors[k * n + j], out.vectors[k * n + j - 1]);
        }
    }
    return out;
}

/// Least-squares/pseudo-inverse solve of J x = b through the eigenpairs of
/// J^T J; singular directions below rel_tol * s_max are dropped and their
/// count reported.
struct pinv_solve_result {
    std::vector<double> x;
    int dropped_directions = 0;
    std::vector<double> null_basis;  // row-major, dropped eigenvectors as columns
};

inline pinv_solve_result pinv_solve(const std::vector<double>& J, std::size_t n,
                                    const std::vector<double>& b, double rel_tol = 1e-10) {
    if (J.size() != n * n || b.size() != n) throw input_error("pinv_solve: shape mismatch");
    std::vector<double> jtj(n * n, 0.0), jtb(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += J[k * n + i] * J[k * n + j];
            jtj[i * n + j] = s;
        }
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += J[k * n + i] * b[k];
        jtb[i] = s;
    }
    const symmetric_eigen eig = jacobi_eigen(jtj, n);
    const double smax2 = eig.values.back();
    const double cut = smax2 * rel_tol * rel_tol;

    pinv_solve_result out;
    out.x.assign(n, 0.0);
    for (std::size_t m = 0; m < n; ++m) {
        if (!(eig.values[m] > cut) || !(eig.values[m] > 0.0)) {
            ++out.dropped_directions;
            for (std::size_t k = 0; k < n; ++k) out.null_basis.push_back(eig.vectors[k * n + m]);
            continue;
        }
        double proj = 0.0;
        for (std::size_t k = 0; k < n; ++k) proj += eig.vectors[k * n + m] * jtb[k];
        proj /= eig.values[m];
        for (std::size_t k = 0; k < n; ++k) out.x[k] += proj * eig.vectors[k * n + m];
    }
    return out;
}

}  // namespace peakscope

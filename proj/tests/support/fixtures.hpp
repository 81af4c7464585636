#pragma once

// Frozen expected values for the solver tests.

namespace fixtures {

// Pre-registered shooting value for the canonical problem at p = 2, n = 3,
// q = 4, produced by the dense-grid bisection oracle in oracles.hpp
// (fixed step 1e-4, bisection to width 1e-10) before the main build.
inline constexpr double canonical_w0_p2_n3_q4 = 4.337387680001558;

// 1-D closed forms for p = 2, q = 4: the ground state is sqrt(2)/cosh(x).
inline constexpr double soliton_w0 = 1.4142135623730951;  // sqrt(2)
inline constexpr double soliton_A = 2.0 / 3.0;            // int beta(w')
inline constexpr double soliton_B = 4.0;                  // int w^2
inline constexpr double soliton_C = 16.0 / 3.0;           // int w^4
inline constexpr double soliton_sigma = 4.0 / 3.0;        // least energy

}  // namespace fixtures

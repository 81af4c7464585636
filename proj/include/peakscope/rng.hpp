#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace peakscope {

/// Deterministic generator with explicit algorithms (no implementation-
/// defined distributions), so runs reproduce bit-for-bit for a given seed.
class rng {
  public:
    explicit rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

    std::uint64_t next_u64() {
        // xorshift* with a splitmix-style increment
        std::uint64_t x = state_ += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        spare_ = mag * std::sin(2.0 * M_PI * u2);
        have_spare_ = true;
        return mag * std::cos(2.0 * M_PI * u2);
    }

    /// Uniform point in the n-ball of given radius.
    std::vector<double> ball_point(int n, double radius) {
        std::vector<double> v(static_cast<std::size_t>(n));
        double norm2 = 0.0;
        for (auto& x : v) {
            x = gaussian();
            norm2 += x * x;
        }
        const double norm = std::sqrt(norm2);
        const double scale =
            norm > 0.0 ? radius * std::pow(uniform(), 1.0 / n) / norm : 0.0;
        for (auto& x : v) x *= scale;
        return v;
    }

  private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace peakscope

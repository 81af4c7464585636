#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "peakscope/energy.hpp"
#include "peakscope/locator.hpp"
#include "peakscope/radial.hpp"

namespace peakscope {

/// 17 significant digits, '.' decimal — doubles round-trip bit-exactly.
inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline void write_profile_csv(const std::string& path, const radial_profile& profile) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw input_error("cannot open '" + path + "' for writing");
    out << "r,w,w_prime\n";
    for (std::size_t i = 0; i < profile.size(); ++i)
        out << fmt17(profile.r[i]) << ',' << fmt17(profile.w[i]) << ',' << fmt17(profile.w_prime[i])
            << '\n';
}

/// Reads back the three-column profile; params and frozen coefficients come
/// from the caller, the decay fit is recomputed.
inline radial_profile read_profile_csv(const std::string& path, const problem_params& params,
                                       const frozen_coefficients& frozen) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw input_error("cannot open profile '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line.rfind("r,w,w_prime", 0) != 0)
        throw input_error("profile '" + path + "' lacks the r,w,w_prime header");
    radial_profile profile;
    profile.params = params;
    profile.frozen = frozen;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        double r, w, wp;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &r, &w, &wp) != 3)
            throw input_error("malformed profile row: '" + line + "'");
        profile.r.push_back(r);
        profile.w.push_back(w);
        profile.w_prime.push_back(wp);
    }
    if (profile.size() < 8) throw input_error("profile '" + path + "' is too short");
    profile.shooting_value = profile.w.front();
    const double wmax = *std::max_element(profile.w.begin(), profile.w.end());
    if (wmax > 0.0) {
        try {
            profile.decay_rate_fit = fit_decay_rate(profile, frozen).fitted;
        } catch (const solver_error&) {
            profile.decay_rate_fit = 0.0;
        }
    }
    profile.decay_rate_predicted = -predicted_decay_rate(params, frozen);
    return profile;
}

inline nlohmann::json energy_json(const energy_breakdown& eb) {
    return nlohmann::json{{"A", eb.A}, {"B", eb.B}, {"C", eb.C}, {"Phi", eb.Phi},
                          {"I_value", eb.I_value}};
}

inline nlohmann::json candidate_json(const candidate_report& rep) {
    nlohmann::json trace = nlohmann::json::array();
    for (const auto& [z, nn] : rep.refinement_trace) trace.push_back({{"z", z}, {"N_norm", nn}});
    return nlohmann::json{{"z", rep.z},
                          {"N", rep.N},
                          {"N_norm", rep.N_norm},
                          {"gram_rank", rep.gram_rank},
                          {"lin_dep", rep.lin_dep},
                          {"grad_sigma_fd", rep.grad_sigma_fd},
                          {"in_C_set", rep.in_C_set},
                          {"refined", rep.refined},
                          {"degenerate_directions", rep.degenerate_directions},
                          {"refinement_trace", trace}};
}

inline nlohmann::json clarke_json(const clarke_estimate& est) {
    return nlohmann::json{{"center", est.center},
                          {"gradients", est.gradients},
                          {"min_norm_point", est.min_norm_point},
                          {"min_norm", est.min_norm},
                          {"tolerance", est.tolerance},
                          {"contains_zero", est.contains_zero},
                          {"degenerate", est.degenerate}};
}

inline nlohmann::json certification_json(const certification& cert) {
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : cert.checks)
        checks.push_back(
            {{"name", c.name}, {"value", c.value}, {"threshold", c.threshold}, {"passed", c.passed}});
    return nlohmann::json{{"checks", checks},
                          {"all_passed", cert.all_passed},
                          {"unique_branch", cert.unique_branch},
                          {"clarke_only", cert.clarke_only},
                          {"clarke", clarke_json(cert.clarke)}};
}

}  // namespace peakscope

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "peakscope/config.hpp"
#include "peakscope/locator.hpp"
#include "peakscope/reports.hpp"
#include "peakscope/sigma.hpp"

namespace peakscope::cli {

constexpr int exit_ok = 0;
constexpr int exit_config = 1;
constexpr int exit_solver = 2;
constexpr int exit_check = 3;

inline std::vector<double> parse_point(const std::string& text, int n) {
    std::vector<double> z;
    for (const auto& part : detail::split(text, ',')) {
        const std::string tok = detail::trim(part);
        char* end = nullptr;
        const double v = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0')
            throw input_error("malformed coordinate '" + tok + "' in point '" + text + "'");
        z.push_back(v);
    }
    if (static_cast<int>(z.size()) != n)
        throw input_error("point '" + text + "' has " + std::to_string(z.size()) +
                          " coordinates, expected " + std::to_string(n));
    return z;
}

inline shoot_options shoot_options_of(const run_config& cfg) {
    shoot_options opts;
    opts.bracket_tol = cfg.shoot_tol;
    return opts;
}

inline int resolved_jobs(const run_config& cfg) {
    if (cfg.jobs > 0) return cfg.jobs;
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

inline void ensure_output_dir(const run_config& cfg) {
    if (!cfg.output_dir.empty() && cfg.output_dir != ".")
        std::filesystem::create_directories(cfg.output_dir);
}

inline std::string out_path(const run_config& cfg, const std::string& name) {
    return (std::filesystem::path(cfg.output_dir) / name).string();
}

inline void require_landscape_dimension(const run_config& cfg) {
    if (cfg.params.n < 3)
        throw input_error("landscape commands need n >= 3 (low dimensions serve the pointwise "
                          "oracles only)");
}

/// solve --config F --at "z1,...": frozen ground state + energy breakdown.
inline int cmd_solve(const run_config& cfg, std::span<const double> z) {
    const coefficient_field field = cfg.make_field();
    const frozen_coefficients frozen = freeze_at(field, z);
    const shoot_options opts = shoot_options_of(cfg);

    radial_profile gs;
    if (cfg.params.pure_power())
        gs = solve_frozen(shoot_ground_state(cfg.params, frozen_coefficients{}, opts), frozen, opts);
    else
        gs = shoot_ground_state(cfg.params, frozen, opts);

    ensure_output_dir(cfg);
    write_profile_csv(out_path(cfg, "profile.csv"), gs);
    const energy_breakdown eb = integrate_energy(gs, frozen);
    std::ofstream out(out_path(cfg, "energy.json"), std::ios::binary);
    if (!out) throw input_error("cannot write energy.json");
    out << energy_json(eb).dump(2) << '\n';
    return exit_ok;
}

/// scan-sigma --config F: one CSV row per grid point, lexicographic order
/// regardless of the worker count; rejected points keep their row with an
/// error column.
inline int cmd_scan_sigma(const run_config& cfg) {
    require_landscape_dimension(cfg);
    const coefficient_field field = cfg.make_field();
    const sigma_context ctx(cfg.params, shoot_options_of(cfg));
    const int n = cfg.params.n;

    long total = 1;
    for (int k = 0; k < n; ++k) total *= cfg.grid_n;
    std::vector<std::string> rows(static_cast<std::size_t>(total));

    auto worker = [&](long begin, long end) {
        for (long t = begin; t < end; ++t) {
            const auto z = detail::grid_point(cfg.box, cfg.grid_n, t);
            std::string row;
            for (double v : z) row += fmt17(v) + ",";
            try {
                const frozen_coefficients frozen = freeze_at(field, z);
                const double sigma = ctx.sigma(frozen);
                const auto grad = sigma_grad_fd(field, ctx, z, cfg.fd_step);
                row += fmt17(sigma);
                for (double g : grad) row += "," + fmt17(g);
                row += ",";
            } catch (const input_error& err) {
                row += ",";  // empty sigma column
                for (int k = 0; k < n; ++k) row += ",";
                row += err.what();
            }
            rows[static_cast<std::size_t>(t)] = std::move(row);
        }
    };
    const int jobs = resolved_jobs(cfg);
    if (jobs <= 1 || total < 2) {
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

    ensure_output_dir(cfg);
    std::ofstream out(out_path(cfg, "sigma_scan.csv"), std::ios::binary);
    if (!out) throw input_error("cannot write sigma_scan.csv");
    for (int k = 1; k <= n; ++k) out << "z" << k << ",";
    out << "sigma";
    for (int k = 1; k <= n; ++k) out << ",grad" << k;
    out << ",error\n";
    for (const auto& row : rows) out << row << '\n';
    return exit_ok;
}

/// locate --config F: candidate scan + certification, one JSON object per
/// line; a degenerate landscape produces a single flag record.
inline int cmd_locate(const run_config& cfg) {
    require_landscape_dimension(cfg);
    const coefficient_field field = cfg.make_field();
    const sigma_context ctx(cfg.params, shoot_options_of(cfg));

    scan_options sopts;
    sopts.tol = cfg.candidate_tol;
    sopts.gram_tol = cfg.gram_tol;
    sopts.positivity_floor = cfg.positivity_floor;
    sopts.jobs = resolved_jobs(cfg);
    const scan_result scan = scan_candidates(field, ctx, cfg.box, cfg.grid_n, sopts);

    ensure_output_dir(cfg);
    std::ofstream out(out_path(cfg, "candidates.jsonl"), std::ios::binary);
    if (!out) throw input_error("cannot write candidates.jsonl");
    if (scan.degenerate_landscape) {
        out << nlohmann::json{{"degenerate_landscape", true}, {"median_abs_N", scan.median_abs_N}}
                   .dump()
            << '\n';
        return exit_ok;
    }
    certify_options copts;
    copts.seed = cfg.seed;
    copts.clarke_radius = cfg.clarke_radius;
    copts.clarke_samples = cfg.clarke_samples;
    for (const auto& rep : scan.candidates) {
        nlohmann::json record = candidate_json(rep);
        if (rep.refined)
            record["certification"] = certification_json(certify(rep, field, ctx, copts));
        else
            record["certification"] = nullptr;
        out << record.dump() << '\n';
    }
    return exit_ok;
}

/// check --config F --profile P [--at "z1,..."]: identity residuals of a
/// stored profile against the coefficients frozen at z (default: origin).
inline int cmd_check(const run_config& cfg, const std::string& profile_path,
                     const std::optional<std::vector<double>>& at) {
    const coefficient_field field = cfg.make_field();
    std::vector<double> z(static_cast<std::size_t>(cfg.params.n), 0.0);
    if (at) z = *at;
    const frozen_coefficients frozen = freeze_at(field, z);
    const radial_profile profile = read_profile_csv(profile_path, cfg.params, frozen);

    nlohmann::json result;
    const double wmax = *std::max_element(profile.w.begin(), profile.w.end());
    if (wmax == 0.0) {
        result = {{"trivial_solution", true}, {"pass", true}};
        ensure_output_dir(cfg);
        std::ofstream out(out_path(cfg, "check.json"), std::ios::binary);
        out << result.dump(2) << '\n';
        return exit_ok;
    }

    const double poho = pohozaev_residual(profile, frozen);
    const double neh = nehari_residual(profile, frozen);
    const double ode = ode_residual(profile, frozen);
    double decay_err = std::numeric_limits<double>::infinity();
    nlohmann::json decay_info;
    try {
        const auto decay = fit_decay_rate(profile, frozen);
        decay_err = std::abs(decay.fitted - decay.predicted) / std::abs(decay.predicted);
        decay_info = {{"fitted", decay.fitted}, {"predicted", decay.predicted},
                      {"relative_error", decay_err}};
    } catch (const solver_error& err) {
        decay_info = {{"error", err.what()}};
    }

    const double R = profile.r_back();
    nlohmann::json coords = nlohmann::json::array();
    double gate_coordinate = 0.0;
    for (int k = 1; k <= cfg.params.n; ++k) {
        for (double frac : {0.25, 0.5, 0.75}) {
            h_field hf;
            hf.kind = h_field::coordinate;
            hf.k = k;
            hf.cutoff = frac * R;
            const double res = pucci_serrin_residual(profile, frozen, hf);
            coords.push_back({{"k", k}, {"cutoff", hf.cutoff}, {"residual", res}});
            if (frac == 0.75) gate_coordinate = std::max(gate_coordinate, res);
        }
    }

    const bool pass = poho <= 1e-5 && neh <= 1e-5 && decay_err <= 0.02 && gate_coordinate <= 1e-4;
    result = {{"trivial_solution", false},
              {"pohozaev_residual", poho},
              {"nehari_residual", neh},
              {"ode_residual", ode},
              {"decay", decay_info},
              {"pucci_serrin", {{"dilation", pucci_serrin_residual(profile, frozen, h_field{})},
                                {"coordinate", coords}}},
              {"tolerances",
               {{"pohozaev", 1e-5}, {"nehari", 1e-5}, {"decay", 0.02}, {"coordinate", 1e-4}}},
              {"pass", pass}};

    ensure_output_dir(cfg);
    std::ofstream out(out_path(cfg, "check.json"), std::ios::binary);
    if (!out) throw input_error("cannot write check.json");
    out << result.dump(2) << '\n';
    return pass ? exit_ok : exit_check;
}

}  // namespace peakscope::cli

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "peakscope/cli.hpp"

namespace {

using namespace peakscope;

struct global_flags {
    std::string config_path;
    std::string out_dir;
    int jobs = 0;
};

run_config load_and_resolve(const global_flags& flags) {
    run_config cfg = load_config(flags.config_path);
    if (!flags.out_dir.empty()) cfg.output_dir = flags.out_dir;
    if (flags.jobs > 0) cfg.jobs = flags.jobs;
    if (const char* env_seed = std::getenv("PEAKSCOPE_SEED")) {
        char* end = nullptr;
        const unsigned long long s = std::strtoull(env_seed, &end, 10);
        if (end != env_seed && *end == '\0') cfg.seed = s;
    }
    return cfg;
}

int guarded(int (*body)(const global_flags&, const std::string&, const std::string&),
            const global_flags& flags, const std::string& a, const std::string& b) {
    try {
        return body(flags, a, b);
    } catch (const config_error& err) {
        std::cerr << "config error: " << err.what() << '\n';
        return cli::exit_config;
    } catch (const parse_error& err) {
        std::cerr << "config error: " << err.what() << '\n';
        return cli::exit_config;
    } catch (const eval_error& err) {
        std::cerr << "config error: " << err.what() << '\n';
        return cli::exit_config;
    } catch (const input_error& err) {
        std::cerr << "error: " << err.what() << '\n';
        return cli::exit_config;
    } catch (const solver_error& err) {
        std::cerr << "solver error: " << err.what() << '\n';
        return cli::exit_solver;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"peakscope: ground-state landscapes and concentration-point candidates for "
                 "singularly perturbed quasi-linear problems"};
    app.require_subcommand(1);

    global_flags flags;
    std::string at_text;
    std::string profile_path;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", flags.config_path, "run configuration file")->required();
        cmd->add_option("--out", flags.out_dir, "output directory (overrides config)");
        cmd->add_option("--jobs", flags.jobs, "worker count (0 = all cores)");
    };

    CLI::App* solve = app.add_subcommand("solve", "solve the frozen problem at a point");
    add_common(solve);
    solve->add_option("--at", at_text, "freezing point z1,z2,...")->required();

    CLI::App* scan = app.add_subcommand("scan-sigma", "tabulate Sigma and its gradient on the box");
    add_common(scan);

    CLI::App* locate = app.add_subcommand("locate", "scan for weak-concentration candidates");
    add_common(locate);

    CLI::App* check = app.add_subcommand("check", "verify identity residuals of a stored profile");
    add_common(check);
    check->add_option("--profile", profile_path, "profile.csv to check")->required();
    check->add_option("--at", at_text, "freezing point (default: origin)");

    CLI11_PARSE(app, argc, argv);

    if (solve->parsed())
        return guarded(
            [](const global_flags& f, const std::string& at, const std::string&) {
                run_config cfg = load_and_resolve(f);
                return cli::cmd_solve(cfg, cli::parse_point(at, cfg.params.n));
            },
            flags, at_text, "");
    if (scan->parsed())
        return guarded(
            [](const global_flags& f, const std::string&, const std::string&) {
                return cli::cmd_scan_sigma(load_and_resolve(f));
            },
            flags, "", "");
    if (locate->parsed())
        return guarded(
            [](const global_flags& f, const std::string&, const std::string&) {
                return cli::cmd_locate(load_and_resolve(f));
            },
            flags, "", "");
    if (check->parsed())
        return guarded(
            [](const global_flags& f, const std::string& at, const std::string& profile) {
                run_config cfg = load_and_resolve(f);
                std::optional<std::vector<double>> z;
                if (!at.empty()) z = cli::parse_point(at, cfg.params.n);
                return cli::cmd_check(cfg, profile, z);
            },
            flags, at_text, profile_path);
    return cli::exit_config;
}

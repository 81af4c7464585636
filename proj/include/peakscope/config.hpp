#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "peakscope/expr.hpp"
#include "peakscope/model.hpp"

namespace peakscope {

/// Configuration error carrying the offending key and byte offset.
struct config_error : std::runtime_error {
    std::string key;
    std::size_t offset;
    config_error(const std::string& msg, std::string k, std::size_t off)
        : std::runtime_error(msg + (k.empty() ? "" : " (key '" + k + "')") + " at byte " +
                             std::to_string(off)),
          key(std::move(k)),
          offset(off) {}
};

/// Flat key = value run configuration ('#' comments, expression values in
/// double quotes).
struct run_config {
    problem_params params;
    std::string alpha_expr = "1";
    std::string V_expr = "1";
    std::string K_expr = "1";
    scan_box box;
    int grid_n = 8;
    std::uint64_t seed = 0;
    std::string output_dir = ".";
    int jobs = 0;  // 0 = hardware concurrency

    // tolerance overrides
    double shoot_tol = 1e-12;
    double candidate_tol = 0.0;  // 0 = auto
    double gram_tol = 1e-8;
    double clarke_radius = 1e-2;
    int clarke_samples = 0;  // 0 = 2n+3
    double positivity_floor = 1e-8;
    double fd_step = 0.0;  // 0 = auto

    coefficient_field make_field() const {
        return coefficient_field::from_strings(alpha_expr, V_expr, K_expr, params.n);
    }
};

namespace detail {

struct raw_entry {
    std::string value;
    std::size_t value_offset;
    bool quoted;
};

inline std::string trim(const std::string& s, std::size_t* left_trim = nullptr) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    if (left_trim) *left_trim = b;
    return s.substr(b, e - b);
}

inline double parse_double(const std::string& text, const std::string& key, std::size_t offset) {
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || *end != '\0')
        throw config_error("malformed number '" + text + "'", key, offset);
    return v;
}

inline long parse_long(const std::string& text, const std::string& key, std::size_t offset) {
    char* end = nullptr;
    const long v = std::strtol(text.c_str(), &end, 10);
    if (end == text.c_str() || *end != '\0')
        throw config_error("malformed integer '" + text + "'", key, offset);
    return v;
}

inline std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace detail

inline run_config parse_config_text(const std::string& text) {
    std::map<std::string, detail::raw_entry> entries;
    std::size_t line_start = 0;

    while (line_start <= text.size()) {
        std::size_t line_end = text.find('\n', line_start);
        if (line_end == std::string::npos) line_end = text.size();
        std::string line = text.substr(line_start, line_end - line_start);

        // strip comments, respecting quotes
        bool in_quote = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') in_quote = !in_quote;
            if (line[i] == '#' && !in_quote) {
                line = line.substr(0, i);
                break;
            }
        }
        std::size_t lead = 0;
        const std::string stripped = detail::trim(line, &lead);
        if (!stripped.empty()) {
            const std::size_t eq = stripped.find('=');
            if (eq == std::string::npos)
                throw config_error("expected 'key = value'", "", line_start + lead);
            const std::string key = detail::trim(stripped.substr(0, eq));
            std::size_t vlead = 0;
            std::string value = detail::trim(stripped.substr(eq + 1), &vlead);
            const std::size_t value_offset = line_start + lead + eq + 1 + vlead;
            if (key.empty()) throw config_error("empty key", "", line_start + lead);
            bool quoted = false;
            if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
                value = value.substr(1, value.size() - 2);
                quoted = true;
            }
            if (entries.count(key))
                throw config_error("duplicate key", key, line_start + lead);
            entries[key] = {value, value_offset, quoted};
        }
        line_start = line_end + 1;
    }

    run_config cfg;
    auto take = [&](const char* key) -> const detail::raw_entry* {
        auto it = entries.find(key);
        if (it == entries.end()) return nullptr;
        return &it->second;
    };

    if (auto e = take("n")) cfg.params.n = static_cast<int>(detail::parse_long(e->value, "n", e->value_offset));
    if (auto e = take("p")) cfg.params.p = detail::parse_double(e->value, "p", e->value_offset);
    if (auto e = take("q")) cfg.params.q = detail::parse_double(e->value, "q", e->value_offset);
    if (auto e = take("theta")) cfg.params.theta = detail::parse_double(e->value, "theta", e->value_offset);
    if (auto e = take("test_mode"))
        cfg.params.low_dim_test_mode = e->value == "true" || e->value == "1";
    if (auto e = take("nonlinearity")) {
        const std::string& v = e->value;
        if (v == "purepower") {
            cfg.params.kind = nonlinearity_kind::pure_power;
        } else if (v.rfind("powersum", 0) == 0) {
            cfg.params.kind = nonlinearity_kind::power_sum;
            // powersum (c1,e1) (c2,e2) ...
            std::size_t pos = 8;
            while (pos < v.size()) {
                while (pos < v.size() && v[pos] != '(') ++pos;
                if (pos >= v.size()) break;
                const std::size_t close = v.find(')', pos);
                if (close == std::string::npos)
                    throw config_error("unterminated power-sum term", "nonlinearity",
                                       e->value_offset + pos);
                const auto parts = detail::split(v.substr(pos + 1, close - pos - 1), ',');
                if (parts.size() != 2)
                    throw config_error("power-sum term needs (coeff, exponent)", "nonlinearity",
                                       e->value_offset + pos);
                power_term t;
                t.coeff = detail::parse_double(detail::trim(parts[0]), "nonlinearity", e->value_offset + pos);
                t.exponent =
                    detail::parse_double(detail::trim(parts[1]), "nonlinearity", e->value_offset + pos);
                cfg.params.terms.push_back(t);
                pos = close + 1;
            }
            if (cfg.params.terms.empty())
                throw config_error("power-sum has no terms", "nonlinearity", e->value_offset);
        } else {
            throw config_error("unknown nonlinearity '" + v + "'", "nonlinearity", e->value_offset);
        }
    }
    if (auto e = take("alpha")) cfg.alpha_expr = e->value;
    if (auto e = take("V")) cfg.V_expr = e->value;
    if (auto e = take("K")) cfg.K_expr = e->value;
    if (auto e = take("box")) {
        cfg.box.axes.clear();
        for (const auto& part : detail::split(e->value, ';')) {
            const auto pair = detail::split(part, ',');
            if (pair.size() != 2)
                throw config_error("box axis needs 'lo, hi'", "box", e->value_offset);
            cfg.box.axes.push_back({detail::parse_double(detail::trim(pair[0]), "box", e->value_offset),
                                    detail::parse_double(detail::trim(pair[1]), "box", e->value_offset)});
        }
    }
    if (auto e = take("grid_n"))
        cfg.grid_n = static_cast<int>(detail::parse_long(e->value, "grid_n", e->value_offset));
    if (auto e = take("seed"))
        cfg.seed = static_cast<std::uint64_t>(detail::parse_long(e->value, "seed", e->value_offset));
    if (auto e = take("output")) cfg.output_dir = e->value;
    if (auto e = take("jobs"))
        cfg.jobs = static_cast<int>(detail::parse_long(e->value, "jobs", e->value_offset));
    if (auto e = take("shoot_tol")) cfg.shoot_tol = detail::parse_double(e->value, "shoot_tol", e->value_offset);
    if (auto e = take("candidate_tol"))
        cfg.candidate_tol = detail::parse_double(e->value, "candidate_tol", e->value_offset);
    if (auto e = take("gram_tol")) cfg.gram_tol = detail::parse_double(e->value, "gram_tol", e->value_offset);
    if (auto e = take("clarke_radius"))
        cfg.clarke_radius = detail::parse_double(e->value, "clarke_radius", e->value_offset);
    if (auto e = take("clarke_samples"))
        cfg.clarke_samples =
            static_cast<int>(detail::parse_long(e->value, "clarke_samples", e->value_offset));
    if (auto e = take("positivity_floor"))
        cfg.positivity_floor = detail::parse_double(e->value, "positivity_floor", e->value_offset);
    if (auto e = take("fd_step")) cfg.fd_step = detail::parse_double(e->value, "fd_step", e->value_offset);

    static const char* known[] = {"n",          "p",           "q",          "theta",
                                  "test_mode",  "nonlinearity", "alpha",     "V",
                                  "K",          "box",         "grid_n",     "seed",
                                  "output",     "jobs",        "shoot_tol",  "candidate_tol",
                                  "gram_tol",   "clarke_radius", "clarke_samples",
                                  "positivity_floor", "fd_step"};
    for (const auto& [key, entry] : entries) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw config_error("unknown key", key, entry.value_offset);
    }

    // defaults for the box: unit cube when absent
    if (cfg.box.axes.empty())
        cfg.box.axes.assign(static_cast<std::size_t>(cfg.params.n), {-1.0, 1.0});
    return cfg;
}

/// Parses and validates a configuration file; all violations surface as
/// config_error with the offending key and byte offset.
inline run_config load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open config file '" + path + "'", "", 0);
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    run_config cfg = parse_config_text(text);

    if (auto report = validate_params(cfg.params); !report.empty())
        throw config_error("invalid parameters: " + report.front(), "p", 0);
    if (cfg.grid_n < 2) throw config_error("grid_n must be >= 2", "grid_n", 0);
    if (static_cast<int>(cfg.box.axes.size()) != cfg.params.n)
        throw config_error("box dimension differs from n", "box", 0);
    try {
        cfg.box.validate();
    } catch (const input_error& err) {
        throw config_error(err.what(), "box", 0);
    }
    auto check_expr = [&](const std::string& src, const char* key) {
        try {
            expression::parse(src, cfg.params.n);
        } catch (const parse_error& err) {
            throw config_error(std::string("expression does not parse: ") + err.what(), key,
                               err.offset);
        }
    };
    check_expr(cfg.alpha_expr, "alpha");
    check_expr(cfg.V_expr, "V");
    check_expr(cfg.K_expr, "K");
    return cfg;
}

}  // namespace peakscope

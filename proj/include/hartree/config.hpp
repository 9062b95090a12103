#pragma once

// key = value configuration files. '#' starts a comment, keys are dotted
// (potential.A, kernel.mu, solver.tol, ...). Unknown or repeated keys and
// malformed values are errors carrying the line and column.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "hartree/errors.hpp"
#include "hartree/model.hpp"

namespace hartree {

struct RunConfig {
    ModelParams params;
    std::map<std::string, std::string> raw;  ///< key -> value text as written
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_double(std::string_view v, int line, int col) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) throw ConfigError("expected a number, got '" + std::string(v) + "'", line, col);
    return out;
}

inline long long parse_int(std::string_view v, int line, int col) {
    long long out = 0;
    const auto* end = v.data() + v.size();
    const auto [ptr, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || ptr != end) throw ConfigError("expected an integer, got '" + std::string(v) + "'", line, col);
    return out;
}

inline bool parse_bool(std::string_view v, int line, int col) {
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw ConfigError("expected true/false, got '" + std::string(v) + "'", line, col);
}

// "t:f, t:f, ..."
inline std::vector<std::pair<double, double>> parse_table(std::string_view v, int line, int col) {
    std::vector<std::pair<double, double>> rows;
    std::size_t pos = 0;
    while (pos <= v.size()) {
        std::size_t comma = v.find(',', pos);
        if (comma == std::string_view::npos) comma = v.size();
        const auto item = trim(v.substr(pos, comma - pos));
        const auto colon = item.find(':');
        if (colon == std::string_view::npos)
            throw ConfigError("table entries are t:f pairs", line, col + static_cast<int>(pos));
        rows.emplace_back(parse_double(trim(item.substr(0, colon)), line, col + static_cast<int>(pos)),
                          parse_double(trim(item.substr(colon + 1)), line, col + static_cast<int>(pos)));
        pos = comma + 1;
    }
    return rows;
}

}  // namespace detail

/// Parses configuration text. Physical validation is left to validate_params.
inline RunConfig parse_config(std::istream& in) {
    RunConfig cfg;
    ModelParams& p = cfg.params;
    std::string kind = "log_linear";
    std::vector<std::pair<double, double>> table;
    int table_line = 0, table_col = 0;

    using Setter = std::function<void(std::string_view, int, int)>;
    auto num = [](double& dst) -> Setter {
        return [&dst](std::string_view v, int l, int c) { dst = detail::parse_double(v, l, c); };
    };
    auto integer = [](int& dst) -> Setter {
        return [&dst](std::string_view v, int l, int c) { dst = static_cast<int>(detail::parse_int(v, l, c)); };
    };
    const std::map<std::string, Setter, std::less<>> setters = {
        {"sigma", num(p.sigma)},
        {"m", num(p.m)},
        {"N", integer(p.N)},
        {"L", num(p.L)},
        {"n", integer(p.n)},
        {"theta", num(p.theta)},
        {"seed", [&](std::string_view v, int l, int c) {
             const auto s = detail::parse_int(v, l, c);
             if (s < 0) throw ConfigError("seed must be >= 0", l, c);
             p.solver.seed = static_cast<std::uint64_t>(s);
         }},
        {"nonlinearity.kind", [&](std::string_view v, int l, int c) {
             if (v != "log_linear" && v != "pure_power" && v != "user_table")
                 throw ConfigError("nonlinearity.kind must be log_linear, pure_power or user_table", l, c);
             kind = std::string(v);
         }},
        {"nonlinearity.table", [&](std::string_view v, int l, int c) {
             table = detail::parse_table(v, l, c);
             table_line = l;
             table_col = c;
         }},
        {"potential.V_inf", num(p.potential.V_inf)},
        {"potential.A", num(p.potential.A)},
        {"potential.w", num(p.potential.w)},
        {"potential.V0", num(p.V0)},
        {"kernel.a", num(p.kernel.a)},
        {"kernel.mu", num(p.kernel.mu)},
        {"kernel.R_c", num(p.kernel.R_c)},
        {"kernel.b", num(p.kernel.b)},
        {"kernel.w2", num(p.kernel.w2)},
        {"solver.tol", num(p.solver.tol)},
        {"solver.max_iter", integer(p.solver.max_iter)},
        {"solver.step", num(p.solver.step)},
        {"solver.multistart", integer(p.solver.multistart)},
        {"solver.dealias", [&](std::string_view v, int l, int c) { p.solver.dealias = detail::parse_bool(v, l, c); }},
        {"profile.s_max", num(p.profile_s_max)},
        {"profile.M", integer(p.profile_nodes)},
        {"extension.K_x", integer(p.extension_nodes)},
        {"extension.x_max", num(p.extension_x_max)},
    };

    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view sv(line);
        if (const auto hash = sv.find('#'); hash != std::string_view::npos) sv = sv.substr(0, hash);
        if (detail::trim(sv).empty()) continue;
        const auto eq = sv.find('=');
        const int key_col = static_cast<int>(sv.find_first_not_of(" \t")) + 1;
        if (eq == std::string_view::npos) throw ConfigError("expected key = value", lineno, key_col);
        const auto key = detail::trim(sv.substr(0, eq));
        const auto rest = sv.substr(eq + 1);
        const auto value = detail::trim(rest);
        const auto lead = rest.find_first_not_of(" \t");
        const int val_col = static_cast<int>(eq) + 2 + static_cast<int>(lead == std::string_view::npos ? 0 : lead);
        if (key.empty()) throw ConfigError("empty key", lineno, key_col);
        if (value.empty()) throw ConfigError("missing value for '" + std::string(key) + "'", lineno, val_col);
        const auto it = setters.find(key);
        if (it == setters.end()) throw ConfigError("unknown key '" + std::string(key) + "'", lineno, key_col);
        if (cfg.raw.count(std::string(key))) throw ConfigError("duplicate key '" + std::string(key) + "'", lineno, key_col);
        it->second(value, lineno, val_col);
        cfg.raw.emplace(std::string(key), std::string(value));
    }

    if (kind == "log_linear") {
        p.nonlinearity = NonlinearitySpec::log_linear(p.theta);
    } else if (kind == "pure_power") {
        p.nonlinearity = NonlinearitySpec::pure_power(p.theta);
    } else {
        if (table.empty()) throw ConfigError("user_table needs nonlinearity.table", lineno, 1);
        try {
            p.nonlinearity = NonlinearitySpec::user_table(table, p.theta);
        } catch (const DomainError& e) {
            throw ConfigError(e.what(), table_line, table_col);
        }
    }
    return cfg;
}

inline RunConfig parse_config_string(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    return parse_config(in);
}

}  // namespace hartree

#pragma once

// Subcommands of the command-line tool: profile, solve, verify. Each returns a
// process exit code:
//   0 ok, 1 I/O (missing or unreadable file), 2 configuration or parameter
//   domain error, 3 convergence failure, 4 verification failure.

#include <openssl/evp.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hartree/config.hpp"
#include "hartree/errors.hpp"
#include "hartree/extension.hpp"
#include "hartree/field_io.hpp"
#include "hartree/model.hpp"
#include "hartree/profile.hpp"
#include "hartree/solver.hpp"

namespace hartree::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kIo = 1, kConfig = 2, kConvergence = 3, kVerification = 4 };

struct Options {
    std::string config;
    std::string out = ".";
    std::string field;
    std::optional<std::uint64_t> seed;
    int threads = 1;
};

struct RunManifest {
    std::string command;
    std::string config_hash;
    std::string tool_version = kToolVersion;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> outputs;
    double wall_time = 0.0;

    nlohmann::json to_json() const {
        return {{"command", command},         {"config_hash", config_hash}, {"tool_version", tool_version},
                {"seeds", seeds},             {"outputs", outputs},         {"wall_time_s", wall_time}};
    }
};

inline std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 || EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw Error("SHA-256 computation failed");
    }
    EVP_MD_CTX_free(ctx);
    std::ostringstream hex;
    for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return hex.str();
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Sets the spdlog level from HARTREE_LOG (trace, debug, info, warn, error, critical, off).
inline void init_logging() {
    static bool done = false;
    if (!done) {
        spdlog::set_default_logger(spdlog::stderr_color_mt("hartree"));
        done = true;
    }
    const char* env = std::getenv("HARTREE_LOG");
    spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
}

namespace detail {

class Outputs {
public:
    explicit Outputs(std::string dir) : dir_(std::move(dir)) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        if (ec) throw IoError("cannot create output directory '" + dir_ + "'");
    }
    std::string path(const std::string& name) {
        const auto p = (std::filesystem::path(dir_) / name).string();
        files_.push_back(p);
        return p;
    }
    std::ofstream open(const std::string& name) {
        std::ofstream os(path(name));
        if (!os) throw IoError("cannot write '" + files_.back() + "'");
        os.precision(17);
        return os;
    }
    const std::vector<std::string>& files() const { return files_; }
    void finish(RunManifest& m, std::chrono::steady_clock::time_point t0) {
        const auto mpath = path("manifest.json");
        m.outputs = files_;
        m.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::ofstream os(mpath);
        os << m.to_json().dump(2) << '\n';
        os.close();
        for (const auto& f : files_)
            if (!std::filesystem::exists(f)) throw IoError("declared output '" + f + "' is missing");
    }

private:
    std::string dir_;
    std::vector<std::string> files_;
};

struct Loaded {
    RunConfig cfg;
    std::string hash;
};

inline Loaded load(const Options& opt) {
    if (opt.config.empty()) throw IoError("--config is required");
    const std::string text = read_file(opt.config);
    Loaded l{parse_config_string(text), sha256_hex(text)};
    if (opt.seed) l.cfg.params.solver.seed = *opt.seed;
    return l;
}

inline double x_max_of(const ModelParams& p) { return p.extension_x_max > 0.0 ? p.extension_x_max : 10.0 / p.m; }

}  // namespace detail

/// Runs body and maps library exceptions to exit codes, writing the diagnostic to err.
template <class Body>
int guarded(Body&& body, std::ostream& err) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return kConfig;
    } catch (const IoError& e) {
        err << "I/O error: " << e.what() << '\n';
        return kIo;
    } catch (const ConvergenceError& e) {
        err << "convergence failure: " << e.what() << " after " << e.iters() << " iterations (nehari residual "
            << e.nehari_residual() << ", gradient residual " << e.grad_residual() << ")\n";
        return kConvergence;
    } catch (const VerificationError& e) {
        err << "verification failed: " << e.what() << '\n';
        return kVerification;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << '\n';
        return kConvergence;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kIo;
    }
}

inline int cmd_profile(const Options& opt, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return guarded(
        [&]() {
            const auto t0 = std::chrono::steady_clock::now();
            const auto l = detail::load(opt);
            const auto& p = l.cfg.params;
            spdlog::info("building profile sigma={} s_max={} M={}", p.sigma, p.profile_s_max, p.profile_nodes);
            const auto prof = build_profile(p.sigma, p.profile_s_max, p.profile_nodes);
            const auto fit = fit_asymptotics(prof);
            detail::Outputs files(opt.out);
            {
                auto os = files.open("profile.csv");
                write_profile_csv(prof, os);
            }
            {
                auto os = files.open("profile_fit.csv");
                os << "quantity,value\n"
                   << "sigma," << prof.sigma << "\nkappa," << prof.kappa << "\nd_sigma," << prof.d_sigma << "\nc1,"
                   << fit.c1 << "\nc1_residual," << fit.c1_residual << "\nc2," << fit.c2 << "\nc2_residual,"
                   << fit.c2_residual << "\nmax_ode_residual," << max_ode_residual(prof) << '\n';
            }
            RunManifest m{"profile", l.hash};
            files.finish(m, t0);
            out << std::setprecision(12) << "sigma = " << prof.sigma << "\nkappa = " << prof.kappa
                << "\nd_sigma = " << prof.d_sigma << "\nc1 = " << fit.c1 << "\nc2 = " << fit.c2 << '\n';
            return int(kOk);
        },
        err);
}

inline int cmd_solve(const Options& opt, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return guarded(
        [&]() {
            const auto t0 = std::chrono::steady_clock::now();
            const auto l = detail::load(opt);
            const auto& p = l.cfg.params;
            validate_params(p);
            const auto prof = build_profile(p.sigma, p.profile_s_max, p.profile_nodes);
            validate_potential_bound(p, prof.kappa);
            spdlog::info("multistart with {} starts, seed {}", p.solver.multistart, p.solver.seed);
            const auto ms = solve_multistart(p, prof, PotentialMode::full, p.solver.multistart, p.solver.seed,
                                             opt.threads);
            const auto& g = ms.best;
            const auto asym = solve_asymptotic(p, prof);
            const double c_star = g.level, c_inf = asym.level;
            const double margin = (c_inf - c_star) / c_inf;
            std::mt19937_64 rng(p.solver.seed);
            const double weak = weak_residual(Model(p, prof), g.u, rng);

            detail::Outputs files(opt.out);
            save_field(g.u, files.path("ground_state.csv"));
            save_field(g.u, files.path("ground_state.bin"));
            save_field(asym.u, files.path("asymptotic_state.csv"));
            {
                auto os = files.open("iteration_log.csv");
                write_iteration_log(g, os);
            }
            nlohmann::json report = {{"c_star", c_star},
                                     {"c_inf", c_inf},
                                     {"margin", margin},
                                     {"multistart_levels", ms.levels},
                                     {"multistart_spread", ms.spread},
                                     {"nehari_residual", g.nehari_residual},
                                     {"quad", g.quad},
                                     {"grad_residual", g.grad_residual},
                                     {"weak_residual", weak},
                                     {"iters", g.iters},
                                     {"min_value", g.min_value},
                                     {"beta", g.beta},
                                     {"sup", lq_norm(g.u, INFINITY)}};
            {
                auto os = files.open("report.json");
                os << report.dump(2) << '\n';
            }
            RunManifest m{"solve", l.hash};
            m.seeds = ms.seeds;
            files.finish(m, t0);

            out << std::setprecision(12) << "c_star = " << c_star << "\nc_inf = " << c_inf << "\nmargin = " << margin
                << "\nmultistart spread = " << ms.spread << "\nmin value = " << g.min_value << '\n';
            if (!(c_star > 0.0 && c_inf > 0.0)) throw VerificationError("levels must be positive");
            if (p.potential.A > 0.0) {
                if (!(c_star < c_inf)) throw VerificationError("level ordering violated: c_star >= c_inf");
                out << "c_star < c_inf: yes\n";
            } else {
                out << "c_star ~ c_inf (relative gap " << std::abs(margin) << ")\n";
                if (std::abs(margin) > 1e-6) throw VerificationError("levels differ although V is constant");
            }
            return int(kOk);
        },
        err);
}

struct CheckRow {
    std::string name;
    double value;
    std::string threshold;
    bool pass;
};

/// Runs the extension checks on a trace; the rows feed the pass/fail table.
inline std::vector<CheckRow> verify_field(const TraceField& h, const ModelParams& p, const BesselProfile& prof,
                                          DecayFitReport* decay_out = nullptr, DtnReport* dtn_out = nullptr) {
    std::vector<CheckRow> rows;
    const auto ext = lift(h, prof, p.m, detail::x_max_of(p), p.extension_nodes);
    const double eid = energy_identity_check(h, ext, prof, p.m);
    rows.push_back({"energy_identity_rel_error", eid, "< 0.01", eid < kEnergyIdentityTolerance});
    const auto dtn = dtn_check(h, ext, prof, p.m, p.sigma);
    rows.push_back({"dtn_max_rel_error", dtn.max_rel_error, "< 0.02", dtn.max_rel_error < kDtnTolerance});
    if (dtn_out) *dtn_out = dtn;
    const double h_norm = lq_norm(h, 2.0);
    if (h_norm > 0.0) {
        const auto d = decay_fit(ext, h_norm, p.m);
        const double p0 = (2.0 * p.sigma - 1.0) / 2.0;
        rows.push_back({"decay_rate", d.rate, ">= 0.95 m", d.rate >= kDecayRateFraction * p.m});
        rows.push_back({"decay_power", d.poly_exp, "within 0.2 of (2 sigma - 1)/2",
                        std::abs(d.poly_exp - p0) <= kDecayPowerTolerance});
        rows.push_back({"decay_fit_residual", d.residual, "< 0.05", d.residual < kDecayFitResidual});
        bool env_ok = true;
        for (std::size_t i = 0; i < d.x.size(); ++i) env_ok = env_ok && d.sup_abs[i] <= d.envelope[i] * (1 + 1e-12);
        rows.push_back({"decay_envelope_constant", d.envelope_constant, "envelope holds", env_ok});
        if (decay_out) *decay_out = d;
    } else {
        rows.push_back({"decay_rate", 0.0, "vacuous (zero field)", true});
    }
    if (p.m == 1.0) {
        const auto t = trace_inequality_check(h, prof, p.sigma);
        rows.push_back({"trace_inequality_slack", t.slack, ">= 0", t.slack >= 0.0});
    }
    return rows;
}

inline int cmd_verify(const Options& opt, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    return guarded(
        [&]() {
            const auto t0 = std::chrono::steady_clock::now();
            const auto l = detail::load(opt);
            const auto& p = l.cfg.params;
            validate_params(p);
            if (opt.field.empty()) throw IoError("--field is required");
            const TraceField h = load_field(opt.field);
            const auto prof = build_profile(p.sigma, p.profile_s_max, p.profile_nodes);
            DecayFitReport decay;
            DtnReport dtn;
            const auto rows = verify_field(h, p, prof, &decay, &dtn);

            detail::Outputs files(opt.out);
            {
                auto os = files.open("verify_table.csv");
                os << "check,value,threshold,pass\n";
                for (const auto& r : rows) os << r.name << ',' << r.value << ",\"" << r.threshold << "\"," << (r.pass ? "PASS" : "FAIL") << '\n';
            }
            {
                auto os = files.open("decay.csv");
                write_decay_csv(decay, os);
            }
            {
                auto os = files.open("dtn.csv");
                write_dtn_csv(dtn, h.grid.dim(), os);
            }
            RunManifest m{"verify", l.hash};
            files.finish(m, t0);

            std::vector<std::string> failed;
            for (const auto& r : rows) {
                out << std::left << std::setw(28) << r.name << ' ' << std::setw(14) << std::setprecision(6) << r.value
                    << ' ' << (r.pass ? "PASS" : "FAIL") << "  (" << r.threshold << ")\n";
                if (!r.pass) failed.push_back(r.name);
            }
            if (!failed.empty()) {
                std::string list;
                for (const auto& f : failed) list += (list.empty() ? "" : ", ") + f;
                throw VerificationError(list);
            }
            return int(kOk);
        },
        err);
}

}  // namespace hartree::cli

#pragma once

// Ground states by descent on the Nehari manifold: each step moves along the
// preconditioned negative gradient and rescales back with t_u.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <thread>
#include <vector>

#include "hartree/errors.hpp"
#include "hartree/model.hpp"
#include "hartree/profile.hpp"
#include "hartree/spectral.hpp"

namespace hartree {

struct IterationRecord {
    int iter = 0;
    double energy = 0.0;
    double nehari_residual = 0.0;
    double grad_residual = 0.0;
    double step = 0.0;
};

struct GroundStateResult {
    TraceField u;
    double level = 0.0;
    double quad = 0.0;
    double nehari_residual = 0.0;  ///< |<I'(u), u>|
    double grad_residual = 0.0;    ///< |I'(u)|_2
    double grad_relative = 0.0;    ///< preconditioned gradient norm over |u| in the same metric
    int iters = 0;
    double min_value = 0.0;
    double beta = 0.0;  ///< smallest ||t_u u||_sigma over the projected iterates
    PotentialMode mode = PotentialMode::full;
    std::vector<IterationRecord> log;
};

/// Stopping thresholds beyond solver.tol.
struct StopRule {
    double energy_change = 1e-10;  ///< relative, over `window` iterations
    int window = 5;
    double armijo = 1e-4;
    double backtrack = 0.5;
    double min_step = 1e-12;
};

/// Centered Gaussian of unit amplitude and unit width.
inline TraceField gaussian_seed(const Grid& g) {
    return sample(g, [&](std::array<double, 3> y) {
        return std::exp(-(y[0] * y[0] + y[1] * y[1] + y[2] * y[2]));
    });
}

/// Gaussian bump with random centre (within L/8 of the origin), width in [1, 3]
/// and amplitude in [0.5, 2], plus a 10% smooth random perturbation.
inline TraceField random_seed(const Grid& g, std::mt19937_64& rng) {
    const double L = g.half_length();
    std::uniform_real_distribution<double> centre(-L / 8.0, L / 8.0), width(1.0, 3.0), amp(0.5, 2.0);
    std::array<double, 3> c{0.0, 0.0, 0.0};
    for (int a = 0; a < g.dim(); ++a) c[a] = centre(rng);
    const double w = width(rng), A = amp(rng);
    std::normal_distribution<double> noise(0.0, 0.1 * A / 6.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    struct Mode {
        std::array<int, 3> k;
        double a, p;
    };
    std::vector<Mode> modes;
    std::uniform_int_distribution<int> pick(-3, 3);
    for (int i = 0; i < 6; ++i) modes.push_back({{pick(rng), pick(rng), pick(rng)}, noise(rng), phase(rng)});
    return sample(g, [&](std::array<double, 3> y) {
        double r2 = 0.0;
        for (int a = 0; a < g.dim(); ++a) r2 += (y[a] - c[a]) * (y[a] - c[a]);
        double v = A * std::exp(-r2 / (w * w));
        for (const auto& m : modes) {
            double arg = m.p;
            for (int a = 0; a < g.dim(); ++a) arg += std::numbers::pi * m.k[a] * y[a] / L;
            v += m.a * std::cos(arg) * std::exp(-r2 / (4.0 * w * w));
        }
        return v;
    });
}

/// Trigonometric interpolation of a field onto another grid of the same box.
inline TraceField resample(const TraceField& h, const Grid& target) {
    const Grid& g = h.grid;
    if (g.dim() != target.dim() || g.half_length() != target.half_length())
        throw DomainError("resample needs the same box");
    const SpectralField s = forward(h);
    SpectralField out{target, std::vector<complex>(target.size(), 0.0)};
    const int nc = std::min(g.n(), target.n());
    for (std::size_t k = 0; k < s.coeffs.size(); ++k) {
        const auto idx = g.unflatten(k);
        std::array<int, 3> w{0, 0, 0};
        bool keep = true;
        for (int a = 0; a < g.dim(); ++a) {
            w[a] = g.wavenumber(idx[a]);
            if (std::abs(w[a]) >= nc / 2) keep = false;  // drop the ambiguous Nyquist plane
        }
        if (keep) out.coeffs[target.flatten(w)] = s.coeffs[k];
    }
    return inverse(out);
}

namespace detail {

inline double min_of(const TraceField& u) {
    return *std::min_element(u.values.begin(), u.values.end());
}

inline TraceField scaled(const TraceField& u, double t) {
    TraceField out(u);
    for (auto& v : out.values) v *= t;
    return out;
}

}  // namespace detail

/// Preconditioned gradient norm relative to the field norm in the same metric.
inline double relative_gradient(const Model& model, const TraceField& u, const TraceField& g) {
    const double gg = inner(g, model.precondition(g));
    const double uu = model.precond_norm_sq(u);
    return uu > 0.0 ? std::sqrt(std::max(gg, 0.0) / uu) : 0.0;
}

/// Descent on the Nehari manifold of `model` from `seed`.
inline GroundStateResult nehari_descent(const Model& model, const TraceField& seed, const StopRule& rule = {}) {
    const auto& cfg = model.params().solver;
    const double tol = cfg.tol;
    double umax = 0.0;
    for (double v : seed.values) umax = std::max(umax, v);
    if (!(umax > 0.0)) throw DomainError("seed has zero positive part");

    GroundStateResult res;
    res.mode = model.mode();
    const EnergyConstant k1{model.params().sigma, model.kappa()};
    auto sigma_norm = [&](const TraceField& v) { return std::sqrt(sobolev_form(v, model.params().sigma, 1.0, k1)); };

    TraceField u = detail::scaled(seed, model.nehari_scale(seed));
    EnergyReport e = model.energy(u);
    res.beta = sigma_norm(u);
    std::vector<double> history{e.total};
    double last_step = 0.0;

    for (int it = 0;; ++it) {
        const TraceField g = model.gradient(u);
        const TraceField d = detail::scaled(model.precondition(g), -1.0);
        const double slope = inner(g, d);
        const double nehari = std::abs(model.nehari_functional(u));
        const double grad_l2 = lq_norm(g, 2.0);
        const double grad_rel = relative_gradient(model, u, g);
        res.log.push_back({it, e.total, nehari, grad_l2, last_step});

        const std::size_t h = history.size();
        const bool settled =
            h > static_cast<std::size_t>(rule.window) &&
            std::abs(history[h - 1] - history[h - 1 - rule.window]) < rule.energy_change * std::abs(history[h - 1]);
        // The weak-form residual against any test field is bounded by grad_rel in
        // this metric, so grad_rel < tol keeps it inside the reporting threshold.
        const bool converged = nehari < tol * e.quad && settled && grad_rel < tol;
        auto finish = [&]() {
            res.u = u;
            res.level = e.total;
            res.quad = e.quad;
            res.nehari_residual = nehari;
            res.grad_residual = grad_l2;
            res.grad_relative = grad_rel;
            res.iters = it;
            res.min_value = detail::min_of(u);
            return res;
        };
        if (converged) return finish();
        if (it >= cfg.max_iter)
            throw ConvergenceError("Nehari descent hit max_iter", it, nehari, grad_l2);

        // Armijo backtracking on the projected energy. The allowance covers the
        // round-off of evaluating I itself.
        const double noise = 64.0 * std::numeric_limits<double>::epsilon() * (std::abs(e.quad) + std::abs(e.interaction));
        double alpha = cfg.step;
        bool accepted = false;
        while (alpha >= rule.min_step) {
            TraceField v(u);
            for (std::size_t i = 0; i < v.size(); ++i) v[i] += alpha * d[i];
            try {
                const TraceField w = detail::scaled(v, model.nehari_scale(v));
                const EnergyReport ew = model.energy(w);
                if (ew.total <= e.total + rule.armijo * alpha * slope + noise) {
                    u = w;
                    e = ew;
                    accepted = true;
                    break;
                }
            } catch (const DomainError&) {
            } catch (const BracketError&) {
            }
            alpha *= rule.backtrack;
        }
        if (!accepted) {
            // The energy can no longer resolve a decrease: accept the iterate if the
            // residual tests hold, otherwise report a stall.
            if (nehari < tol * e.quad && grad_rel < 10.0 * tol) return finish();
            throw ConvergenceError("line search stalled", it, nehari, grad_l2);
        }
        last_step = alpha;
        history.push_back(e.total);
        res.beta = std::min(res.beta, sigma_norm(u));
    }
}

inline GroundStateResult solve_ground(const ModelParams& params, const BesselProfile& profile,
                                      const std::optional<TraceField>& seed = std::nullopt) {
    validate_params(params);
    validate_potential_bound(params, profile.kappa);
    const Model model(params, profile, PotentialMode::full);
    return nehari_descent(model, seed ? *seed : gaussian_seed(model.grid()));
}

/// Same as solve_ground with V replaced by V_inf.
inline GroundStateResult solve_asymptotic(const ModelParams& params, const BesselProfile& profile,
                                          const std::optional<TraceField>& seed = std::nullopt) {
    validate_params(params);
    validate_potential_bound(params, profile.kappa);
    const Model model(params, profile, PotentialMode::asymptotic);
    return nehari_descent(model, seed ? *seed : gaussian_seed(model.grid()));
}

struct MultistartResult {
    GroundStateResult best;
    std::vector<double> levels;
    std::vector<std::uint64_t> seeds;
    double spread = 0.0;  ///< (max - min) / |min| over the starts
};

/// Start 0 is the centered Gaussian, the rest are random_seed draws from
/// seed + i. Starts run on up to `threads` threads.
inline MultistartResult solve_multistart(const ModelParams& params, const BesselProfile& profile,
                                         PotentialMode mode, int starts, std::uint64_t seed, int threads = 1) {
    validate_params(params);
    validate_potential_bound(params, profile.kappa);
    if (starts < 1) throw DomainError("multistart needs at least one start");
    const Model model(params, profile, mode);
    std::vector<std::optional<GroundStateResult>> out(starts);
    std::vector<std::exception_ptr> errors(starts);
    MultistartResult ms;
    for (int i = 0; i < starts; ++i) ms.seeds.push_back(seed + static_cast<std::uint64_t>(i));
    auto run = [&](int i) {
        try {
            TraceField s = gaussian_seed(model.grid());
            if (i > 0) {
                std::mt19937_64 rng(ms.seeds[i]);
                s = random_seed(model.grid(), rng);
            }
            out[i] = nehari_descent(model, s);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    const int workers = std::clamp(threads, 1, starts);
    if (workers == 1) {
        for (int i = 0; i < starts; ++i) run(i);
    } else {
        std::vector<std::thread> pool;
        std::mutex mu;
        int next = 0;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&]() {
                for (;;) {
                    int i;
                    {
                        std::lock_guard<std::mutex> lock(mu);
                        if (next >= starts) return;
                        i = next++;
                    }
                    run(i);
                }
            });
        for (auto& t : pool) t.join();
    }
    for (int i = 0; i < starts; ++i)
        if (errors[i]) std::rethrow_exception(errors[i]);
    std::size_t best = 0;
    for (int i = 0; i < starts; ++i) {
        ms.levels.push_back(out[i]->level);
        if (out[i]->level < out[best]->level) best = i;
    }
    const auto [lo, hi] = std::minmax_element(ms.levels.begin(), ms.levels.end());
    ms.spread = (*hi - *lo) / std::abs(*lo);
    ms.best = std::move(*out[best]);
    return ms;
}

struct LevelComparison {
    double c_star = 0.0;
    double c_inf = 0.0;
    double margin = 0.0;  ///< (c_inf - c_star) / c_inf
    GroundStateResult ground;
    GroundStateResult asymptotic;
};

/// Solves both problems from the centered seed and checks 0 < c* < c_inf when
/// the well is nontrivial (A > 0), or c* = c_inf to 1e-6 when A = 0.
inline LevelComparison compare_levels(const ModelParams& params, const BesselProfile& profile) {
    LevelComparison lc;
    lc.ground = solve_ground(params, profile);
    lc.asymptotic = solve_asymptotic(params, profile);
    lc.c_star = lc.ground.level;
    lc.c_inf = lc.asymptotic.level;
    lc.margin = (lc.c_inf - lc.c_star) / lc.c_inf;
    if (!(lc.c_star > 0.0 && lc.c_inf > 0.0))
        throw VerificationError("level ordering: levels must be positive");
    if (params.potential.A > 0.0) {
        if (!(lc.c_star < lc.c_inf)) throw VerificationError("level ordering violated: c* >= c_inf");
    } else if (std::abs(lc.margin) > 1e-6) {
        throw VerificationError("levels differ although V is constant");
    }
    return lc;
}

/// Relative asymmetry |u_c - R u_c| / |u_c| where u_c is u re-centered at its
/// circular centre of mass and R is the point reflection y -> -y.
inline double reflection_asymmetry(const TraceField& u) {
    const Grid& g = u.grid;
    const double L = g.half_length();
    std::array<double, 3> centre{0.0, 0.0, 0.0};
    for (int a = 0; a < g.dim(); ++a) {
        complex acc = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double y = g.coordinate(g.unflatten(i)[a]);
            acc += u[i] * u[i] * std::polar(1.0, std::numbers::pi * y / L);
        }
        centre[a] = std::arg(acc) * L / std::numbers::pi;
    }
    SpectralField s = forward(u);
    for (std::size_t k = 0; k < s.coeffs.size(); ++k) {
        const auto idx = g.unflatten(k);
        double ph = 0.0;
        for (int a = 0; a < g.dim(); ++a) ph += 2.0 * std::numbers::pi * g.frequency(idx[a]) * centre[a];
        s.coeffs[k] *= std::polar(1.0, ph);
        if (g.is_nyquist(k)) s.coeffs[k] = 0.0;
    }
    const TraceField c = inverse(s);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        auto idx = g.unflatten(i);
        for (int a = 0; a < g.dim(); ++a) idx[a] = g.n() - idx[a];  // y -> -y on the grid
        const double r = c[g.flatten(idx)];
        num += (c[i] - r) * (c[i] - r);
        den += c[i] * c[i];
    }
    return den > 0.0 ? std::sqrt(num / den) : 0.0;
}

/// Max over test fields v of |<I'(u), v>| / (|u|_P |v|_P), with |.|_P the
/// norm induced by the preconditioner.
inline double weak_residual(const Model& model, const TraceField& u, std::mt19937_64& rng, int count = 10) {
    const TraceField g = model.gradient(u);
    const double nu = std::sqrt(model.precond_norm_sq(u));
    double worst = 0.0;
    for (int i = 0; i < count; ++i) {
        const TraceField v = random_seed(model.grid(), rng);
        const double nv = std::sqrt(model.precond_norm_sq(v));
        worst = std::max(worst, std::abs(inner(g, v)) / (nu * nv));
    }
    return worst;
}

struct RefinementReport {
    double sup_coarse = 0.0;
    double sup_fine = 0.0;
    double rel_change = 0.0;
    bool passed = true;
    int n_fine = 0;
};

/// Re-solves on a grid with n doubled, seeded by interpolating the coarse
/// solution, and compares sup norms (pass below 2%).
inline RefinementReport linf_refinement_check(const GroundStateResult& result, const ModelParams& params,
                                              const BesselProfile& profile) {
    RefinementReport r;
    r.sup_coarse = lq_norm(result.u, INFINITY);
    r.n_fine = 2 * params.n;
    if (r.sup_coarse == 0.0) return r;
    ModelParams fine = params;
    fine.n = r.n_fine;
    const TraceField seed = resample(result.u, fine.grid());
    const auto solved = result.mode == PotentialMode::asymptotic ? solve_asymptotic(fine, profile, seed)
                                                                  : solve_ground(fine, profile, seed);
    r.sup_fine = lq_norm(solved.u, INFINITY);
    r.rel_change = std::abs(r.sup_coarse - r.sup_fine) / r.sup_fine;
    r.passed = r.rel_change < 0.02 && std::isfinite(r.sup_fine);
    return r;
}

inline void write_iteration_log(const GroundStateResult& r, std::ostream& os) {
    os << "iter,energy,nehari_residual,grad_residual,step\n";
    os.precision(17);
    for (const auto& rec : r.log)
        os << rec.iter << ',' << rec.energy << ',' << rec.nehari_residual << ',' << rec.grad_residual << ','
           << rec.step << '\n';
}

}  // namespace hartree

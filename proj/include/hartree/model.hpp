#pragma once

// Hypothesis families (nonlinearity, potential, kernel), the energy functional
//
//   I(u) = 1/2 K \int c^{2 sigma} |u^|^2 + 1/2 \int V u^2 - 1/2 \int (W * F(u)) F(u),
//   c = sqrt(m^2 + 4 pi^2 |xi|^2),
//
// evaluated on the boundary trace through the canonical extension, its L^2
// gradient and the Nehari projection t -> t u.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hartree/errors.hpp"
#include "hartree/profile.hpp"
#include "hartree/spectral.hpp"

namespace hartree {

enum class NonlinearityKind { log_linear, pure_power, user_table };

struct NonlinearitySpec {
    NonlinearityKind kind = NonlinearityKind::log_linear;
    double theta = 2.5;
    /// (t, f(t)) samples for user_table, t strictly increasing from 0.
    std::vector<std::pair<double, double>> table;

    static NonlinearitySpec log_linear(double theta = 2.5) {
        return {NonlinearityKind::log_linear, theta, {}};
    }
    static NonlinearitySpec pure_power(double theta) {
        return {NonlinearityKind::pure_power, theta, {}};
    }
    static NonlinearitySpec user_table(std::vector<std::pair<double, double>> samples,
                                       double theta = 2.5) {
        if (samples.size() < 2 || samples.front().first != 0.0 || samples.front().second != 0.0)
            throw DomainError("nonlinearity table must start at (0, 0) and have >= 2 rows");
        for (std::size_t i = 1; i < samples.size(); ++i)
            if (!(samples[i].first > samples[i - 1].first))
                throw DomainError("nonlinearity table abscissae must increase");
        return {NonlinearityKind::user_table, theta, std::move(samples)};
    }
};

namespace detail {

// Piecewise-linear f from a table; beyond the last row f(t)/t is continued linearly.
struct TableEval {
    double f, F, df;
};

inline TableEval table_eval(const NonlinearitySpec& s, double t) {
    const auto& tb = s.table;
    double F = 0.0;
    for (std::size_t i = 0; i + 1 < tb.size(); ++i) {
        const auto [t0, f0] = tb[i];
        const auto [t1, f1] = tb[i + 1];
        const double slope = (f1 - f0) / (t1 - t0);
        if (t <= t1) {
            const double h = t - t0;
            return {f0 + slope * h, F + f0 * h + 0.5 * slope * h * h, slope};
        }
        F += 0.5 * (f0 + f1) * (t1 - t0);
    }
    // f(t) = t (r + g (t - t_n)), r = f_n / t_n, g = slope of f/t on the last segment
    const auto [tp, fp] = tb[tb.size() - 2];
    const auto [tn, fn] = tb.back();
    const double r = fn / tn;
    const double g = tp > 0.0 ? (r - fp / tp) / (tn - tp) : 0.0;
    const double h = t - tn;
    const double f = t * (r + g * h);
    // \int_{tn}^{t} x (r + g (x - tn)) dx
    const double Fx = r * (t * t - tn * tn) / 2.0 + g * ((t * t * t - tn * tn * tn) / 3.0 -
                                                         tn * (t * t - tn * tn) / 2.0);
    return {f, F + Fx, r + g * h + t * g};
}

}  // namespace detail

/// f(t); zero for t <= 0.
inline double f_eval(const NonlinearitySpec& s, double t) {
    if (!(t > 0.0)) return 0.0;
    switch (s.kind) {
        case NonlinearityKind::log_linear:
            return t * std::log1p(t);
        case NonlinearityKind::pure_power:
            return std::pow(t, s.theta - 1.0);
        case NonlinearityKind::user_table:
            return detail::table_eval(s, t).f;
    }
    return 0.0;
}

/// F(t) = \int_0^t f; zero for t <= 0.
inline double F_eval(const NonlinearitySpec& s, double t) {
    if (!(t > 0.0)) return 0.0;
    switch (s.kind) {
        case NonlinearityKind::log_linear: {
            if (t < 0.1) {
                // t ln(1+t) = sum_k (-1)^{k+1} t^{k+1}/k  =>  F = sum_k (-1)^{k+1} t^{k+2} / (k (k+2))
                double acc = 0.0, pw = t * t * t, sign = 1.0;
                for (int k = 1; k <= 24; ++k) {
                    acc += sign * pw / (k * (k + 2.0));
                    pw *= t;
                    sign = -sign;
                }
                return acc;
            }
            return 0.5 * (t * t - 1.0) * std::log1p(t) - 0.25 * t * t + 0.5 * t;
        }
        case NonlinearityKind::pure_power:
            return std::pow(t, s.theta) / s.theta;
        case NonlinearityKind::user_table:
            return detail::table_eval(s, t).F;
    }
    return 0.0;
}

/// f'(t) (one-sided, zero for t <= 0).
inline double df_eval(const NonlinearitySpec& s, double t) {
    if (!(t > 0.0)) return 0.0;
    switch (s.kind) {
        case NonlinearityKind::log_linear:
            return std::log1p(t) + t / (1.0 + t);
        case NonlinearityKind::pure_power:
            return (s.theta - 1.0) * std::pow(t, s.theta - 2.0);
        case NonlinearityKind::user_table:
            return detail::table_eval(s, t).df;
    }
    return 0.0;
}

/// count points log-spaced on [lo, hi].
inline std::vector<double> log_samples(double lo, double hi, int count) {
    std::vector<double> t(count);
    for (int i = 0; i < count; ++i) t[i] = lo * std::pow(hi / lo, i / (count - 1.0));
    return t;
}

struct NonlinearityChecks {
    bool f1_limit = false;            ///< f(t)/t decreasing over t = 1e-3, 1e-4, 1e-5, ending below 1e-2
    bool f3_monotone = false;         ///< f(t)/t strictly increasing
    bool ambrosetti_rabinowitz = false;  ///< 2 F(t) <= t f(t)
    bool negative_zero = false;       ///< f = F = 0 for t < 0
    bool all() const { return f1_limit && f3_monotone && ambrosetti_rabinowitz && negative_zero; }
};

/// Samples the structural hypotheses on a log grid in [1e-6, 1e3].
inline NonlinearityChecks check_nonlinearity(const NonlinearitySpec& s, int count = 400) {
    NonlinearityChecks c;
    const double r3 = f_eval(s, 1e-3) / 1e-3, r4 = f_eval(s, 1e-4) / 1e-4, r5 = f_eval(s, 1e-5) / 1e-5;
    c.f1_limit = r4 < r3 && r5 < r4 && r5 < 1e-2;
    c.f3_monotone = c.ambrosetti_rabinowitz = true;
    double prev = -1.0;
    for (double t : log_samples(1e-6, 1e3, count)) {
        const double f = f_eval(s, t);
        const double ratio = f / t;
        if (!(ratio > prev)) c.f3_monotone = false;
        prev = ratio;
        if (!(2.0 * F_eval(s, t) <= t * f * (1.0 + 1e-12))) c.ambrosetti_rabinowitz = false;
    }
    c.negative_zero = true;
    for (double t : {-1e-3, -1.0, -1e3})
        if (f_eval(s, t) != 0.0 || F_eval(s, t) != 0.0) c.negative_zero = false;
    return c;
}

/// Smallest C with |f(t)| <= xi t + C t^{theta - 1} on a log grid in [1e-6, 1e3].
inline double growth_constant(const NonlinearitySpec& s, double xi, double theta, int count = 400) {
    double C = 0.0;
    for (double t : log_samples(1e-6, 1e3, count))
        C = std::max(C, (std::abs(f_eval(s, t)) - xi * t) / std::pow(t, theta - 1.0));
    return C;
}

/// V(y) = V_inf - A exp(-|y|^2 / w^2).
struct PotentialSpec {
    double V_inf = 1.0;
    double A = 0.0;
    double w = 2.0;

    double operator()(double r2) const { return V_inf - A * std::exp(-r2 / (w * w)); }
};

/// W = W1 + W2 with W1 = a min(|y|, rho)^{-mu} 1_{|y| <= R_c},  W2 = b exp(-|y|^2 / w2^2).
/// rho is one grid cell.
struct KernelSpec {
    double a = 0.0;
    double mu = 0.5;
    double R_c = 1.0;
    double b = 1.0;
    double w2 = 2.0;

    double operator()(double r2, double rho) const {
        const double r = std::sqrt(r2);
        double v = b * std::exp(-r2 / (w2 * w2));
        if (a > 0.0 && r <= R_c) v += a * std::pow(std::max(r, rho), -mu);
        return v;
    }
};

struct SolverSettings {
    double tol = 1e-8;
    int max_iter = 5000;
    double step = 1.0;
    bool dealias = false;
    int multistart = 3;
    std::uint64_t seed = 1;
};

struct ModelParams {
    double sigma = 0.5;
    double m = 1.0;
    int N = 1;
    double L = 20.0;
    int n = 256;
    double theta = 2.5;
    NonlinearitySpec nonlinearity = NonlinearitySpec::log_linear();
    PotentialSpec potential;
    KernelSpec kernel;
    /// Lower-bound constant for the potential; NaN means "use max(0, -min V)".
    double V0 = std::numeric_limits<double>::quiet_NaN();
    SolverSettings solver;
    double profile_s_max = 40.0;
    int profile_nodes = 2000;
    int extension_nodes = 400;
    double extension_x_max = 0.0;  ///< 0 means 10 / m

    Grid grid() const { return Grid(N, L, n); }
};

/// Exponent window max{2, N/(N-2 sigma)} < theta < 2N/(N-2 sigma); when
/// N <= 2 sigma the upper end is +inf and the lower end is 2.
inline std::pair<double, double> theta_window(int N, double sigma) {
    const double gap = N - 2.0 * sigma;
    if (gap <= 0.0) return {2.0, std::numeric_limits<double>::infinity()};
    return {std::max(2.0, N / gap), 2.0 * N / gap};
}

/// Largest admissible mu for the singular kernel part: W1 in L^r needs mu r < N
/// with r > N / (N (2 - theta) + 2 sigma theta), r >= 1.
inline double kernel_mu_bound(int N, double sigma, double theta) {
    const double D = N * (2.0 - theta) + 2.0 * sigma * theta;
    return D > 0.0 ? std::min<double>(N, D) : static_cast<double>(N);
}

inline double min_potential(const ModelParams& p) {
    return std::min(p.potential.V_inf - p.potential.A, p.potential.V_inf);
}

inline double effective_V0(const ModelParams& p) {
    return std::isnan(p.V0) ? std::max(0.0, -min_potential(p)) : p.V0;
}

/// Checks everything that does not need the profile constant. Throws DomainError.
inline void validate_params(const ModelParams& p) {
    if (!(p.sigma > 0.0 && p.sigma < 1.0)) throw DomainError("sigma out of (0,1)");
    if (!(p.m > 0.0)) throw DomainError("m must be positive");
    (void)p.grid();
    const auto [lo, hi] = theta_window(p.N, p.sigma);
    if (!(p.theta > lo && p.theta < hi)) {
        std::ostringstream msg;
        msg << "theta=" << p.theta << " outside the admissible window (" << lo << ", " << hi << ")";
        throw DomainError(msg.str());
    }
    if (p.nonlinearity.kind == NonlinearityKind::pure_power &&
        std::abs(p.nonlinearity.theta - p.theta) > 0.0)
        throw DomainError("pure_power exponent must equal theta");
    const auto& V = p.potential;
    if (!(V.V_inf > 0.0)) throw DomainError("potential V_inf must be positive");
    if (!(V.A >= 0.0)) throw DomainError("potential well depth A must be >= 0");
    if (!(V.w > 0.0)) throw DomainError("potential width w must be positive");
    const auto& W = p.kernel;
    if (!(W.a >= 0.0 && W.b >= 0.0)) throw DomainError("kernel weights a, b must be >= 0");
    if (!(W.w2 > 0.0)) throw DomainError("kernel width w2 must be positive");
    if (W.a > 0.0) {
        if (!(W.R_c > 0.0 && W.R_c < p.L)) throw DomainError("kernel cutoff R_c must lie in (0, L)");
        const double bound = kernel_mu_bound(p.N, p.sigma, p.theta);
        if (!(W.mu >= 0.0 && W.mu < bound)) {
            std::ostringstream msg;
            msg << "kernel exponent mu=" << W.mu << " violates the integrability bound mu < " << bound;
            throw DomainError(msg.str());
        }
    }
    if (p.solver.tol <= 0.0 || p.solver.max_iter <= 0 || p.solver.step <= 0.0)
        throw DomainError("solver tol, max_iter and step must be positive");
    if (p.solver.multistart < 1) throw DomainError("solver.multistart must be >= 1");
    if (p.extension_nodes < 10) throw DomainError("extension needs at least 10 x-nodes");
}

/// Potential bound: V + V0 >= 0 with V0 < min{1, m^2} K.
inline void validate_potential_bound(const ModelParams& p, double kappa) {
    const double V0 = effective_V0(p);
    const double cap = std::min(1.0, p.m * p.m) * kappa;
    if (!(min_potential(p) + V0 >= 0.0)) throw DomainError("potential violates V + V0 >= 0");
    if (!(V0 < cap)) {
        std::ostringstream msg;
        msg << "V0=" << V0 << " must be below min{1,m^2} K = " << cap;
        throw DomainError(msg.str());
    }
}

struct EnergyReport {
    double quad = 0.0;
    double interaction = 0.0;
    double total = 0.0;
};

/// Which potential the functional uses: V(y), or its limit V_inf.
enum class PotentialMode { full, asymptotic };

/// Energy functional with all grid-dependent symbols precomputed.
/// Immutable after construction; safe to share across threads.
class Model {
public:
    Model(const ModelParams& params, const BesselProfile& profile,
          PotentialMode mode = PotentialMode::full)
        : params_(params), grid_(params.grid()), mode_(mode) {
        if (std::abs(profile.sigma - params.sigma) > 1e-12)
            throw DomainError("profile sigma does not match model sigma");
        kappa_ = profile.kappa;
        symbol_.resize(grid_.size());
        precond_.resize(grid_.size());
        for (std::size_t k = 0; k < grid_.size(); ++k) {
            symbol_[k] = frac_symbol(grid_.xi_squared(k), params.sigma, params.m);
            precond_[k] = 1.0 / (kappa_ * symbol_[k] + params.potential.V_inf);
        }
        potential_ = TraceField(grid_);
        for (std::size_t i = 0; i < grid_.size(); ++i)
            potential_[i] = mode == PotentialMode::asymptotic ? params.potential.V_inf
                                                              : params.potential(grid_.radius_squared(i));
        const double rho = grid_.spacing();
        TraceField w(grid_);
        for (std::size_t i = 0; i < grid_.size(); ++i) w[i] = params.kernel(grid_.radius_squared(i), rho);
        kernel_ = w;
        kernel_hat_ = forward(w);
    }

    const Grid& grid() const noexcept { return grid_; }
    const ModelParams& params() const noexcept { return params_; }
    double kappa() const noexcept { return kappa_; }
    PotentialMode mode() const noexcept { return mode_; }
    const TraceField& potential() const noexcept { return potential_; }
    const TraceField& kernel() const noexcept { return kernel_; }

    /// K \int c^{2 sigma} |u^|^2: the extension energy of u (times 2 it is I_1).
    double extension_energy(const TraceField& u) const {
        const SpectralField s = forward(u);
        double acc = 0.0;
        for (std::size_t k = 0; k < s.coeffs.size(); ++k) acc += symbol_[k] * std::norm(s.coeffs[k]);
        return kappa_ * acc / grid_.box_volume();
    }

    /// 2 x quadratic part: K \int c^{2 sigma}|u^|^2 + \int V u^2.
    double quadratic_form(const TraceField& u) const {
        double pot = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) pot += potential_[i] * u[i] * u[i];
        return extension_energy(u) + pot * grid_.cell_volume();
    }

    TraceField primitive(const TraceField& u) const {
        TraceField out(grid_);
        for (std::size_t i = 0; i < u.size(); ++i) out[i] = F_eval(params_.nonlinearity, u[i]);
        return params_.solver.dealias ? dealias(out) : out;
    }

    /// W * F(u).
    TraceField interaction_potential(const TraceField& u) const {
        return convolve_hat(kernel_hat_, primitive(u));
    }

    /// Psi(u) = 1/2 \int (W * F(u)) F(u).
    double interaction(const TraceField& u) const {
        const TraceField Fu = primitive(u);
        return 0.5 * inner(convolve_hat(kernel_hat_, Fu), Fu);
    }

    EnergyReport energy(const TraceField& u) const {
        require_same_grid(u.grid, grid_);
        EnergyReport r;
        r.quad = 0.5 * quadratic_form(u);
        const TraceField Fu = primitive(u);
        const TraceField conv = convolve_hat(kernel_hat_, Fu);
        r.interaction = 0.5 * inner(conv, Fu);
        r.total = r.quad - r.interaction;
        check_finite(r.quad, "quadratic part");
        check_finite(r.interaction, "interaction");
        check_finite(r.total, "total energy");
        return r;
    }

    /// L^2 representative of I'(u).
    TraceField gradient(const TraceField& u) const {
        require_same_grid(u.grid, grid_);
        SpectralField s = forward(u);
        for (std::size_t k = 0; k < s.coeffs.size(); ++k) s.coeffs[k] *= kappa_ * symbol_[k];
        TraceField g = inverse(s);
        TraceField conv = interaction_potential(u);
        if (params_.solver.dealias) conv = dealias(conv);
        for (std::size_t i = 0; i < u.size(); ++i) {
            g[i] += potential_[i] * u[i] - conv[i] * f_eval(params_.nonlinearity, u[i]);
            check_finite(g[i], "gradient");
        }
        return g;
    }

    /// <I'(u), u>.
    double nehari_functional(const TraceField& u) const {
        const TraceField conv = interaction_potential(u);
        double acc = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i)
            acc += conv[i] * f_eval(params_.nonlinearity, u[i]) * u[i];
        return quadratic_form(u) - acc * grid_.cell_volume();
    }

    /// (K c^{2 sigma} + V_inf)^{-1} applied in frequency space.
    TraceField precondition(const TraceField& g) const {
        SpectralField s = forward(g);
        for (std::size_t k = 0; k < s.coeffs.size(); ++k) s.coeffs[k] *= precond_[k];
        return inverse(s);
    }

    /// <(K c^{2 sigma} + V_inf) u, u>: the squared norm the preconditioner induces.
    double precond_norm_sq(const TraceField& u) const {
        const SpectralField s = forward(u);
        double acc = 0.0;
        for (std::size_t k = 0; k < s.coeffs.size(); ++k) acc += std::norm(s.coeffs[k]) / precond_[k];
        return acc / grid_.box_volume();
    }

    /// Unique t > 0 with <I'(t u), t u> = 0.
    double nehari_scale(const TraceField& u) const;

private:
    static void check_finite(double v, const char* what) {
        if (!std::isfinite(v)) throw NumericError(std::string("non-finite value in ") + what);
    }

    ModelParams params_;
    Grid grid_;
    PotentialMode mode_;
    double kappa_ = 0.0;
    std::vector<double> symbol_;
    std::vector<double> precond_;
    TraceField potential_;
    TraceField kernel_;
    SpectralField kernel_hat_;
};

inline double Model::nehari_scale(const TraceField& u) const {
    require_same_grid(u.grid, grid_);
    double umax = 0.0;
    for (double v : u.values) umax = std::max(umax, v);
    if (!(umax > 0.0)) throw DomainError("Nehari projection undefined: positive part is zero");

    const double Q = quadratic_form(u);
    const auto& nl = params_.nonlinearity;
    const double dv = grid_.cell_volume();
    TraceField tu(grid_);
    // phi(t) = <I'(tu), tu> / t = t Q - \int (W * F(tu)) f(tu) u
    auto phi = [&](double t) {
        for (std::size_t i = 0; i < u.size(); ++i) tu[i] = t * u[i];
        const TraceField conv = interaction_potential(tu);
        double acc = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) acc += conv[i] * f_eval(nl, tu[i]) * u[i];
        return t * Q - acc * dv;
    };
    auto dphi = [&](double t) {
        for (std::size_t i = 0; i < u.size(); ++i) tu[i] = t * u[i];
        const TraceField conv = interaction_potential(tu);
        TraceField fu(grid_);
        for (std::size_t i = 0; i < u.size(); ++i) fu[i] = f_eval(nl, tu[i]) * u[i];
        if (params_.solver.dealias) fu = dealias(fu);
        const TraceField conv2 = convolve_hat(kernel_hat_, fu);
        double acc = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i)
            acc += conv2[i] * fu[i] + conv[i] * df_eval(nl, tu[i]) * u[i] * u[i];
        return Q - acc * dv;
    };

    constexpr double t_min = 1e-6, t_max = 1e6;
    double lo = 1.0, hi = 1.0;
    double f_lo = phi(lo), f_hi = f_lo;
    if (f_lo > 0.0) {
        while (f_hi > 0.0) {
            lo = hi;
            f_lo = f_hi;
            hi *= 2.0;
            if (hi > t_max) throw BracketError("Nehari scale: no sign change in [1e-6, 1e6]");
            f_hi = phi(hi);
        }
    } else {
        while (f_lo <= 0.0) {
            hi = lo;
            f_hi = f_lo;
            lo *= 0.5;
            if (lo < t_min) throw BracketError("Nehari scale: no sign change in [1e-6, 1e6]");
            f_lo = phi(lo);
        }
    }
    // bisection in log t, then safeguarded Newton
    while (hi / lo > 1.0 + 1e-3) {
        const double mid = std::sqrt(lo * hi);
        (phi(mid) > 0.0 ? lo : hi) = mid;
    }
    double t = std::sqrt(lo * hi);
    double val = phi(t);
    for (int it = 0; it < 60; ++it) {
        if (std::abs(val) <= 1e-13 * t * Q) break;
        (val > 0.0 ? lo : hi) = t;
        double next = t - val / dphi(t);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == t) break;
        t = next;
        val = phi(t);
    }
    if (!(std::abs(val) <= 1e-10 * t * Q))
        throw NumericError("Nehari scale: root polish did not reach 1e-10 of the quadratic scale");
    return t;
}

/// Free-function forms of the model operations.
inline EnergyReport energy(const TraceField& u, const ModelParams& p, const BesselProfile& prof) {
    return Model(p, prof).energy(u);
}

inline TraceField gradient(const TraceField& u, const ModelParams& p, const BesselProfile& prof) {
    return Model(p, prof).gradient(u);
}

inline double nehari_scale(const TraceField& u, const ModelParams& p, const BesselProfile& prof) {
    return Model(p, prof).nehari_scale(u);
}

}  // namespace hartree

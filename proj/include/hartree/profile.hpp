#pragma once

// Bessel profile of the canonical extension: the decaying solution of
//
//     Phi'' + ((1 - 2 sigma) / s) Phi' - Phi = 0,   Phi(0) = 1,  Phi(inf) = 0,
//
// tabulated on nodes graded toward s = 0, together with the weighted energy
// K = \int_0^inf (Phi^2 + Phi'^2) s^{1-2 sigma} ds and the constants of the
// small-s (1 - c1 s^{2 sigma}) and large-s (c2 s^{(2 sigma - 1)/2} e^{-s}) regimes.
//
// Internally the solve carries the flux q = s^{1-2 sigma} Phi', which stays
// bounded at s = 0 for every sigma:  Phi' = s^{2 sigma - 1} q,  q' = s^{1-2 sigma} Phi.

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "hartree/errors.hpp"
#include "hartree/ode.hpp"
#include "hartree/spectral.hpp"

namespace hartree {

struct BesselProfile {
    double sigma = 0.5;
    std::vector<double> nodes;  ///< s_1 < ... < s_M = s_max, all positive
    std::vector<double> phi;
    std::vector<double> dphi;
    std::vector<double> flux;  ///< s^{1-2 sigma} Phi'(s)
    double kappa = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;
    double c2_slope = 0.0;  ///< next term of the large-s fit: Phi ~ s^p e^{-s} (c2 + c2_slope / s)
    double d_sigma = 0.0;   ///< -lim_{s->0} s^{1-2 sigma} Phi'(s)

    double s_max() const { return nodes.back(); }
    std::size_t size() const { return nodes.size(); }
    EnergyConstant energy_constant() const { return {sigma, kappa}; }
};

struct ProfileValue {
    double phi;
    double dphi;
};

struct AsymptoticFit {
    double c1 = 0.0;
    double c2 = 0.0;
    double c2_slope = 0.0;
    double c1_residual = 0.0;  ///< relative least-squares residual of the small-s fit
    double c2_residual = 0.0;  ///< relative least-squares residual of the large-s fit
};

inline constexpr double kProfileFitTolerance = 0.02;

namespace detail {

inline void check_sigma(double sigma) {
    if (!(sigma > 0.0 && sigma < 1.0)) throw DomainError("sigma out of (0,1)");
}

// Cubic Hermite on [0, 1] given end values and end slopes (already scaled by the width).
inline double hermite(double u, double y0, double y1, double m0, double m1) {
    const double u2 = u * u, u3 = u2 * u;
    return (2 * u3 - 3 * u2 + 1) * y0 + (u3 - 2 * u2 + u) * m0 + (-2 * u3 + 3 * u2) * y1 +
           (u3 - u2) * m1;
}

// Fritsch-Carlson limiting of end slopes for a monotone cell.
inline void limit_slopes(double delta, double& m0, double& m1) {
    if (delta == 0.0) {
        m0 = m1 = 0.0;
        return;
    }
    double a = m0 / delta, b = m1 / delta;
    if (a < 0.0) a = 0.0;
    if (b < 0.0) b = 0.0;
    const double r = a * a + b * b;
    if (r > 9.0) {
        const double tau = 3.0 / std::sqrt(r);
        a *= tau;
        b *= tau;
    }
    m0 = a * delta;
    m1 = b * delta;
}

// Large-s asymptotic series of s^sigma K_sigma(s) up to the prefactor:
// returns S(s) = sum_k a_k / s^k and S'(s).
inline std::pair<double, double> decaying_series(double sigma, double s) {
    const double mu = 4.0 * sigma * sigma;
    double term = 1.0, sum = 1.0, dsum = 0.0;
    for (int k = 1; k <= 12; ++k) {
        const double odd = 2.0 * k - 1.0;
        term *= (mu - odd * odd) / (8.0 * k * s);
        sum += term;
        dsum += -k * term / s;
        if (std::abs(term) < 1e-17 * std::abs(sum)) break;
    }
    return {sum, dsum};
}

}  // namespace detail

/// Phi and Phi' at s >= 0. Hermite interpolation in t = s^{2 sigma} (slope
/// limited, so monotone data stay monotone) on [0, s_max]; the asymptotic
/// series c2 s^{(2 sigma - 1)/2} e^{-s} (1 + O(1/s)) beyond s_max. At s = 0, Phi' is its one-sided limit
/// (-inf for sigma < 1/2).
inline ProfileValue eval_profile(const BesselProfile& p, double s) {
    if (!(s >= 0.0)) throw DomainError("profile evaluated at negative s");
    const double sig = p.sigma;
    const double two_sig = 2.0 * sig;
    if (s == 0.0) {
        double d;
        if (sig < 0.5)
            d = -std::numeric_limits<double>::infinity();
        else if (sig == 0.5)
            d = -p.d_sigma;
        else
            d = 0.0;
        return {1.0, d};
    }
    if (s > p.s_max()) {
        // decaying solution s^pw e^{-s} S(s), scaled to the last tabulated value
        const double pw = (two_sig - 1.0) / 2.0;
        const double se = p.s_max();
        const auto [S, dS] = detail::decaying_series(sig, s);
        const double Se = detail::decaying_series(sig, se).first;
        const double phi = p.phi.back() * std::exp(pw * std::log(s / se) - (s - se)) * (S / Se);
        return {phi, phi * (pw / s - 1.0 + dS / S)};
    }
    const auto& x = p.nodes;
    if (s <= x.front()) {
        const double t1 = std::pow(x.front(), two_sig);
        const double t = std::pow(s, two_sig);
        const double phi = 1.0 + (p.phi.front() - 1.0) * (t / t1);
        const double q0 = -p.d_sigma;
        const double q = q0 + (p.flux.front() - q0) * std::pow(s / x.front(), 2.0 - two_sig);
        return {phi, std::pow(s, two_sig - 1.0) * q};
    }
    const auto it = std::upper_bound(x.begin(), x.end(), s);
    const std::size_t j = static_cast<std::size_t>(std::min<std::ptrdiff_t>(
        std::distance(x.begin(), it) - 1, static_cast<std::ptrdiff_t>(x.size()) - 2));
    const double sa = x[j], sb = x[j + 1];
    const double ta = std::pow(sa, two_sig), tb = std::pow(sb, two_sig), t = std::pow(s, two_sig);
    const double w = tb - ta;
    const double u = (t - ta) / w;
    // dPhi/dt = q / (2 sigma),  dq/dt = s^{2 - 4 sigma} Phi / (2 sigma)
    double m0 = w * p.flux[j] / two_sig, m1 = w * p.flux[j + 1] / two_sig;
    detail::limit_slopes(p.phi[j + 1] - p.phi[j], m0, m1);
    const double phi = detail::hermite(u, p.phi[j], p.phi[j + 1], m0, m1);
    const double n0 = w * std::pow(sa, 2.0 - 2.0 * two_sig) * p.phi[j] / two_sig;
    const double n1 = w * std::pow(sb, 2.0 - 2.0 * two_sig) * p.phi[j + 1] / two_sig;
    const double q = detail::hermite(u, p.flux[j], p.flux[j + 1], n0, n1);
    return {phi, std::pow(s, two_sig - 1.0) * q};
}

/// Least-squares fits of the small-s and large-s regimes of a tabulation.
/// Throws NumericError when either relative residual exceeds 2%.
inline AsymptoticFit fit_asymptotics(const BesselProfile& p) {
    const double two_sig = 2.0 * p.sigma;
    AsymptoticFit fit;
    {
        // smallest decade of nodes (at least six): 1 - Phi against s^{2 sigma},
        // with the regular s^2 term of the expansion as a second regressor
        const double s_hi = 10.0 * p.nodes.front();
        std::vector<std::array<double, 3>> pts;  // t, s^2, 1 - Phi
        for (std::size_t j = 0; j < p.size(); ++j) {
            if (p.nodes[j] > s_hi && pts.size() >= 6) break;
            pts.push_back({std::pow(p.nodes[j], two_sig), p.nodes[j] * p.nodes[j], 1.0 - p.phi[j]});
        }
        double a11 = 0, a12 = 0, a22 = 0, b1 = 0, b2 = 0, syy = 0;
        for (const auto& [t, r, y] : pts) {
            a11 += t * t;
            a12 += t * r;
            a22 += r * r;
            b1 += t * y;
            b2 += r * y;
            syy += y * y;
        }
        const double det = a11 * a22 - a12 * a12;
        fit.c1 = (b1 * a22 - b2 * a12) / det;
        const double e = (a11 * b2 - a12 * b1) / det;
        double r2 = 0.0;
        for (const auto& [t, r, y] : pts) r2 += (y - fit.c1 * t - e * r) * (y - fit.c1 * t - e * r);
        fit.c1_residual = std::sqrt(r2 / syy);
    }
    {
        // largest decade: ratio Phi / (s^p e^{-s}) against c2 + b / s
        const double pw = (two_sig - 1.0) / 2.0;
        const double s_lo = p.s_max() / 10.0;
        double n = 0, sx = 0, sxx = 0, sy = 0, sxy = 0, syy = 0;
        std::vector<std::pair<double, double>> pts;
        for (std::size_t j = 0; j < p.size(); ++j) {
            if (p.nodes[j] < s_lo) continue;
            const double s = p.nodes[j];
            const double r = p.phi[j] / (std::pow(s, pw) * std::exp(-s));
            pts.emplace_back(1.0 / s, r);
        }
        for (auto [x, y] : pts) {
            n += 1;
            sx += x;
            sxx += x * x;
            sy += y;
            sxy += x * y;
            syy += y * y;
        }
        const double det = n * sxx - sx * sx;
        fit.c2_slope = (n * sxy - sx * sy) / det;
        fit.c2 = (sy - fit.c2_slope * sx) / n;
        double r2 = 0.0;
        for (auto [x, y] : pts) {
            const double e = y - (fit.c2 + fit.c2_slope * x);
            r2 += e * e;
        }
        fit.c2_residual = std::sqrt(r2 / syy);
    }
    if (!(fit.c1_residual < kProfileFitTolerance) || !(fit.c2_residual < kProfileFitTolerance) ||
        !(fit.c1 > 0.0) || !(fit.c2 > 0.0)) {
        std::ostringstream msg;
        msg << "asymptotic fit is ill-conditioned: c1=" << fit.c1 << " (residual "
            << fit.c1_residual << "), c2=" << fit.c2 << " (residual " << fit.c2_residual << ")";
        throw NumericError(msg.str());
    }
    return fit;
}

/// K = \int_0^inf (Phi^2 + Phi'^2) s^{1-2 sigma} ds. The endpoint piece
/// [0, s_1] uses the expansion 1 - c1 s^{2 sigma}; every cell after it uses
/// 10-point Gauss-Legendre in log s on the interpolant.
inline double kappa_quadrature(const BesselProfile& p) {
    const double sig = p.sigma, two_sig = 2.0 * sig;
    const double s1 = p.nodes.front();
    const double c1 = p.d_sigma / two_sig;
    double acc = std::pow(s1, 2.0 - two_sig) / (2.0 - two_sig) - c1 * s1 * s1 +
                 c1 * c1 * std::pow(s1, 2.0 + two_sig) / (2.0 + two_sig) +
                 two_sig * c1 * c1 * std::pow(s1, two_sig);
    using gauss = boost::math::quadrature::gauss<double, 10>;
    for (std::size_t j = 0; j + 1 < p.size(); ++j) {
        const double la = std::log(p.nodes[j]), lb = std::log(p.nodes[j + 1]);
        auto integrand = [&](double u) {
            const double s = std::exp(u);
            const auto v = eval_profile(p, s);
            return (v.phi * v.phi + v.dphi * v.dphi) * std::pow(s, 2.0 - two_sig);
        };
        acc += gauss::integrate(integrand, la, lb);
    }
    return acc;
}

/// Residual of the flux form (s^{1-2 sigma} Phi')' = s^{1-2 sigma} Phi on each
/// interior cell [s_j, s_{j+1}], divided by \int s^{1-2 sigma} ds over the cell:
/// the weighted cell average of Phi'' + ((1 - 2 sigma)/s) Phi' - Phi. Where the
/// individual terms of the equation exceed O(1) (the s^{2 sigma - 2} layer at
/// the origin) the value is relative to |(1 - 2 sigma) Phi'/s| + |Phi|.
inline std::vector<double> ode_residuals(const BesselProfile& p) {
    const double two_sig = 2.0 * p.sigma;
    using gauss = boost::math::quadrature::gauss<double, 10>;
    std::vector<double> out;
    out.reserve(p.size());
    for (std::size_t j = 0; j + 1 < p.size(); ++j) {
        const double sa = p.nodes[j], sb = p.nodes[j + 1];
        const double la = std::log(sa), lb = std::log(sb);
        const double source = gauss::integrate(
            [&](double u) {
                const double s = std::exp(u);
                return eval_profile(p, s).phi * std::pow(s, 2.0 - two_sig);
            },
            la, lb);
        const double weight =
            (std::pow(sb, 2.0 - two_sig) - std::pow(sa, 2.0 - two_sig)) / (2.0 - two_sig);
        const double terms = std::abs((1.0 - two_sig) * p.dphi[j] / sa) + std::abs(p.phi[j]);
        out.push_back((p.flux[j + 1] - p.flux[j] - source) / weight / std::max(1.0, terms));
    }
    return out;
}

inline double max_ode_residual(const BesselProfile& p) {
    double m = 0.0;
    for (double r : ode_residuals(p)) m = std::max(m, std::abs(r));
    return m;
}

/// Tabulates the profile on s_j = s_max (j/M)^3, j = 1..M, by integrating the
/// decaying branch inward from s_max and normalizing to Phi(0) = 1.
inline BesselProfile build_profile(double sigma, double s_max = 40.0, int M = 2000) {
    detail::check_sigma(sigma);
    if (!(s_max >= 20.0)) throw DomainError("profile s_max must be >= 20");
    if (M < 1000) throw DomainError("profile needs at least 1000 nodes");

    BesselProfile p;
    p.sigma = sigma;
    const double two_sig = 2.0 * sigma;
    p.nodes.resize(static_cast<std::size_t>(M));
    for (int j = 1; j <= M; ++j) {
        const double r = static_cast<double>(j) / M;
        p.nodes[static_cast<std::size_t>(j - 1)] = s_max * r * r * r;
    }
    p.nodes.back() = s_max;
    p.phi.assign(p.nodes.size(), 0.0);
    p.flux.assign(p.nodes.size(), 0.0);

    // decaying branch at s_max: s^{sigma - 1/2} e^{-s} S(s)
    using Stepper = ode::DormandPrince<2>;
    Stepper::State y;
    {
        const auto [S, dS] = detail::decaying_series(sigma, s_max);
        const double pw = sigma - 0.5;
        const double env = std::pow(s_max, pw) * std::exp(-s_max);
        const double phi = env * S;
        const double dphi = env * ((pw / s_max - 1.0) * S + dS);
        y = {phi, std::pow(s_max, 1.0 - two_sig) * dphi};
    }
    auto rhs = [two_sig](double s, const Stepper::State& v, Stepper::State& dv) {
        dv[0] = std::pow(s, two_sig - 1.0) * v[1];
        dv[1] = std::pow(s, 1.0 - two_sig) * v[0];
    };
    Stepper stepper(1e-13, 1e-300);
    p.phi.back() = y[0];
    p.flux.back() = y[1];
    for (std::size_t j = p.size() - 1; j-- > 0;) {
        stepper.integrate(rhs, p.nodes[j + 1], p.nodes[j], y);
        p.phi[j] = y[0];
        p.flux[j] = y[1];
    }

    // Near s = 0:  q = q0 + a s^{2-2 sigma} + O(s^2),  Phi = A0 + (q0 / 2 sigma) s^{2 sigma} + O(s^2).
    const double s1 = p.nodes[0], s2 = p.nodes[1];
    const double e1 = std::pow(s1, 2.0 - two_sig), e2 = std::pow(s2, 2.0 - two_sig);
    const double q0 = (p.flux[0] * e2 - p.flux[1] * e1) / (e2 - e1);
    const double a0 = p.phi[0] - q0 * std::pow(s1, two_sig) / two_sig;
    if (!std::isfinite(a0) || !(a0 > 0.0))
        throw NumericError("profile shooting did not produce a positive value at s = 0");
    for (std::size_t j = 0; j < p.size(); ++j) {
        p.phi[j] /= a0;
        p.flux[j] /= a0;
    }
    p.d_sigma = -q0 / a0;
    p.dphi.resize(p.size());
    for (std::size_t j = 0; j < p.size(); ++j)
        p.dphi[j] = std::pow(p.nodes[j], two_sig - 1.0) * p.flux[j];

    for (std::size_t j = 0; j < p.size(); ++j) {
        const bool ok = std::isfinite(p.phi[j]) && p.phi[j] > 0.0 && p.phi[j] <= 1.0 &&
                        (j == 0 || p.phi[j] < p.phi[j - 1]);
        if (!ok) throw NumericError("profile is not positive and decreasing; shooting failed");
    }

    const AsymptoticFit fit = fit_asymptotics(p);
    p.c1 = fit.c1;
    p.c2 = fit.c2;
    p.c2_slope = fit.c2_slope;
    p.kappa = kappa_quadrature(p);
    if (!(p.kappa > 0.0) || !std::isfinite(p.kappa))
        throw NumericError("profile energy constant is not a positive finite number");
    return p;
}

/// CSV: a constants header row, then the s,phi,dphi table.
inline void write_profile_csv(const BesselProfile& p, std::ostream& os) {
    os << std::setprecision(17);
    os << "sigma,kappa,c1,c2,d_sigma\n";
    os << p.sigma << ',' << p.kappa << ',' << p.c1 << ',' << p.c2 << ',' << p.d_sigma << '\n';
    os << "s,phi,dphi\n";
    for (std::size_t j = 0; j < p.size(); ++j)
        os << p.nodes[j] << ',' << p.phi[j] << ',' << p.dphi[j] << '\n';
}

inline void save_profile_csv(const BesselProfile& p, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write profile file: " + path);
    write_profile_csv(p, os);
}

inline BesselProfile read_profile_csv(std::istream& is) {
    auto split = [](const std::string& line) {
        std::vector<std::string> out;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) out.push_back(cell);
        return out;
    };
    auto to_double = [](const std::string& s, int line) {
        try {
            std::size_t used = 0;
            const double v = std::stod(s, &used);
            if (used != s.size() && s.find_first_not_of(" \r", used) != std::string::npos)
                throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw IoError("profile CSV: bad number '" + s + "' on line " + std::to_string(line));
        }
    };
    std::string line;
    int lineno = 0;
    auto next = [&]() -> bool {
        if (!std::getline(is, line)) return false;
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
    };
    if (!next() || line != "sigma,kappa,c1,c2,d_sigma")
        throw IoError("profile CSV: missing constants header");
    if (!next()) throw IoError("profile CSV: missing constants row");
    const auto consts = split(line);
    if (consts.size() != 5) throw IoError("profile CSV: constants row needs 5 values");
    BesselProfile p;
    p.sigma = to_double(consts[0], lineno);
    p.kappa = to_double(consts[1], lineno);
    p.d_sigma = to_double(consts[4], lineno);
    detail::check_sigma(p.sigma);
    if (!next() || line != "s,phi,dphi") throw IoError("profile CSV: missing table header");
    while (next()) {
        if (line.empty()) continue;
        const auto cells = split(line);
        if (cells.size() != 3) throw IoError("profile CSV: expected 3 columns on line " +
                                             std::to_string(lineno));
        p.nodes.push_back(to_double(cells[0], lineno));
        p.phi.push_back(to_double(cells[1], lineno));
        p.dphi.push_back(to_double(cells[2], lineno));
    }
    if (p.nodes.size() < 16) throw IoError("profile CSV: table too short");
    for (std::size_t j = 0; j < p.nodes.size(); ++j)
        p.flux.push_back(std::pow(p.nodes[j], 1.0 - 2.0 * p.sigma) * p.dphi[j]);
    const AsymptoticFit fit = fit_asymptotics(p);
    p.c1 = fit.c1;
    p.c2 = fit.c2;
    p.c2_slope = fit.c2_slope;
    return p;
}

inline BesselProfile load_profile_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read profile file: " + path);
    return read_profile_csv(is);
}

}  // namespace hartree

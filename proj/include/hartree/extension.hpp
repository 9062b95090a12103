#pragma once

// Canonical extension u(x, .) = F^{-1}[h^(xi) Phi(c x)], c = sqrt(m^2 + 4 pi^2 |xi|^2),
// on graded x-nodes, and the checks built on it: weighted energy identity,
// Dirichlet-to-Neumann limit, exponential decay in x and the trace inequality.

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hartree/errors.hpp"
#include "hartree/profile.hpp"
#include "hartree/spectral.hpp"

namespace hartree {

inline constexpr double kEnergyIdentityTolerance = 0.01;
inline constexpr double kDtnTolerance = 0.02;
inline constexpr double kDecayFitResidual = 0.05;
inline constexpr double kDecayRateFraction = 0.95;
inline constexpr double kDecayPowerTolerance = 0.2;

struct ExtensionField {
    Grid grid;
    double sigma = 0.5;
    double m = 1.0;
    std::vector<double> x_nodes;  ///< x_0 = 0 < x_1 < ... < x_K
    std::vector<std::vector<double>> values;  ///< values[j] = u(x_j, .)
    double weight_exponent = 0.0;             ///< 1 - 2 sigma

    std::size_t size() const noexcept { return x_nodes.size(); }
    TraceField slice(std::size_t j) const { return TraceField(grid, values[j]); }
};

/// x_j = x_max (j / K)^3, j = 0..K.
inline std::vector<double> graded_nodes(double x_max, int K) {
    std::vector<double> x(K + 1);
    for (int j = 0; j <= K; ++j) x[j] = x_max * std::pow(static_cast<double>(j) / K, 3);
    return x;
}

inline ExtensionField lift(const TraceField& h, const BesselProfile& profile, double m, double x_max, int K_x = 400) {
    if (!(m > 0.0)) throw DomainError("mass m must be positive");
    if (!(x_max >= 10.0 / m * (1.0 - 1e-12))) throw DomainError("lift needs x_max >= 10/m");
    if (K_x < 3) throw DomainError("lift needs at least 3 x-nodes");
    ExtensionField ext{h.grid, profile.sigma, m, graded_nodes(x_max, K_x), {}, 1.0 - 2.0 * profile.sigma};
    const SpectralField hh = forward(h);
    std::vector<double> c(hh.coeffs.size());
    for (std::size_t k = 0; k < c.size(); ++k)
        c[k] = std::sqrt(m * m + 4.0 * std::numbers::pi * std::numbers::pi * h.grid.xi_squared(k));
    ext.values.reserve(ext.x_nodes.size());
    for (double x : ext.x_nodes) {
        if (x == 0.0) {
            ext.values.push_back(h.values);
            continue;
        }
        SpectralField s = hh;
        for (std::size_t k = 0; k < c.size(); ++k) s.coeffs[k] *= eval_profile(profile, c[k] * x).phi;
        // the multiplier is real and even, so the field is real; far out the
        // round-off of h^ dominates and need not be Hermitian
        const auto z = inverse_complex(s);
        std::vector<double> row(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) row[i] = z[i].real();
        ext.values.push_back(std::move(row));
    }
    return ext;
}

namespace detail {

// \int_a^b x^{1 - 2 sigma} dx
inline double weight_integral(double a, double b, double sigma) {
    const double e = 2.0 - 2.0 * sigma;
    return (std::pow(b, e) - std::pow(a, e)) / e;
}

}  // namespace detail

/// Relative gap between \iint (|grad u|^2 + m^2 u^2) x^{1-2 sigma} on the
/// x-nodes (finite differences in x, spectral in y) and K \int c^{2 sigma}|h^|^2.
inline double energy_identity_check(const TraceField& h, const ExtensionField& ext, const BesselProfile& profile,
                                    double m) {
    require_same_grid(h.grid, ext.grid);
    const Grid& g = ext.grid;
    const double sig = ext.sigma;
    const double dv = g.cell_volume();
    // per node: \int |grad_y u|^2 + m^2 u^2 dy
    std::vector<double> layer(ext.size(), 0.0);
    for (std::size_t j = 0; j < ext.size(); ++j) {
        const TraceField u = ext.slice(j);
        double acc = m * m * inner(u, u);
        for (int a = 0; a < g.dim(); ++a) {
            const TraceField d = derivative(u, a);
            acc += inner(d, d);
        }
        layer[j] = acc;
    }
    double total = 0.0;
    for (std::size_t j = 0; j + 1 < ext.size(); ++j) {
        const double x0 = ext.x_nodes[j], x1 = ext.x_nodes[j + 1];
        const double w = detail::weight_integral(x0, x1, sig);
        double dx2 = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double s = (ext.values[j + 1][i] - ext.values[j][i]) / (x1 - x0);
            dx2 += s * s;
        }
        total += w * (dx2 * dv + 0.5 * (layer[j] + layer[j + 1]));
    }
    const double ref = sobolev_form(h, sig, m, profile.energy_constant());
    if (!std::isfinite(total) || !std::isfinite(ref)) throw NumericError("energy identity quadrature is not finite");
    if (ref == 0.0) return total == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::abs(total - ref) / ref;
}

struct DtnRow {
    std::array<int, 3> k{0, 0, 0};
    double xi = 0.0;         ///< |xi|
    double mass_fraction = 0.0;
    complex estimate;        ///< lim -x^{1-2 sigma} d_x u^
    complex reference;       ///< d_sigma c^{2 sigma} h^
    double rel_error = 0.0;
};

struct DtnReport {
    double max_rel_error = 0.0;
    std::vector<DtnRow> rows;
};

/// Per frequency carrying at least 1e-6 of the spectral mass, extrapolates
/// (h^ - u^(x))/x^{2 sigma} = g0 + g1 x^{2 - 2 sigma} + g2 x^2 through the three
/// smallest positive nodes; the DtN limit is 2 sigma g0.
inline DtnReport dtn_check(const TraceField& h, const ExtensionField& ext, const BesselProfile& profile, double m,
                           double sigma) {
    require_same_grid(h.grid, ext.grid);
    if (std::abs(sigma - profile.sigma) > 1e-12 || std::abs(sigma - ext.sigma) > 1e-12)
        throw DomainError("dtn_check: sigma does not match the profile");
    if (ext.size() < 4) throw DomainError("dtn_check needs three positive x-nodes");
    const Grid& g = h.grid;
    const SpectralField hh = forward(h);
    const SpectralField u1 = forward(ext.slice(1)), u2 = forward(ext.slice(2)), u3 = forward(ext.slice(3));
    const double x[3] = {ext.x_nodes[1], ext.x_nodes[2], ext.x_nodes[3]};
    Eigen::Matrix3d A;
    for (int r = 0; r < 3; ++r) A.row(r) << 1.0, std::pow(x[r], 2.0 - 2.0 * sigma), x[r] * x[r];
    const auto lu = A.fullPivLu();
    const double mass = spectral_mass(hh) * g.box_volume();
    DtnReport rep;
    if (mass == 0.0) return rep;
    for (std::size_t k = 0; k < hh.coeffs.size(); ++k) {
        const double frac = std::norm(hh.coeffs[k]) / mass;
        if (frac < 1e-6) continue;
        const complex hk = hh.coeffs[k];
        const complex uk[3] = {u1.coeffs[k], u2.coeffs[k], u3.coeffs[k]};
        Eigen::Vector3cd rhs;
        for (int r = 0; r < 3; ++r) rhs(r) = (hk - uk[r]) / std::pow(x[r], 2.0 * sigma);
        const Eigen::Vector3cd coef = lu.solve(rhs);
        // corrections g(x_r) - g0 must share a sign and grow with x
        const double noise = 1e-9 * std::abs(coef(0));
        double prev = 0.0;
        int sign = 0;
        for (int r = 0; r < 3; ++r) {
            const complex corr = rhs(r) - coef(0);
            const double proj = (corr * std::conj(coef(0))).real() / std::max(std::abs(coef(0)), 1e-300);
            if (std::abs(proj) <= noise) continue;
            const int s = proj > 0 ? 1 : -1;
            if ((sign != 0 && s != sign) || std::abs(proj) < prev)
                throw NumericError("DtN extrapolation is not monotone; use denser x-grading near 0");
            sign = s;
            prev = std::abs(proj);
        }
        DtnRow row;
        const auto idx = g.unflatten(k);
        for (int a = 0; a < g.dim(); ++a) row.k[a] = g.wavenumber(idx[a]);
        row.xi = std::sqrt(g.xi_squared(k));
        row.mass_fraction = frac;
        row.estimate = 2.0 * sigma * coef(0);
        row.reference = profile.d_sigma * frac_symbol(g.xi_squared(k), sigma, m) * hk;
        row.rel_error = std::abs(row.estimate - row.reference) / std::abs(row.reference);
        rep.max_rel_error = std::max(rep.max_rel_error, row.rel_error);
        rep.rows.push_back(row);
    }
    return rep;
}

struct DecayFitReport {
    double rate = 0.0;      ///< fitted exponential rate in x
    double poly_exp = 0.0;  ///< fitted power of x
    double residual = 0.0;  ///< max relative deviation of the fitted envelope from the data
    double x_lo = 0.0, x_hi = 0.0;
    double envelope_constant = 0.0;  ///< smallest C with sup|u| <= C |h|_2 x^{(2s-1)/2} e^{-mx} on the window
    bool window_shrunk = false;
    std::vector<double> x, sup_abs, envelope;
};

/// sup_y |u(x, y)| at each node.
inline std::vector<double> sup_profile(const ExtensionField& ext) {
    std::vector<double> s(ext.size(), 0.0);
    for (std::size_t j = 0; j < ext.size(); ++j)
        for (double v : ext.values[j]) s[j] = std::max(s[j], std::abs(v));
    return s;
}

/// Least squares of log sup_y|u| = a + p log x - r x over x in [2/m, x_max],
/// each node weighted by the length of x it represents.
inline DecayFitReport decay_fit(const ExtensionField& ext, double h_norm, double m) {
    if (!(m > 0.0)) throw DomainError("mass m must be positive");
    DecayFitReport rep;
    const auto sup = sup_profile(ext);
    rep.x_lo = 2.0 / m;
    rep.x_hi = ext.x_nodes.back();
    std::vector<std::size_t> idx;
    for (std::size_t j = 0; j < ext.size(); ++j) {
        if (ext.x_nodes[j] < rep.x_lo) continue;
        if (!(sup[j] > std::numeric_limits<double>::min())) {
            rep.window_shrunk = true;
            rep.x_hi = ext.x_nodes[j - 1];
            break;
        }
        idx.push_back(j);
    }
    if (idx.size() < 4) throw NumericError("decay fit window holds fewer than 4 usable nodes");
    Eigen::MatrixXd A(idx.size(), 3);
    Eigen::VectorXd b(idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const std::size_t j = idx[r];
        const double lo = r == 0 ? ext.x_nodes[j] : 0.5 * (ext.x_nodes[j] + ext.x_nodes[idx[r - 1]]);
        const double hi = r + 1 == idx.size() ? ext.x_nodes[j] : 0.5 * (ext.x_nodes[j] + ext.x_nodes[idx[r + 1]]);
        const double w = std::sqrt(std::max(hi - lo, 1e-300));
        const double x = ext.x_nodes[j];
        A.row(r) << w, w * std::log(x), -w * x;
        b(r) = w * std::log(sup[j]);
    }
    const Eigen::Vector3d coef = A.colPivHouseholderQr().solve(b);
    rep.poly_exp = coef(1);
    rep.rate = coef(2);
    const double p0 = (2.0 * ext.sigma - 1.0) / 2.0;
    for (std::size_t j : idx) {
        const double x = ext.x_nodes[j];
        const double fit = std::exp(coef(0) + coef(1) * std::log(x) - coef(2) * x);
        rep.residual = std::max(rep.residual, std::abs(fit / sup[j] - 1.0));
        if (h_norm > 0.0)
            rep.envelope_constant =
                std::max(rep.envelope_constant, sup[j] / (h_norm * std::pow(x, p0) * std::exp(-m * x)));
    }
    for (std::size_t j : idx) {
        const double x = ext.x_nodes[j];
        rep.x.push_back(x);
        rep.sup_abs.push_back(sup[j]);
        rep.envelope.push_back(rep.envelope_constant * h_norm * std::pow(x, p0) * std::exp(-m * x));
    }
    return rep;
}

struct TraceInequalityReport {
    double norm_sq = 0.0;  ///< ||u||_sigma^2
    double l2_sq = 0.0;    ///< |h|_2^2
    double slack = 0.0;    ///< ||u||_sigma^2 / K - |h|_2^2
};

/// |h|_2^2 <= ||u||_sigma^2 / K with ||u||_sigma^2 = K \int (1 + 4 pi^2 |xi|^2)^sigma |h^|^2
/// the extension norm at unit mass.
inline TraceInequalityReport trace_inequality_check(const TraceField& h, const BesselProfile& profile, double sigma) {
    if (std::abs(sigma - profile.sigma) > 1e-12) throw DomainError("trace check: sigma does not match the profile");
    TraceInequalityReport r;
    const SpectralField s = forward(h);
    double excess = 0.0;
    for (std::size_t k = 0; k < s.coeffs.size(); ++k)
        excess += (frac_symbol(s.grid.xi_squared(k), sigma, 1.0) - 1.0) * std::norm(s.coeffs[k]);
    excess /= s.grid.box_volume();
    r.l2_sq = spectral_mass(s);
    r.norm_sq = profile.kappa * (r.l2_sq + excess);
    r.slack = excess;  // = norm_sq / K - l2_sq without the cancellation
    return r;
}

inline void write_decay_csv(const DecayFitReport& r, std::ostream& os) {
    os << "x,sup_abs,envelope\n";
    os.precision(17);
    for (std::size_t i = 0; i < r.x.size(); ++i) os << r.x[i] << ',' << r.sup_abs[i] << ',' << r.envelope[i] << '\n';
}

inline void write_dtn_csv(const DtnReport& r, int dim, std::ostream& os) {
    for (int a = 0; a < dim; ++a) os << 'k' << a << ',';
    os << "xi,mass_fraction,estimate_re,estimate_im,reference_re,reference_im,rel_error\n";
    os.precision(17);
    for (const auto& row : r.rows) {
        for (int a = 0; a < dim; ++a) os << row.k[a] << ',';
        os << row.xi << ',' << row.mass_fraction << ',' << row.estimate.real() << ',' << row.estimate.imag() << ','
           << row.reference.real() << ',' << row.reference.imag() << ',' << row.rel_error << '\n';
    }
}

}  // namespace hartree

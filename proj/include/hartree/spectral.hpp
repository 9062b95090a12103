#pragma once

// Periodic grids on [-L, L)^N, Fourier transforms normalized to approximate
// the continuous transform  h^(xi) = \int h(y) e^{-2 pi i xi.y} dy,  and the
// Fourier multipliers built on top of them.

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <tuple>
#include <vector>

#include "hartree/errors.hpp"

namespace hartree {

using complex = std::complex<double>;

/// Uniform periodic grid: n points per axis on [-L, L)^dim.
class Grid {
public:
    Grid() = default;
    Grid(int dim, double half_length, int n) : dim_(dim), half_length_(half_length), n_(n) {
        if (dim < 1 || dim > 3) throw DomainError("grid dimension must be 1, 2 or 3");
        if (n < 8 || n % 2 != 0) throw DomainError("grid points per axis must be even and >= 8");
        if (!(half_length > 0.0) || !std::isfinite(half_length))
            throw DomainError("grid half-length must be positive");
    }

    int dim() const noexcept { return dim_; }
    int n() const noexcept { return n_; }
    double half_length() const noexcept { return half_length_; }
    double spacing() const noexcept { return 2.0 * half_length_ / n_; }
    double cell_volume() const noexcept { return std::pow(spacing(), dim_); }
    double box_volume() const noexcept { return std::pow(2.0 * half_length_, dim_); }

    std::size_t size() const noexcept {
        std::size_t s = 1;
        for (int a = 0; a < dim_; ++a) s *= static_cast<std::size_t>(n_);
        return s;
    }

    /// Row-major multi-index of a flat index (unused axes are 0).
    std::array<int, 3> unflatten(std::size_t flat) const noexcept {
        std::array<int, 3> idx{0, 0, 0};
        for (int a = dim_ - 1; a >= 0; --a) {
            idx[a] = static_cast<int>(flat % static_cast<std::size_t>(n_));
            flat /= static_cast<std::size_t>(n_);
        }
        return idx;
    }

    std::size_t flatten(const std::array<int, 3>& idx) const noexcept {
        std::size_t flat = 0;
        for (int a = 0; a < dim_; ++a) {
            const int i = ((idx[a] % n_) + n_) % n_;
            flat = flat * static_cast<std::size_t>(n_) + static_cast<std::size_t>(i);
        }
        return flat;
    }

    double coordinate(int i) const noexcept { return -half_length_ + i * spacing(); }

    /// Signed wavenumber stored at transform index i: 0..n/2-1, then -n/2..-1.
    int wavenumber(int i) const noexcept { return i < n_ / 2 ? i : i - n_; }

    double frequency(int i) const noexcept { return wavenumber(i) / (2.0 * half_length_); }

    /// |xi|^2 at a flat transform index.
    double xi_squared(std::size_t flat) const noexcept {
        const auto idx = unflatten(flat);
        double s = 0.0;
        for (int a = 0; a < dim_; ++a) s += frequency(idx[a]) * frequency(idx[a]);
        return s;
    }

    /// |y|^2 at a flat physical index.
    double radius_squared(std::size_t flat) const noexcept {
        const auto idx = unflatten(flat);
        double s = 0.0;
        for (int a = 0; a < dim_; ++a) s += coordinate(idx[a]) * coordinate(idx[a]);
        return s;
    }

    /// True when some axis sits on the Nyquist wavenumber -n/2.
    bool is_nyquist(std::size_t flat) const noexcept {
        const auto idx = unflatten(flat);
        for (int a = 0; a < dim_; ++a)
            if (idx[a] == n_ / 2) return true;
        return false;
    }

    friend bool operator==(const Grid& a, const Grid& b) noexcept {
        return a.dim_ == b.dim_ && a.n_ == b.n_ && a.half_length_ == b.half_length_;
    }

private:
    int dim_ = 1;
    double half_length_ = 1.0;
    int n_ = 8;
};

/// Real grid function (a boundary trace u(0, .)).
struct TraceField {
    Grid grid;
    std::vector<double> values;

    TraceField() = default;
    explicit TraceField(const Grid& g, double fill = 0.0) : grid(g), values(g.size(), fill) {}
    TraceField(const Grid& g, std::vector<double> v) : grid(g), values(std::move(v)) {
        if (values.size() != grid.size()) throw DomainError("field size does not match grid");
    }

    std::size_t size() const noexcept { return values.size(); }
    double& operator[](std::size_t i) { return values[i]; }
    double operator[](std::size_t i) const { return values[i]; }
};

/// Fourier coefficients on the frequency lattice, stored in transform order.
struct SpectralField {
    Grid grid;
    std::vector<complex> coeffs;
};

inline void require_same_grid(const Grid& a, const Grid& b) {
    if (!(a == b)) throw DomainError("grid mismatch");
}

namespace detail {

// FFTW plans are created under a lock; execution through the new-array
// interface is thread-safe.
class PlanCache {
public:
    static PlanCache& instance() {
        static PlanCache cache;
        return cache;
    }

    fftw_plan get(int dim, int n, int sign) {
        std::lock_guard lock(mutex_);
        const auto key = std::make_tuple(dim, n, sign);
        if (auto it = plans_.find(key); it != plans_.end()) return it->second;
        std::array<int, 3> dims{n, n, n};
        std::size_t total = 1;
        for (int a = 0; a < dim; ++a) total *= static_cast<std::size_t>(n);
        std::vector<complex> a(total), b(total);
        fftw_plan p = fftw_plan_dft(dim, dims.data(), reinterpret_cast<fftw_complex*>(a.data()),
                                    reinterpret_cast<fftw_complex*>(b.data()), sign,
                                    FFTW_ESTIMATE | FFTW_UNALIGNED);
        if (p == nullptr) throw NumericError("FFTW planning failed");
        plans_.emplace(key, p);
        return p;
    }

    PlanCache(const PlanCache&) = delete;
    PlanCache& operator=(const PlanCache&) = delete;

private:
    PlanCache() = default;
    ~PlanCache() {
        for (auto& [key, p] : plans_) fftw_destroy_plan(p);
    }

    std::mutex mutex_;
    std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

inline void execute(const Grid& g, std::vector<complex>& in, std::vector<complex>& out, int sign) {
    fftw_plan p = PlanCache::instance().get(g.dim(), g.n(), sign);
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(in.data()),
                     reinterpret_cast<fftw_complex*>(out.data()));
}

// (-1)^(k_1 + ... + k_N): phase of the grid origin sitting at y = -L.
inline double origin_phase(const Grid& g, std::size_t flat) {
    const auto idx = g.unflatten(flat);
    int s = 0;
    for (int a = 0; a < g.dim(); ++a) s += g.wavenumber(idx[a]);
    return (s % 2 == 0) ? 1.0 : -1.0;
}

}  // namespace detail

inline SpectralField forward(const TraceField& h) {
    const Grid& g = h.grid;
    std::vector<complex> in(h.values.begin(), h.values.end());
    std::vector<complex> out(g.size());
    detail::execute(g, in, out, FFTW_FORWARD);
    const double dv = g.cell_volume();
    for (std::size_t k = 0; k < out.size(); ++k) out[k] *= dv * detail::origin_phase(g, k);
    return SpectralField{g, std::move(out)};
}

/// Inverse transform without discarding the imaginary part.
inline std::vector<complex> inverse_complex(const SpectralField& s) {
    const Grid& g = s.grid;
    std::vector<complex> in(s.coeffs.size());
    const double inv_vol = 1.0 / g.box_volume();
    for (std::size_t k = 0; k < in.size(); ++k)
        in[k] = s.coeffs[k] * (inv_vol * detail::origin_phase(g, k));
    std::vector<complex> out(g.size());
    detail::execute(g, in, out, FFTW_BACKWARD);
    return out;
}

/// Inverse transform of a coefficient set representing a real field. Throws
/// NumericError when the largest imaginary residue exceeds 1e-10 of the largest
/// real value (max norms, so deeply underflowed fields are judged correctly).
inline TraceField inverse(const SpectralField& s) {
    const auto z = inverse_complex(s);
    TraceField out(s.grid);
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        out.values[i] = z[i].real();
        re = std::max(re, std::abs(z[i].real()));
        im = std::max(im, std::abs(z[i].imag()));
    }
    if (im > 1e-10 * re && im > std::numeric_limits<double>::denorm_min() * 1e3)
        throw NumericError("inverse transform left an imaginary residue above 1e-10 of the norm");
    return out;
}

/// Max deviation from coeffs(-xi) == conj(coeffs(xi)), relative to the largest coefficient.
inline double hermitian_defect(const SpectralField& s) {
    const Grid& g = s.grid;
    double worst = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < s.coeffs.size(); ++k) {
        auto idx = g.unflatten(k);
        for (int a = 0; a < g.dim(); ++a) idx[a] = -idx[a];
        const std::size_t mk = g.flatten(idx);
        worst = std::max(worst, std::abs(s.coeffs[mk] - std::conj(s.coeffs[k])));
        scale = std::max(scale, std::abs(s.coeffs[k]));
    }
    return scale > 0.0 ? worst / scale : 0.0;
}

/// Multiply coefficients by a real symbol of |xi|^2 and transform back.
template <class Symbol>
TraceField apply_multiplier(const TraceField& h, Symbol&& symbol) {
    SpectralField s = forward(h);
    for (std::size_t k = 0; k < s.coeffs.size(); ++k) s.coeffs[k] *= symbol(s.grid.xi_squared(k));
    return inverse(s);
}

/// Symbol (m^2 + 4 pi^2 |xi|^2)^sigma.
inline double frac_symbol(double xi2, double sigma, double m) {
    return std::pow(m * m + 4.0 * std::numbers::pi * std::numbers::pi * xi2, sigma);
}

inline void check_frac_params(double sigma, double m) {
    if (!(sigma > 0.0 && sigma <= 1.0)) throw DomainError("sigma out of (0,1]");
    if (!(m > 0.0)) throw DomainError("mass m must be positive");
}

/// (-Delta + m^2)^sigma h.
inline TraceField frac_apply(const TraceField& h, double sigma, double m) {
    check_frac_params(sigma, m);
    return apply_multiplier(h, [=](double xi2) { return frac_symbol(xi2, sigma, m); });
}

/// The profile energy constant K together with the sigma it was computed for.
struct EnergyConstant {
    double sigma = 0.5;
    double kappa = 1.0;
};

/// K * \int (m^2 + 4 pi^2 |xi|^2)^sigma |h^(xi)|^2 dxi, the weighted Dirichlet
/// energy of the canonical extension of h.
inline double sobolev_form(const TraceField& h, double sigma, double m, EnergyConstant k) {
    check_frac_params(sigma, m);
    if (std::abs(k.sigma - sigma) > 1e-12)
        throw DomainError("energy constant was computed for a different sigma");
    const SpectralField s = forward(h);
    double acc = 0.0;
    for (std::size_t i = 0; i < s.coeffs.size(); ++i)
        acc += frac_symbol(s.grid.xi_squared(i), sigma, m) * std::norm(s.coeffs[i]);
    return k.kappa * acc / s.grid.box_volume();
}

/// Periodic convolution approximating \int k(y - w) g(w) dw. The kernel is
/// sampled on the same grid as g (origin at the centre index n/2).
inline TraceField convolve(const TraceField& kernel, const TraceField& g) {
    require_same_grid(kernel.grid, g.grid);
    const SpectralField kh = forward(kernel);
    SpectralField gh = forward(g);
    for (std::size_t i = 0; i < gh.coeffs.size(); ++i) gh.coeffs[i] *= kh.coeffs[i];
    return inverse(gh);
}

/// Convolution with a kernel whose transform is already known.
inline TraceField convolve_hat(const SpectralField& kernel_hat, const TraceField& g) {
    require_same_grid(kernel_hat.grid, g.grid);
    SpectralField gh = forward(g);
    for (std::size_t i = 0; i < gh.coeffs.size(); ++i) gh.coeffs[i] *= kernel_hat.coeffs[i];
    return inverse(gh);
}

/// Spectral partial derivative along an axis (Nyquist mode zeroed).
inline TraceField derivative(const TraceField& h, int axis) {
    if (axis < 0 || axis >= h.grid.dim()) throw DomainError("derivative axis out of range");
    SpectralField s = forward(h);
    for (std::size_t k = 0; k < s.coeffs.size(); ++k) {
        const auto idx = s.grid.unflatten(k);
        if (idx[axis] == s.grid.n() / 2) {
            s.coeffs[k] = 0.0;
            continue;
        }
        s.coeffs[k] *= complex(0.0, 2.0 * std::numbers::pi * s.grid.frequency(idx[axis]));
    }
    return inverse(s);
}

/// 2/3-rule filter: zeroes every mode with some |k| > n/3.
inline TraceField dealias(const TraceField& h) {
    SpectralField s = forward(h);
    const int cut = s.grid.n() / 3;
    for (std::size_t k = 0; k < s.coeffs.size(); ++k) {
        const auto idx = s.grid.unflatten(k);
        for (int a = 0; a < s.grid.dim(); ++a)
            if (std::abs(s.grid.wavenumber(idx[a])) > cut) s.coeffs[k] = 0.0;
    }
    return inverse(s);
}

/// Cyclic shift by whole cells along each axis.
inline TraceField roll(const TraceField& h, std::array<int, 3> cells) {
    TraceField out(h.grid);
    for (std::size_t i = 0; i < h.size(); ++i) {
        auto idx = h.grid.unflatten(i);
        for (int a = 0; a < h.grid.dim(); ++a) idx[a] += cells[a];
        out.values[h.grid.flatten(idx)] = h.values[i];
    }
    return out;
}

inline double inner(const TraceField& a, const TraceField& b) {
    require_same_grid(a.grid, b.grid);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a.values[i] * b.values[i];
    return acc * a.grid.cell_volume();
}

/// |h|_q with cell-volume weight; q = infinity gives the max norm.
inline double lq_norm(const TraceField& h, double q) {
    if (std::isinf(q)) {
        double m = 0.0;
        for (double v : h.values) m = std::max(m, std::abs(v));
        return m;
    }
    if (!(q >= 1.0)) throw DomainError("norm exponent must be >= 1");
    double acc = 0.0;
    for (double v : h.values) acc += std::pow(std::abs(v), q);
    return std::pow(acc * h.grid.cell_volume(), 1.0 / q);
}

/// \int |h^|^2 dxi over the lattice (equals |h|_2^2 by Parseval).
inline double spectral_mass(const SpectralField& s) {
    double acc = 0.0;
    for (const auto& c : s.coeffs) acc += std::norm(c);
    return acc / s.grid.box_volume();
}

/// Samples a function of y (given as a coordinate array) on the grid.
template <class Fn>
TraceField sample(const Grid& g, Fn&& fn) {
    TraceField out(g);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto idx = g.unflatten(i);
        std::array<double, 3> y{0.0, 0.0, 0.0};
        for (int a = 0; a < g.dim(); ++a) y[a] = g.coordinate(idx[a]);
        out.values[i] = fn(y);
    }
    return out;
}

}  // namespace hartree

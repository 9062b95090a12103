#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>

#include "hartree/errors.hpp"

namespace hartree::ode {

/// Adaptive Dormand-Prince 5(4) stepper for small fixed-size systems.
/// Integrates in either direction; the step size survives between calls so
/// consecutive node-to-node legs do not restart from scratch.
template <std::size_t Dim>
class DormandPrince {
public:
    using State = std::array<double, Dim>;

    DormandPrince(double rtol, double atol, std::size_t max_steps = 2'000'000)
        : rtol_(rtol), atol_(atol), max_steps_(max_steps) {}

    /// Advances y from s to s_end. Throws NumericError if the step count budget
    /// runs out or the step size collapses.
    template <class Rhs>
    void integrate(Rhs&& rhs, double s, double s_end, State& y) {
        const double dir = s_end > s ? 1.0 : -1.0;
        if (h_ == 0.0) h_ = 1e-3 * std::abs(s_end - s);
        double h = std::min(std::abs(h_), std::abs(s_end - s)) * dir;
        while (dir * (s_end - s) > 0.0) {
            if (++steps_ > max_steps_) throw NumericError("ODE integration exceeded its step budget");
            if (dir * (s + h - s_end) > 0.0) h = s_end - s;
            State y_new, err;
            step(rhs, s, y, h, y_new, err);
            double e = 0.0;
            for (std::size_t i = 0; i < Dim; ++i) {
                const double sc = atol_ + rtol_ * std::max(std::abs(y[i]), std::abs(y_new[i]));
                e = std::max(e, std::abs(err[i]) / sc);
            }
            if (!std::isfinite(e)) throw NumericError("ODE integration produced a non-finite state");
            const double factor = e == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(e, -0.2), 0.2, 5.0);
            if (e <= 1.0) {
                s += h;
                y = y_new;
                h_ = h * factor;
                h = h_;
            } else {
                h *= factor;
            }
            if (std::abs(h) < 1e-15 * std::max(std::abs(s), 1e-300))
                throw NumericError("ODE step size collapsed");
        }
    }

    std::size_t steps() const noexcept { return steps_; }

private:
    template <class Rhs>
    static void step(Rhs& rhs, double s, const State& y, double h, State& y_new, State& err) {
        State k1, k2, k3, k4, k5, k6, k7, t;
        auto axpy = [&](std::initializer_list<std::pair<double, const State*>> terms) {
            for (std::size_t i = 0; i < Dim; ++i) {
                double acc = y[i];
                for (const auto& [c, k] : terms) acc += h * c * (*k)[i];
                t[i] = acc;
            }
            return t;
        };
        rhs(s, y, k1);
        rhs(s + h / 5.0, axpy({{1.0 / 5.0, &k1}}), k2);
        rhs(s + 3.0 * h / 10.0, axpy({{3.0 / 40.0, &k1}, {9.0 / 40.0, &k2}}), k3);
        rhs(s + 4.0 * h / 5.0, axpy({{44.0 / 45.0, &k1}, {-56.0 / 15.0, &k2}, {32.0 / 9.0, &k3}}),
            k4);
        rhs(s + 8.0 * h / 9.0,
            axpy({{19372.0 / 6561.0, &k1},
                  {-25360.0 / 2187.0, &k2},
                  {64448.0 / 6561.0, &k3},
                  {-212.0 / 729.0, &k4}}),
            k5);
        rhs(s + h,
            axpy({{9017.0 / 3168.0, &k1},
                  {-355.0 / 33.0, &k2},
                  {46732.0 / 5247.0, &k3},
                  {49.0 / 176.0, &k4},
                  {-5103.0 / 18656.0, &k5}}),
            k6);
        y_new = axpy({{35.0 / 384.0, &k1},
                      {500.0 / 1113.0, &k3},
                      {125.0 / 192.0, &k4},
                      {-2187.0 / 6784.0, &k5},
                      {11.0 / 84.0, &k6}});
        rhs(s + h, y_new, k7);
        for (std::size_t i = 0; i < Dim; ++i) {
            const double y4 = y[i] + h * (5179.0 / 57600.0 * k1[i] + 7571.0 / 16695.0 * k3[i] +
                                          393.0 / 640.0 * k4[i] - 92097.0 / 339200.0 * k5[i] +
                                          187.0 / 2100.0 * k6[i] + 1.0 / 40.0 * k7[i]);
            err[i] = y_new[i] - y4;
        }
    }

    double rtol_;
    double atol_;
    std::size_t max_steps_;
    std::size_t steps_ = 0;
    double h_ = 0.0;
};

}  // namespace hartree::ode

// Randomized property sweeps. Each property draws its inputs from a fixed
// mt19937_64 stream so failures reproduce; the failing draw is reported via INFO.

#include <catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "hartree/config.hpp"
#include "hartree/extension.hpp"
#include "hartree/field_io.hpp"
#include "hartree/model.hpp"
#include "support/bessel_k_oracle.hpp"
#include "support/random_fields.hpp"

using namespace hartree;
using Catch::Approx;

namespace {

struct Gen {
    std::mt19937_64 rng;
    explicit Gen(std::uint64_t seed) : rng(seed) {}
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
    template <class T>
    const T& pick(const std::vector<T>& v) {
        return v[static_cast<std::size_t>(integer(0, static_cast<int>(v.size()) - 1))];
    }
    Grid grid(int max_dim = 3) {
        const int N = integer(1, max_dim);
        const int n = pick(std::vector<int>{8, 16, N == 1 ? 64 : 8});
        return Grid(N, uniform(1.0, 12.0), n);
    }
    TraceField field(const Grid& g) {
        return integer(0, 1) ? testutil::white_random(g, rng) : testutil::smooth_random(g, rng, 3);
    }
};

double max_abs_diff(const TraceField& a, const TraceField& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

ModelParams random_model(Gen& gen) {
    ModelParams p;
    p.sigma = gen.pick(std::vector<double>{0.3, 0.5, 0.7});
    p.m = gen.uniform(0.5, 1.5);
    p.N = 1;
    p.L = gen.uniform(6.0, 12.0);
    p.n = 64;
    const auto [lo, hi] = theta_window(1, p.sigma);
    p.theta = gen.uniform(std::max(lo, 2.1), std::min(hi, 6.0) - 0.05);
    p.nonlinearity = gen.integer(0, 1) ? NonlinearitySpec::log_linear(p.theta) : NonlinearitySpec::pure_power(p.theta);
    p.potential = {gen.uniform(0.5, 2.0), gen.uniform(0.0, 0.4), gen.uniform(1.0, 3.0)};
    p.kernel = {gen.uniform(0.0, 0.5), 0.5 * kernel_mu_bound(1, p.sigma, p.theta), 1.0, gen.uniform(0.5, 1.5), gen.uniform(1.0, 3.0)};
    return p;
}

const BesselProfile& profile_for(double sigma) {
    static const BesselProfile p3 = build_profile(0.3), p5 = build_profile(0.5), p7 = build_profile(0.7);
    return sigma == 0.3 ? p3 : sigma == 0.5 ? p5 : p7;
}

}  // namespace

TEST_CASE("Parseval holds on random grids", "[properties]") {
    Gen gen(101);
    for (int trial = 0; trial < 60; ++trial) {
        const Grid g = gen.grid();
        const TraceField h = gen.field(g);
        INFO("trial " << trial << " N=" << g.dim() << " n=" << g.n());
        const double direct = inner(h, h);
        CHECK(spectral_mass(forward(h)) == Approx(direct).epsilon(1e-10));
        CHECK(max_abs_diff(inverse(forward(h)), h) < 1e-12 * lq_norm(h, INFINITY));
    }
}

TEST_CASE("frac_apply is linear and commutes with translations", "[properties]") {
    Gen gen(102);
    for (int trial = 0; trial < 40; ++trial) {
        const Grid g = gen.grid();
        const double sigma = gen.uniform(0.05, 1.0), m = gen.uniform(0.2, 2.0);
        const TraceField a = gen.field(g), b = gen.field(g);
        const double alpha = gen.uniform(-2.0, 2.0);
        INFO("trial " << trial << " sigma=" << sigma << " m=" << m);
        TraceField comb(g);
        for (std::size_t i = 0; i < g.size(); ++i) comb[i] = a[i] + alpha * b[i];
        const TraceField lhs = frac_apply(comb, sigma, m);
        const TraceField fa = frac_apply(a, sigma, m), fb = frac_apply(b, sigma, m);
        TraceField rhs(g);
        for (std::size_t i = 0; i < g.size(); ++i) rhs[i] = fa[i] + alpha * fb[i];
        const double scale = lq_norm(fa, INFINITY) + std::abs(alpha) * lq_norm(fb, INFINITY);
        CHECK(max_abs_diff(lhs, rhs) < 1e-11 * scale);

        const std::array<int, 3> shift{gen.integer(-g.n(), g.n()), gen.integer(-g.n(), g.n()), gen.integer(-g.n(), g.n())};
        CHECK(max_abs_diff(frac_apply(roll(a, shift), sigma, m), roll(fa, shift)) < 1e-11 * lq_norm(fa, INFINITY));
    }
}

TEST_CASE("sobolev form is nonnegative and two-homogeneous", "[properties]") {
    Gen gen(103);
    for (int trial = 0; trial < 40; ++trial) {
        const Grid g = gen.grid();
        const double sigma = gen.uniform(0.05, 0.95), m = gen.uniform(0.2, 2.0), c = gen.uniform(-3.0, 3.0);
        const EnergyConstant k{sigma, gen.uniform(0.5, 2.0)};
        const TraceField h = gen.field(g);
        TraceField ch(h);
        for (auto& v : ch.values) v *= c;
        const double q = sobolev_form(h, sigma, m, k);
        CHECK(q >= 0.0);
        CHECK(sobolev_form(ch, sigma, m, k) == Approx(c * c * q).epsilon(1e-12));
        // the multiplier is at least m^(2 sigma)
        CHECK(q >= k.kappa * std::pow(m, 2.0 * sigma) * inner(h, h) * (1.0 - 1e-12));
    }
}

TEST_CASE("nonlinearity hypotheses over random exponents", "[properties]") {
    Gen gen(104);
    for (int trial = 0; trial < 40; ++trial) {
        const double theta = gen.uniform(2.05, 6.0);
        const auto nl = gen.integer(0, 1) ? NonlinearitySpec::log_linear(theta) : NonlinearitySpec::pure_power(theta);
        INFO("trial " << trial << " theta=" << theta);
        const auto checks = check_nonlinearity(nl, 200);
        CHECK(checks.ambrosetti_rabinowitz);
        CHECK(checks.f3_monotone);
        CHECK(checks.negative_zero);
        for (int s = 0; s < 20; ++s) {
            const double t = std::exp(gen.uniform(std::log(1e-6), std::log(1e3)));
            CHECK(2.0 * F_eval(nl, t) <= t * f_eval(nl, t) * (1.0 + 1e-12));
            CHECK(f_eval(nl, -t) == 0.0);
        }
        const double C = growth_constant(nl, 0.1, theta);
        CHECK(std::isfinite(C));
        for (double t : log_samples(1e-6, 1e3, 400)) CHECK(std::abs(f_eval(nl, t)) <= 0.1 * t + C * std::pow(t, theta - 1.0) * (1 + 1e-12));
    }
}

TEST_CASE("interaction, gradient and Nehari projection on random models", "[properties]") {
    Gen gen(105);
    for (int trial = 0; trial < 12; ++trial) {
        const ModelParams p = random_model(gen);
        INFO("trial " << trial << " sigma=" << p.sigma << " theta=" << p.theta << " A=" << p.potential.A);
        validate_params(p);
        const Model model(p, profile_for(p.sigma));
        auto u = testutil::random_bump(model.grid(), gen.rng);
        const auto v = testutil::smooth_random(model.grid(), gen.rng, 2);
        for (std::size_t i = 0; i < u.size(); ++i) u[i] += 0.1 * v[i];
        auto scaled = [&](const TraceField& w, double t) {
            TraceField out(w);
            for (auto& x : out.values) x *= t;
            return out;
        };
        // t^4 growth of the interaction
        const double t1 = gen.uniform(1.0, 3.0), t2 = t1 * gen.uniform(1.01, 5.0);
        CHECK(model.interaction(scaled(u, t2)) / model.interaction(scaled(u, t1)) >= std::pow(t2 / t1, 4.0) * (1 - 1e-12));

        // directional derivative
        const auto dir = testutil::smooth_random(model.grid(), gen.rng, 3);
        const double eps = 1e-5;
        TraceField up(u), um(u);
        for (std::size_t i = 0; i < u.size(); ++i) {
            up[i] += eps * dir[i];
            um[i] -= eps * dir[i];
        }
        const double central = (model.energy(up).total - model.energy(um).total) / (2.0 * eps);
        CHECK(inner(model.gradient(u), dir) == Approx(central).epsilon(1e-5).margin(1e-9));

        // projection lands on the manifold and is scale covariant
        const double t = model.nehari_scale(u);
        const TraceField tu = scaled(u, t);
        CHECK(std::abs(model.nehari_functional(tu)) < 1e-10 * model.quadratic_form(tu));
        CHECK(model.energy(tu).total > 0.0);
        const double c = gen.uniform(0.3, 3.0);
        CHECK(model.nehari_scale(scaled(u, c)) == Approx(t / c).epsilon(1e-8));
        // the projection maximizes the energy along the ray
        for (double s : {0.5, 0.9, 1.1, 2.0}) CHECK(model.energy(scaled(tu, s)).total <= model.energy(tu).total);
    }
}

TEST_CASE("profile matches the Bessel oracle for random orders", "[properties]") {
    Gen gen(106);
    for (int trial = 0; trial < 4; ++trial) {
        const double sigma = gen.uniform(0.15, 0.85);
        INFO("sigma=" << sigma);
        const auto prof = build_profile(sigma);
        CHECK(max_ode_residual(prof) < 1e-6);
        CHECK(prof.kappa == Approx(oracle::kappa_closed_form(sigma)).epsilon(1e-6));
        CHECK(std::abs(prof.d_sigma / (2.0 * sigma) - prof.c1) < 0.02 * prof.c1);
        for (int s = 0; s < 20; ++s) {
            const double x = gen.uniform(0.1, 10.0);
            CHECK(eval_profile(prof, x).phi == Approx(oracle::profile_from_bessel(sigma, x)).epsilon(1e-5));
        }
        // extension identities at this order
        const Grid g(1, gen.uniform(4.0, 10.0), 16);
        const TraceField h = testutil::smooth_random(g, gen.rng, 3);
        const auto ext = lift(h, prof, 1.0, 10.0, 400);
        CHECK(energy_identity_check(h, ext, prof, 1.0) < kEnergyIdentityTolerance);
        CHECK(dtn_check(h, ext, prof, 1.0, sigma).max_rel_error < kDtnTolerance);
        CHECK(trace_inequality_check(h, prof, sigma).slack >= 0.0);
    }
}

TEST_CASE("lift factorizes over modes", "[properties]") {
    Gen gen(107);
    for (int trial = 0; trial < 10; ++trial) {
        const double sigma = gen.pick(std::vector<double>{0.3, 0.5, 0.7});
        const Grid g(gen.integer(1, 2), gen.uniform(3.0, 8.0), 16);
        std::vector<TraceField> modes;
        TraceField sum(g);
        for (int k = 0; k < 3; ++k) {
            const int w = gen.integer(0, 6);
            const double ph = gen.uniform(0.0, 6.28);
            modes.push_back(sample(g, [&](std::array<double, 3> y) {
                return std::cos(std::numbers::pi * w * y[0] / g.half_length() + ph);
            }));
            for (std::size_t i = 0; i < g.size(); ++i) sum[i] += modes.back()[i];
        }
        const auto es = lift(sum, profile_for(sigma), 1.0, 10.0, 40);
        std::vector<ExtensionField> parts;
        for (const auto& mode : modes) parts.push_back(lift(mode, profile_for(sigma), 1.0, 10.0, 40));
        for (std::size_t j = 0; j < es.size(); ++j)
            for (std::size_t i = 0; i < g.size(); ++i) {
                double s = 0.0;
                for (const auto& p : parts) s += p.values[j][i];
                CHECK(es.values[j][i] == Approx(s).margin(1e-12));
            }
    }
}

TEST_CASE("config text round trips through the parser", "[properties]") {
    Gen gen(108);
    for (int trial = 0; trial < 50; ++trial) {
        std::ostringstream text;
        text.precision(17);
        const double sigma = gen.uniform(0.01, 0.99), m = gen.uniform(0.1, 3.0), A = gen.uniform(0.0, 1.0);
        const int n = 1 << gen.integer(2, 9);
        const int seed = gen.integer(0, 1 << 30);
        text << "sigma = " << sigma << "\n  m=" << m << "   # mass\nn = " << n << "\npotential.A = " << A
             << "\nseed = " << seed << "\n\n";
        const auto cfg = parse_config_string(text.str());
        CHECK(cfg.params.sigma == sigma);
        CHECK(cfg.params.m == m);
        CHECK(cfg.params.n == n);
        CHECK(cfg.params.potential.A == A);
        CHECK(cfg.params.solver.seed == static_cast<std::uint64_t>(seed));
    }
}

TEST_CASE("field files round trip random fields", "[properties]") {
    Gen gen(109);
    for (int trial = 0; trial < 20; ++trial) {
        const Grid g = gen.grid();
        const TraceField h = gen.field(g);
        std::stringstream csv, bin;
        write_field_csv(h, csv);
        write_field_binary(h, bin);
        const TraceField a = read_field_csv(csv), b = read_field_binary(bin);
        CHECK(a.values == h.values);
        CHECK(b.values == h.values);
        CHECK(a.grid.half_length() == g.half_length());
        CHECK(b.grid.half_length() == g.half_length());
    }
}

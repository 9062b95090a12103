#include <catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "hartree/solver.hpp"

using namespace hartree;

namespace {

ModelParams well_params(double A = 0.3) {
    ModelParams p;
    p.sigma = 0.5;
    p.m = 1.0;
    p.N = 1;
    p.L = 20.0;
    p.n = 256;
    p.theta = 2.5;
    p.nonlinearity = NonlinearitySpec::log_linear(2.5);
    p.potential = {1.0, A, 2.0};
    p.kernel = {0.0, 0.5, 1.0, 1.0, 2.0};
    return p;
}

const BesselProfile& half_profile() {
    static const BesselProfile p = build_profile(0.5);
    return p;
}

const GroundStateResult& well_ground() {
    static const GroundStateResult r = solve_ground(well_params(), half_profile());
    return r;
}

TraceField shifted_gaussian(const Grid& g, double shift) {
    return sample(g, [&](std::array<double, 3> y) { return std::exp(-(y[0] - shift) * (y[0] - shift)); });
}

}  // namespace

TEST_CASE("ground state converges to a positive Nehari point", "[solver]") {
    const auto& r = well_ground();
    CHECK(r.level > 0.0);
    CHECK(r.nehari_residual < 1e-8 * r.quad);
    CHECK(r.min_value > 0.0);
    CHECK(std::isfinite(lq_norm(r.u, INFINITY)));
    CHECK(r.beta > 0.0);
    // level equals I(u) recomputed from scratch
    CHECK(energy(r.u, well_params(), half_profile()).total == Catch::Approx(r.level).epsilon(1e-12));
}

TEST_CASE("energy does not increase along accepted steps", "[solver]") {
    const auto& log = well_ground().log;
    REQUIRE(log.size() > 2);
    for (std::size_t i = 1; i < log.size(); ++i) {
        const double allowance = 1e-12 * std::abs(log[i - 1].energy);
        CHECK(log[i].energy <= log[i - 1].energy + allowance);
    }
}

TEST_CASE("weak residual against random test fields is small", "[solver]") {
    const auto p = well_params();
    const Model model(p, half_profile());
    std::mt19937_64 rng(11);
    CHECK(weak_residual(model, well_ground().u, rng, 10) < 10.0 * p.solver.tol);
}

TEST_CASE("random seeds agree on the level", "[solver]") {
    const auto ms = solve_multistart(well_params(), half_profile(), PotentialMode::full, 3, 42, 3);
    REQUIRE(ms.levels.size() == 3);
    CHECK(ms.spread < 1e-4);
    CHECK(ms.seeds == std::vector<std::uint64_t>{42, 43, 44});
    CHECK(ms.best.level == Catch::Approx(well_ground().level).epsilon(1e-4));
    // thread count does not change the outcome
    const auto serial = solve_multistart(well_params(), half_profile(), PotentialMode::full, 3, 42, 1);
    CHECK(serial.levels == ms.levels);
}

TEST_CASE("asymptotic problem is translation invariant", "[solver]") {
    const auto p = well_params(0.0);
    const auto centred = solve_ground(p, half_profile());
    const auto moved = solve_ground(p, half_profile(), shifted_gaussian(p.grid(), 3.0));
    CHECK(moved.level == Catch::Approx(centred.level).epsilon(1e-6));
}

TEST_CASE("asymptotic ground state is symmetric and positive", "[solver]") {
    const auto r = solve_asymptotic(well_params(), half_profile());
    CHECK(r.level > 0.0);
    CHECK(r.min_value > 0.0);
    CHECK(reflection_asymmetry(r.u) < 1e-3);
    // still symmetric when the seed sits off-centre
    const auto off = solve_asymptotic(well_params(), half_profile(), shifted_gaussian(well_params().grid(), 2.5));
    CHECK(reflection_asymmetry(off.u) < 1e-3);
}

TEST_CASE("asymptotic level does not depend on the well depth", "[solver]") {
    const double c1 = solve_asymptotic(well_params(0.1), half_profile()).level;
    const double c2 = solve_asymptotic(well_params(0.4), half_profile()).level;
    CHECK(c1 == c2);
}

TEST_CASE("level ordering and margin sweep", "[solver]") {
    std::vector<double> margins;
    for (double A : {0.1, 0.2, 0.4}) {
        const auto lc = compare_levels(well_params(A), half_profile());
        CHECK(lc.c_star > 0.0);
        CHECK(lc.c_star < lc.c_inf);
        margins.push_back(lc.margin);
    }
    CHECK(margins[0] < margins[1]);
    CHECK(margins[1] < margins[2]);

    const auto flat = compare_levels(well_params(0.0), half_profile());
    CHECK(std::abs(flat.margin) < 1e-6);
}

TEST_CASE("sup norm is stable under grid refinement", "[solver]") {
    const auto rep = linf_refinement_check(well_ground(), well_params(), half_profile());
    CHECK(rep.n_fine == 512);
    CHECK(rep.passed);
    CHECK(rep.rel_change < 0.02);

    GroundStateResult zero;
    zero.u = TraceField(well_params().grid());
    const auto vac = linf_refinement_check(zero, well_params(), half_profile());
    CHECK(vac.passed);
    CHECK(vac.sup_coarse == 0.0);
}

TEST_CASE("solver errors", "[solver]") {
    auto p = well_params();
    const Grid g = p.grid();
    SECTION("seed without positive part") {
        TraceField neg(g);
        for (auto& v : neg.values) v = -1.0;
        CHECK_THROWS_AS(solve_ground(p, half_profile(), neg), DomainError);
        CHECK_THROWS_AS(solve_ground(p, half_profile(), TraceField(g)), DomainError);
    }
    SECTION("iteration budget too small") {
        p.solver.max_iter = 2;
        try {
            solve_ground(p, half_profile());
            FAIL("expected a convergence error");
        } catch (const ConvergenceError& e) {
            CHECK(e.iters() == 2);
            CHECK(e.nehari_residual() >= 0.0);
            CHECK(e.grad_residual() > 0.0);
        }
    }
    SECTION("invalid parameters are rejected before solving") {
        p.sigma = 1.5;
        CHECK_THROWS_AS(solve_ground(p, half_profile()), DomainError);
    }
}

TEST_CASE("resample round trip and iteration log format", "[solver]") {
    const auto& r = well_ground();
    auto fine = well_params();
    fine.n = 512;
    auto round_trip = [&](const TraceField& h) {
        const TraceField back = resample(resample(h, fine.grid()), h.grid);
        double err = 0.0;
        for (std::size_t i = 0; i < back.size(); ++i) err = std::max(err, std::abs(back[i] - h[i]));
        return err / lq_norm(h, INFINITY);
    };
    // band-limited input is reproduced exactly
    const TraceField band = sample(r.u.grid, [](std::array<double, 3> y) {
        return 1.0 + std::cos(std::numbers::pi * 3.0 * y[0] / 20.0) + 0.5 * std::sin(std::numbers::pi * 40.0 * y[0] / 20.0);
    });
    CHECK(round_trip(band) < 1e-13);
    // the ground state only loses its (tiny) Nyquist content
    CHECK(round_trip(r.u) < 1e-8);

    std::ostringstream os;
    write_iteration_log(r, os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "iter,energy,nehari_residual,grad_residual,step");
    std::size_t rows = 0;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == r.log.size());
}

#include <catch_amalgamated.hpp>

#include <random>

#include "hartree/spectral.hpp"
#include "support/dense_dft.hpp"
#include "support/random_fields.hpp"

using namespace hartree;
using Catch::Approx;

namespace {

double rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num = std::max(num, std::abs(a[i] - b[i]));
        den = std::max(den, std::abs(b[i]));
    }
    return num / den;
}

}  // namespace

TEST_CASE("grid validation", "[spectral]") {
    CHECK_THROWS_AS(Grid(4, 1.0, 8), DomainError);
    CHECK_THROWS_AS(Grid(1, 1.0, 7), DomainError);
    CHECK_THROWS_AS(Grid(1, 1.0, 6), DomainError);
    CHECK_THROWS_AS(Grid(1, -1.0, 8), DomainError);
    const Grid g(2, 3.0, 8);
    CHECK(g.size() == 64);
    CHECK(g.coordinate(0) == -3.0);
    CHECK(g.frequency(1) == Approx(1.0 / 6.0));
    CHECK(g.wavenumber(7) == -1);
}

TEST_CASE("frac_apply on constants and single modes", "[spectral]") {
    const Grid g(1, 5.0, 32);
    const auto one = frac_apply(TraceField(g, 1.0), 0.3, 2.0);
    for (double v : one.values) CHECK(v == Approx(std::pow(2.0, 0.6)).epsilon(1e-12));
    const int k = 3;
    const auto h = sample(g, [&](auto y) { return std::cos(2.0 * std::numbers::pi * k * y[0] / 10.0); });
    const double xi = k / 10.0;
    const double lam = std::pow(1.0 + 4.0 * std::numbers::pi * std::numbers::pi * xi * xi, 0.7);
    const auto out = frac_apply(h, 0.7, 1.0);
    for (std::size_t i = 0; i < h.size(); ++i) CHECK(out[i] == Approx(lam * h[i]).margin(1e-12));
}

TEST_CASE("frac_apply and convolve match dense oracles", "[spectral]") {
    std::mt19937_64 rng(7);
    for (int dim : {1, 2}) {
        const Grid g(dim, 2.5, 8);
        for (int rep = 0; rep < 5; ++rep) {
            const auto h = testutil::white_random(g, rng);
            CHECK(rel_diff(frac_apply(h, 0.35, 1.3).values, oracle::dense_frac_apply(h, 0.35, 1.3)) < 1e-10);
            const auto k = testutil::white_random(g, rng);
            CHECK(rel_diff(convolve(k, h).values, oracle::dense_convolve(k, h)) < 1e-10);
        }
    }
}

TEST_CASE("convolution identities", "[spectral]") {
    std::mt19937_64 rng(3);
    const Grid g(2, 4.0, 16);
    const auto h = testutil::white_random(g, rng);
    TraceField delta(g);
    delta[g.flatten({8, 8, 0})] = 1.0 / g.cell_volume();
    const auto same = convolve(delta, h);
    for (std::size_t i = 0; i < h.size(); ++i) CHECK(same[i] == Approx(h[i]).margin(1e-12));
    const auto total = convolve(TraceField(g, 1.0), h);
    double integral = 0.0;
    for (double v : h.values) integral += v * g.cell_volume();
    for (double v : total.values) CHECK(v == Approx(integral).margin(1e-10));
    CHECK_THROWS_AS(convolve(TraceField(Grid(2, 4.0, 8)), h), DomainError);
}

TEST_CASE("Parseval, linearity and translation", "[spectral]") {
    std::mt19937_64 rng(11);
    for (int dim : {1, 2, 3}) {
        const Grid g(dim, 3.0, dim == 3 ? 8 : 16);
        for (int rep = 0; rep < 10; ++rep) {
            const auto h = testutil::white_random(g, rng);
            const double l2 = lq_norm(h, 2.0);
            CHECK(spectral_mass(forward(h)) == Approx(l2 * l2).epsilon(1e-10));
            CHECK(hermitian_defect(forward(h)) < 1e-12);
            const auto v = testutil::white_random(g, rng);
            TraceField comb(g);
            for (std::size_t i = 0; i < h.size(); ++i) comb[i] = 2.0 * h[i] - 0.5 * v[i];
            const auto a = frac_apply(comb, 0.4, 1.0), b = frac_apply(h, 0.4, 1.0), c = frac_apply(v, 0.4, 1.0);
            for (std::size_t i = 0; i < h.size(); ++i) CHECK(a[i] == Approx(2.0 * b[i] - 0.5 * c[i]).margin(1e-10));
            const std::array<int, 3> shift{3, 1, 2};
            const auto s1 = frac_apply(roll(h, shift), 0.4, 1.0), s2 = roll(b, shift);
            for (std::size_t i = 0; i < h.size(); ++i) CHECK(s1[i] == Approx(s2[i]).margin(1e-10));
        }
    }
}

TEST_CASE("sigma = 1 is the shifted Laplacian", "[spectral]") {
    const Grid g(1, 10.0, 128);
    const auto h = sample(g, [](auto y) { return std::exp(-y[0] * y[0]); });
    const auto out = frac_apply(h, 1.0, 1.5);
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double y = g.coordinate(static_cast<int>(i));
        const double lap = (4.0 * y * y - 2.0) * std::exp(-y * y);
        CHECK(out[i] == Approx(-lap + 2.25 * h[i]).margin(1e-10));
    }
}

TEST_CASE("sobolev_form values", "[spectral]") {
    const Grid g(1, 4.0, 16);
    CHECK(sobolev_form(TraceField(g), 0.5, 1.0, {0.5, 1.0}) == 0.0);
    const double a = 0.7;
    CHECK(sobolev_form(TraceField(g, a), 0.5, 1.0, {0.5, 1.0}) == Approx(a * a * g.box_volume()));
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 20; ++rep) {
        const auto h = testutil::white_random(g, rng);
        const double l2 = lq_norm(h, 2.0);
        CHECK(sobolev_form(h, 0.3, 2.0, {0.3, 1.7}) >= 1.7 * std::pow(2.0, 0.6) * l2 * l2 * (1 - 1e-12));
    }
    CHECK_THROWS_AS(sobolev_form(TraceField(g), 0.3, 1.0, {0.5, 1.0}), DomainError);
    CHECK_THROWS_AS(frac_apply(TraceField(g), 0.3, -1.0), DomainError);
}

TEST_CASE("Hausdorff-Young spot check", "[spectral]") {
    std::mt19937_64 rng(17);
    const Grid g(1, 3.0, 32);
    for (int rep = 0; rep < 100; ++rep) {
        const auto f = testutil::white_random(g, rng), h = testutil::white_random(g, rng);
        CHECK(lq_norm(convolve(f, h), INFINITY) <= lq_norm(f, 2.0) * lq_norm(h, 2.0) * (1 + 1e-12));
    }
}

TEST_CASE("spectral derivative and dealiasing", "[spectral]") {
    const Grid g(2, 10.0, 64);
    const auto h = sample(g, [](auto y) { return std::exp(-y[0] * y[0] - 0.5 * y[1] * y[1]); });
    const auto d1 = derivative(h, 1);
    for (std::size_t i = 0; i < h.size(); ++i) {
        const auto idx = g.unflatten(i);
        CHECK(d1[i] == Approx(-g.coordinate(idx[1]) * h[i]).margin(1e-9));
    }
    // a wide bump has no content above the 2/3 cutoff
    const auto w = sample(g, [](auto y) { return std::exp(-0.2 * (y[0] * y[0] + y[1] * y[1])); });
    const auto f = dealias(w);
    for (std::size_t i = 0; i < w.size(); ++i) CHECK(f[i] == Approx(w[i]).margin(1e-8));
    CHECK_THROWS_AS(derivative(h, 2), DomainError);
}

TEST_CASE("imaginary residue is rejected", "[spectral]") {
    const Grid g(1, 1.0, 8);
    SpectralField s{g, std::vector<complex>(8, 0.0)};
    s.coeffs[1] = 1.0;
    CHECK_THROWS_AS(inverse(s), NumericError);
}

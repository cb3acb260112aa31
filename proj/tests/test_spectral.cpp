#include "qplab/spectral.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <random>

using namespace qplab;
using Catch::Matchers::WithinAbs;

namespace {

BlochFrame free_frame(double E) {
    double th = std::acos(E / 2) / two_pi;
    return build_conjugation({CVec::Ones(1), 0}, th, Frequency::golden(), uniform_grid(16), E, Potential::zero());
}

const IDSTable& free_ids() {
    static IDSTable t = ids_estimate(Potential::zero(), Frequency::golden(), Window(2048), 8);
    return t;
}

}  // namespace

TEST_CASE("free IDS") {
    const auto& t = free_ids();
    CHECK_THAT(t(0.0), WithinAbs(0.5, 1e-3));
    CHECK_THAT(t(1.0), WithinAbs(1.0 - std::acos(0.5) / M_PI, 5e-3));
    CHECK(t(-3.1) == 0.0);
    CHECK(t(3.1) == 1.0);
    for (Eigen::Index i = 1; i < t.values.size(); ++i) CHECK(t.values(i) >= t.values(i - 1));
    CHECK_THAT(ids_derivative(t, 0.0), WithinAbs(1.0 / (2 * M_PI), 0.05 / (2 * M_PI)));
    REQUIRE_THROWS_AS(ids_derivative(t, t.e_max()), RangeError);
    REQUIRE_THROWS_AS(ids_estimate(Potential::zero(), Frequency::golden(), Window(10), 4), PreconditionError);
}

TEST_CASE("IDS of a gapped model") {
    auto a = Frequency::golden();
    auto v = Potential::almost_mathieu(0.8);
    auto t = ids_estimate(v, a, Window(1024), 16);
    // E = -1 sits in the gap labelled by rho = alpha/2 (plateau of the rotation number)
    CHECK(ids_derivative(t, -1.0) <= 1e-3);
    CHECK(t(-2 - 1.6 - 1) == 0.0);
    CHECK(t(2 + 1.6 + 1) == 1.0);
    // total mass of N'
    double mass = 0.0;
    const double h = t.bandwidth;
    for (double E = t.e_min() + h; E <= t.e_max() - h; E += 2 * h) mass += ids_derivative(t, E) * 2 * h;
    CHECK_THAT(mass, WithinAbs(1.0, 0.02));
}

TEST_CASE("N = 1 - 2 rho") {
    auto a = Frequency::golden();
    std::vector<double> grid;
    for (int i = 0; i < 50; ++i) grid.push_back(-2.0 + 4.0 * (i + 0.5) / 50);
    auto free = rho_ids_consistency(Potential::zero(), a, grid, {1024, 8, 100000});
    CHECK(free.max_deviation <= 1e-2);

    std::vector<double> amo_grid;
    for (int i = 0; i < 50; ++i) amo_grid.push_back(-3.2 + 6.4 * i / 49.0);
    auto amo = rho_ids_consistency(Potential::almost_mathieu(0.5), a, amo_grid, {1024, 32, 100000});
    CHECK(amo.max_deviation <= 2e-2);

    auto below = rho_ids_consistency(Potential::almost_mathieu(0.5), a, {-4.0}, {256, 8, 10000});
    CHECK(below.ids[0] == 0.0);
    CHECK_THAT(below.rho[0], WithinAbs(0.5, 1e-3));
}

TEST_CASE("free m-functions") {
    auto m0 = m_function_from_bloch(free_frame(0.0), 0.0, 0.3);
    CHECK(std::abs(m0.m_plus - I) < 1e-12);
    auto m1 = m_function_from_bloch(free_frame(1.0), 1.0, 0.7);
    CHECK(std::abs(m1.m_plus - cplx(-0.5, std::sqrt(3.0) / 2)) < 1e-6);
    // free reflection symmetry: m_- = m_+
    CHECK(std::abs(m1.m_minus - m1.m_plus) < 1e-12);
    // closed form m(z) = (-z + sqrt(z^2 - 4)) / 2 on the upper lip
    for (double E : {-1.5, -0.3, 0.8, 1.7}) {
        cplx closed = (-E + I * std::sqrt(4 - E * E)) / 2.0;
        CHECK(std::abs(m_function_from_bloch(free_frame(E), E, 0.1).m_plus - closed) < 1e-10);
    }
    REQUIRE_THROWS_AS(m_function_from_bloch(free_frame(1.0), 0.5, 0.0), InputError);
}

TEST_CASE("free Green function and densities") {
    for (double E : {-1.2, 0.0, 0.5, 1.9}) {
        auto fr = free_frame(E);
        cplx g = green_00(fr, E, 0.0);
        CHECK(std::abs(g - I / std::sqrt(4 - E * E)) < 1e-10);
        CHECK_THAT(spectral_density(fr, E, 0.2, DensityKind::mu00), WithinAbs(g.imag() / M_PI, 1e-12));
        // mu01: (1/pi) Im G_01 with G_01 = -m_+ G_00
        cplx g01 = -m_function_from_bloch(fr, E, 0.0).m_plus * g;
        CHECK_THAT(spectral_density(fr, E, 0.0, DensityKind::mu01), WithinAbs(g01.imag() / M_PI, 1e-12));
        CHECK_THAT(spectral_density(fr, E, 0.0, DensityKind::mu01),
                   WithinAbs(E / (2 * M_PI * std::sqrt(4 - E * E)), 1e-12));
    }
    CHECK_THAT(spectral_density(free_frame(0.0), 0.0, 0.0, DensityKind::mu00), WithinAbs(1 / (2 * M_PI), 1e-3));
    // the alternative display reproduces mu00 on the free model, not mu01
    auto fr = free_frame(1.0);
    CHECK_THAT(mu01_alternative_form(fr, 1.0, 0.0), WithinAbs(spectral_density(fr, 1.0, 0.0, DensityKind::mu00), 1e-12));
}

TEST_CASE("mu00 has unit mass") {
    // E = 2 cos(2 pi theta) with theta in (0, 1/2), dE = 4 pi sin(2 pi theta) d theta
    const int n = 4000;
    double mass = 0.0;
    for (int i = 0; i < n; ++i) {
        double th = 0.5 * (i + 0.5) / n;
        double E = 2 * std::cos(two_pi * th);
        mass += spectral_density(free_frame(E), E, 0.0, DensityKind::mu00) * 4 * M_PI * std::sin(two_pi * th) * 0.5 / n;
    }
    CHECK_THAT(mass, WithinAbs(1.0, 0.02));
}

TEST_CASE("Herglotz property and Lipschitz probe on almost Mathieu frames") {
    auto a = Frequency::golden();
    auto v = Potential::almost_mathieu(0.2);
    Window w(256);
    auto pairs = dual_eigenpairs(v, a, {{-1.5, 1.5}}, w, {0.31});
    REQUIRE(pairs.size() > 10);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0, 1);
    for (std::size_t i = 0; i < pairs.size(); i += pairs.size() / 5) {
        auto fr = frame_from_eigenpair(pairs[i], v, a, w, 64);
        for (double x : fr.x_grid) {
            auto m = m_function_from_bloch(fr, fr.E, x);
            CHECK(m.m_plus.imag() > 0);
            auto b = fr.real_at(x + a[0]);
            CHECK(m.m_plus.imag() * (b(1, 0) * b(1, 0) + b(1, 1) * b(1, 1)) == Catch::Approx(1.0).epsilon(1e-10));
            CHECK(b.determinant() == Catch::Approx(1.0).margin(1e-8));
        }
        // Lipschitz constant from sup |B| and sup |B'| on a fine grid
        double s0 = 0.0, s1 = 0.0;
        const int fine = 2048;
        for (int j = 0; j < fine; ++j) {
            double x = static_cast<double>(j) / fine;
            Mat2d b0 = fr.real_at(x), b1 = fr.real_at(x + 1e-6);
            s0 = std::max(s0, b0.cwiseAbs().maxCoeff());
            s1 = std::max(s1, ((b1 - b0) / 1e-6).cwiseAbs().maxCoeff());
        }
        double c = 1.1 * 4 * s0 * s1 / two_pi;
        for (int k = 0; k < 20; ++k) {
            double x = u(rng), y = u(rng);
            double dx = std::abs(x - y);
            dx = std::min(dx, 1 - dx);
            double diff = std::abs(spectral_density(fr, fr.E, x, DensityKind::mu00) -
                                   spectral_density(fr, fr.E, y, DensityKind::mu00));
            CHECK(diff <= c * dx + 1e-12);
        }
    }
}

TEST_CASE("Kotani identity on almost Mathieu frames") {
    auto a = Frequency::golden();
    auto v = Potential::almost_mathieu(0.2);
    auto ids = ids_estimate(v, a, Window(4096), 32);
    Window w(256);
    auto pairs = dual_eigenpairs(v, a, {{-1.8, 1.8}}, w, {0.05, 0.23, 0.41});
    std::vector<double> ratios;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& p = pairs[i];
        auto fr = build_conjugation(bloch_function(p.psi, w), p.theta, a, uniform_grid(64), p.E, v);
        if (i % 7 == 0) {
            // |dE/dtheta| of the dual eigenvalue branch equals 2 pi |d|
            const double dt = 1e-6;
            Vec e0 = eigenvalues(build_dual(v, a, p.theta, w));
            Eigen::Index j;
            (e0.array() - p.E).abs().minCoeff(&j);
            double slope = (eigenvalues(build_dual(v, a, p.theta + dt, w))(j) -
                            eigenvalues(build_dual(v, a, p.theta - dt, w))(j)) / (2 * dt);
            CHECK(std::abs(slope) == Catch::Approx(two_pi * std::abs(fr.dk)).epsilon(1e-5));
        }
        double n1 = ids_derivative(ids, p.E, 0.01), n2 = ids_derivative(ids, p.E, 0.02);
        if (n1 < 1e-3 || std::abs(n1 - n2) > 0.02 * n1) continue;
        ratios.push_back(std::abs(fr.dk) * M_PI * n1);
    }
    REQUIRE(ratios.size() >= 20);
    // finite-difference N' is noisy near the small gaps, so test the bulk
    std::sort(ratios.begin(), ratios.end());
    CHECK_THAT(ratios[ratios.size() / 2], WithinAbs(1.0, 0.03));
    auto close = std::count_if(ratios.begin(), ratios.end(), [](double r) { return std::abs(r - 1) <= 0.1; });
    CHECK(static_cast<double>(close) >= 0.8 * ratios.size());
}

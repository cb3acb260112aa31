#include "qplab/cocycle.hpp"

#include <catch_amalgamated.hpp>

using namespace qplab;
using Catch::Matchers::WithinAbs;

TEST_CASE("transfer matrices") {
    auto m = transfer_matrix(0.0, Potential::zero(), 0.3);
    CHECK(m.a11 == 0.0);
    CHECK(m.a12 == -1.0);
    CHECK(m.a21 == 1.0);
    CHECK(m.a22 == 0.0);
    auto m2 = transfer_matrix(2.0, Potential::zero(), 0.3);
    CHECK(m2.a11 == 2.0);
    auto m3 = transfer_matrix(1.0, Potential::almost_mathieu(1.0), 0.25);
    CHECK_THAT(m3.a11, WithinAbs(1.0, 1e-15));
    CHECK(m3.det() == 1.0);
}

TEST_CASE("operator norm of SL2") {
    SL2 m{3, -1, 1, 0};
    // oracle: sqrt of the largest eigenvalue of m^T m
    Eigen::Matrix2d a;
    a << 3, -1, 1, 0;
    double s = std::sqrt((a.transpose() * a).eigenvalues().real().maxCoeff());
    CHECK_THAT(m.norm(), WithinAbs(s, 1e-14));
}

TEST_CASE("Lyapunov exponent of constant cocycles") {
    auto a = Frequency::golden();
    auto l0 = lyapunov_exponent(0.0, Potential::zero(), a, {0.0}, 100000, 4);
    CHECK(l0.value <= 1e-6);
    auto l3 = lyapunov_exponent(3.0, Potential::zero(), a, {0.0}, 100000, 4);
    CHECK_THAT(l3.value, WithinAbs(std::log((3.0 + std::sqrt(5.0)) / 2.0), 1e-4));
    CHECK_THAT(l3.phase_averaged, WithinAbs(std::log((3.0 + std::sqrt(5.0)) / 2.0), 1e-4));
    REQUIRE_THROWS_AS(lyapunov_exponent(0.0, Potential::zero(), a, {0.0}, 10), PreconditionError);
}

TEST_CASE("renormalisation keeps huge products finite") {
    auto a = Frequency::golden();
    CocycleOrbit orb({0.0});
    for (int i = 0; i < 20000; ++i) orb.step(10.0, Potential::zero(), a);
    CHECK(std::isfinite(orb.log_norm()));
    CHECK(orb.log_scale > 0.0);
    CHECK(orb.steps == 20000);
    // largest eigenvalue of [[10,-1],[1,0]]
    double lam = (10.0 + std::sqrt(96.0)) / 2.0;
    CHECK_THAT(orb.log_norm() / 20000.0, WithinAbs(std::log(lam), 1e-3));
}

TEST_CASE("Lyapunov exponent of the supercritical almost Mathieu operator") {
    // independent oracle: long product with renormalisation every step via column QR
    auto a = Frequency::golden();
    auto v = Potential::almost_mathieu(2.0);
    const long n = 1000000;
    double acc = 0.0;
    Eigen::Vector2d u(1.0, 0.3);
    u.normalize();
    for (long i = 0; i < n; ++i) {
        double x = frac(0.0 + static_cast<double>(i) * a[0]);
        Eigen::Matrix2d m;
        m << 0.0 - 4.0 * std::cos(2 * M_PI * x), -1, 1, 0;
        u = m * u;
        double r = u.norm();
        acc += std::log(r);
        u /= r;
    }
    double oracle = acc / n;
    auto est = lyapunov_exponent(0.0, v, a, {0.0}, n, 1);
    CHECK_THAT(est.value, WithinAbs(std::log(2.0), 2e-2));
    CHECK_THAT(est.value, WithinAbs(oracle, 2e-2));
}

TEST_CASE("rotation number of a constant rotation") {
    double r = rotation_number_of([](long) { return SL2::rotation(2 * M_PI * 0.3); }, 100000);
    CHECK_THAT(r, WithinAbs(0.3, 1e-6));
}

TEST_CASE("rotation number of the free cocycle") {
    auto a = Frequency::golden();
    CHECK_THAT(rotation_number(0.0, Potential::zero(), a, {0.0}, 100000), WithinAbs(0.25, 1e-4));
    CHECK_THAT(rotation_number(std::sqrt(2.0), Potential::zero(), a, {0.0}, 100000), WithinAbs(0.125, 1e-4));
    for (double E : {-1.7, -0.4, 0.9, 1.5})
        CHECK_THAT(rotation_number(E, Potential::zero(), a, {0.0}, 100000),
                   WithinAbs(std::acos(E / 2.0) / (2 * M_PI), 1e-4));
    CHECK_THAT(rotation_number(-3.0, Potential::zero(), a, {0.0}, 10000), WithinAbs(0.5, 1e-3));
    CHECK_THAT(rotation_number(3.0, Potential::zero(), a, {0.0}, 10000), WithinAbs(0.0, 1e-3));
}

TEST_CASE("rotation number is non-increasing in E") {
    auto a = Frequency::golden();
    auto v = Potential::almost_mathieu(0.8);
    int violations = 0;
    double prev = 1.0;
    const double step = 8.0 / 199;
    for (int i = 0; i < 200; ++i) {
        double E = -4.0 + i * step;
        double r = rotation_number(E, v, a, {0.1}, 20000);
        if (r > prev + 1e-3) ++violations;
        prev = r;
    }
    CHECK(violations <= 1);
}

TEST_CASE("Lyapunov exponent is non-negative and positive away from the spectrum") {
    auto a = Frequency::golden();
    auto v = Potential::almost_mathieu(0.5);
    // ||H|| <= 2 + 2*0.5 = 3
    for (double E : {-5.0, -4.0, 4.2, 6.0}) CHECK(lyapunov_exponent(E, v, a, {0.2}, 5000, 4).value > 0.0);
    for (double E : {-1.0, 0.0, 0.7}) CHECK(lyapunov_exponent(E, v, a, {0.2}, 5000, 4).value >= 0.0);
    for (double E : {-1.9, -1.0, 0.3, 1.99})
        CHECK(lyapunov_exponent(E, Potential::zero(), a, {0.2}, 1000000, 1).value <= 1e-5);
}

TEST_CASE("determinant survives a million steps on elliptic orbits") {
    auto a = Frequency::golden();
    for (auto [E, v] : {std::pair{1.0, Potential::zero()}, std::pair{0.0, Potential::almost_mathieu(0.2)}}) {
        CocycleOrbit orb({0.0});
        double worst = 0.0;
        for (int i = 0; i < 1000000; ++i) {
            orb.step(E, v, a);
            worst = std::max(worst, std::abs(orb.current.det() - 1.0));
        }
        CHECK(worst <= 1e-9);
    }
}

#include "qplab/dynamics.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace qplab;
using Catch::Matchers::WithinAbs;

namespace {

EigenSystem free_system(int n) {
    return diagonalize(build_schrodinger(Potential::zero(), Frequency::golden(), {0.0}, Window(n)));
}

EigenSystem amo_system(double lambda, int n, double x = 0.0) {
    return diagonalize(build_schrodinger(Potential::almost_mathieu(lambda), Frequency::golden(), {x}, Window(n)));
}

// J_n(z) by its power series, independent of the library Bessel routines
double bessel_series(int n, double z) {
    n = std::abs(n);
    double term = std::pow(z / 2, n) / std::tgamma(n + 1.0), sum = 0.0;
    for (int k = 0; k < 200; ++k) {
        sum += term;
        term *= -(z * z / 4) / ((k + 1.0) * (k + 1.0 + n));
    }
    return sum;
}

}  // namespace

TEST_CASE("diagonalize small closed forms") {
    auto sys = free_system(1);
    CHECK_THAT(sys.values(0), WithinAbs(-std::sqrt(2.0), 1e-14));
    CHECK_THAT(sys.values(1), WithinAbs(0.0, 1e-14));
    CHECK_THAT(sys.values(2), WithinAbs(std::sqrt(2.0), 1e-14));
    // sign convention
    for (int j = 0; j < 3; ++j) CHECK(sys.vectors(0, j) > 0);

    auto dual = build_dual(Potential::zero(), Frequency::golden(), 0.3, Window(6));
    auto dsys = diagonalize(dual);
    std::vector<double> d;
    for (int i = 0; i < dual.size(); ++i) d.push_back(dual.dense(i, i));
    std::sort(d.begin(), d.end());
    for (int i = 0; i < dual.size(); ++i) CHECK_THAT(dsys.values(i), WithinAbs(d[i], 1e-14));
}

TEST_CASE("eigen system invariants") {
    auto op = build_schrodinger(Potential::almost_mathieu(0.5), Frequency::golden(), {0.1}, Window(256));
    auto sys = diagonalize(op);
    CHECK(sys.values.minCoeff() >= -3.0);
    CHECK(sys.values.maxCoeff() <= 3.0);
    for (int j = 1; j < sys.size(); ++j) CHECK(sys.values(j) >= sys.values(j - 1));
    double hnorm = 3.0;
    CHECK(eigen_residual(op, sys) <= 1e-9 * hnorm);
    CHECK(orthonormality_defect(sys) <= 1e-10);

    auto l = build_dual(Potential::almost_mathieu(0.7), Frequency::golden(), 0.1, Window(40));
    auto lsys = diagonalize(l);
    CHECK(eigen_residual(l, lsys) <= 1e-9 * 4.0);
    CHECK(orthonormality_defect(lsys) <= 1e-10);
}

TEST_CASE("dimension cap") {
    auto op = build_schrodinger(Potential::zero(), Frequency::golden(), {0.0}, Window(100));
    REQUIRE_THROWS_AS(diagonalize(op, 100), ResourceError);
}

TEST_CASE("evolution") {
    auto sys = free_system(64);
    auto d0 = delta_state(sys.window);
    CHECK((evolve(sys, d0, 0.0) - d0).norm() < 1e-12);
    auto psi = evolve(sys, d0, 1.0);
    CHECK_THAT(std::abs(psi(64)), WithinAbs(std::abs(bessel_series(0, 2.0)), 1e-6));
    CHECK_THAT(std::abs(psi(64)), WithinAbs(0.22389, 1e-5));
    for (int n = 1; n < 6; ++n) CHECK_THAT(std::abs(psi(64 + n)), WithinAbs(std::abs(bessel_series(n, 2.0)), 1e-10));

    std::mt19937_64 rng(7);
    std::normal_distribution<double> g;
    auto amo = amo_system(1.1, 80, 0.4);
    StateVector r(amo.size());
    for (int i = 0; i < r.size(); ++i) r(i) = cplx(g(rng), g(rng));
    for (double t : {0.5, 3.0, 40.0, -17.0}) CHECK_THAT(evolve(amo, r, t).norm(), WithinAbs(r.norm(), 1e-10 * r.norm()));
    REQUIRE_THROWS_AS(evolve(amo, r, std::nan("")), InputError);
}

TEST_CASE("current operator") {
    auto a = current_operator(Window(1));
    CHECK(a(0, 1) == I);
    CHECK(a(1, 0) == -I);
    CHECK(a(0, 2) == cplx{});
    auto big = current_operator(Window(20));
    CHECK((big - big.adjoint()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(operator_norm_estimate(big) <= 2.0);

    // A = i [H, X] away from the boundary rows
    auto h = build_schrodinger(Potential::almost_mathieu(0.9), Frequency::golden(), {0.2}, Window(20)).to_dense();
    Mat x = position_diagonal(Window(20)).asDiagonal();
    CMat comm = I * (h * x - x * h).cast<cplx>();
    CHECK((comm - big).block(1, 0, 39, 41).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("position moments") {
    auto sys = free_system(128);
    auto d0 = delta_state(sys.window);
    CHECK(position_moment(sys, d0, 0.0, 2.0).value == 0.0);
    auto m = position_moment(sys, d0, 5.0, 2.0);
    CHECK_THAT(m.value, WithinAbs(50.0, 0.1));
    double oracle = 0.0;
    for (int n = -128; n <= 128; ++n) oracle += n * n * std::pow(bessel_series(n, 10.0), 2);
    CHECK_THAT(m.value, WithinAbs(oracle, 1e-8));
    CHECK(m.horizon_ok);
    CHECK_FALSE(m.flagged);

    auto late = position_moment(sys, d0, 80.0, 2.0);
    CHECK_FALSE(late.horizon_ok);
    CHECK(late.flagged);
    REQUIRE_THROWS_AS(position_moment(sys, d0, 1.0, 0.0), PreconditionError);
}

TEST_CASE("speed-two moment bound") {
    auto sys = amo_system(0.6, 200, 0.3);
    auto psi0 = delta_state(sys.window, 0);
    psi0(sys.window.index({2})) = 1.0;
    psi0 /= psi0.norm();
    for (double t : {1.0, 5.0, 10.0, 30.0}) CHECK(position_moment(sys, psi0, t, 2.0).value <= std::pow(2 * t + 2, 2));
}

TEST_CASE("ballistic growth in the subcritical almost Mathieu model") {
    auto sys = amo_system(0.2, 512);
    auto d0 = delta_state(sys.window);
    std::vector<double> ts, ms;
    for (int i = 0; i < 8; ++i) {
        double t = 10.0 * std::pow(10.0, i / 7.0);
        auto m = position_moment(sys, d0, t, 2.0);
        CHECK_FALSE(m.flagged);
        ts.push_back(t);
        ms.push_back(m.value);
    }
    CHECK_THAT(loglog_slope(ts, ms), WithinAbs(2.0, 0.1));
}

TEST_CASE("RAGE: local mass escapes on absolutely continuous spectrum") {
    auto sys = amo_system(0.2, 1024);
    auto psi = evolve(sys, delta_state(sys.window), 200.0);
    CHECK(mass_within(psi, sys.window, 10) < 0.05);
}

TEST_CASE("spectral projections") {
    auto sys = free_system(1);
    CHECK((spectral_projection(sys, EnergyWindowSet::everything()) - Mat::Identity(3, 3)).norm() < 1e-12);
    CHECK(spectral_projection(sys, EnergyWindowSet{}).norm() == 0.0);
    Mat p = spectral_projection(sys, {{-0.5, 0.5}});
    Vec e(3);
    e << 1, 0, -1;
    e /= std::sqrt(2.0);
    CHECK((p - e * e.transpose()).cwiseAbs().maxCoeff() < 1e-12);

    auto amo = amo_system(0.3, 100);
    Mat q = spectral_projection(amo, {{-3.0, -1.0}, {0.2, 0.9}});
    CHECK((q * q - q).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((q - q.transpose()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("energy window sets merge overlaps") {
    EnergyWindowSet k{{0.5, 1.0}, {-1.0, 0.0}, {0.8, 1.2}};
    REQUIRE(k.intervals().size() == 2);
    CHECK(k.intervals()[0].first == -1.0);
    CHECK(k.intervals()[1].second == 1.2);
    CHECK(k.contains(1.1));
    CHECK_FALSE(k.contains(0.3));
    REQUIRE_THROWS_AS(EnergyWindowSet({{1.0, 0.0}}), ConfigError);
}

TEST_CASE("kappa factor") {
    CHECK(kappa(10.0, 0.0) == cplx{1.0, 0.0});
    CHECK(kappa(10.0, 1e-13) == cplx{1.0, 0.0});
    // direct quadrature oracle
    double T = 3.0, w = 0.7;
    cplx acc = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) acc += expi(w * (i + 0.5) * T / n);
    acc /= n;
    CHECK(std::abs(kappa(T, w) - acc) < 1e-9);
}

TEST_CASE("time-averaged velocity is a bounded Hermitian contraction of A") {
    auto sys = amo_system(0.4, 60, 0.2);
    auto k = EnergyWindowSet{{-1.0, 1.5}};
    auto q = time_averaged_velocity(sys, k, 13.0);
    CHECK(q.hermitian_defect < 1e-10);
    CHECK(q.norm_estimate <= 2.0 + 1e-6);
    Eigen::SelfAdjointEigenSolver<CMat> es(q.matrix);
    CHECK(es.eigenvalues().cwiseAbs().maxCoeff() <= 2.0 + 1e-6);

    // diagonal of the eigenbasis representation is untouched by averaging
    auto idx = indices_in(sys, k);
    Mat vk = columns(sys.vectors, idx);
    CMat a = vk.transpose().cast<cplx>() * current_operator(sys.window) * vk.cast<cplx>();
    CMat qe = vk.transpose().cast<cplx>() * q.matrix * vk.cast<cplx>();
    CHECK((a.diagonal() - qe.diagonal()).cwiseAbs().maxCoeff() < 1e-12);

    // matrix-free application agrees
    auto d0 = delta_state(sys.window, 3);
    CHECK((apply_time_averaged_velocity(sys, k, 13.0, d0) - q.matrix * d0).norm() < 1e-12);
    // generic observable path agrees
    CHECK((time_average(sys, k, 13.0, current_operator(sys.window)) - q.matrix).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("free velocity converges to the symbol") {
    auto sys = free_system(256);
    auto k = EnergyWindowSet{{-2.0, 2.0}};
    auto d0 = delta_state(sys.window);
    auto v = apply_time_averaged_velocity(sys, k, 60.0, d0);
    CHECK_THAT(v.squaredNorm(), WithinAbs(2.0, 0.05));
}

TEST_CASE("averaged velocity nearly commutes with H for long times") {
    auto sys = amo_system(0.3, 60, 0.1);
    Mat h = build_schrodinger(Potential::almost_mathieu(0.3), Frequency::golden(), {0.1}, Window(60)).to_dense();
    double prev = 1e9;
    for (double T : {5.0, 50.0, 500.0}) {
        auto q = time_averaged_velocity(sys, EnergyWindowSet::everything(), T);
        double c = (q.matrix * h.cast<cplx>() - h.cast<cplx>() * q.matrix).norm();
        CHECK(c < prev);
        prev = c;
    }
}

TEST_CASE("asymptotic velocity from the IDS") {
    auto ids = ids_estimate(Potential::zero(), Frequency::golden(), Window(2048), 8);
    CHECK_THAT(velocity_symbol(ids, 0.0), WithinAbs(2.0, 2e-2));
    auto sys = free_system(200);
    Mat g = asymptotic_velocity(sys, {{-1.9, 1.9}}, ids);
    CHECK(Eigen::SelfAdjointEigenSolver<Mat>(g).eigenvalues().cwiseAbs().maxCoeff() <= 2.0 + 2e-2);
    CHECK(asymptotic_velocity(sys, {{3.0, 4.0}}, ids).norm() == 0.0);

    auto amo = ids_estimate(Potential::almost_mathieu(1.0), Frequency::golden(), Window(400), 8);
    auto asys = amo_system(1.0, 400);
    // wide window across many gaps: some eigenvalues sit where N' vanishes
    REQUIRE_THROWS_AS(asymptotic_velocity(asys, {{-4.0, 4.0}}, amo), SingularDensityError);
}

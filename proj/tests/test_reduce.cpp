#include "qplab/reduce.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace qplab;
using Catch::Matchers::WithinAbs;

namespace {

BlochFunction constant_one() { return {CVec::Ones(1), 0}; }

}  // namespace

TEST_CASE("Bloch functions of delta vectors") {
    auto grid = uniform_grid(16);
    Window w(3);
    CVec d0 = CVec::Zero(7), d1 = CVec::Zero(7);
    d0(3) = 1.0;
    d1(4) = 1.0;
    auto f0 = bloch_from_dual(d0, w, grid);
    auto f1 = bloch_from_dual(d1, w, grid);
    for (int j = 0; j < 16; ++j) {
        CHECK(std::abs(f0(j) - 1.0) < 1e-14);
        CHECK(std::abs(f1(j) - expi(two_pi * grid[j])) < 1e-14);
    }
}

TEST_CASE("Parseval for random Bloch functions") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    Window w(31);  // 63 sites; a 128-point grid resolves |f|^2 exactly
    CVec psi(63);
    for (int i = 0; i < 63; ++i) psi(i) = cplx(g(rng), g(rng));
    psi.normalize();
    CHECK_THAT(l2_norm(bloch_from_dual(psi, w, uniform_grid(128))), WithinAbs(1.0, 1e-10));
}

TEST_CASE("d for the free model") {
    auto a = Frequency::golden();
    auto r = compute_dk(constant_one(), 0.25, a, uniform_grid(32));
    CHECK(std::abs(r.mean - cplx(0, 2)) < 1e-14);
    CHECK_FALSE(r.non_bloch);
    auto z = compute_dk(constant_one(), 0.0, a, uniform_grid(32));
    CHECK(z.degenerate);
    REQUIRE_THROWS_AS(build_conjugation(constant_one(), 0.0, a, uniform_grid(8), 2.0, Potential::zero()),
                      DegenerateFrameError);
    // a non-eigenvector input is not constant in x
    BlochFunction junk{CVec::Ones(3), -1};
    CHECK(compute_dk(junk, 0.3, a, uniform_grid(64)).non_bloch);
}

TEST_CASE("free frames reduce exactly") {
    auto a = Frequency::golden();
    for (double th : {0.2, 0.25, 0.37, 0.8}) {
        double E = 2 * std::cos(two_pi * th);
        auto fr = build_conjugation(constant_one(), th, a, uniform_grid(256), E, Potential::zero());
        for (double d : fr.det_samples) CHECK_THAT(d, WithinAbs(1.0, 1e-12));
        CHECK(reducibility_residual(fr, Potential::zero(), E) <= 1e-10);
        // orientation: Im d > 0 and the rotation angle lands in (0, 1/2)
        CHECK(fr.dk.imag() > 0);
        CHECK(fr.theta < 0.5);
        // columns are conjugate pairs
        for (const auto& b : fr.samples) CHECK((b.col(1) - b.col(0).conjugate()).norm() < 1e-15);
        CHECK(balance_spread(fr) < 1e-12);
    }
}

TEST_CASE("randomised phases break the conjugation") {
    auto a = Frequency::golden();
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    CVec c(5);
    for (int i = 0; i < 5; ++i) c(i) = expi(two_pi * u(rng)) * 0.3;
    BlochFunction junk{c, -2};
    auto fr = build_conjugation(junk, 0.2, a, uniform_grid(64), 2 * std::cos(two_pi * 0.2), Potential::zero());
    CHECK(reducibility_residual(fr, Potential::zero(), fr.E) > 0.1);
}

TEST_CASE("frames from almost Mathieu dual eigenvectors") {
    auto a = Frequency::golden();
    auto v = Potential::almost_mathieu(0.2);
    Window w(512);
    auto pairs = dual_eigenpairs(v, a, {{-1.5, 1.5}}, w, {0.137});
    REQUIRE(pairs.size() > 20);
    for (std::size_t i = 0; i < pairs.size(); i += pairs.size() / 10) {
        auto fr = frame_from_eigenpair(pairs[i], v, a, w, 256);
        CHECK(fr.residual <= 1e-3);
        CHECK(fr.dk_deviation <= 1e-3 * std::abs(fr.dk));
        CHECK(balance_spread(fr) < 1e-8);
        // rotation angle agrees with the cocycle rotation number
        CHECK_THAT(fold_rotation(fr.theta), WithinAbs(rotation_number(fr.E, v, a, {0.0}, 200000), 1e-3));
        // dual velocity diagonal equals Im d for a normalised eigenvector
        double diag = 0.0;
        for (int n = 0; n < w.size(); ++n)
            diag += 2 * std::sin(two_pi * (pairs[i].theta + (n - w.radius) * a[0])) * std::norm(pairs[i].psi(n));
        CHECK_THAT(std::abs(diag), WithinAbs(std::abs(fr.dk), 1e-10));
    }
}

TEST_CASE("residual does not grow when the dual window doubles") {
    auto a = Frequency::golden();
    auto v = Potential::almost_mathieu(0.3);
    std::vector<double> res;
    for (int n : {64, 128}) {
        Window w(n);
        auto sys = diagonalize(build_dual(v, a, 0.21, w));
        // eigenvector closest to E = 0.4
        Eigen::Index j;
        (sys.values.array() - 0.4).abs().minCoeff(&j);
        auto p = recenter(sys.vectors.col(j), 0.21, sys.values(j), w, a);
        res.push_back(frame_from_eigenpair(p, v, a, w, 128).residual);
    }
    CHECK(res[1] <= res[0] * 1.01 + 1e-13);
}

TEST_CASE("Sobolev norms of single modes") {
    auto grid = uniform_grid(64);
    CVec one = CVec::Ones(64), e1(64);
    for (int j = 0; j < 64; ++j) e1(j) = expi(two_pi * grid[j]);
    for (double s : {0.0, 0.5, 1.0, 2.5}) {
        CHECK_THAT(sobolev_norm(one, s), WithinAbs(1.0, 1e-12));
        CHECK_THAT(sobolev_norm(e1, s), WithinAbs(std::pow(2.0, s), 1e-12));
    }
}

TEST_CASE("multiplicative Sobolev probe") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    auto grid = uniform_grid(128);
    double worst = 0.0;
    for (int trial = 0; trial < 30; ++trial) {
        CVec f = CVec::Zero(128), h = CVec::Zero(128);
        for (int m = -10; m <= 10; ++m) {
            cplx cf(g(rng), g(rng)), ch(g(rng), g(rng));
            cf /= std::pow(1.0 + std::abs(m), 2);
            ch /= std::pow(1.0 + std::abs(m), 2);
            for (int j = 0; j < 128; ++j) {
                f(j) += cf * expi(two_pi * m * grid[j]);
                h(j) += ch * expi(two_pi * m * grid[j]);
            }
        }
        CVec fh = f.cwiseProduct(h);
        double s = 1.0;
        worst = std::max(worst, sobolev_norm(fh, s) / (sobolev_norm(f, s) * sobolev_norm(h, s)));
    }
    INFO("fitted C(1, 1) = " << worst);
    CHECK(worst < 10.0);
}

TEST_CASE("C^s proxy") {
    auto grid = uniform_grid(256);
    CVec one = CVec::Ones(256);
    CHECK_THAT(cs_proxy(one, 1.5), WithinAbs(1.0, 1e-12));
    CVec e1(256);
    for (int j = 0; j < 256; ++j) e1(j) = expi(two_pi * grid[j]);
    // sup |f| + sup |f'| ~ 1 + 2 pi
    CHECK_THAT(cs_proxy(e1, 1.0), WithinAbs(1.0 + two_pi, 1e-3));
}

TEST_CASE("integral condition") {
    auto a = Frequency::golden();
    auto ids = ids_estimate(Potential::zero(), a, Window(1024), 8);
    CHECK(integral_condition_estimate(std::vector<BlochFrame>{}, ids, 1.0).value == 0.0);
    std::vector<double> vals;
    for (int n : {20, 40}) {
        std::vector<BlochFrame> frames;
        for (int i = 0; i < n; ++i) {
            double E = -1.0 + 2.0 * (i + 0.5) / n;
            double th = std::acos(E / 2) / two_pi;
            frames.push_back(build_conjugation(constant_one(), th, a, uniform_grid(32), E, Potential::zero()));
        }
        vals.push_back(integral_condition_estimate(frames, ids, 1.0).value);
    }
    // closed form: |B|_{C^s} = |d|^{-1/2}, so the integrand is 1/(4 - E^2) against dN/2
    double oracle = 0.0;
    const int q = 20000;
    for (int i = 0; i < q; ++i) {
        double E = -1.0 + 2.0 * (i + 0.5) / q;
        oracle += 1.0 / (4 - E * E) * 0.5 / (M_PI * std::sqrt(4 - E * E)) * (2.0 / q);
    }
    CHECK_THAT(vals[1], WithinAbs(vals[0], 0.05 * vals[0]));
    CHECK_THAT(vals[1], WithinAbs(oracle, 0.02 * oracle));
}

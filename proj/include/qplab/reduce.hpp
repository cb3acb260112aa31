#ifndef QPLAB_REDUCE_HPP
#define QPLAB_REDUCE_HPP

// Bloch waves and reducing conjugations B(x, E) built from eigenvectors of the
// dual operator, with d_k, residuals and norm functionals of B.

#include "qplab/cocycle.hpp"
#include "qplab/dynamics.hpp"

#include <algorithm>
#include <array>
#include <vector>

namespace qplab {

using Mat2c = Eigen::Matrix2cd;
using Mat2d = Eigen::Matrix2d;

inline std::vector<double> uniform_grid(int m) {
    if (m < 1) throw ConfigError("grid size must be positive");
    std::vector<double> g(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) g[static_cast<std::size_t>(j)] = static_cast<double>(j) / m;
    return g;
}

/// f(x) = sum_n psi(n) e^{2 pi i n x} for psi on sites first_site, first_site+1, ...
struct BlochFunction {
    CVec coeffs;
    int first_site = 0;

    cplx operator()(double x) const {
        // phase recursion, re-anchored every 32 terms to keep rounding at the 1e-16 level
        cplx acc = 0.0;
        const cplx step = expi(two_pi * x);
        cplx w;
        for (Eigen::Index j = 0; j < coeffs.size(); ++j) {
            if (j % 32 == 0) w = expi(two_pi * frac((first_site + static_cast<double>(j)) * x));
            acc += coeffs(j) * w;
            w *= step;
        }
        return acc;
    }

    CVec sample(const std::vector<double>& grid, double shift = 0.0) const {
        CVec out(static_cast<Eigen::Index>(grid.size()));
        for (std::size_t j = 0; j < grid.size(); ++j) out(static_cast<Eigen::Index>(j)) = (*this)(grid[j] + shift);
        return out;
    }

    BlochFunction conjugate() const {
        // conj(f)(x) = sum conj(psi(n)) e^{-2 pi i n x}
        BlochFunction g;
        const auto n = coeffs.size();
        g.coeffs = coeffs.reverse().conjugate();
        g.first_site = -(first_site + static_cast<int>(n) - 1);
        return g;
    }
};

/// Bloch function of a dual eigenvector on a one-dimensional window.
inline BlochFunction bloch_function(const CVec& psi, const Window& w) {
    if (w.dim != 1) throw ConfigError("Bloch frames are built for d = 1");
    return {psi, -w.radius};
}

inline CVec bloch_from_dual(const CVec& psi, const Window& w, const std::vector<double>& x_grid) {
    return bloch_function(psi, w).sample(x_grid);
}

struct DkResult {
    cplx mean;
    double deviation = 0.0;   // max |d(x) - mean|
    bool non_bloch = false;   // deviation > 1e-3 |mean|
    bool degenerate = false;  // |mean| below 1e-10
};

inline constexpr double kDegenerateD = 1e-10;

/// d = e^{2 pi i theta} f(x) conj f(x - alpha) - c.c., averaged over the grid.
inline DkResult compute_dk(const BlochFunction& f, double theta, const Frequency& alpha,
                           const std::vector<double>& x_grid) {
    const cplx ph = expi(two_pi * theta);
    std::vector<cplx> vals;
    cplx mean = 0.0;
    for (double x : x_grid) {
        cplx z = ph * f(x) * std::conj(f(x - alpha[0]));
        vals.push_back(z - std::conj(z));
        mean += vals.back();
    }
    mean /= static_cast<double>(x_grid.size());
    DkResult r;
    r.mean = mean;
    for (auto z : vals) r.deviation = std::max(r.deviation, std::abs(z - mean));
    r.degenerate = std::abs(mean) < kDegenerateD;
    r.non_bloch = r.deviation > 1e-3 * std::abs(mean);
    return r;
}

struct FrameNorms {
    double l2 = 0.0;
    double hs = 0.0;
    double cs_proxy = 0.0;  // finite-difference proxy, not a certified C^s norm
};

/// Reducing conjugation: S_{E-v}(x) B(x) = B(x + alpha) diag(e^{2 pi i theta}, e^{-2 pi i theta}).
struct BlochFrame {
    double E = 0.0;
    double theta = 0.0;  // rotation angle of the reduced cocycle
    Frequency alpha;
    Potential potential;
    BlochFunction f;  // oriented so that Im d > 0
    cplx dk;
    double dk_deviation = 0.0;
    double scale = 1.0;  // |d|^{-1/2}
    std::vector<double> x_grid;
    std::vector<Mat2c> samples;
    std::vector<double> det_samples;
    double residual = std::numeric_limits<double>::quiet_NaN();
    int center = 0;  // dual site the eigenvector was recentred from

    /// Complex frame [c, conj c] / |d|^{1/2} with c = (f(x), e^{-2 pi i theta} f(x - alpha)).
    Mat2c at(double x) const {
        cplx c1 = f(x), c2 = expi(-two_pi * theta) * f(x - alpha[0]);
        Mat2c b;
        b << c1, std::conj(c1), c2, std::conj(c2);
        return b * scale;
    }

    /// Real SL(2,R) frame sqrt(2/|d|) [Re c, -Im c]; conjugates S to the rotation R_theta.
    Mat2d real_at(double x) const {
        cplx c1 = f(x), c2 = expi(-two_pi * theta) * f(x - alpha[0]);
        Mat2d b;
        b << c1.real(), -c1.imag(), c2.real(), -c2.imag();
        return b * (std::sqrt(2.0) * scale);
    }
};

/// Balancing rescales columns so the four entry L^2 norms agree. The symmetric
/// choice [c, conj c] is already balanced; this reports the spread and rescales
/// the columns if a caller built an unbalanced frame.
inline double balance_spread(const BlochFrame& fr) {
    std::array<double, 4> n{};
    for (const auto& b : fr.samples)
        for (int k = 0; k < 4; ++k) n[static_cast<std::size_t>(k)] += std::norm(b(k / 2, k % 2));
    auto [lo, hi] = std::minmax_element(n.begin(), n.end());
    return (*hi - *lo) / fr.samples.size();
}

inline void balance_normalize(BlochFrame& fr) {
    double c0 = 0.0, c1 = 0.0;
    for (const auto& b : fr.samples) {
        c0 += b.col(0).squaredNorm();
        c1 += b.col(1).squaredNorm();
    }
    if (c0 == 0.0 || c1 == 0.0) throw DegenerateFrameError("frame column vanishes identically");
    double s = std::pow(c1 / c0, 0.25);  // keeps det fixed
    for (auto& b : fr.samples) {
        b.col(0) *= s;
        b.col(1) /= s;
    }
}

inline BlochFrame build_conjugation(const BlochFunction& f, double theta, const Frequency& alpha,
                                    const std::vector<double>& x_grid, double E, const Potential& v) {
    if (alpha.dim() != 1) throw ConfigError("Bloch frames are built for d = 1");
    auto dk = compute_dk(f, theta, alpha, x_grid);
    if (std::abs(dk.mean) <= kDegenerateD)
        throw DegenerateFrameError("|d| = " + std::to_string(std::abs(dk.mean)) + " below floor");
    BlochFrame fr;
    fr.E = E;
    fr.alpha = alpha;
    fr.potential = v;
    fr.x_grid = x_grid;
    fr.dk_deviation = dk.deviation;
    if (dk.mean.imag() > 0) {
        fr.f = f;
        fr.theta = frac(theta);
        fr.dk = dk.mean;
    } else {
        // conj f is the Bloch function at -theta and flips the sign of d
        fr.f = f.conjugate();
        fr.theta = frac(-theta);
        fr.dk = -dk.mean;
    }
    fr.scale = 1.0 / std::sqrt(std::abs(fr.dk));
    for (double x : x_grid) {
        fr.samples.push_back(fr.at(x));
        fr.det_samples.push_back(std::abs(fr.samples.back().determinant()));
    }
    return fr;
}

/// max over the grid of |B(x+alpha)^{-1} S(x) B(x) - diag(e^{2 pi i theta}, e^{-2 pi i theta})|_F.
inline double reducibility_residual(const BlochFrame& fr, const Potential& v, double E) {
    Mat2c target = Mat2c::Zero();
    target(0, 0) = expi(two_pi * fr.theta);
    target(1, 1) = expi(-two_pi * fr.theta);
    double worst = 0.0;
    for (std::size_t j = 0; j < fr.x_grid.size(); ++j) {
        double x = fr.x_grid[j];
        Mat2c bx = fr.samples[j];
        Mat2c next = fr.at(x + fr.alpha[0]);
        cplx det = next.determinant();
        if (std::abs(det) < 1e-12) throw DegenerateFrameError("singular frame sample at x = " + std::to_string(x));
        SL2 s = transfer_matrix(E, v, x);
        Mat2c sm;
        sm << s.a11, s.a12, s.a21, s.a22;
        Mat2c r = next.inverse() * sm * bx - target;
        worst = std::max(worst, r.norm());
    }
    return worst;
}

/// Fourier coefficients of grid samples, indices -M/2 .. M/2-1 (entry k holds mode k - M/2).
inline CVec grid_fourier(const CVec& samples) {
    const auto m = samples.size();
    CVec out(m);
    for (Eigen::Index k = 0; k < m; ++k) {
        const double mode = static_cast<double>(k - m / 2);
        cplx acc = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) acc += samples(j) * expi(-two_pi * mode * j / static_cast<double>(m));
        out(k) = acc / static_cast<double>(m);
    }
    return out;
}

/// ||f||_{H^s}^2 = sum (1 + |m|)^{2s} |f_hat(m)|^2 from grid samples; returns the norm.
inline double sobolev_norm(const CVec& samples, double s) {
    CVec c = grid_fourier(samples);
    const auto m = c.size();
    double acc = 0.0;
    for (Eigen::Index k = 0; k < m; ++k) acc += std::pow(1.0 + std::abs(static_cast<double>(k - m / 2)), 2 * s) * std::norm(c(k));
    return std::sqrt(acc);
}

inline double l2_norm(const CVec& samples) { return std::sqrt(samples.squaredNorm() / samples.size()); }

/// Grid proxy for the C^s norm: sup norms of forward differences up to order floor(s)
/// plus the Hölder quotient of the top difference.
inline double cs_proxy(const CVec& samples, double s) {
    const auto m = samples.size();
    const double h = 1.0 / static_cast<double>(m);
    const int k = static_cast<int>(std::floor(s));
    CVec d = samples;
    double total = d.cwiseAbs().maxCoeff();
    for (int order = 1; order <= k; ++order) {
        CVec nd(m);
        for (Eigen::Index j = 0; j < m; ++j) nd(j) = (d((j + 1) % m) - d(j)) / h;
        d = nd;
        total += d.cwiseAbs().maxCoeff();
    }
    const double frac_s = s - k;
    if (frac_s > 0.0) {
        double hol = 0.0;
        for (Eigen::Index j = 0; j < m; ++j)
            for (Eigen::Index l = 1; l <= m / 2; ++l)
                hol = std::max(hol, std::abs(d((j + l) % m) - d(j)) / std::pow(l * h, frac_s));
        total += hol;
    }
    return total;
}

/// Entrywise norms of the frame on its grid: L^2 and H^s are root-sums over the four
/// entries, the C^s proxy is the largest entry proxy.
inline FrameNorms frame_norms(const BlochFrame& fr, double s) {
    FrameNorms out;
    const auto m = static_cast<Eigen::Index>(fr.samples.size());
    for (int e = 0; e < 4; ++e) {
        CVec entry(m);
        for (Eigen::Index j = 0; j < m; ++j) entry(j) = fr.samples[static_cast<std::size_t>(j)](e / 2, e % 2);
        out.l2 += entry.squaredNorm() / m;
        double hs = sobolev_norm(entry, s);
        out.hs += hs * hs;
        out.cs_proxy = std::max(out.cs_proxy, cs_proxy(entry, s));
    }
    out.l2 = std::sqrt(out.l2);
    out.hs = std::sqrt(out.hs);
    return out;
}

struct IntegralEstimate {
    double value = 0.0;
    double tail_share = 0.0;  // share of the top decile of terms
    std::size_t frames = 0;
};

/// Quadrature of ||B(E)||_{C^s}^4 against d rho = -dN/2 over the frames' energies.
inline IntegralEstimate integral_condition_estimate(std::vector<const BlochFrame*> frames, const IDSTable& ids,
                                                    double s) {
    IntegralEstimate est;
    if (frames.empty()) return est;
    std::sort(frames.begin(), frames.end(), [](auto* a, auto* b) { return a->E < b->E; });
    const std::size_t n = frames.size();
    std::vector<double> terms;
    for (std::size_t i = 0; i < n; ++i) {
        double lo, hi;
        if (n == 1) {
            lo = frames[i]->E - ids.bandwidth;
            hi = frames[i]->E + ids.bandwidth;
        } else {
            lo = i == 0 ? frames[0]->E - 0.5 * (frames[1]->E - frames[0]->E)
                        : 0.5 * (frames[i - 1]->E + frames[i]->E);
            hi = i + 1 == n ? frames[n - 1]->E + 0.5 * (frames[n - 1]->E - frames[n - 2]->E)
                            : 0.5 * (frames[i]->E + frames[i + 1]->E);
        }
        double w = 0.5 * (ids(hi) - ids(lo));
        double c = frame_norms(*frames[i], s).cs_proxy;
        terms.push_back(c * c * c * c * w);
    }
    for (double t : terms) est.value += t;
    std::vector<double> sorted = terms;
    std::sort(sorted.rbegin(), sorted.rend());
    std::size_t top = std::max<std::size_t>(1, n / 10);
    double tail = 0.0;
    for (std::size_t i = 0; i < top; ++i) tail += sorted[i];
    est.tail_share = est.value > 0 ? tail / est.value : 0.0;
    est.frames = n;
    return est;
}

inline IntegralEstimate integral_condition_estimate(const std::vector<BlochFrame>& frames, const IDSTable& ids,
                                                    double s) {
    std::vector<const BlochFrame*> ptrs;
    for (const auto& f : frames) ptrs.push_back(&f);
    return integral_condition_estimate(std::move(ptrs), ids, s);
}

struct DualFrameOptions {
    int x_grid = 256;
    double boundary_tol = 1e-12;  // mass allowed on the outer 8 dual sites
    double edge_margin = 1e-3;    // distance of theta from {0, 1/2}
};

/// Eigenpairs of L_theta with energy in K whose eigenvectors stay clear of the window edge.
struct DualEigenpair {
    double theta = 0.0;  // after recentring
    double E = 0.0;
    CVec psi;  // recentred, on the same window
    int center = 0;
    double boundary_mass = 0.0;
};

/// Shift psi so its largest entry sits at site 0 and move theta accordingly (covariance).
inline DualEigenpair recenter(const Vec& psi, double theta, double E, const Window& w, const Frequency& alpha) {
    Eigen::Index imax;
    psi.cwiseAbs().maxCoeff(&imax);
    const int c = static_cast<int>(imax) - w.radius;
    DualEigenpair p;
    p.center = c;
    p.E = E;
    p.theta = frac(theta + c * alpha[0]);
    p.psi = CVec::Zero(w.size());
    for (int i = 0; i < w.size(); ++i) {
        int src = i + c;
        if (src >= 0 && src < w.size()) p.psi(i) = psi(src);
    }
    p.boundary_mass = boundary_mass(p.psi, w);
    double lost = 1.0 - p.psi.squaredNorm();
    p.boundary_mass = std::max(p.boundary_mass, lost);
    p.psi.normalize();
    return p;
}

inline std::vector<DualEigenpair> dual_eigenpairs(const Potential& v, const Frequency& alpha,
                                                  const EnergyWindowSet& K, const Window& w,
                                                  const std::vector<double>& thetas, const DualFrameOptions& opt = {}) {
    std::vector<DualEigenpair> out;
    for (double th : thetas) {
        auto sys = diagonalize(build_dual(v, alpha, th, w));
        for (int j = 0; j < sys.size(); ++j) {
            if (!K.contains(sys.values(j))) continue;
            Vec col = sys.vectors.col(j);
            if (boundary_mass(col.cast<cplx>(), w) > opt.boundary_tol) continue;
            auto p = recenter(col, th, sys.values(j), w, alpha);
            if (p.boundary_mass > opt.boundary_tol) continue;
            double t2 = frac(2.0 * p.theta);
            if (std::min(t2, 1.0 - t2) < 2.0 * opt.edge_margin) continue;
            out.push_back(std::move(p));
        }
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.E < b.E; });
    return out;
}

inline BlochFrame frame_from_eigenpair(const DualEigenpair& p, const Potential& v, const Frequency& alpha,
                                       const Window& w, int x_grid = 256) {
    auto fr = build_conjugation(bloch_function(p.psi, w), p.theta, alpha, uniform_grid(x_grid), p.E, v);
    fr.center = p.center;
    fr.residual = reducibility_residual(fr, v, p.E);
    return fr;
}

}  // namespace qplab

#endif

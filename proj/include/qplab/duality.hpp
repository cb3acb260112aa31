#ifndef QPLAB_DUALITY_HPP
#define QPLAB_DUALITY_HPP

// Aubry duality on finite grids, the dual current, covariance of dual
// eigenvectors, and dynamical localization profiles of L_theta.

#include "qplab/dynamics.hpp"
#include "qplab/parallel.hpp"

#include <algorithm>
#include <random>
#include <vector>

namespace qplab {

// ---------------------------------------------------------------------------
// Grid transform

/// Grid pairing: x-grid has one point per dual site, theta-grid one point per direct site.
struct DualityGrids {
    Window sites;  // direct lattice, d = 1
    Window dual;   // dual lattice, d = dim(alpha)

    DualityGrids(Window s, Window d) : sites(s), dual(d) {
        if (sites.dim != 1) throw ConfigError("direct window must be one-dimensional");
    }
    int x_count() const { return dual.size(); }
    int theta_count() const { return sites.size(); }

    Point x_point(int j) const {
        LatticeSite m = dual.site(j);
        Point x(m.size());
        for (std::size_t k = 0; k < m.size(); ++k) x[k] = static_cast<double>(m[k] + dual.radius) / dual.side();
        return x;
    }
    double theta_point(int k) const { return static_cast<double>(k) / theta_count(); }
};

namespace detail {

inline double mdot(const LatticeSite& m, const Point& x) {
    double s = 0.0;
    for (std::size_t k = 0; k < m.size(); ++k) s += m[k] * x[k];
    return s;
}

inline void check_field(const CMat& f, Eigen::Index rows, Eigen::Index cols, const char* what) {
    if (f.rows() != rows || f.cols() != cols)
        throw ConfigError(std::string(what) + " is " + std::to_string(f.rows()) + "x" + std::to_string(f.cols()) +
                          ", grids require " + std::to_string(rows) + "x" + std::to_string(cols));
}

/// F(m, j) = e^{2 pi i m.x_j} / M.
inline CMat x_fourier_matrix(const DualityGrids& g) {
    const int M = g.x_count();
    CMat F(M, M);
    for (int j = 0; j < M; ++j) {
        Point x = g.x_point(j);
        for (int m = 0; m < M; ++m) F(m, j) = expi(two_pi * mdot(g.dual.site(m), x)) / static_cast<double>(M);
    }
    return F;
}

}  // namespace detail

/// Field Psi(x_j, n) with rows j over the x-grid and columns n over the direct window,
/// mapped to Phi(theta_k, m) = Psi~(theta_k + m.alpha, m) (rows k, columns m), where
/// Psi~(theta, m) = sum_n int e^{2 pi i (n theta + m.x)} Psi(x, n) dx.
/// The n-sum is a trigonometric polynomial in theta, so the shear is evaluated exactly.
/// With shear = false this is the plain double transform Psi~(theta_k, m).
inline CMat duality_transform(const CMat& field, const DualityGrids& g, const Frequency& alpha, bool shear = true) {
    if (alpha.dim() != g.dual.dim) throw ConfigError("dual window dimension must equal dim(alpha)");
    detail::check_field(field, g.x_count(), g.theta_count(), "field");
    CMat hat = detail::x_fourier_matrix(g) * field;  // (m, n)
    const int W = g.theta_count(), M = g.x_count();
    CMat out(W, M);
    for (int m = 0; m < M; ++m) {
        double s = shear ? alpha.dot(g.dual.site(m)) : 0.0;
        for (int k = 0; k < W; ++k) {
            double th = g.theta_point(k) + s;
            cplx acc = 0.0;
            for (int i = 0; i < W; ++i) acc += expi(two_pi * (i - g.sites.radius) * th) * hat(m, i);
            out(k, m) = acc;
        }
    }
    return out;
}

/// Inverse of duality_transform.
inline CMat inverse_duality_transform(const CMat& dual_field, const DualityGrids& g, const Frequency& alpha,
                                      bool shear = true) {
    detail::check_field(dual_field, g.theta_count(), g.x_count(), "dual field");
    const int W = g.theta_count(), M = g.x_count();
    CMat hat(M, W);
    for (int m = 0; m < M; ++m) {
        double s = shear ? alpha.dot(g.dual.site(m)) : 0.0;
        for (int i = 0; i < W; ++i) {
            cplx acc = 0.0;
            for (int k = 0; k < W; ++k) acc += expi(-two_pi * (i - g.sites.radius) * (g.theta_point(k) + s)) * dual_field(k, m);
            hat(m, i) = acc / static_cast<double>(W);
        }
    }
    CMat Finv = detail::x_fourier_matrix(g).adjoint() * static_cast<double>(M);
    return Finv * hat;
}

/// L^2(dx) x l^2 norm of a field on the x-grid.
inline double x_field_norm(const CMat& f) { return std::sqrt(f.squaredNorm() / static_cast<double>(f.rows())); }

/// L^2(d theta) x l^2 norm of a field on the theta-grid.
inline double theta_field_norm(const CMat& f) { return std::sqrt(f.squaredNorm() / static_cast<double>(f.rows())); }

struct DualityDefect {
    double interior = 0.0;  // states supported away from both window edges
    double full = 0.0;      // arbitrary states; dominated by the Dirichlet edges
};

/// max over random states of ||U H Psi - L U Psi|| / ||Psi||, H and L truncated independently.
inline DualityDefect duality_defect(const Potential& v, const Frequency& alpha, const DualityGrids& g,
                                    int n_states = 4, std::uint64_t seed = 1) {
    const int M = g.x_count(), W = g.theta_count();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    std::vector<LatticeOperator> hs, ls;
    for (int j = 0; j < M; ++j) hs.push_back(build_schrodinger(v, alpha, g.x_point(j), g.sites));
    for (int k = 0; k < W; ++k) ls.push_back(build_dual(v, alpha, g.theta_point(k), g.dual));
    CMat Finv = detail::x_fourier_matrix(g).adjoint() * static_cast<double>(M);

    auto defect_of = [&](const CMat& psi) {
        CMat hpsi(M, W);
        for (int j = 0; j < M; ++j) hpsi.row(j) = hs[j].apply(psi.row(j).transpose()).transpose();
        CMat u = duality_transform(psi, g, alpha);
        CMat lu(W, M);
        for (int k = 0; k < W; ++k) lu.row(k) = ls[k].apply(u.row(k).transpose()).transpose();
        return theta_field_norm(duality_transform(hpsi, g, alpha) - lu) / x_field_norm(psi);
    };

    DualityDefect d;
    for (int s = 0; s < n_states; ++s) {
        CMat coeff = CMat::Zero(M, W);
        for (int m = 0; m < M; ++m) {
            bool inner_m = true;
            for (int c : g.dual.site(m)) inner_m = inner_m && std::abs(c) <= g.dual.radius / 2;
            for (int n = 0; n < W; ++n)
                if (inner_m && std::abs(n - g.sites.radius) <= g.sites.radius / 2)
                    coeff(m, n) = cplx(gauss(rng), gauss(rng));
        }
        d.interior = std::max(d.interior, defect_of(Finv * coeff));
        CMat full(M, W);
        for (int j = 0; j < M; ++j)
            for (int n = 0; n < W; ++n) full(j, n) = cplx(gauss(rng), gauss(rng));
        d.full = std::max(d.full, defect_of(full));
    }
    return d;
}

/// (A~(theta) psi)(m) = 2 sin 2pi(m.alpha + theta) psi(m).
inline Mat dual_current(double theta, const Window& w, const Frequency& alpha) {
    if (w.dim != alpha.dim()) throw ConfigError("dual window dimension must equal dim(alpha)");
    Vec d(w.size());
    for (int i = 0; i < w.size(); ++i) d(i) = 2.0 * std::sin(two_pi * (alpha.dot(w.site(i)) + theta));
    return d.asDiagonal();
}

// ---------------------------------------------------------------------------
// Dual spectra

/// Mass on sites whose max-norm exceeds radius - width.
inline double edge_mass(const CVec& psi, const Window& w, int width) {
    double m = 0.0;
    for (int i = 0; i < w.size(); ++i) {
        int r = 0;
        for (int c : w.site(i)) r = std::max(r, std::abs(c));
        if (r > w.radius - width) m += std::norm(psi(i));
    }
    return m;
}

inline double euclid(const LatticeSite& p) {
    double s = 0.0;
    for (int c : p) s += static_cast<double>(c) * c;
    return std::sqrt(s);
}

struct DualSpectrum {
    Potential potential;
    Frequency alpha;
    Window window;
    EnergyWindowSet K;
    std::vector<double> thetas;
    std::vector<Vec> values;   // per theta, ascending, restricted to K
    std::vector<Mat> vectors;  // matching normalised columns
    std::vector<Vec> edge;     // mass on the outer 8 sites

    int count() const {
        int c = 0;
        for (const auto& v : values) c += static_cast<int>(v.size());
        return c;
    }
};

inline std::vector<double> midpoint_thetas(int count) {
    std::vector<double> t(static_cast<std::size_t>(count));
    for (int j = 0; j < count; ++j) t[static_cast<std::size_t>(j)] = (j + 0.5) / count;
    return t;
}

inline DualSpectrum dual_spectrum(const Potential& v, const Frequency& alpha, const EnergyWindowSet& K,
                                  const Window& w, const std::vector<double>& thetas, int jobs = 1) {
    DualSpectrum s{v, alpha, w, K, thetas, {}, {}, {}};
    const int n = static_cast<int>(thetas.size());
    s.values.resize(thetas.size());
    s.vectors.resize(thetas.size());
    s.edge.resize(thetas.size());
    parallel_for(n, jobs, [&](int j) {
        auto sys = diagonalize(build_dual(v, alpha, thetas[static_cast<std::size_t>(j)], w));
        auto idx = indices_in(sys, K);
        Vec e(static_cast<Eigen::Index>(idx.size()));
        Vec em(static_cast<Eigen::Index>(idx.size()));
        for (std::size_t i = 0; i < idx.size(); ++i) {
            e(static_cast<Eigen::Index>(i)) = sys.values(idx[i]);
            em(static_cast<Eigen::Index>(i)) = edge_mass(sys.vectors.col(idx[i]).cast<cplx>(), w, 8);
        }
        s.values[static_cast<std::size_t>(j)] = std::move(e);
        s.vectors[static_cast<std::size_t>(j)] = columns(sys.vectors, idx);
        s.edge[static_cast<std::size_t>(j)] = std::move(em);
    });
    return s;
}

struct CovarianceReport {
    double max_residual = 0.0;
    int tested = 0;
    int skipped = 0;  // eigenvectors with mass near the boundary
};

/// max ||L_{theta + l.alpha} T^l psi - E T^l psi|| over the window interior, (T^l psi)(m) = psi(m + l).
inline CovarianceReport covariance_check(const DualSpectrum& sp, const LatticeSite& ell, double boundary_tol = 1e-10) {
    const Window& w = sp.window;
    if (static_cast<int>(ell.size()) != w.dim) throw ConfigError("shift has the wrong dimension");
    int shift = 0;
    for (int c : ell) shift = std::max(shift, std::abs(c));
    const int reach = shift + sp.potential.radius();
    if (reach + 1 >= w.radius) throw HorizonError("shift pushes every eigenvector onto the window boundary");
    const int width = std::max(8, reach + 1);
    CovarianceReport r;
    for (std::size_t j = 0; j < sp.thetas.size(); ++j) {
        double th = frac(sp.thetas[j] + sp.alpha.dot(ell));
        auto L = build_dual(sp.potential, sp.alpha, th, w);
        for (Eigen::Index k = 0; k < sp.values[j].size(); ++k) {
            CVec psi = sp.vectors[j].col(k).cast<cplx>();
            if (edge_mass(psi, w, width) > boundary_tol) {
                ++r.skipped;
                continue;
            }
            CVec phi = CVec::Zero(w.size());
            for (int i = 0; i < w.size(); ++i) {
                LatticeSite m = w.site(i);
                for (std::size_t a = 0; a < m.size(); ++a) m[a] += ell[a];
                if (w.contains(m)) phi(i) = psi(w.index(m));
            }
            CVec res = L.apply(phi) - sp.values[j](k) * phi;
            double norm2 = 0.0;
            for (int i = 0; i < w.size(); ++i) {
                int rad = 0;
                for (int c : w.site(i)) rad = std::max(rad, std::abs(c));
                if (rad <= w.radius - reach) norm2 += std::norm(res(i));
            }
            r.max_residual = std::max(r.max_residual, std::sqrt(norm2));
            ++r.tested;
        }
    }
    if (r.tested == 0) throw HorizonError("no eigenvector is clear of the window boundary");
    return r;
}

// ---------------------------------------------------------------------------
// Localization profiles

struct FitResult {
    double rate = 0.0;       // decay exponent (exponential rate or power s)
    double prefactor = 0.0;  // C
    double residual = 0.0;   // rms of the log fit
    int points = 0;
};

struct LocalizationProfile {
    Window window;
    Vec h;  // indexed like the window; h(p) >= 0
    std::vector<double> t_samples;
    FitResult exponential;  // h ~ C e^{-rate |p|}
    FitResult power;        // h ~ C (1 + |p|)^{-rate}
};

inline constexpr double kProfileFloor = 1e-13;

namespace detail {

/// Least squares of log h against u(p) over p != 0 with h above the floor.
template <class U>
FitResult fit_profile(const Vec& h, const Window& w, U u) {
    std::vector<double> xs, ys;
    for (int i = 0; i < w.size(); ++i) {
        double r = euclid(w.site(i));
        if (r == 0.0 || h(i) <= kProfileFloor) continue;
        xs.push_back(u(r));
        ys.push_back(std::log(h(i)));
    }
    FitResult f;
    f.points = static_cast<int>(xs.size());
    if (xs.size() < 2) return f;
    double n = static_cast<double>(xs.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    double icpt = (sy - slope * sx) / n;
    double ss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) ss += std::pow(ys[i] - icpt - slope * xs[i], 2);
    f.rate = -slope;
    f.prefactor = std::exp(icpt);
    f.residual = std::sqrt(ss / n);
    return f;
}

/// |<delta_p, 1_K(L) e^{-itL} delta_0>| for every p, from an eigensystem restricted to K.
inline Vec propagator_column(const Mat& vk, const Vec& e, int origin, double t) {
    CVec c(vk.cols());
    for (Eigen::Index k = 0; k < vk.cols(); ++k) c(k) = expi(-t * e(k)) * vk(origin, k);
    return (vk.cast<cplx>() * c).cwiseAbs();
}

}  // namespace detail

inline FitResult fit_exponential(const Vec& h, const Window& w) {
    return detail::fit_profile(h, w, [](double r) { return r; });
}

inline FitResult fit_power(const Vec& h, const Window& w) {
    return detail::fit_profile(h, w, [](double r) { return std::log1p(r); });
}

/// h(p) = max over t of the theta-average of |<delta_p, 1_K(L_theta) e^{-itL_theta} delta_0>|.
inline LocalizationProfile localization_profile(const Potential& v, const Frequency& alpha, const EnergyWindowSet& K,
                                                const Window& w, int theta_count,
                                                std::vector<double> t_samples = {5, 10, 20, 50}, int jobs = 1) {
    if (theta_count < 64) throw PreconditionError("localization profiles need at least 64 theta samples");
    auto sp = dual_spectrum(v, alpha, K, w, midpoint_thetas(theta_count), jobs);
    const int origin = w.index(LatticeSite(static_cast<std::size_t>(w.dim), 0));
    std::vector<Mat> per_theta(static_cast<std::size_t>(theta_count));
    parallel_for(theta_count, jobs, [&](int j) {
        Mat cols(w.size(), static_cast<Eigen::Index>(t_samples.size()));
        for (std::size_t t = 0; t < t_samples.size(); ++t)
            cols.col(static_cast<Eigen::Index>(t)) = detail::propagator_column(
                sp.vectors[static_cast<std::size_t>(j)], sp.values[static_cast<std::size_t>(j)], origin, t_samples[t]);
        per_theta[static_cast<std::size_t>(j)] = std::move(cols);
    });
    Mat avg = Mat::Zero(w.size(), static_cast<Eigen::Index>(t_samples.size()));
    for (const auto& m : per_theta) avg += m;  // fixed theta order
    avg /= theta_count;
    LocalizationProfile prof;
    prof.window = w;
    prof.t_samples = std::move(t_samples);
    prof.h = avg.rowwise().maxCoeff();
    prof.exponential = fit_exponential(prof.h, w);
    prof.power = fit_power(prof.h, w);
    return prof;
}

// ---------------------------------------------------------------------------
// Sobolev localization

/// psi_*(p) = sum_m |psi(m) psi(m + p)| on the difference window of radius 2N.
/// Entries below 1e-18 of the maximum are dropped from the double sum.
inline Vec psi_star(const CVec& psi, const Window& w) {
    Window dw(2 * w.radius, w.dim);
    Vec out = Vec::Zero(dw.size());
    Vec a = psi.cwiseAbs();
    const double cut = 1e-18 * a.maxCoeff();
    std::vector<int> support;
    for (int i = 0; i < w.size(); ++i)
        if (a(i) > cut) support.push_back(i);
    for (int i : support) {
        LatticeSite m = w.site(i);
        for (int j : support) {
            LatticeSite q = w.site(j);
            for (std::size_t k = 0; k < q.size(); ++k) q[k] -= m[k];
            out(dw.index(q)) += a(i) * a(j);
        }
    }
    return out;
}

struct SobolevLocalization {
    double value = 0.0;
    int eigenpairs = 0;  // interior eigenpairs averaged over
};

/// sum_p (1 + |p|)^{2s} mean |psi_*(p)|^2 over eigenpairs clear of the boundary.
inline SobolevLocalization sobolev_localization_functional(const DualSpectrum& sp, double s, double boundary_tol = 1e-10) {
    const Window& w = sp.window;
    Window dw(2 * w.radius, w.dim);
    Vec acc = Vec::Zero(dw.size());
    SobolevLocalization r;
    for (std::size_t j = 0; j < sp.thetas.size(); ++j)
        for (Eigen::Index k = 0; k < sp.values[j].size(); ++k) {
            if (sp.edge[j](k) > boundary_tol) continue;
            acc += psi_star(sp.vectors[j].col(k).cast<cplx>(), w).cwiseAbs2();
            ++r.eigenpairs;
        }
    if (r.eigenpairs == 0) throw HorizonError("no eigenvector is clear of the window boundary");
    acc /= r.eigenpairs;
    for (int i = 0; i < dw.size(); ++i) r.value += std::pow(1.0 + euclid(dw.site(i)), 2 * s) * acc(i);
    return r;
}

// ---------------------------------------------------------------------------
// Direct and dual spectra

struct HausdorffReport {
    double distance = 0.0;
    std::size_t direct_count = 0;
    std::size_t dual_count = 0;
};

namespace detail {

/// Eigenvalues whose eigenvectors keep at least half their mass off the outer tenth of the window.
inline std::vector<double> bulk_eigenvalues(const LatticeOperator& op) {
    auto sys = diagonalize(op);
    const Window& w = sys.window;
    const int width = std::max(1, w.radius / 10);
    std::vector<double> out;
    for (int j = 0; j < sys.size(); ++j)
        if (edge_mass(sys.vectors.col(j).cast<cplx>(), w, width) < 0.5) out.push_back(sys.values(j));
    return out;
}

inline double one_sided(const std::vector<double>& a, const std::vector<double>& sorted_b) {
    double d = 0.0;
    for (double x : a) {
        auto it = std::lower_bound(sorted_b.begin(), sorted_b.end(), x);
        double best = 1e300;
        if (it != sorted_b.end()) best = *it - x;
        if (it != sorted_b.begin()) best = std::min(best, x - *std::prev(it));
        d = std::max(d, best);
    }
    return d;
}

}  // namespace detail

/// Hausdorff distance between the pooled bulk spectra of H_x and L_theta over midpoint phase grids.
inline HausdorffReport spectra_hausdorff(const Potential& v, const Frequency& alpha, int radius, int phase_count,
                                         int jobs = 1) {
    if (alpha.dim() != 1) throw ConfigError("spectra comparison is implemented for d = 1");
    auto phases = midpoint_thetas(phase_count);
    std::vector<std::vector<double>> hs(phases.size()), ls(phases.size());
    parallel_for(phase_count, jobs, [&](int j) {
        double ph = phases[static_cast<std::size_t>(j)];
        hs[static_cast<std::size_t>(j)] = detail::bulk_eigenvalues(build_schrodinger(v, alpha, {ph}, Window(radius)));
        ls[static_cast<std::size_t>(j)] = detail::bulk_eigenvalues(build_dual(v, alpha, ph, Window(radius)));
    });
    std::vector<double> a, b;
    for (std::size_t j = 0; j < phases.size(); ++j) {
        a.insert(a.end(), hs[j].begin(), hs[j].end());
        b.insert(b.end(), ls[j].begin(), ls[j].end());
    }
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    HausdorffReport r;
    r.direct_count = a.size();
    r.dual_count = b.size();
    if (a.empty() || b.empty()) throw NumericalError("empty bulk spectrum");
    r.distance = std::max(detail::one_sided(a, b), detail::one_sided(b, a));
    return r;
}

// ---------------------------------------------------------------------------
// Grid form of the l^2 / l^1 estimate

struct L1GridCheck {
    double lhs = 0.0;  // max_j ||F(x_j)||^2
    double rhs = 0.0;  // (1/W) sum_k (sum_m |F~(theta_k, m)|)^2
    bool holds = false;
};

inline L1GridCheck lemma_l1_check(const CMat& field, const DualityGrids& g, const Frequency& alpha) {
    CMat ft = duality_transform(field, g, alpha, false);
    L1GridCheck c;
    c.lhs = field.rowwise().squaredNorm().maxCoeff();
    c.rhs = ft.cwiseAbs().rowwise().sum().squaredNorm() / static_cast<double>(ft.rows());
    c.holds = c.lhs <= c.rhs * (1 + 1e-12);
    return c;
}

/// F(x_j, .) = Q(x_j, T, K) delta_p - g_K(H_{x_j}) delta_p on the x-grid.
inline CMat velocity_defect_field(const Potential& v, const Frequency& alpha, const EnergyWindowSet& K,
                                  const DualityGrids& g, const IDSTable& ids, int p, double T, int jobs = 1) {
    CMat f(g.x_count(), g.theta_count());
    parallel_for(g.x_count(), jobs, [&](int j) {
        auto sys = diagonalize(build_schrodinger(v, alpha, g.x_point(j), g.sites));
        StateVector d = delta_state(g.sites, p);
        f.row(j) = (apply_time_averaged_velocity(sys, K, T, d) - apply_asymptotic_velocity(sys, K, ids, d)).transpose();
    });
    return f;
}

// ---------------------------------------------------------------------------
// Uniform localization

struct UniformLocalization {
    double envelope = 0.0;  // M with |psi(m)| <= M (1 + |m - c|)^{-s}
    int multiplicity = 0;   // eigenvectors sharing a centre at one theta
    double constant = 0.0;  // C(s, M) on the window
    Vec profile;            // sup over theta and t of |<delta_p, 1_K e^{itL} delta_0>|
    Vec bound;              // C / (1 + |p|)^{2s - d}
    bool holds = false;
};

inline UniformLocalization uniform_localization_check(const DualSpectrum& sp, double s,
                                                      const std::vector<double>& t_samples = {5, 10, 20, 50}) {
    const Window& w = sp.window;
    const int origin = w.index(LatticeSite(static_cast<std::size_t>(w.dim), 0));
    UniformLocalization u;
    u.profile = Vec::Zero(w.size());
    for (std::size_t j = 0; j < sp.thetas.size(); ++j) {
        std::vector<int> centres;
        for (Eigen::Index k = 0; k < sp.vectors[j].cols(); ++k) {
            Vec a = sp.vectors[j].col(k).cwiseAbs();
            Eigen::Index c;
            a.maxCoeff(&c);
            LatticeSite cs = w.site(static_cast<int>(c));
            centres.push_back(static_cast<int>(c));
            for (int i = 0; i < w.size(); ++i) {
                LatticeSite m = w.site(i);
                for (std::size_t q = 0; q < m.size(); ++q) m[q] -= cs[q];
                u.envelope = std::max(u.envelope, a(i) * std::pow(1.0 + euclid(m), s));
            }
        }
        std::sort(centres.begin(), centres.end());
        for (std::size_t a = 0, b = 0; a < centres.size(); a = b) {
            while (b < centres.size() && centres[b] == centres[a]) ++b;
            u.multiplicity = std::max(u.multiplicity, static_cast<int>(b - a));
        }
        for (double t : t_samples)
            u.profile = u.profile.cwiseMax(detail::propagator_column(sp.vectors[j], sp.values[j], origin, t));
    }
    // sum over centres l of (1 + |l|)^{-s} (1 + |p - l|)^{-s}
    const double expo = 2 * s - w.dim;
    Vec conv(w.size());
    for (int i = 0; i < w.size(); ++i) {
        LatticeSite p = w.site(i);
        double acc = 0.0;
        for (int l = 0; l < w.size(); ++l) {
            LatticeSite c = w.site(l), d = p;
            for (std::size_t q = 0; q < d.size(); ++q) d[q] -= c[q];
            acc += std::pow(1.0 + euclid(c), -s) * std::pow(1.0 + euclid(d), -s);
        }
        conv(i) = u.multiplicity * u.envelope * u.envelope * acc;
        u.constant = std::max(u.constant, conv(i) * std::pow(1.0 + euclid(p), expo));
    }
    u.bound.resize(w.size());
    u.holds = true;
    for (int i = 0; i < w.size(); ++i) {
        u.bound(i) = u.constant * std::pow(1.0 + euclid(w.site(i)), -expo);
        u.holds = u.holds && u.profile(i) <= u.bound(i) * (1 + 1e-12);
    }
    return u;
}

}  // namespace qplab

#endif

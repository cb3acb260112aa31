#ifndef QPLAB_DYNAMICS_HPP
#define QPLAB_DYNAMICS_HPP

// Time evolution, position moments, the current operator A = i(S+ - S-),
// spectral projections and the time-averaged velocity Q(x, T, K).

#include "qplab/ids.hpp"

#include <algorithm>
#include <cstdio>
#include <utility>
#include <vector>

namespace qplab {

using StateVector = CVec;

inline StateVector delta_state(const Window& w, const LatticeSite& site) {
    StateVector s = StateVector::Zero(w.size());
    s(w.index(site)) = 1.0;
    return s;
}

inline StateVector delta_state(const Window& w, int site = 0) { return delta_state(w, LatticeSite{site}); }

/// Finite union of closed intervals, kept sorted and disjoint.
class EnergyWindowSet {
public:
    EnergyWindowSet() = default;
    EnergyWindowSet(std::initializer_list<std::pair<double, double>> iv)
        : EnergyWindowSet(std::vector<std::pair<double, double>>(iv)) {}
    explicit EnergyWindowSet(std::vector<std::pair<double, double>> iv) {
        for (auto& [a, b] : iv)
            if (!(a <= b)) throw ConfigError("energy interval with a > b");
        std::sort(iv.begin(), iv.end());
        for (auto& p : iv) {
            if (!intervals_.empty() && p.first <= intervals_.back().second)
                intervals_.back().second = std::max(intervals_.back().second, p.second);
            else
                intervals_.push_back(p);
        }
    }

    static EnergyWindowSet everything() { return {{-1e300, 1e300}}; }

    bool contains(double E) const {
        for (const auto& [a, b] : intervals_)
            if (E >= a && E <= b) return true;
        return false;
    }
    bool empty() const { return intervals_.empty(); }
    const std::vector<std::pair<double, double>>& intervals() const { return intervals_; }

    std::string describe_containing(double E) const {
        for (const auto& [a, b] : intervals_)
            if (E >= a && E <= b) {
                char buf[64];
                std::snprintf(buf, sizeof buf, "[%g, %g]", a, b);
                return buf;
            }
        return "(none)";
    }

private:
    std::vector<std::pair<double, double>> intervals_;
};

inline std::vector<int> indices_in(const EigenSystem& sys, const EnergyWindowSet& K) {
    std::vector<int> idx;
    for (int j = 0; j < sys.size(); ++j)
        if (K.contains(sys.values(j))) idx.push_back(j);
    return idx;
}

inline Mat columns(const Mat& v, const std::vector<int>& idx) {
    Mat out(v.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t c = 0; c < idx.size(); ++c) out.col(static_cast<Eigen::Index>(c)) = v.col(idx[c]);
    return out;
}

/// psi(t) = sum_j exp(-i t E_j) <phi_j, psi0> phi_j.
inline StateVector evolve(const EigenSystem& sys, const StateVector& psi0, double t) {
    if (!std::isfinite(t)) throw InputError("evolution time must be finite");
    if (t == 0.0) return psi0;
    CVec c = sys.vectors.transpose().cast<cplx>() * psi0;
    for (int j = 0; j < sys.size(); ++j) c(j) *= expi(-t * sys.values(j));
    return sys.vectors.cast<cplx>() * c;
}

/// (A psi)(n) = i (psi(n+1) - psi(n-1)) on a one-dimensional window.
inline CMat current_operator(const Window& w) {
    if (w.dim != 1) throw ConfigError("current operator needs a one-dimensional window");
    const int n = w.size();
    CMat a = CMat::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i) {
        a(i, i + 1) = I;
        a(i + 1, i) = -I;
    }
    return a;
}

/// Position operator X as a diagonal.
inline Vec position_diagonal(const Window& w) {
    Vec x(w.size());
    for (int i = 0; i < w.size(); ++i) x(i) = i - w.radius;
    return x;
}

inline double mass_within(const StateVector& psi, const Window& w, int radius) {
    double m = 0.0;
    for (int i = 0; i < w.size(); ++i)
        if (std::abs(i - w.radius) <= radius) m += std::norm(psi(i));
    return m;
}

/// Mass on the outer `width` sites at each end of the window.
inline double boundary_mass(const StateVector& psi, const Window& w, int width = 8) {
    double m = 0.0;
    for (int i = 0; i < w.size(); ++i)
        if (std::abs(i - w.radius) > w.radius - width) m += std::norm(psi(i));
    return m;
}

inline int support_radius(const StateVector& psi, const Window& w) {
    int r = 0;
    for (int i = 0; i < w.size(); ++i)
        if (psi(i) != cplx{}) r = std::max(r, std::abs(i - w.radius));
    return r;
}

struct MomentResult {
    double value = 0.0;
    double boundary_mass = 0.0;
    bool horizon_ok = true;  // radius >= 4|t| + support radius
    bool flagged = false;    // boundary mass above 1e-8
};

/// sum_n |n|^p |psi(t, n)|^2.
inline MomentResult position_moment(const EigenSystem& sys, const StateVector& psi0, double t, double p) {
    if (!(p > 0.0)) throw PreconditionError("moment order must be positive");
    const Window& w = sys.window;
    StateVector psi = evolve(sys, psi0, t);
    MomentResult r;
    for (int i = 0; i < w.size(); ++i) {
        double n = std::abs(i - w.radius);
        if (n > 0) r.value += std::pow(n, p) * std::norm(psi(i));
    }
    r.boundary_mass = boundary_mass(psi, w);
    r.horizon_ok = w.radius >= 4.0 * std::abs(t) + support_radius(psi0, w);
    r.flagged = r.boundary_mass > 1e-8;
    return r;
}

/// P = sum over E_j in K of phi_j phi_j^T.
inline Mat spectral_projection(const EigenSystem& sys, const EnergyWindowSet& K) {
    Mat vk = columns(sys.vectors, indices_in(sys, K));
    return vk * vk.transpose();
}

/// (1/T) int_0^T exp(i t w) dt; |w| < 1e-12 is the resonant branch.
inline cplx kappa(double T, double omega) {
    if (std::abs(omega) < 1e-12) return 1.0;
    double a = T * omega;
    double s = std::sin(0.5 * a);
    return {std::sin(a) / a, 2.0 * s * s / a};
}

struct VelocityEstimate {
    CMat matrix;
    double T = 0.0;
    Window window;
    double hermitian_defect = 0.0;
    double norm_estimate = 0.0;
};

namespace detail {

/// C = V^T J V with (J V)_n = V_{n+1} - V_{n-1}; real antisymmetric.
inline Mat current_in_basis(const Mat& vk) {
    const auto n = vk.rows();
    Mat jv = Mat::Zero(n, vk.cols());
    if (n > 1) {
        jv.topRows(n - 1) += vk.bottomRows(n - 1);
        jv.bottomRows(n - 1) -= vk.topRows(n - 1);
    }
    return vk.transpose() * jv;
}

/// Real and imaginary parts of (i C) o kappa.
inline std::pair<Mat, Mat> weighted_current(const Mat& c, const Vec& e, double T) {
    const auto k = c.rows();
    Mat re(k, k), im(k, k);
    for (Eigen::Index b = 0; b < k; ++b)
        for (Eigen::Index a = 0; a < k; ++a) {
            cplx kp = kappa(T, e(a) - e(b));
            re(a, b) = -c(a, b) * kp.imag();
            im(a, b) = c(a, b) * kp.real();
        }
    return {re, im};
}

inline Vec selected_values(const EigenSystem& sys, const std::vector<int>& idx) {
    Vec e(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) e(static_cast<Eigen::Index>(i)) = sys.values(idx[i]);
    return e;
}

}  // namespace detail

/// Q(x,T,K) = (1/T) int_0^T e^{itH} P A P e^{-itH} dt, assembled in the site basis.
inline VelocityEstimate time_averaged_velocity(const EigenSystem& sys, const EnergyWindowSet& K, double T) {
    if (!(T > 0.0)) throw PreconditionError("averaging time must be positive");
    auto idx = indices_in(sys, K);
    Mat vk = columns(sys.vectors, idx);
    auto [re, im] = detail::weighted_current(detail::current_in_basis(vk), detail::selected_values(sys, idx), T);
    VelocityEstimate est;
    est.T = T;
    est.window = sys.window;
    est.matrix.resize(vk.rows(), vk.rows());
    est.matrix.real() = vk * re * vk.transpose();
    est.matrix.imag() = vk * im * vk.transpose();
    est.hermitian_defect = (est.matrix - est.matrix.adjoint()).cwiseAbs().maxCoeff();
    est.norm_estimate = operator_norm_estimate(est.matrix);
    return est;
}

/// Q(x,T,K) psi without forming the site-basis matrix.
inline StateVector apply_time_averaged_velocity(const EigenSystem& sys, const EnergyWindowSet& K, double T,
                                                const StateVector& psi) {
    if (!(T > 0.0)) throw PreconditionError("averaging time must be positive");
    auto idx = indices_in(sys, K);
    Mat vk = columns(sys.vectors, idx);
    auto [re, im] = detail::weighted_current(detail::current_in_basis(vk), detail::selected_values(sys, idx), T);
    CVec c = vk.transpose().cast<cplx>() * psi;
    CVec g = re.cast<cplx>() * c + I * (im.cast<cplx>() * c);
    return vk.cast<cplx>() * g;
}

/// Time average of a general observable B in the eigenbasis of the truncation.
inline CMat time_average(const EigenSystem& sys, const EnergyWindowSet& K, double T, const CMat& obs) {
    if (!(T > 0.0)) throw PreconditionError("averaging time must be positive");
    auto idx = indices_in(sys, K);
    CMat vk = columns(sys.vectors, idx).cast<cplx>();
    CMat c = vk.adjoint() * obs * vk;
    Vec e = detail::selected_values(sys, idx);
    for (Eigen::Index b = 0; b < c.cols(); ++b)
        for (Eigen::Index a = 0; a < c.rows(); ++a) c(a, b) *= kappa(T, e(a) - e(b));
    return vk * c * vk.adjoint();
}

namespace detail {

inline Vec symbol_on(const EigenSystem& sys, const std::vector<int>& idx, const EnergyWindowSet& K,
                     const IDSTable& ids, double h) {
    Vec g(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) {
        double E = sys.values(idx[i]);
        try {
            g(static_cast<Eigen::Index>(i)) = velocity_symbol(ids, E, h);
        } catch (const SingularDensityError& e) {
            throw SingularDensityError(std::string(e.what()) + " on K interval " + K.describe_containing(E));
        }
    }
    return g;
}

}  // namespace detail

/// g_K(H) = sum over E_j in K of g(E_j) phi_j phi_j^T with g = 1/(pi N').
inline Mat asymptotic_velocity(const EigenSystem& sys, const EnergyWindowSet& K, const IDSTable& ids,
                               double h = -1.0) {
    auto idx = indices_in(sys, K);
    Mat vk = columns(sys.vectors, idx);
    Vec g = detail::symbol_on(sys, idx, K, ids, h);
    return vk * g.asDiagonal() * vk.transpose();
}

inline StateVector apply_asymptotic_velocity(const EigenSystem& sys, const EnergyWindowSet& K, const IDSTable& ids,
                                             const StateVector& psi, double h = -1.0) {
    auto idx = indices_in(sys, K);
    Mat vk = columns(sys.vectors, idx);
    Vec g = detail::symbol_on(sys, idx, K, ids, h);
    CVec c = vk.transpose().cast<cplx>() * psi;
    return vk.cast<cplx>() * (g.cast<cplx>().asDiagonal() * c);
}

/// Least-squares slope of log y against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace qplab

#endif

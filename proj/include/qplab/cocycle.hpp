#ifndef QPLAB_COCYCLE_HPP
#define QPLAB_COCYCLE_HPP

// Schrödinger cocycles (alpha, S_{E-v}): iterates, Lyapunov exponent and
// fibered rotation number by projective winding.

#include "qplab/model.hpp"

#include <algorithm>
#include <functional>

namespace qplab {

struct SL2 {
    double a11 = 1, a12 = 0, a21 = 0, a22 = 1;

    static SL2 identity() { return {}; }
    static SL2 rotation(double angle) {
        double c = std::cos(angle), s = std::sin(angle);
        return {c, -s, s, c};
    }

    double det() const { return a11 * a22 - a12 * a21; }

    /// Operator 2-norm.
    double norm() const {
        // largest singular value, computed on a rescaled copy to avoid overflow
        double s = std::max({std::abs(a11), std::abs(a12), std::abs(a21), std::abs(a22)});
        if (s == 0.0) return 0.0;
        double b11 = a11 / s, b12 = a12 / s, b21 = a21 / s, b22 = a22 / s;
        double f = b11 * b11 + b12 * b12 + b21 * b21 + b22 * b22;
        double d = std::abs(b11 * b22 - b12 * b21);
        double disc = std::max(0.0, f * f - 4.0 * d * d);
        return s * std::sqrt(0.5 * (f + std::sqrt(disc)));
    }

    SL2 operator*(const SL2& b) const {
        return {a11 * b.a11 + a12 * b.a21, a11 * b.a12 + a12 * b.a22, a21 * b.a11 + a22 * b.a21,
                a21 * b.a12 + a22 * b.a22};
    }
    SL2& operator*=(double s) {
        a11 *= s;
        a12 *= s;
        a21 *= s;
        a22 *= s;
        return *this;
    }
};

inline Point orbit_point(const Point& x0, const Frequency& alpha, long n) {
    Point y(x0.size());
    for (std::size_t k = 0; k < x0.size(); ++k) y[k] = frac(x0[k] + static_cast<double>(n) * alpha[k]);
    return y;
}

/// S_{E-v}(x) = [[E - v(x), -1], [1, 0]].
inline SL2 transfer_matrix(double E, const Potential& v, const Point& x) {
    return {E - v(x), -1.0, 1.0, 0.0};
}

inline SL2 transfer_matrix(double E, const Potential& v, double x) {
    return transfer_matrix(E, v, Point{x});
}

/// Product A(x + (n-1)alpha) ... A(x), stored as exp(log_scale) * current.
struct CocycleOrbit {
    static constexpr double kRenormThreshold = 0x1p512;

    SL2 current;
    double log_scale = 0.0;
    long steps = 0;
    Point x0;
    Point phase;

    CocycleOrbit() = default;
    explicit CocycleOrbit(Point start) : x0(start), phase(std::move(start)) {}

    void apply(const SL2& m) {
        current = m * current;
        ++steps;
        double nrm = current.norm();
        if (nrm > kRenormThreshold) {
            current *= 1.0 / nrm;
            log_scale += std::log(nrm);
        }
    }

    void step(double E, const Potential& v, const Frequency& alpha) {
        apply(transfer_matrix(E, v, phase));
        phase = orbit_point(x0, alpha, steps);
    }

    double log_norm() const { return log_scale + std::log(current.norm()); }
};

struct LyapunovEstimate {
    double value = 0.0;           // single orbit from x0
    double phase_averaged = 0.0;  // mean over equidistributed seeds
    long n_steps = 0;
    int seed_count = 0;
};

inline double lyapunov_single(double E, const Potential& v, const Frequency& alpha, const Point& x0, long n_steps) {
    CocycleOrbit orb(x0);
    for (long i = 0; i < n_steps; ++i) orb.step(E, v, alpha);
    return std::max(0.0, orb.log_norm() / static_cast<double>(n_steps));
}

inline LyapunovEstimate lyapunov_exponent(double E, const Potential& v, const Frequency& alpha, const Point& x0,
                                          long n_steps, int seeds = 32) {
    check_dims(v, alpha, x0.size());
    if (n_steps < 1000) throw PreconditionError("lyapunov_exponent needs at least 1000 steps");
    LyapunovEstimate est;
    est.n_steps = n_steps;
    est.seed_count = seeds;
    est.value = lyapunov_single(E, v, alpha, x0, n_steps);
    double acc = 0.0;
    for (int j = 0; j < seeds; ++j) {
        Point y = x0;
        for (auto& c : y) c = frac(c + static_cast<double>(j) / seeds);
        acc += j == 0 ? est.value : lyapunov_single(E, v, alpha, y, n_steps);
    }
    est.phase_averaged = seeds > 0 ? acc / seeds : est.value;
    return est;
}

/// Angle swept by the unit vector u under m, lifted to [-pi/2, 3pi/2).
/// For Schrödinger matrices u.(m u) = a cos^2 and the sweep never reaches
/// -pi/2, so this lift is continuous along the whole family.
inline double winding_increment(const SL2& m, double& u1, double& u2) {
    double w1 = m.a11 * u1 + m.a12 * u2;
    double w2 = m.a21 * u1 + m.a22 * u2;
    double delta = std::atan2(u1 * w2 - u2 * w1, u1 * w1 + u2 * w2);
    if (delta < -0.5 * pi) delta += two_pi;
    double r = std::hypot(w1, w2);
    u1 = w1 / r;
    u2 = w2 / r;
    return delta;
}

inline double fold_rotation(double rho) {
    double r = frac(rho);
    return std::min(r, 1.0 - r);
}

/// Rotation number of an arbitrary sequence of matrices (test hook).
inline double rotation_number_of(const std::function<SL2(long)>& matrices, long n_steps) {
    double u1 = 1.0, u2 = 0.0, total = 0.0;
    for (long i = 0; i < n_steps; ++i) total += winding_increment(matrices(i), u1, u2);
    return fold_rotation(total / (two_pi * static_cast<double>(n_steps)));
}

inline double rotation_number(double E, const Potential& v, const Frequency& alpha, const Point& x0, long n_steps) {
    check_dims(v, alpha, x0.size());
    if (n_steps < 1000) throw PreconditionError("rotation_number needs at least 1000 steps");
    return rotation_number_of(
        [&](long i) { return transfer_matrix(E, v, orbit_point(x0, alpha, i)); }, n_steps);
}

}  // namespace qplab

#endif

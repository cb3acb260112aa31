#ifndef QPLAB_SPECTRAL_HPP
#define QPLAB_SPECTRAL_HPP

// IDS consistency with the rotation number, Weyl m-functions and spectral
// densities read off a reducing frame.

#include "qplab/cocycle.hpp"
#include "qplab/ids.hpp"
#include "qplab/reduce.hpp"

#include <vector>

namespace qplab {

struct RhoIdsReport {
    std::vector<double> energies;
    std::vector<double> ids;
    std::vector<double> rho;
    double max_deviation = 0.0;  // max |N - 1 + 2 rho|
    double argmax = 0.0;
};

struct RhoIdsOptions {
    int window_radius = 1024;
    int phase_count = 32;
    long n_steps = 100000;
};

inline RhoIdsReport rho_ids_consistency(const Potential& v, const Frequency& alpha, const std::vector<double>& grid,
                                        const RhoIdsOptions& opt = {}) {
    auto table = ids_estimate(v, alpha, Window(opt.window_radius), opt.phase_count);
    Point x0(static_cast<std::size_t>(v.dim()), 0.0);
    RhoIdsReport r;
    for (double E : grid) {
        double n = table(E);
        double rho = rotation_number(E, v, alpha, x0, opt.n_steps);
        r.energies.push_back(E);
        r.ids.push_back(n);
        r.rho.push_back(rho);
        double dev = std::abs(n - 1.0 + 2.0 * rho);
        if (dev > r.max_deviation) {
            r.max_deviation = dev;
            r.argmax = E;
        }
    }
    return r;
}

struct MValue {
    cplx m_plus;
    cplx m_minus;
    double E = 0.0;
    double x = 0.0;
};

namespace detail {

inline Mat2d frame_for_weyl(const BlochFrame& fr, double E, double x) {
    if (std::abs(E - fr.E) > 1e-9 * std::max(1.0, std::abs(E)))
        throw InputError("frame was built at E = " + std::to_string(fr.E) + ", not " + std::to_string(E));
    Mat2d b = fr.real_at(x + fr.alpha[0]);
    if (b(1, 0) * b(1, 0) + b(1, 1) * b(1, 1) < 1e-14) throw DegenerateFrameError("b21^2 + b22^2 below 1e-14");
    return b;
}

}  // namespace detail

/// m_+(x) = -conj(B(x + alpha) o i) for the real frame B; m_- = -conj(m_+) - (E - v(x)).
/// Equivalently m_+ = (-(b11 b21 + b12 b22) + i) / (b21^2 + b22^2).
inline MValue m_function_from_bloch(const BlochFrame& fr, double E, double x) {
    Mat2d b = detail::frame_for_weyl(fr, E, x);
    cplx mob = (b(0, 0) * I + b(0, 1)) / (b(1, 0) * I + b(1, 1));
    MValue m;
    m.E = E;
    m.x = x;
    m.m_plus = -std::conj(mob);
    m.m_minus = -std::conj(m.m_plus) - (E - fr.potential(x));
    return m;
}

/// G_00(x, E + i0) = -1 / (m_+ + m_- + E - v(x)).
inline cplx green_00(const BlochFrame& fr, double E, double x) {
    auto m = m_function_from_bloch(fr, E, x);
    return -1.0 / (m.m_plus + m.m_minus + E - fr.potential(x));
}

enum class DensityKind { mu00, mu01 };

/// Densities of the spectral measures of delta_0 (mu00) and the pair delta_0, delta_1 (mu01).
inline double spectral_density(const BlochFrame& fr, double E, double x, DensityKind which) {
    Mat2d b = detail::frame_for_weyl(fr, E, x);
    if (which == DensityKind::mu00) return (b(1, 0) * b(1, 0) + b(1, 1) * b(1, 1)) / two_pi;
    return (b(0, 0) * b(1, 0) + b(0, 1) * b(1, 1)) / two_pi;
}

/// (b21(x) b21(x+alpha) + b22(x) b22(x+alpha)) / 2 pi, the alternative mu01 display;
/// kept for the sign/shape reconciliation report.
inline double mu01_alternative_form(const BlochFrame& fr, double E, double x) {
    Mat2d b0 = detail::frame_for_weyl(fr, E, x);
    Mat2d b1 = detail::frame_for_weyl(fr, E, x + fr.alpha[0]);
    return (b0(1, 0) * b1(1, 0) + b0(1, 1) * b1(1, 1)) / two_pi;
}

}  // namespace qplab

#endif

#ifndef QPLAB_IDS_HPP
#define QPLAB_IDS_HPP

// Integrated density of states by phase-averaged eigenvalue counting.

#include "qplab/linalg.hpp"

#include <algorithm>
#include <vector>

namespace qplab {

struct IDSTable {
    Vec energies;  // uniform grid
    Vec values;    // N at the grid points
    double grid_step = 0.0;
    int phase_count = 0;
    Window window;
    double bandwidth = 0.01;
    std::vector<double> pooled;  // all eigenvalues of all phases, sorted

    double e_min() const { return energies(0); }
    double e_max() const { return energies(energies.size() - 1); }

    /// Exact counting function of the pooled spectra at any E.
    double operator()(double E) const {
        auto it = std::upper_bound(pooled.begin(), pooled.end(), E);
        return static_cast<double>(it - pooled.begin()) / static_cast<double>(pooled.size());
    }
};

inline constexpr double kDensityFloor = 1e-4;

/// Phase points used for averaging over T^d.
inline std::vector<Point> phase_grid(int dim, int count, double offset = 0.0) {
    std::vector<Point> pts;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int j = 0; j < count; ++j) {
        double x1 = frac(offset + (j + 0.5) / count);
        if (dim == 1)
            pts.push_back({x1});
        else
            pts.push_back({x1, frac(offset + (j + 0.5) * g)});
    }
    return pts;
}

inline IDSTable ids_estimate(const Potential& v, const Frequency& alpha, const Window& window, int phase_count,
                             double grid_step = 0.005, double bandwidth = 0.01) {
    if (phase_count < 8) throw PreconditionError("ids_estimate needs at least 8 phases");
    if (!(bandwidth > 0.0) || !(grid_step > 0.0)) throw ConfigError("bandwidth and grid step must be positive");
    IDSTable t;
    t.phase_count = phase_count;
    t.window = window;
    t.bandwidth = bandwidth;
    t.grid_step = grid_step;
    for (const auto& x : phase_grid(v.dim(), phase_count)) {
        Vec ev = eigenvalues(build_schrodinger(v, alpha, x, window));
        t.pooled.insert(t.pooled.end(), ev.data(), ev.data() + ev.size());
    }
    std::sort(t.pooled.begin(), t.pooled.end());
    const double bound = 2.0 + v.sup_bound() + 1.0;
    const int n = static_cast<int>(std::ceil(2.0 * bound / grid_step)) + 1;
    t.energies = Vec::LinSpaced(n, -bound, -bound + (n - 1) * grid_step);
    t.values.resize(n);
    for (int i = 0; i < n; ++i) t.values(i) = t(t.energies(i));
    return t;
}

/// Centered difference (N(E+h) - N(E-h)) / 2h.
inline double ids_derivative(const IDSTable& ids, double E, double h = -1.0) {
    if (h <= 0.0) h = ids.bandwidth;
    if (E - h < ids.e_min() || E + h > ids.e_max())
        throw RangeError("energy " + std::to_string(E) + " too close to the IDS grid edge");
    return (ids(E + h) - ids(E - h)) / (2.0 * h);
}

/// g(E) = 1 / (pi N'(E)); throws when N' is below the floor.
inline double velocity_symbol(const IDSTable& ids, double E, double h = -1.0) {
    double d = ids_derivative(ids, E, h);
    if (d < kDensityFloor)
        throw SingularDensityError("N'(" + std::to_string(E) + ") = " + std::to_string(d) + " below floor");
    return 1.0 / (pi * d);
}

}  // namespace qplab

#endif

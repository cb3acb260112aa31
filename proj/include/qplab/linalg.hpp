#ifndef QPLAB_LINALG_HPP
#define QPLAB_LINALG_HPP

// Symmetric eigensolvers backed by LAPACK.

#include "qplab/model.hpp"

#include <lapacke.h>

namespace qplab {

inline constexpr int kDefaultDimensionCap = 8192;

struct EigenSystem {
    Vec values;   // ascending
    Mat vectors;  // columns, orthonormal
    Window window;

    int size() const { return static_cast<int>(values.size()); }
};

namespace detail {

inline void fix_signs(Mat& v) {
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
        double scale = v.col(j).cwiseAbs().maxCoeff();
        for (Eigen::Index i = 0; i < v.rows(); ++i) {
            if (std::abs(v(i, j)) > 1e-10 * scale) {
                if (v(i, j) < 0) v.col(j) *= -1.0;
                break;
            }
        }
    }
}

inline void check_cap(int n, int cap) {
    if (n > cap)
        throw ResourceError("matrix dimension " + std::to_string(n) + " exceeds the eigensolver cap " +
                            std::to_string(cap));
}

}  // namespace detail

/// Eigenvalues only, ascending.
inline Vec eigenvalues(const LatticeOperator& op) {
    const int n = op.size();
    if (op.is_tridiagonal()) {
        Vec d = op.diagonal, e = op.offdiag;
        if (LAPACKE_dsterf(n, d.data(), e.data()) != 0) throw NumericalError("dsterf failed to converge");
        return d;
    }
    Mat a = op.dense;
    Vec w(n);
    if (LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'N', 'U', n, a.data(), n, w.data()) != 0)
        throw NumericalError("dsyevd failed to converge");
    return w;
}

/// Full eigendecomposition; first significant component of every eigenvector is positive.
inline EigenSystem diagonalize(const LatticeOperator& op, int cap = kDefaultDimensionCap) {
    const int n = op.size();
    detail::check_cap(n, cap);
    EigenSystem sys;
    sys.window = op.window;
    sys.values.resize(n);
    if (op.is_tridiagonal()) {
        sys.values = op.diagonal;
        Vec e = op.offdiag;
        sys.vectors.resize(n, n);
        if (LAPACKE_dstevd(LAPACK_COL_MAJOR, 'V', n, sys.values.data(), e.data(), sys.vectors.data(), n) != 0)
            throw NumericalError("dstevd failed to converge");
    } else {
        sys.vectors = op.dense;
        if (LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'U', n, sys.vectors.data(), n, sys.values.data()) != 0)
            throw NumericalError("dsyevd failed to converge");
    }
    detail::fix_signs(sys.vectors);
    return sys;
}

/// max_j |H phi_j - E_j phi_j|.
inline double eigen_residual(const LatticeOperator& op, const EigenSystem& sys) {
    Mat r = op.to_dense() * sys.vectors - sys.vectors * sys.values.asDiagonal();
    return r.colwise().norm().maxCoeff();
}

inline double orthonormality_defect(const EigenSystem& sys) {
    const auto n = sys.vectors.cols();
    return (sys.vectors.transpose() * sys.vectors - Mat::Identity(n, n)).cwiseAbs().maxCoeff();
}

/// Largest singular value by power iteration on M^* M.
template <class MatT>
double operator_norm_estimate(const MatT& m, int iters = 200) {
    using Scalar = typename MatT::Scalar;
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> v(m.cols());
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = Scalar(1.0 + 0.5 * std::sin(1.2345 * static_cast<double>(i)));
    v.normalize();
    double sigma = 0.0;
    for (int i = 0; i < iters; ++i) {
        Eigen::Matrix<Scalar, Eigen::Dynamic, 1> w = m.adjoint() * (m * v);
        double nw = w.norm();
        if (nw == 0.0) return 0.0;
        sigma = std::sqrt(nw);
        v = w / nw;
    }
    return sigma;
}

}  // namespace qplab

#endif

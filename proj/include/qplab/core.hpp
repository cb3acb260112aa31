#ifndef QPLAB_CORE_HPP
#define QPLAB_CORE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace qplab {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;
inline constexpr cplx I{0.0, 1.0};

// Error taxonomy. The CLI maps each family onto its own exit code.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct InputError : Error {
    using Error::Error;
};
struct ResourceError : Error {
    using Error::Error;
};
struct NumericalError : Error {
    using Error::Error;
};
struct RangeError : NumericalError {
    using NumericalError::NumericalError;
};
struct DegenerateFrameError : NumericalError {
    using NumericalError::NumericalError;
};
struct SingularDensityError : NumericalError {
    using NumericalError::NumericalError;
};
struct HorizonError : NumericalError {
    using NumericalError::NumericalError;
};
struct PreconditionError : InputError {
    using InputError::InputError;
};

/// Representative of x in [0, 1).
inline double frac(double x) {
    double f = x - std::floor(x);
    return f >= 1.0 ? 0.0 : f;
}

/// Distance from x to the nearest integer.
inline double dist_to_int(double x) {
    return std::abs(x - std::nearbyint(x));
}

inline cplx expi(double phase) {
    return {std::cos(phase), std::sin(phase)};
}

}  // namespace qplab

#endif

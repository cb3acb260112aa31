#ifndef QPLAB_MODEL_HPP
#define QPLAB_MODEL_HPP

// Potentials, frequencies and finite truncations of the direct operator H_x
// and of its long-range dual L_theta.

#include "qplab/core.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace qplab {

using Point = std::vector<double>;
using LatticeSite = std::vector<int>;

/// Real trigonometric polynomial on T^d, stored by its Fourier coefficients.
class Potential {
public:
    struct Term {
        LatticeSite n;
        cplx coeff;
    };

    Potential() = default;
    Potential(int dim, std::map<LatticeSite, cplx> coeffs, std::string id = "custom")
        : dim_(dim), id_(std::move(id)) {
        if (dim < 1 || dim > 2) throw ConfigError("potential dimension must be 1 or 2");
        for (auto& [n, c] : coeffs) {
            if (static_cast<int>(n.size()) != dim)
                throw ConfigError("Fourier index has wrong dimension in potential '" + id_ + "'");
            if (c != cplx{}) terms_.push_back({n, c});
        }
    }

    static Potential zero(int dim = 1) { return Potential(dim, {}, "zero"); }

    /// v(x) = 2 lambda cos(2 pi x).
    static Potential almost_mathieu(double lambda) {
        if (lambda == 0.0) return Potential(1, {}, "amo");
        return Potential(1, {{{1}, cplx{lambda, 0.0}}, {{-1}, cplx{lambda, 0.0}}}, "amo");
    }

    /// v(x) = sum_k 2 a_k cos(2 pi k x), k = 1..size(a).
    static Potential cosine_series(const std::vector<double>& a) {
        std::map<LatticeSite, cplx> c;
        for (std::size_t k = 0; k < a.size(); ++k) {
            int kk = static_cast<int>(k) + 1;
            c[{kk}] = a[k];
            c[{-kk}] = a[k];
        }
        return Potential(1, std::move(c), "cosine_series");
    }

    /// v(x1, x2) = 2 a cos(2 pi x1) + 2 b cos(2 pi x2).
    static Potential two_frequency(double a, double b) {
        return Potential(2,
                         {{{1, 0}, a}, {{-1, 0}, a}, {{0, 1}, b}, {{0, -1}, b}},
                         "two_frequency");
    }

    int dim() const { return dim_; }
    const std::string& id() const { return id_; }
    const std::vector<Term>& terms() const { return terms_; }

    /// Largest |n|_inf in the Fourier support.
    int radius() const {
        int r = 0;
        for (const auto& t : terms_)
            for (int c : t.n) r = std::max(r, std::abs(c));
        return r;
    }

    cplx coefficient(const LatticeSite& n) const {
        for (const auto& t : terms_)
            if (t.n == n) return t.coeff;
        return {};
    }

    /// v_hat(-n) == conj(v_hat(n)) on the whole support.
    bool is_real(double tol = 1e-14) const {
        for (const auto& t : terms_) {
            LatticeSite m(t.n.size());
            for (std::size_t i = 0; i < m.size(); ++i) m[i] = -t.n[i];
            if (std::abs(coefficient(m) - std::conj(t.coeff)) > tol) return false;
        }
        return true;
    }

    double sup_bound() const {
        double s = 0.0;
        for (const auto& t : terms_) s += std::abs(t.coeff);
        return s;
    }

    double operator()(std::span<const double> x) const {
        double acc = 0.0;
        for (const auto& t : terms_) {
            double ph = 0.0;
            for (int i = 0; i < dim_; ++i) ph += t.n[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
            ph *= two_pi;
            acc += t.coeff.real() * std::cos(ph) - t.coeff.imag() * std::sin(ph);
        }
        return acc;
    }

    double operator()(double x) const { return (*this)(std::span<const double>(&x, 1)); }

private:
    int dim_ = 1;
    std::vector<Term> terms_;
    std::string id_ = "zero";
};

struct Convergent {
    double p;
    double q;
};

/// Frequency vector alpha; for d = 1 also its continued-fraction data.
class Frequency {
public:
    /// Denominators beyond this are not trusted when digits come from a double.
    static constexpr double kTrustedDenominator = 1e7;
    /// A convergent with q <= kSmallDenominator that is this close marks alpha as rational.
    static constexpr double kRationalGap = 1e-12;
    static constexpr double kSmallDenominator = 1e6;

    static Frequency golden() { return from_value((std::sqrt(5.0) - 1.0) / 2.0); }

    /// d = 1 from a real value. Rational or near-rational inputs are rejected.
    static Frequency from_value(double alpha) {
        if (!std::isfinite(alpha)) throw ConfigError("frequency must be finite");
        Frequency f;
        f.alpha_ = {frac(alpha)};
        f.expand_value();
        return f;
    }

    /// d = 1 from continued-fraction digits [0; a1, a2, ...].
    static Frequency from_digits(const std::vector<double>& digits) {
        if (digits.empty()) throw ConfigError("continued fraction needs at least one digit");
        for (double a : digits)
            if (!(a >= 1.0) || a != std::floor(a)) throw ConfigError("partial quotients must be positive integers");
        long double x = 0.0L;
        for (auto it = digits.rbegin(); it != digits.rend(); ++it) x = 1.0L / (static_cast<long double>(*it) + x);
        Frequency f;
        f.alpha_ = {static_cast<double>(x)};
        f.digits_ = digits;
        f.build_convergents();
        return f;
    }

    static Frequency from_vector(const std::vector<double>& alpha) {
        if (alpha.empty() || alpha.size() > 2) throw ConfigError("frequency dimension must be 1 or 2");
        if (alpha.size() == 1) return from_value(alpha[0]);
        Frequency f;
        for (double a : alpha) {
            (void)from_value(a);  // each component irrational
            f.alpha_.push_back(frac(a));
        }
        // no short integer relation k.alpha in Z
        for (int k1 = -50; k1 <= 50; ++k1)
            for (int k2 = -50; k2 <= 50; ++k2) {
                if (k1 == 0 && k2 == 0) continue;
                if (dist_to_int(k1 * f.alpha_[0] + k2 * f.alpha_[1]) < 1e-10)
                    throw ConfigError("frequency components are rationally dependent");
            }
        return f;
    }

    int dim() const { return static_cast<int>(alpha_.size()); }
    const std::vector<double>& alpha() const { return alpha_; }
    double operator[](std::size_t i) const { return alpha_[i]; }
    double dot(std::span<const int> n) const {
        double s = 0.0;
        for (std::size_t i = 0; i < alpha_.size(); ++i) s += n[i] * alpha_[i];
        return s;
    }
    const std::vector<double>& digits() const { return digits_; }
    const std::vector<Convergent>& convergents() const { return convergents_; }

private:
    void expand_value() {
        const long double a = alpha_[0];
        long double r = a;
        long double p_prev = 1, q_prev = 0, p = 0, q = 1;  // p_{-1}/q_{-1}, p_0/q_0 with a_0 = 0
        if (std::abs(a) < kRationalGap) throw ConfigError("frequency is rational (alpha = 0)");
        for (int k = 0; k < 200; ++k) {
            if (r < kRationalGap) throw ConfigError("frequency is rational or near-rational");
            long double inv = 1.0L / r;
            long double digit = std::floor(inv);
            r = inv - digit;
            long double pn = digit * p + p_prev, qn = digit * q + q_prev;
            p_prev = p;
            q_prev = q;
            p = pn;
            q = qn;
            if (q <= kSmallDenominator && std::abs(q * a - p) < kRationalGap)
                throw ConfigError("frequency is rational or near-rational (convergent " +
                                  std::to_string(static_cast<long long>(p)) + "/" +
                                  std::to_string(static_cast<long long>(q)) + ")");
            if (q > kTrustedDenominator) break;
            digits_.push_back(static_cast<double>(digit));
        }
        build_convergents();
    }

    void build_convergents() {
        convergents_.clear();
        double p_prev = 1, q_prev = 0, p = 0, q = 1;
        convergents_.push_back({p, q});
        for (double digit : digits_) {
            double pn = digit * p + p_prev, qn = digit * q + q_prev;
            p_prev = p;
            q_prev = q;
            p = pn;
            q = qn;
            convergents_.push_back({p, q});
        }
    }

    std::vector<double> alpha_;
    std::vector<double> digits_;
    std::vector<Convergent> convergents_;  // index k holds p_k/q_k, k = 0 is 0/1
};

struct BetaEstimate {
    std::vector<double> ratios;  // ln q_{k+1} / q_k for k = 0..depth-1
    double proxy = 0.0;          // max over all computed k
    double tail = 0.0;           // max over k > depth/2
};

/// Finite-depth proxy for beta(alpha) = limsup ln(q_{k+1}) / q_k.
inline BetaEstimate beta_exponent(const Frequency& alpha, int depth) {
    if (alpha.dim() != 1) throw ConfigError("beta exponent is only defined for d = 1");
    const auto& cv = alpha.convergents();
    if (depth < 1 || depth > static_cast<int>(cv.size()) - 1)
        throw RangeError("requested depth " + std::to_string(depth) + " exceeds available convergents (" +
                         std::to_string(static_cast<int>(cv.size()) - 1) + ")");
    BetaEstimate est;
    for (int k = 0; k < depth; ++k) {
        double qk = cv[static_cast<std::size_t>(k)].q;
        double qk1 = cv[static_cast<std::size_t>(k) + 1].q;
        est.ratios.push_back(std::log(qk1) / qk);
    }
    est.proxy = *std::max_element(est.ratios.begin(), est.ratios.end());
    for (int k = depth / 2 + 1; k < depth; ++k) est.tail = std::max(est.tail, est.ratios[static_cast<std::size_t>(k)]);
    return est;
}

struct DiophantineReport {
    double margin = std::numeric_limits<double>::infinity();  // min dist(k.alpha, Z) |k|^tau
    LatticeSite argmin;
    bool pass = false;  // margin >= gamma
};

/// Exhaustive scan of 0 < |k|_inf <= k_max.
inline DiophantineReport diophantine_margin(const Frequency& alpha, double gamma, double tau, int k_max) {
    if (k_max < 1) throw PreconditionError("k_max must be >= 1");
    DiophantineReport rep;
    auto consider = [&](const LatticeSite& k) {
        int norm = 0;
        for (int c : k) norm = std::max(norm, std::abs(c));
        double val = dist_to_int(alpha.dot(k)) * std::pow(static_cast<double>(norm), tau);
        if (val < rep.margin) {
            rep.margin = val;
            rep.argmin = k;
        }
    };
    if (alpha.dim() == 1) {
        for (int k = 1; k <= k_max; ++k) consider({k});
    } else {
        // half space k1 > 0 or (k1 == 0, k2 > 0); dist is symmetric under k -> -k
        for (int k1 = 0; k1 <= k_max; ++k1)
            for (int k2 = -k_max; k2 <= k_max; ++k2) {
                if (k1 == 0 && k2 <= 0) continue;
                consider({k1, k2});
            }
    }
    rep.pass = rep.margin >= gamma;
    return rep;
}

/// Box of sites -N..N per axis, Dirichlet truncation.
struct Window {
    int radius = 1;
    int dim = 1;

    Window() = default;
    explicit Window(int n, int d = 1) : radius(n), dim(d) {
        if (n < 1) throw ConfigError("window radius must be >= 1");
        if (d < 1 || d > 2) throw ConfigError("window dimension must be 1 or 2");
    }

    int side() const { return 2 * radius + 1; }
    int size() const { return dim == 1 ? side() : side() * side(); }
    int index(const LatticeSite& n) const {
        int idx = n.front() + radius;
        if (dim == 2) idx = idx * side() + n.back() + radius;
        return idx;
    }
    LatticeSite site(int idx) const {
        if (dim == 1) return {idx - radius};
        return {idx / side() - radius, idx % side() - radius};
    }
    bool contains(const LatticeSite& n) const {
        for (int c : n)
            if (std::abs(c) > radius) return false;
        return true;
    }
};

enum class OperatorKind { schrodinger_1d, dual_zd };

struct LatticeOperator {
    OperatorKind kind = OperatorKind::schrodinger_1d;
    Window window;
    Vec diagonal;  // tridiagonal storage (schrodinger_1d)
    Vec offdiag;
    Mat dense;  // full storage (dual_zd)
    std::string potential_id;
    std::vector<double> alpha;
    Point phase;

    int size() const { return window.size(); }
    bool is_tridiagonal() const { return kind == OperatorKind::schrodinger_1d; }

    Mat to_dense() const {
        if (!is_tridiagonal()) return dense;
        const int n = size();
        Mat m = Mat::Zero(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = diagonal(i);
        for (int i = 0; i + 1 < n; ++i) m(i, i + 1) = m(i + 1, i) = offdiag(i);
        return m;
    }

    template <class Derived>
    CVec apply(const Eigen::MatrixBase<Derived>& v) const {
        if (!is_tridiagonal()) return dense.cast<cplx>() * v;
        const int n = size();
        CVec out = diagonal.cast<cplx>().cwiseProduct(v);
        for (int i = 0; i + 1 < n; ++i) {
            out(i) += offdiag(i) * v(i + 1);
            out(i + 1) += offdiag(i) * v(i);
        }
        return out;
    }
};

inline void check_dims(const Potential& v, const Frequency& alpha, std::size_t phase_dim) {
    if (v.dim() != alpha.dim() || static_cast<std::size_t>(v.dim()) != phase_dim)
        throw ConfigError("dimension mismatch between potential (d=" + std::to_string(v.dim()) +
                          "), frequency (d=" + std::to_string(alpha.dim()) + ") and phase (d=" +
                          std::to_string(phase_dim) + ")");
}

/// (H_x psi)(n) = psi(n-1) + psi(n+1) + v(x + n alpha) psi(n) on -N..N.
inline LatticeOperator build_schrodinger(const Potential& v, const Frequency& alpha, const Point& x,
                                         const Window& window) {
    check_dims(v, alpha, x.size());
    if (window.dim != 1) throw ConfigError("the direct operator lives on a one-dimensional window");
    if (!v.is_real()) throw InputError("potential violates the reality condition");
    LatticeOperator op;
    op.kind = OperatorKind::schrodinger_1d;
    op.window = window;
    const int n = window.size();
    op.diagonal.resize(n);
    op.offdiag = Vec::Ones(n - 1);
    Point y(x.size());
    for (int i = 0; i < n; ++i) {
        const int site = i - window.radius;
        for (std::size_t k = 0; k < x.size(); ++k) y[k] = x[k] + site * alpha[k];
        op.diagonal(i) = v(y);
    }
    op.potential_id = v.id();
    op.alpha = alpha.alpha();
    op.phase = x;
    return op;
}

/// (L_theta psi)(n) = sum_m v_hat(n-m) psi(m) + 2 cos 2pi(n.alpha + theta) psi(n) on the d-dim window.
inline LatticeOperator build_dual(const Potential& v, const Frequency& alpha, double theta, const Window& window) {
    if (v.dim() != alpha.dim()) check_dims(v, alpha, static_cast<std::size_t>(alpha.dim()));
    if (window.dim != v.dim()) throw ConfigError("dual window dimension must equal the potential dimension");
    if (!v.is_real()) throw InputError("potential violates the reality condition");
    for (const auto& t : v.terms())
        if (std::abs(t.coeff.imag()) > 1e-14)
            throw InputError("dual operator would be non-real: Fourier coefficient has an imaginary part");
    LatticeOperator op;
    op.kind = OperatorKind::dual_zd;
    op.window = window;
    const int n = window.size();
    op.dense = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        const LatticeSite site = window.site(i);
        op.dense(i, i) += 2.0 * std::cos(two_pi * (alpha.dot(site) + theta));
        for (const auto& t : v.terms()) {
            // (n, m) entry v_hat(n - m): m = n - k
            LatticeSite m(site.size());
            for (std::size_t k = 0; k < m.size(); ++k) m[k] = site[k] - t.n[k];
            if (!window.contains(m)) continue;
            op.dense(i, window.index(m)) += t.coeff.real();
        }
    }
    op.potential_id = v.id();
    op.alpha = alpha.alpha();
    op.phase = {theta};
    return op;
}

/// Debug dump of a dense matrix as CSV.
inline void write_matrix_csv(std::ostream& os, const Mat& m) {
    os.precision(17);
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) os << ',';
            os << m(i, j);
        }
        os << '\n';
    }
}

}  // namespace qplab

#endif

#ifndef QPLAB_WEIGHTED_HPP
#define QPLAB_WEIGHTED_HPP

// Weighted l^2_s spaces on finite boxes of Z^d and brute-force checks of the
// convolution, square-root and convolution-Sobolev inequalities.

#include "qplab/model.hpp"

#include <functional>
#include <random>
#include <string>
#include <vector>

namespace qplab {

inline constexpr int kDefaultBox1d = 10000;
inline constexpr int kDefaultBox2d = 100;

inline int default_box(int d) { return d == 1 ? kDefaultBox1d : kDefaultBox2d; }

inline double site_norm(const LatticeSite& n) {
    double s = 0.0;
    for (int c : n) s += static_cast<double>(c) * c;
    return std::sqrt(s);
}

/// Values on the box |n|_inf <= box.radius; |n| in the weight is Euclidean.
struct WeightedSeq {
    Window box;
    Vec values;
    double s = 0.0;

    static WeightedSeq generate(const Window& box, double s, const std::function<double(const LatticeSite&)>& f) {
        WeightedSeq u{box, Vec(box.size()), s};
        for (int i = 0; i < box.size(); ++i) u.values(i) = f(box.site(i));
        return u;
    }
    static WeightedSeq delta(const Window& box, const LatticeSite& at, double s = 0.0) {
        WeightedSeq u{box, Vec::Zero(box.size()), s};
        u.values(box.index(at)) = 1.0;
        return u;
    }
    double at(const LatticeSite& n) const { return box.contains(n) ? values(box.index(n)) : 0.0; }
};

/// sum (1 + |n|)^{2s} |u(n)|^2 with the exponent given explicitly.
inline double weighted_norm_squared(const Vec& u, const Window& box, double s) {
    double acc = 0.0;
    for (int i = 0; i < box.size(); ++i)
        if (u(i) != 0.0) acc += std::pow(1.0 + site_norm(box.site(i)), 2 * s) * u(i) * u(i);
    return acc;
}

inline double weighted_norm_squared(const WeightedSeq& u) { return weighted_norm_squared(u.values, u.box, u.s); }

/// ||u||_{l^2_s} (the square root).
inline double weighted_norm(const WeightedSeq& u) { return std::sqrt(weighted_norm_squared(u)); }
inline double weighted_norm(const WeightedSeq& u, double s) { return std::sqrt(weighted_norm_squared(u.values, u.box, s)); }

/// (u * v)(n) = sum_m u(n - m) v(m) on the box of radius r_u + r_v.
inline WeightedSeq convolve(const WeightedSeq& u, const WeightedSeq& v) {
    if (u.box.dim != v.box.dim) throw ConfigError("convolution of sequences on different lattices");
    Window out(u.box.radius + v.box.radius, u.box.dim);
    WeightedSeq c{out, Vec::Zero(out.size()), 0.0};
    std::vector<int> nz_v;
    for (int j = 0; j < v.box.size(); ++j)
        if (v.values(j) != 0.0) nz_v.push_back(j);
    if (u.box.dim == 1) {
        for (int i = 0; i < u.box.size(); ++i) {
            double a = u.values(i);
            if (a == 0.0) continue;
            // site (i - r_u) + (j - r_v) has index i + j in the output box
            for (int j : nz_v) c.values(i + j) += a * v.values(j);
        }
        return c;
    }
    for (int i = 0; i < u.box.size(); ++i) {
        double a = u.values(i);
        if (a == 0.0) continue;
        LatticeSite ni = u.box.site(i);
        for (int j : nz_v) {
            LatticeSite n = v.box.site(j);
            for (std::size_t k = 0; k < n.size(); ++k) n[k] += ni[k];
            c.values(out.index(n)) += a * v.values(j);
        }
    }
    return c;
}

// ---------------------------------------------------------------------------
// Convolution inequality

struct ConvolutionReport {
    double s1 = 0, s2 = 0;
    int d = 1;
    std::vector<double> a_norm;     // |a|
    std::vector<double> sums;       // sum_n (1+|a-n|)^{-s1} (1+|n|)^{-s2}
    std::vector<double> constants;  // sums * (1+|a|)^{s1+s2-d}
    double constant = 0.0;          // max of constants
    double growth = 0.0;            // max over the outer half of a / max over the inner half
    double decay_exponent = 0.0;    // fitted: sums ~ (1+|a|)^{-decay_exponent}
    double box_change = 0.0;        // max relative change of the sums when the box doubles
    bool passes = false;
};

namespace detail {

inline double convolution_sum(const LatticeSite& a, double s1, double s2, const Window& box) {
    double acc = 0.0;
    LatticeSite diff(a.size());
    for (int i = 0; i < box.size(); ++i) {
        LatticeSite n = box.site(i);
        for (std::size_t k = 0; k < n.size(); ++k) diff[k] = a[k] - n[k];
        acc += std::pow(1.0 + site_norm(diff), -s1) * std::pow(1.0 + site_norm(n), -s2);
    }
    return acc;
}

}  // namespace detail

inline double convolution_sum(const LatticeSite& a, double s1, double s2, int box) {
    return detail::convolution_sum(a, s1, s2, Window(box, static_cast<int>(a.size())));
}

/// c is "bounded" when the fitted constants on the outer half of a_list stay within 10% of the inner half.
inline ConvolutionReport verify_convolution_lemma(double s1, double s2, int d, const std::vector<LatticeSite>& a_list,
                                                  int box = -1) {
    if (!(s1 + s2 - d > 0)) throw PreconditionError("convolution sum diverges unless s1 + s2 > d");
    if (a_list.empty()) throw PreconditionError("empty list of shifts");
    if (box < 0) box = default_box(d);
    Window w(box, d), w2(2 * box, d);
    ConvolutionReport r{s1, s2, d, {}, {}, {}, 0, 0, 0, 0, false};
    for (const auto& a : a_list) {
        if (static_cast<int>(a.size()) != d) throw ConfigError("shift has the wrong dimension");
        double s = detail::convolution_sum(a, s1, s2, w);
        double s_big = detail::convolution_sum(a, s1, s2, w2);
        double an = site_norm(a);
        r.a_norm.push_back(an);
        r.sums.push_back(s);
        r.constants.push_back(s * std::pow(1.0 + an, s1 + s2 - d));
        r.box_change = std::max(r.box_change, std::abs(s_big - s) / s_big);
    }
    std::vector<std::size_t> order(a_list.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto x, auto y) { return r.a_norm[x] < r.a_norm[y]; });
    double inner = 0.0, outer = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        double c = r.constants[order[k]];
        r.constant = std::max(r.constant, c);
        double& half = 2 * k < order.size() ? inner : outer;
        half = std::max(half, c);
    }
    r.growth = order.size() > 1 ? outer / inner : 1.0;
    // decay exponent from the two largest |a| values
    if (order.size() > 1) {
        auto i1 = order[order.size() - 2], i2 = order.back();
        if (r.a_norm[i2] > r.a_norm[i1])
            r.decay_exponent = -std::log(r.sums[i2] / r.sums[i1]) / std::log((1 + r.a_norm[i2]) / (1 + r.a_norm[i1]));
    }
    r.passes = r.growth <= 1.1 && r.box_change < 1e-3;
    return r;
}

inline ConvolutionReport verify_convolution_lemma(double s1, double s2, const std::vector<int>& a_list, int box = -1) {
    std::vector<LatticeSite> a;
    for (int x : a_list) a.push_back({x});
    return verify_convolution_lemma(s1, s2, 1, a, box);
}

// ---------------------------------------------------------------------------
// Square root

struct SqrtReport {
    double lhs = 0.0;              // ||v||_{l^2_r}, v = |u|^{1/2}
    double norm_u = 0.0;           // ||u||_{l^2_s}
    double ratio = 0.0;            // lhs / norm_u, the constant of the stated inequality
    double holder_constant = 0.0;  // ||(1+|n|)^{r - s/2}||_{l^4} on the box
    bool holds = false;            // lhs <= holder_constant * norm_u^{1/2}
};

namespace detail {

inline void check_sqrt_range(double s, double r, int d) {
    double top = s / 2 - d / 4.0;
    if (r < 0) throw PreconditionError("r must be non-negative");
    if (!(r < top))
        throw PreconditionError("r = " + std::to_string(r) + " is outside [0, s/2 - d/4) = [0, " + std::to_string(top) +
                                "); the endpoint is excluded");
}

}  // namespace detail

inline SqrtReport verify_sqrt_lemma(const WeightedSeq& u, double s, double r) {
    const int d = u.box.dim;
    detail::check_sqrt_range(s, r, d);
    Vec v = u.values.cwiseAbs().cwiseSqrt();
    SqrtReport rep;
    rep.lhs = std::sqrt(weighted_norm_squared(v, u.box, r));
    rep.norm_u = weighted_norm(u, s);
    rep.ratio = rep.norm_u > 0 ? rep.lhs / rep.norm_u : 0.0;
    double q = 0.0;
    for (int i = 0; i < u.box.size(); ++i) q += std::pow(1.0 + site_norm(u.box.site(i)), 4 * (r - s / 2));
    rep.holder_constant = std::pow(q, 0.25);
    rep.holds = rep.lhs <= rep.holder_constant * std::sqrt(rep.norm_u) * (1 + 1e-12);
    return rep;
}

struct FamilyReport {
    std::string lemma;
    double constant = 0.0;          // fitted: max ratio over the family
    double constant_doubled = 0.0;  // same with the box doubled
    double box_change = 0.0;        // relative change of the constant
    double scale_probe = 0.0;       // ratio for the family member scaled by 1e-6
    bool all_hold = false;          // every member satisfies the proven form
    bool passes = false;
    int members = 0;
};

namespace detail {

/// Power laws, deltas and random-sign power laws, all in l^2_s with tails small enough
/// for the default box.
inline std::vector<std::function<double(const LatticeSite&)>> sqrt_family(double s, int d, std::uint64_t seed) {
    std::vector<std::function<double(const LatticeSite&)>> fam;
    for (double extra : {1.0, 1.5, 2.0, 4.0}) {
        double beta = s + d / 2.0 + extra;
        fam.push_back([beta](const LatticeSite& n) { return std::pow(1.0 + site_norm(n), -beta); });
    }
    fam.push_back([](const LatticeSite& n) { return site_norm(n) == 0.0 ? 1.0 : 0.0; });
    fam.push_back([](const LatticeSite& n) { return (n[0] == 3 && site_norm(n) == 3.0) ? 1.0 : 0.0; });
    for (int k = 0; k < 3; ++k) {
        double beta = s + d / 2.0 + 1.0 + k;
        std::uint64_t sd = seed + static_cast<std::uint64_t>(k);
        fam.push_back([beta, sd](const LatticeSite& n) {
            // deterministic in n so that box doubling sees the same values
            std::uint64_t h = sd;
            for (int c : n) h = h * 1000003u + static_cast<std::uint64_t>(c + 1000000);
            std::mt19937_64 rng(h);
            std::normal_distribution<double> g;
            return g(rng) * std::pow(1.0 + site_norm(n), -beta);
        });
    }
    return fam;
}

}  // namespace detail

inline FamilyReport sqrt_lemma_family(double s, double r, int d, int box = -1, std::uint64_t seed = 1) {
    detail::check_sqrt_range(s, r, d);
    if (box < 0) box = default_box(d);
    FamilyReport f;
    f.lemma = "sqrt";
    f.all_hold = true;
    auto fam = detail::sqrt_family(s, d, seed);
    for (const auto& gen : fam) {
        auto u = WeightedSeq::generate(Window(box, d), s, gen);
        auto rep = verify_sqrt_lemma(u, s, r);
        f.constant = std::max(f.constant, rep.ratio);
        f.all_hold = f.all_hold && rep.holds;
        auto u2 = WeightedSeq::generate(Window(2 * box, d), s, gen);
        auto rep2 = verify_sqrt_lemma(u2, s, r);
        f.constant_doubled = std::max(f.constant_doubled, rep2.ratio);
        f.all_hold = f.all_hold && rep2.holds;
        ++f.members;
    }
    f.box_change = std::abs(f.constant_doubled - f.constant) / f.constant_doubled;
    auto small = WeightedSeq::generate(Window(box, d), s, fam.front());
    small.values *= 1e-6;
    f.scale_probe = verify_sqrt_lemma(small, s, r).ratio;
    f.passes = f.all_hold && f.box_change < 1e-3;
    return f;
}

// ---------------------------------------------------------------------------
// Convolution in Sobolev-type weights

struct ConvSobolevReport {
    double lhs = 0.0;  // ||u * v||_{l^2_s}
    double rhs = 0.0;  // ||u||_{l^2_s1} ||v||_{l^2_s2}
    double ratio = 0.0;
    bool in_proven_range = false;  // s <= min(s1, s2) as well
};

namespace detail {

inline void check_conv_sobolev_range(double s1, double s2, double s, int d) {
    double top = s1 + s2 - d / 2.0;
    if (!(s > 0 && s < top))
        throw PreconditionError("s = " + std::to_string(s) + " is outside (0, s1 + s2 - d/2) = (0, " +
                                std::to_string(top) + ")");
}

}  // namespace detail

inline ConvSobolevReport verify_conv_sobolev_lemma(const WeightedSeq& u, const WeightedSeq& v, double s1, double s2,
                                                   double s) {
    const int d = u.box.dim;
    detail::check_conv_sobolev_range(s1, s2, s, d);
    auto c = convolve(u, v);
    ConvSobolevReport r;
    r.lhs = weighted_norm(c, s);
    r.rhs = weighted_norm(u, s1) * weighted_norm(v, s2);
    r.ratio = r.rhs > 0 ? r.lhs / r.rhs : 0.0;
    r.in_proven_range = s <= std::min(s1, s2);
    return r;
}

struct ConvSobolevFamilyReport {
    double constant = 0.0;          // max ratio over random pairs and the power-law pair
    double power_pair_ratio = 0.0;  // (1+|n|)^{-b1} * (1+|n|)^{-b2} on the box
    double power_pair_doubled = 0.0;
    double box_change = 0.0;
    std::vector<double> shift_ratios;  // u = delta_a, v = delta_0 for growing |a|
    double shift_growth = 0.0;         // last / first shift ratio
    bool passes = false;
    int trials = 0;
};

inline ConvSobolevFamilyReport conv_sobolev_family(double s1, double s2, double s, int d, int trials = 50,
                                                   std::uint64_t seed = 1, int box = -1, int support = -1) {
    detail::check_conv_sobolev_range(s1, s2, s, d);
    if (box < 0) box = default_box(d);
    if (support < 0) support = d == 1 ? 200 : 15;
    ConvSobolevFamilyReport f;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    const double b1 = s1 + d / 2.0 + 0.5, b2 = s2 + d / 2.0 + 0.5;
    Window sw(support, d);
    for (int t = 0; t < trials; ++t) {
        auto u = WeightedSeq::generate(sw, s1, [&](const LatticeSite& n) { return g(rng) * std::pow(1 + site_norm(n), -b1); });
        auto v = WeightedSeq::generate(sw, s2, [&](const LatticeSite& n) { return g(rng) * std::pow(1 + site_norm(n), -b2); });
        f.constant = std::max(f.constant, verify_conv_sobolev_lemma(u, v, s1, s2, s).ratio);
        ++f.trials;
    }
    auto power_ratio = [&](int bx) {
        auto u = WeightedSeq::generate(Window(bx, d), s1, [&](const LatticeSite& n) { return std::pow(1 + site_norm(n), -b1); });
        auto v = WeightedSeq::generate(Window(bx, d), s2, [&](const LatticeSite& n) { return std::pow(1 + site_norm(n), -b2); });
        return verify_conv_sobolev_lemma(u, v, s1, s2, s).ratio;
    };
    f.power_pair_ratio = power_ratio(box);
    f.power_pair_doubled = power_ratio(2 * box);
    f.box_change = std::abs(f.power_pair_doubled - f.power_pair_ratio) / f.power_pair_doubled;
    f.constant = std::max({f.constant, f.power_pair_ratio, f.power_pair_doubled});
    Window one(1, d);
    for (int a : {1, 10, 100, 1000}) {
        if (a > box) break;
        LatticeSite at(static_cast<std::size_t>(d), 0);
        at[0] = a;
        auto u = WeightedSeq::delta(Window(a, d), at, s1);
        auto v = WeightedSeq::delta(one, LatticeSite(static_cast<std::size_t>(d), 0), s2);
        double ratio = verify_conv_sobolev_lemma(u, v, s1, s2, s).ratio;
        f.shift_ratios.push_back(ratio);
        f.constant = std::max(f.constant, ratio);
    }
    f.shift_growth = f.shift_ratios.back() / f.shift_ratios.front();
    // shifts are bounded exactly when s <= min(s1, s2); growth above 1 means no constant exists
    f.passes = f.box_change < 1e-3 && f.shift_growth <= 1.0 + 1e-12;
    return f;
}

// ---------------------------------------------------------------------------
// Chain on a measured localization profile

struct ChainStage {
    std::string name;
    double exponent = 0.0;
    double norm = 0.0;       // on the full box
    double norm_half = 0.0;  // with h cut to the half box
    double rel_change = 0.0;
    bool member = false;          // rel_change below 1e-3
    bool step_justified = false;  // the inequality used for this step is in its proven range
};

/// h in l^2_s, h^{1/2} in l^2_{s/2-d/4-eps}, h^{1/2}*h^{1/2} in l^2_{s-d-eps}, its root in l^2_{s/2-3d/4-eps},
/// and finally the root in l^1.
inline std::vector<ChainStage> localization_chain(const Vec& h, const Window& w, double s, double eps = 0.05) {
    const int d = w.dim;
    const double r1 = s / 2 - d / 4.0 - eps, r2 = s - d - eps, r3 = s / 2 - 3 * d / 4.0 - eps;
    auto cut = [&](int radius) {
        Vec c = h;
        for (int i = 0; i < w.size(); ++i) {
            int m = 0;
            for (int x : w.site(i)) m = std::max(m, std::abs(x));
            if (m > radius) c(i) = 0.0;
        }
        return WeightedSeq{w, c, s};
    };
    auto stages_of = [&](const WeightedSeq& hh) {
        WeightedSeq root{w, hh.values.cwiseAbs().cwiseSqrt(), r1};
        auto conv = convolve(root, root);
        WeightedSeq wroot{conv.box, conv.values.cwiseAbs().cwiseSqrt(), r3};
        return std::vector<double>{weighted_norm(hh, s), weighted_norm(root, r1), weighted_norm(conv, r2),
                                   weighted_norm(wroot, r3), wroot.values.cwiseAbs().sum()};
    };
    auto full = stages_of(cut(w.radius));
    auto half = stages_of(cut(w.radius / 2));
    const char* names[] = {"h", "h^1/2", "h^1/2 * h^1/2", "(h^1/2 * h^1/2)^1/2", "l^1 of the root"};
    const double expo[] = {s, r1, r2, r3, 0.0};
    const bool justified[] = {true, r1 >= 0 && r1 < s / 2 - d / 4.0, r2 > 0 && r2 <= r1, r3 >= 0 && r3 < r2 / 2 - d / 4.0,
                              r3 > d / 2.0};
    std::vector<ChainStage> out;
    for (int k = 0; k < 5; ++k) {
        ChainStage st;
        st.name = names[k];
        st.exponent = expo[k];
        st.norm = full[static_cast<std::size_t>(k)];
        st.norm_half = half[static_cast<std::size_t>(k)];
        st.rel_change = std::abs(st.norm - st.norm_half) / st.norm;
        st.member = st.rel_change < 1e-3;
        st.step_justified = justified[k];
        out.push_back(st);
    }
    return out;
}

}  // namespace qplab

#endif

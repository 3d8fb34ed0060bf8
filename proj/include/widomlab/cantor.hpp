#pragma once

// Nested quadratic preimages E_s = (f_s o ... o f_1)^{-1}([-1, 1]) with
// f_1(z) = 2 z (z - 1) / g_1 + 1 and f_k(z) = z^2 / (2 g_k) + 1 - 1 / (2 g_k).

#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "widomlab/error.hpp"
#include "widomlab/potential.hpp"
#include "widomlab/realsets.hpp"

namespace widomlab {

inline constexpr int kCantorHorizon = 12;

/// How gamma_k continues past the explicit values.
struct GammaTail {
    enum class Kind { none, constant, saturating, bounded };
    Kind kind = Kind::none;
    double value = 0.125;  // constant: gamma_k = value; bounded: gamma_k >= value
    double c = 1.0;        // saturating: gamma_k = exp(-c 2^{-k}) / 4
};

struct GammaSequence {
    std::vector<double> values;  // gamma_1, gamma_2, ...
    GammaTail tail;

    static GammaSequence constant(double g) { return {{}, {GammaTail::Kind::constant, g, 0.0}}; }
    static GammaSequence saturating(double c = 1.0) { return {{}, {GammaTail::Kind::saturating, 0.0, c}}; }

    /// Whether gamma_k is known (k >= 1).
    [[nodiscard]] bool known(int k) const {
        return k <= static_cast<int>(values.size()) ||
               tail.kind == GammaTail::Kind::constant || tail.kind == GammaTail::Kind::saturating;
    }

    [[nodiscard]] double operator[](int k) const {
        if (k < 1) throw Error("invalid-input", "gamma index starts at 1");
        if (k <= static_cast<int>(values.size())) return values[static_cast<std::size_t>(k - 1)];
        switch (tail.kind) {
            case GammaTail::Kind::constant: return tail.value;
            case GammaTail::Kind::saturating: return 0.25 * std::exp(-tail.c * std::ldexp(1.0, -k));
            default: throw Error("gamma-out-of-range", "gamma_" + std::to_string(k) + " is not defined");
        }
    }

    /// log(1 / gamma_k), accurate when gamma_k is close to 1/4.
    [[nodiscard]] double log_inv(int k) const {
        if (k > static_cast<int>(values.size()) && tail.kind == GammaTail::Kind::saturating)
            return std::log(4.0) + tail.c * std::ldexp(1.0, -k);
        return -std::log((*this)[k]);
    }

    void validate(int upto) const {
        for (int k = 1; k <= upto; ++k) {
            double g = (*this)[k];
            if (!(g > 0.0 && g < 0.25)) throw Error("gamma-out-of-range", "need 0 < gamma_k < 1/4");
        }
        if (tail.kind == GammaTail::Kind::constant && !(tail.value > 0.0 && tail.value < 0.25))
            throw Error("gamma-out-of-range", "need 0 < gamma < 1/4");
        if (tail.kind == GammaTail::Kind::saturating && !(tail.c > 0.0))
            throw Error("gamma-out-of-range", "saturating tail needs c > 0");
        if (tail.kind == GammaTail::Kind::bounded && !(tail.value > 0.0 && tail.value < 0.25))
            throw Error("gamma-out-of-range", "tail bound needs 0 < gamma_min < 1/4");
    }

    /// Bracket for T(s) = sum_{k > s} 2^{-k} log(1 / gamma_k).
    [[nodiscard]] std::pair<double, double> tail_sum(int s) const {
        if (s < 0) throw Error("invalid-input", "negative level");
        int m = std::max(s, static_cast<int>(values.size()));
        validate(m);
        double head = 0.0;
        for (int k = s + 1; k <= m; ++k) head += std::ldexp(log_inv(k), -k);
        double w = std::ldexp(1.0, -m);
        switch (tail.kind) {
            case GammaTail::Kind::constant: {
                double v = head - w * std::log(tail.value);
                return {v, v};
            }
            case GammaTail::Kind::saturating: {
                double v = head + w * std::log(4.0) + tail.c * std::ldexp(1.0, -2 * m) / 3.0;
                return {v, v};
            }
            case GammaTail::Kind::bounded:
                // gamma_k in [gamma_min, 1/4).
                return {head + w * std::log(4.0), head - w * std::log(tail.value)};
            default: throw Error("divergent-tail", "no tail rule: the tail sum is not determined");
        }
    }
};

struct CantorIterate {
    int s = 0;
    RealCompactSet bands = make_set({{0.0, 1.0}});
    double log_leading = 0.0;  // log of the leading coefficient of F_s
};

namespace detail {

// Smaller root of z (z - 1) = y, y >= -1/4, without cancellation.
inline double small_root(double y) { return y == 0.0 ? 0.0 : -y / (0.5 + std::sqrt(0.25 + y)); }

inline double f_first(const GammaSequence& g, double z) { return 2.0 * z * (z - 1.0) / g[1] + 1.0; }
inline double f_later(double gk, double z) { return z * z / (2.0 * gk) + 1.0 - 1.0 / (2.0 * gk); }

}  // namespace detail

/// F_s(z) = f_s o ... o f_1 (z).
inline cplx cantor_map(const GammaSequence& g, int s, cplx z) {
    if (s == 0) return 2.0 * z - 1.0;
    cplx v = 2.0 * z * (z - 1.0) / g[1] + 1.0;
    for (int k = 2; k <= s; ++k) v = v * v / (2.0 * g[k]) + 1.0 - 1.0 / (2.0 * g[k]);
    return v;
}

/// F_s(x) and F_s'(x) by forward composition with the chain rule.
inline std::pair<double, double> cantor_map_derivative(const GammaSequence& g, int s, double x) {
    if (s == 0) return {2.0 * x - 1.0, 2.0};
    double v = detail::f_first(g, x), d = (4.0 * x - 2.0) / g[1];
    for (int k = 2; k <= s; ++k) {
        double gk = g[k];
        d *= v / gk;
        v = detail::f_later(gk, v);
    }
    return {v, d};
}

/// E_s by backward recursion: each pullback through f_k is a square root, the
/// final one through f_1 a quadratic. s = 0 gives [0, 1].
inline CantorIterate iterate(const GammaSequence& g, int s, int horizon = kCantorHorizon) {
    if (s < 0 || s > horizon) throw Error("invalid-input", "level outside [0, horizon]");
    g.validate(s);
    CantorIterate it;
    it.s = s;
    if (s == 0) {
        it.bands = make_set({{0.0, 1.0}});
        return it;
    }
    std::vector<Interval> cur{{-1.0, 1.0}};
    for (int k = s; k >= 2; --k) {
        double gk = g[k];
        std::vector<Interval> next;
        next.reserve(2 * cur.size());
        for (const auto& b : cur) {
            double a = std::sqrt(1.0 - 2.0 * gk * (1.0 - b.lo));
            double c = std::sqrt(1.0 - 2.0 * gk * (1.0 - b.hi));
            next.push_back({-c, -a});
            next.push_back({a, c});
        }
        cur = std::move(next);
    }
    double g1 = g[1];
    std::vector<Interval> out;
    out.reserve(2 * cur.size());
    for (const auto& b : cur) {
        double ylo = 0.5 * g1 * (b.lo - 1.0), yhi = 0.5 * g1 * (b.hi - 1.0);
        double slo = detail::small_root(ylo), shi = detail::small_root(yhi);
        out.push_back({shi, slo});
        out.push_back({1.0 - slo, 1.0 - shi});
    }
    // One Newton step on F_s(x) = +-1, kept only when it is a rounding-level correction.
    for (auto& b : out)
        for (double* e : {&b.lo, &b.hi}) {
            if (*e == 0.0 || *e == 1.0) continue;
            auto [v, d] = cantor_map_derivative(g, s, *e);
            double target = v > 0 ? 1.0 : -1.0;
            double step = (v - target) / d;
            if (std::isfinite(step) && std::abs(step) <= 1e-13 * std::max(1.0, std::abs(*e))) *e -= step;
        }
    it.bands = normalize(out);
    if (it.bands.size() != out.size()) throw Error("degenerate", "Cantor bands overlap");
    double l = std::log(2.0 / g1);
    for (int k = 2; k <= s; ++k) l = -std::log(2.0 * g[k]) + 2.0 * l;
    it.log_leading = l;
    return it;
}

/// log cap(E_s) = 2^{-s} (log(1/2) - log lc(F_s)).
inline double log_capacity_exact(const GammaSequence& g, int s) {
    if (s == 0) return std::log(0.25);
    return std::ldexp(std::log(0.5) - iterate(g, s).log_leading, -s);
}
inline double capacity_exact(const GammaSequence& g, int s) { return std::exp(log_capacity_exact(g, s)); }

/// log cap(K(gamma)) = -sum_k 2^{-k} log(1/gamma_k), as a bracket.
inline std::pair<double, double> log_capacity_limit_bracket(const GammaSequence& g) {
    auto [lo, hi] = g.tail_sum(0);
    return {-hi, -lo};
}

inline double capacity_limit(const GammaSequence& g) {
    auto [lo, hi] = log_capacity_limit_bracket(g);
    if (lo != hi) throw Error("divergent-tail", "capacity limit only bracketed; use the bracket form");
    return std::exp(lo);
}

/// W_{inf, 2^n}(K(gamma), 1) = exp(2^n T(n)) / 2, as a bracket.
inline std::pair<double, double> widom_infty_exact_bracket(const GammaSequence& g, int n) {
    if (n < 0) throw Error("invalid-input", "negative n");
    auto [lo, hi] = g.tail_sum(n);
    return {0.5 * std::exp(std::ldexp(lo, n)), 0.5 * std::exp(std::ldexp(hi, n))};
}

inline double widom_infty_exact(const GammaSequence& g, int n) {
    auto [lo, hi] = widom_infty_exact_bracket(g, n);
    if (lo != hi) throw Error("divergent-tail", "tail rule only bounds the value; use the bracket form");
    return lo;
}

/// W_{2, 2^n}(K(gamma), 1) = sqrt(1 - 2 gamma_{n+1}) exp(2^n T(n)) / 2, as a bracket.
inline std::pair<double, double> widom_2_exact_bracket(const GammaSequence& g, int n) {
    if (n < 0) throw Error("invalid-input", "negative n");
    double f = std::sqrt(1.0 - 2.0 * g[n + 1]);
    auto [lo, hi] = widom_infty_exact_bracket(g, n);
    return {f * lo, f * hi};
}

inline double widom_2_exact(const GammaSequence& g, int n) {
    auto [lo, hi] = widom_2_exact_bracket(g, n);
    if (lo != hi) throw Error("divergent-tail", "tail rule only bounds the value; use the bracket form");
    return lo;
}

/// g_{E_s}(z) = g_{[-1,1]}(F_s(z)) / 2^s.
inline double green_exact(const GammaSequence& g, int s, cplx z) {
    return std::ldexp(green_interval_closed_form(-1.0, 1.0, cantor_map(g, s, z)), -s);
}

}  // namespace widomlab

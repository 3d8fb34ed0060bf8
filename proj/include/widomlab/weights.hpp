#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "widomlab/error.hpp"
#include "widomlab/polynomial.hpp"
#include "widomlab/potential.hpp"
#include "widomlab/realsets.hpp"

namespace widomlab {

// ---------------------------------------------------------------------------
// Weight expressions

/// Pairs continuing as a_j = a, b_j = a + i eps0 q^j (j >= 0), multiplicity r.
struct GeometricTail {
    double a = 0.0;
    double eps0 = 1.0;
    double q = 0.5;
    int r = 1;
};

/// Factors |(x - a_j) / (x - b_j)|^{r_j}. `limit_points` lists accumulation
/// points of the full sequence; `streams` > 0 enables extrapolated detection of
/// undeclared limits on that many interleaved subsequences.
struct ProductPairs {
    std::vector<double> a;
    std::vector<cplx> b;
    std::vector<int> r;
    std::optional<GeometricTail> tail;
    std::vector<double> limit_points;
    int streams = 1;

    [[nodiscard]] std::size_t size() const noexcept { return a.size(); }
};

struct WeightExpr;

struct Const {
    double v = 1.0;
};
/// |R(x)|
struct AbsRational {
    RationalFunction r;
};
/// sqrt(R(x)), R >= 0 on K.
struct SqrtRational {
    RationalFunction r;
};
/// |R(x)|^{1/m}
struct MthRootRational {
    RationalFunction r;
    int m = 1;
};
/// (1 - u)^alpha (1 + u)^beta with u the affine map of `hull` onto [-1, 1].
struct Jacobi {
    double alpha = 0.0;
    double beta = 0.0;
    Interval hull{-1.0, 1.0};
};
struct InfiniteProduct {
    ProductPairs p;
};
/// exp(-1 / |x - x0|^alpha)
struct StrongZero {
    double x0 = 0.0;
    double alpha = 0.5;
};
struct Product {
    std::vector<WeightExpr> factors;
};
/// Piecewise-linear interpolation of samples, constant beyond the ends.
struct Tabulated {
    std::vector<double> x;
    std::vector<double> y;
};

struct WeightExpr {
    using Node = std::variant<Const, AbsRational, SqrtRational, MthRootRational, Jacobi, InfiniteProduct, StrongZero,
                              Product, Tabulated>;
    Node node;

    WeightExpr() : node(Const{}) {}
    template <class T>
        requires std::is_constructible_v<Node, T>
    WeightExpr(T t) : node(std::move(t)) {}

    template <class T>
    [[nodiscard]] bool is() const noexcept {
        return std::holds_alternative<T>(node);
    }
    template <class T>
    [[nodiscard]] const T& as() const {
        return std::get<T>(node);
    }
};

inline WeightExpr sqrt_one_minus_x2() { return SqrtRational{RationalFunction{-1.0, {{1, 0}, {-1, 0}}, {}}}; }
inline WeightExpr abs_x() { return AbsRational{RationalFunction{1.0, {{0, 0}}, {}}}; }

inline std::string kind_name(const WeightExpr& w) {
    static const char* names[] = {"const",          "abs_rational", "sqrt_rational", "mth_root_rational", "jacobi",
                                  "infinite_product", "strong_zero", "product",       "tabulated"};
    return names[w.node.index()];
}

namespace detail {

// log|x - p| where dx is x - xs measured exactly and xs may coincide with p.
inline double log_dist(double x, double p, double dx, double xs) {
    if (!std::isnan(dx) && p == xs) return std::log(std::abs(dx));
    return std::log(std::abs(x - p));
}

inline double log_dist(double x, cplx p, double dx, double xs) {
    double re = (!std::isnan(dx) && p.real() == xs) ? dx : x - p.real();
    return 0.5 * std::log(re * re + p.imag() * p.imag());
}

inline double log_abs_rational(const RationalFunction& r, double x, double dx, double xs) {
    double s = std::log(std::abs(r.c));
    for (const auto& a : r.zeros) s += log_dist(x, a, dx, xs);
    for (const auto& b : r.poles) s -= log_dist(x, b, dx, xs);
    return s;
}

// Sum of r (log|x - a| - log|x - a - i eps0 q^j|) over j >= 0, with a certified
// remainder bound (returned through rem).
inline double log_geometric_tail(const GeometricTail& t, double x, double dx, double xs, double& rem) {
    rem = 0.0;
    double d = (!std::isnan(dx) && t.a == xs) ? dx : x - t.a;
    if (d == 0.0) return -std::numeric_limits<double>::infinity();
    double s = 0.0, y = t.eps0;
    for (int j = 0; j < 4000; ++j) {
        double u = (y / d) * (y / d);
        double term = -0.5 * t.r * std::log1p(u);
        s += term;
        if (u < 1e-18) {
            double q2 = t.q * t.q;
            rem = 0.5 * t.r * u * q2 / (1.0 - q2);
            break;
        }
        y *= t.q;
    }
    return s;
}

}  // namespace detail

/// log w(x). `dx` is x - xs computed without cancellation (NaN when unknown),
/// where xs is the singular abscissa the caller is resolving.
inline double log_eval(const WeightExpr& w, double x, double dx = kNoOffset, double xs = kNoOffset) {
    return std::visit(
        [&](const auto& n) -> double {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Const>) {
                return std::log(n.v);
            } else if constexpr (std::is_same_v<T, AbsRational>) {
                return detail::log_abs_rational(n.r, x, dx, xs);
            } else if constexpr (std::is_same_v<T, SqrtRational>) {
                return 0.5 * detail::log_abs_rational(n.r, x, dx, xs);
            } else if constexpr (std::is_same_v<T, MthRootRational>) {
                return detail::log_abs_rational(n.r, x, dx, xs) / n.m;
            } else if constexpr (std::is_same_v<T, Jacobi>) {
                double len = n.hull.length();
                double s = 0.0;
                if (n.alpha != 0.0) {
                    double d = (!std::isnan(dx) && n.hull.hi == xs) ? -dx : n.hull.hi - x;
                    s += n.alpha * std::log(std::max(0.0, 2.0 * d / len));
                }
                if (n.beta != 0.0) {
                    double d = (!std::isnan(dx) && n.hull.lo == xs) ? dx : x - n.hull.lo;
                    s += n.beta * std::log(std::max(0.0, 2.0 * d / len));
                }
                return s;
            } else if constexpr (std::is_same_v<T, InfiniteProduct>) {
                double s = 0.0;
                for (std::size_t j = 0; j < n.p.size(); ++j)
                    s += n.p.r[j] * (detail::log_dist(x, n.p.a[j], dx, xs) - detail::log_dist(x, n.p.b[j], dx, xs));
                if (n.p.tail) {
                    double rem = 0.0;
                    s += detail::log_geometric_tail(*n.p.tail, x, dx, xs, rem);
                }
                return s;
            } else if constexpr (std::is_same_v<T, StrongZero>) {
                double d = (!std::isnan(dx) && n.x0 == xs) ? dx : x - n.x0;
                if (d == 0.0) return -std::numeric_limits<double>::infinity();
                return -std::pow(std::abs(d), -n.alpha);
            } else if constexpr (std::is_same_v<T, Product>) {
                double s = 0.0;
                for (const auto& f : n.factors) s += log_eval(f, x, dx, xs);
                return s;
            } else {
                if (n.x.empty()) throw Error("invalid-weight", "tabulated weight has no samples");
                double v;
                if (x <= n.x.front()) {
                    v = n.y.front();
                } else if (x >= n.x.back()) {
                    v = n.y.back();
                } else {
                    auto it = std::upper_bound(n.x.begin(), n.x.end(), x);
                    std::size_t k = static_cast<std::size_t>(it - n.x.begin());
                    double t = (x - n.x[k - 1]) / (n.x[k] - n.x[k - 1]);
                    v = (1 - t) * n.y[k - 1] + t * n.y[k];
                }
                return std::log(std::max(0.0, v));
            }
        },
        w.node);
}

inline double eval(const WeightExpr& w, double x) { return std::exp(log_eval(w, x)); }

struct WeightBracket {
    double lo = 0.0;
    double hi = 0.0;
};

/// Certified bracket on w(x); only infinite products with a tail widen it.
inline WeightBracket eval_bracket(const WeightExpr& w, double x) {
    if (const auto* ip = std::get_if<InfiniteProduct>(&w.node); ip && ip->p.tail) {
        double s = 0.0;
        for (std::size_t j = 0; j < ip->p.size(); ++j)
            s += ip->p.r[j] * (std::log(std::abs(x - ip->p.a[j])) - std::log(std::abs(x - ip->p.b[j])));
        double rem = 0.0;
        s += detail::log_geometric_tail(*ip->p.tail, x, kNoOffset, kNoOffset, rem);
        return {std::exp(s - rem), std::exp(s)};
    }
    if (const auto* pr = std::get_if<Product>(&w.node)) {
        WeightBracket b{1.0, 1.0};
        for (const auto& f : pr->factors) {
            WeightBracket fb = eval_bracket(f, x);
            b.lo *= fb.lo;
            b.hi *= fb.hi;
        }
        return b;
    }
    double v = eval(w, x);
    return {v, v};
}

/// w(x) to within tol; infinite products are truncated at a monotone bracket
/// narrower than tol.
inline double eval(const WeightExpr& w, double x, double tol) {
    WeightBracket b = eval_bracket(w, x);
    if (b.hi - b.lo > tol)
        throw Error("tol-unreachable", "achieved bracket [" + std::to_string(b.lo) + ", " + std::to_string(b.hi) + "]");
    return b.hi;
}

/// Points of the real line where log w is singular (zeros and near-real poles).
inline std::vector<double> singular_points(const WeightExpr& w) {
    std::vector<double> s;
    auto add_rat = [&](const RationalFunction& r) {
        for (const auto& a : r.zeros) s.push_back(a.real());
        for (const auto& b : r.poles) s.push_back(b.real());
    };
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, AbsRational> || std::is_same_v<T, SqrtRational> ||
                          std::is_same_v<T, MthRootRational>) {
                add_rat(n.r);
            } else if constexpr (std::is_same_v<T, Jacobi>) {
                if (n.alpha != 0.0) s.push_back(n.hull.hi);
                if (n.beta != 0.0) s.push_back(n.hull.lo);
            } else if constexpr (std::is_same_v<T, InfiniteProduct>) {
                if (n.p.size() <= 64)
                    for (std::size_t j = 0; j < n.p.size(); ++j) s.push_back(n.p.a[j]);
                for (double l : n.p.limit_points) s.push_back(l);
                if (n.p.tail) s.push_back(n.p.tail->a);
            } else if constexpr (std::is_same_v<T, StrongZero>) {
                s.push_back(n.x0);
            } else if constexpr (std::is_same_v<T, Product>) {
                for (const auto& f : n.factors)
                    for (double p : singular_points(f)) s.push_back(p);
            } else if constexpr (std::is_same_v<T, Tabulated>) {
                // kinks of the interpolant
                if (n.x.size() <= 256) s.insert(s.end(), n.x.begin(), n.x.end());
            }
        },
        w.node);
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
}

/// Dense sample of K (Chebyshev-clustered per band) used for sup / inf estimates.
inline std::vector<double> sample_set(const RealCompactSet& k, int per_band = 2001) {
    std::vector<double> xs;
    for (const auto& b : k.bands())
        for (int i = 0; i < per_band; ++i) xs.push_back(b.mid() - b.rad() * std::cos(std::numbers::pi * i / (per_band - 1)));
    return xs;
}

struct WeightCheck {
    bool ok = true;
    std::string reason;
    double max_value = 0.0;
};

/// Boundedness and non-negativity of w on K, checked analytically where
/// possible and by sampling otherwise.
inline WeightCheck check_weight(const RealCompactSet& k, const WeightExpr& w) {
    WeightCheck c;
    auto fail = [&](std::string why) {
        c.ok = false;
        c.reason = std::move(why);
    };
    auto poles_off_k = [&](const RationalFunction& r) {
        for (const auto& b : r.poles)
            if (b.imag() == 0.0 && k.contains(b.real())) return false;
        return true;
    };
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Const>) {
                if (!(n.v > 0.0)) fail("constant weight must be positive");
            } else if constexpr (std::is_same_v<T, AbsRational> || std::is_same_v<T, MthRootRational>) {
                if (!poles_off_k(n.r)) fail("pole on K");
                if constexpr (std::is_same_v<T, MthRootRational>)
                    if (n.m < 1) fail("m must be positive");
            } else if constexpr (std::is_same_v<T, SqrtRational>) {
                if (!poles_off_k(n.r)) fail("pole on K");
                if (!n.r.is_real()) fail("R must be real");
                for (double x : sample_set(k, 513))
                    if (n.r(x).real() < -1e-12 * std::max(1.0, std::abs(n.r(x).real()))) {
                        fail("R is negative on K");
                        break;
                    }
            } else if constexpr (std::is_same_v<T, Jacobi>) {
                if (n.alpha < 0 || n.beta < 0) fail("Jacobi exponents must be non-negative");
                if (!(n.hull.lo <= k.hull().lo && n.hull.hi >= k.hull().hi)) fail("Jacobi hull must contain K");
            } else if constexpr (std::is_same_v<T, StrongZero>) {
                if (!(n.alpha > 0)) fail("strong zero exponent must be positive");
            } else if constexpr (std::is_same_v<T, InfiniteProduct>) {
                if (n.p.a.size() != n.p.b.size() || n.p.a.size() != n.p.r.size()) fail("pair lists differ in length");
            } else if constexpr (std::is_same_v<T, Product>) {
                for (const auto& f : n.factors) {
                    WeightCheck fc = check_weight(k, f);
                    if (!fc.ok) {
                        fail(fc.reason);
                        break;
                    }
                }
            } else {
                if (n.x.size() != n.y.size() || n.x.size() < 2) fail("tabulated weight needs matching samples");
                if (!std::is_sorted(n.x.begin(), n.x.end())) fail("tabulated abscissae must increase");
                for (double v : n.y)
                    if (v < 0) fail("tabulated values must be non-negative");
            }
        },
        w.node);
    if (c.ok) {
        double mx = 0.0;
        for (double x : sample_set(k, 513)) {
            double v = eval(w, x);
            if (!std::isfinite(v)) {
                fail("weight not finite on K");
                break;
            }
            mx = std::max(mx, v);
        }
        c.max_value = mx;
        if (c.ok && !(mx > 0.0)) fail("weight vanishes on K");
    }
    return c;
}

// ---------------------------------------------------------------------------
// Product validation

struct ProductValidation {
    bool ok = true;
    std::vector<std::string> violations;
    double max_ratio_norm = 0.0;  // max_j sup_K |(x - a_j)/(x - b_j)|
    double sum_g = 0.0;           // sum r_j g_K(b_j), explicit pairs
    double sum_g_tail = 0.0;      // certified bound on the tail
    double sum_dist = 0.0;        // sum r_j |b_j - a_j|
    double sum_dist_tail = 0.0;
    double szego_lower = 0.0;     // exp(-(sum_g + sum_g_tail))
    std::vector<double> partial_g;  // cumulative sums every `stride` terms
};

namespace detail {

// sup over K of |x - a| / |x - b|.
inline double ratio_norm(const RealCompactSet& k, double a, cplx b) {
    auto f = [&](double x) { return std::abs(x - a) / std::abs(cplx(x, 0) - b); };
    double mx = 0.0;
    double c = b.real(), s2 = b.imag() * b.imag();
    for (const auto& band : k.bands()) {
        mx = std::max({mx, f(band.lo), f(band.hi)});
        if (c != a) {
            double xs = c + s2 / (c - a);
            if (band.contains(xs)) mx = std::max(mx, f(xs));
        }
    }
    return mx;
}

// Upper bound for g_K(b) from the band containing Re b (K contains the band).
inline double green_band_bound(const RealCompactSet& k, cplx b) {
    int i = k.band_index(b.real());
    if (i < 0) return std::numeric_limits<double>::infinity();
    const Interval& band = k.band(static_cast<std::size_t>(i));
    return green_interval_closed_form(band.lo, band.hi, b);
}

}  // namespace detail

/// Checks the hypotheses on (a_j, b_j, r_j): a_j in K, b_j off K, each factor
/// bounded by 1 on K, limit points closed, and the two summability series.
/// With `exact_green` the explicit pairs use the numeric Green function of K;
/// otherwise the closed-form Green function of the enclosing band, an upper bound.
inline ProductValidation validate_product(const EquilibriumMeasure& m, const ProductPairs& p, bool exact_green = true,
                                          std::size_t stride = 1) {
    const RealCompactSet& k = m.set();
    ProductValidation v;
    auto violate = [&](std::string s) {
        v.ok = false;
        v.violations.push_back(std::move(s));
    };
    if (p.a.size() != p.b.size() || p.a.size() != p.r.size()) {
        violate("pair lists differ in length");
        return v;
    }
    double scale = std::max(1.0, k.hull().length());
    for (std::size_t j = 0; j < p.size(); ++j) {
        if (!k.contains(p.a[j], 1e-14 * scale)) violate("a_" + std::to_string(j) + " not in K");
        if (p.b[j].imag() == 0.0 && k.contains(p.b[j].real())) violate("b_" + std::to_string(j) + " lies in K");
        if (p.r[j] < 1) violate("r_" + std::to_string(j) + " must be positive");
        double rn = detail::ratio_norm(k, p.a[j], p.b[j]);
        v.max_ratio_norm = std::max(v.max_ratio_norm, rn);
        if (rn > 1.0 + 1e-12) violate("factor " + std::to_string(j) + " exceeds 1 on K");
        double g = exact_green ? green_value(m, p.b[j]) : detail::green_band_bound(k, p.b[j]);
        v.sum_g += p.r[j] * g;
        v.sum_dist += p.r[j] * std::abs(p.b[j] - p.a[j]);
        if (stride > 0 && (j + 1) % stride == 0) v.partial_g.push_back(v.sum_g);
    }
    if (p.tail) {
        const GeometricTail& t = *p.tail;
        if (!(t.q > 0 && t.q < 1) || !(t.eps0 > 0) || t.r < 1) violate("invalid geometric tail");
        if (!k.contains(t.a, 1e-14 * scale)) violate("tail point not in K");
        int bi = k.band_index(t.a, 1e-14 * scale);
        if (v.ok && bi >= 0) {
            // g_K(a + iy) <= g_band(a + iy) <= g_band(band end + iy) <= sqrt(4y / len).
            double len = k.band(static_cast<std::size_t>(bi)).length();
            double y = t.eps0;
            double s = 0.0;
            int j = 0;
            for (; j < 200 && std::sqrt(4.0 * y / len) > 1e-17; ++j, y *= t.q) {
                double g = exact_green ? green_value(m, {t.a, y}) : detail::green_band_bound(k, {t.a, y});
                s += t.r * g;
            }
            double rq = std::sqrt(t.q);
            v.sum_g += s;
            v.sum_g_tail = t.r * std::sqrt(4.0 * y / len) / (1.0 - rq);
            v.sum_dist += t.r * t.eps0 * (1.0 - std::pow(t.q, j)) / (1.0 - t.q);
            v.sum_dist_tail = t.r * y / (1.0 - t.q);
        }
    }
    // Closedness: declared limit points must appear among the a_j.
    auto present = [&](double l, double tol) {
        if (p.tail && std::abs(p.tail->a - l) <= tol) return true;
        return std::any_of(p.a.begin(), p.a.end(), [&](double a) { return std::abs(a - l) <= tol; });
    };
    for (double l : p.limit_points)
        if (!present(l, 1e-14 * scale)) violate("limit point " + std::to_string(l) + " not among the a_j");
    // Undeclared limits: Aitken extrapolation on each stream's last three terms.
    for (int st = 0; st < p.streams; ++st) {
        std::vector<double> seq;
        for (std::size_t j = static_cast<std::size_t>(st); j < p.size(); j += static_cast<std::size_t>(p.streams))
            seq.push_back(p.a[j]);
        if (seq.size() < 6) continue;
        std::size_t n = seq.size();
        double d1 = seq[n - 2] - seq[n - 3], d2 = seq[n - 1] - seq[n - 2];
        if (d1 == 0.0 || d2 == 0.0) continue;
        double ratio = d2 / d1;
        if (!(ratio > 0.0 && ratio < 0.95)) continue;
        double lim = seq[n - 1] + d2 * ratio / (1.0 - ratio);
        if (!present(lim, 0.01 * std::abs(lim - seq[n - 1])))
            violate("sequence accumulates at " + std::to_string(lim) + ", which is not among the a_j");
    }
    v.szego_lower = std::exp(-(v.sum_g + v.sum_g_tail));
    return v;
}

// ---------------------------------------------------------------------------
// Szego factor

struct SzegoResult {
    double value = 0.0;  // S(K, w); 0 for weights outside the Szego class
    double log_value = -std::numeric_limits<double>::infinity();
    bool szego_class = false;
    std::string method;
    double lo = 0.0, hi = 0.0;  // bracket when the value is only certified as an interval
};

namespace detail {

inline SzegoResult szego_from_log(double lg, std::string method, double err = 0.0) {
    SzegoResult s;
    s.log_value = lg;
    s.value = std::exp(lg);
    s.szego_class = true;
    s.method = std::move(method);
    s.lo = std::exp(lg - err);
    s.hi = std::exp(lg + err);
    return s;
}

inline SzegoResult non_szego(std::string method) {
    SzegoResult s;
    s.method = std::move(method);
    return s;
}

// int log|R| d mu = log|c| + sum U(a_j) - sum U(b_j), U(z) = g_K(z) + log cap.
inline double log_szego_rational(const EquilibriumMeasure& m, const RationalFunction& r) {
    double s = std::log(std::abs(r.c)) + (r.d0() - r.d1()) * m.log_capacity();
    for (const auto& a : r.zeros) s += green_value(m, a);
    for (const auto& b : r.poles) s -= green_value(m, b);
    return s;
}

inline bool is_endpoint(const RealCompactSet& k, double x) {
    double tol = 1e-14 * std::max(1.0, k.hull().length());
    for (const auto& b : k.bands())
        if (std::abs(x - b.lo) <= tol || std::abs(x - b.hi) <= tol) return true;
    return false;
}

}  // namespace detail

/// S(K, w) by quadrature of log w against mu_K, splitting at singular points.
inline SzegoResult szego_quadrature(const EquilibriumMeasure& m, const WeightExpr& w, double tol = 1e-11) {
    std::vector<double> sing = singular_points(w);
    IntegrateOptions o;
    o.tol = tol;
    o.singular_points = sing;
    auto f = [&](double x, double dx) {
        if (std::isnan(dx)) return log_eval(w, x);
        // Identify the abscissa being resolved: the singular point nearest x - dx.
        double xs = x - dx, best = std::numeric_limits<double>::infinity(), pick = xs;
        for (double s : sing)
            if (std::abs(s - xs) < best) {
                best = std::abs(s - xs);
                pick = s;
            }
        return log_eval(w, x, dx, pick);
    };
    double lg;
    try {
        lg = m.integrate(f, o);
    } catch (const Error& e) {
        if (e.kind() == "nan") return detail::non_szego("quadrature");
        throw;
    }
    if (!std::isfinite(lg) || lg < -1e6) return detail::non_szego("quadrature");
    return detail::szego_from_log(lg, "quadrature", tol);
}

/// S(K, w) = exp int log w d mu_K, with closed forms where the weight family has one.
inline SzegoResult szego_factor(const EquilibriumMeasure& m, const WeightExpr& w, double tol = 1e-11) {
    const RealCompactSet& k = m.set();
    return std::visit(
        [&](const auto& n) -> SzegoResult {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Const>) {
                if (!(n.v > 0)) return detail::non_szego("closed-form");
                return detail::szego_from_log(std::log(n.v), "closed-form");
            } else if constexpr (std::is_same_v<T, AbsRational>) {
                return detail::szego_from_log(detail::log_szego_rational(m, n.r), "closed-form");
            } else if constexpr (std::is_same_v<T, SqrtRational>) {
                return detail::szego_from_log(0.5 * detail::log_szego_rational(m, n.r), "closed-form");
            } else if constexpr (std::is_same_v<T, MthRootRational>) {
                return detail::szego_from_log(detail::log_szego_rational(m, n.r) / n.m, "closed-form");
            } else if constexpr (std::is_same_v<T, Jacobi>) {
                double l2 = std::log(2.0 / n.hull.length());
                double s = n.alpha * (l2 + m.log_capacity() + green_value(m, n.hull.hi)) +
                           n.beta * (l2 + m.log_capacity() + green_value(m, n.hull.lo));
                return detail::szego_from_log(s, "closed-form");
            } else if constexpr (std::is_same_v<T, InfiniteProduct>) {
                double s = 0.0;
                for (std::size_t j = 0; j < n.p.size(); ++j)
                    s += n.p.r[j] * (green_value(m, n.p.a[j]) - green_value(m, n.p.b[j]));
                if (n.p.tail) {
                    ProductPairs only_tail;
                    only_tail.tail = n.p.tail;
                    ProductValidation v = validate_product(m, only_tail);
                    return detail::szego_from_log(s - v.sum_g, "closed-form", v.sum_g_tail);
                }
                return detail::szego_from_log(s, "closed-form");
            } else if constexpr (std::is_same_v<T, StrongZero>) {
                if (k.contains(n.x0)) {
                    bool endpoint = detail::is_endpoint(k, n.x0);
                    if ((endpoint && n.alpha >= 0.5) || (!endpoint && n.alpha >= 1.0))
                        return detail::non_szego("closed-form");
                }
                return szego_quadrature(m, w, tol);
            } else if constexpr (std::is_same_v<T, Product>) {
                double lg = 0.0, err = 0.0;
                for (const auto& f : n.factors) {
                    SzegoResult r = szego_factor(m, f, tol);
                    if (!r.szego_class) return detail::non_szego("product");
                    lg += r.log_value;
                    if (r.lo > 0) err += std::log(r.hi / r.lo) / 2;
                }
                return detail::szego_from_log(lg, "product", err);
            } else {
                return szego_quadrature(m, w, tol);
            }
        },
        w.node);
}

// ---------------------------------------------------------------------------
// Minorants

struct MinorantParams {
    double radius = 0.0;       // neighbourhood radius of the construction (0: automatic)
    int audit_points = 10001;  // uniform audit grid over the hull
    int sup_samples = 257;     // samples per cell for the sampled supremum
    int max_cells_per_level = 1 << 15;
};

struct MinorantResult {
    WeightExpr w0;  // InfiniteProduct (or Const when there is no zero)
    double C = 1.0;
    std::vector<double> audit_x;
    double audit_max_ratio = 0.0;  // max of C w0 / w over the audit grid where w > 0
    bool audit_ok = false;
    ProductValidation validation;
    int levels = 0;
    double uncovered_radius = 0.0;  // |x0 - y_last|; no audit point falls strictly inside
    std::vector<double> level_g;    // per-level contribution to sum r_j g(b_j)
};

namespace detail {

using LogWeight = std::function<double(double)>;

inline std::vector<double> audit_grid(const RealCompactSet& k, int n, const std::vector<double>& extra) {
    Interval h = k.hull();
    std::vector<double> xs;
    for (int i = 0; i < n; ++i) {
        double x = h.lo + h.length() * i / (n - 1);
        if (i == n - 1) x = h.hi;
        if (k.contains(x)) xs.push_back(x);
    }
    for (double e : extra)
        if (k.contains(e)) xs.push_back(e);
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    return xs;
}

struct SideCells {
    std::vector<double> a;  // cell end farther from x0
    std::vector<double> h;  // cell width
    std::vector<int> r;
    std::vector<int> level;
};

// Darboux-refined cells on one side of x0 (dir = -1: left of x0).
inline SideCells build_side(const EquilibriumMeasure& m, std::size_t band, const LogWeight& lw, double shift, double x0,
                            double dir, double rho1, double stop_radius, const MinorantParams& prm, int& levels) {
    SideCells out;
    double dist = rho1;
    for (int k = 1; dist >= stop_radius; ++k, dist *= 0.5) {
        double far = x0 + dir * dist, near = x0 + dir * 0.5 * dist;
        double lo = std::min(far, near), hi = std::max(far, near);
        auto neglog = [&](double x, double) { return -(lw(x) - shift); };
        double I = m.integrate_band_range(band, lo, hi, neglog, 16);
        double tol = std::ldexp(1.0, -k);
        bool done = false;
        for (int cells = 1; cells <= prm.max_cells_per_level; cells *= 2) {
            double h = (hi - lo) / cells, upper = 0.0;
            std::vector<double> ell(static_cast<std::size_t>(cells));
            for (int c = 0; c < cells; ++c) {
                double c0 = lo + h * c, c1 = (c == cells - 1) ? hi : lo + h * (c + 1);
                double sup = 0.0;
                for (int s = 0; s < prm.sup_samples; ++s) {
                    double x = c0 + (c1 - c0) * s / (prm.sup_samples - 1);
                    sup = std::max(sup, -(lw(x) - shift));
                }
                if (!std::isfinite(sup)) throw Error("unbounded-log", "log w unbounded on a cell away from x0");
                ell[static_cast<std::size_t>(c)] = sup;
                upper += sup * m.integrate_band_range(band, c0, c1, [](double, double) { return 1.0; }, 1);
            }
            if (upper - I < tol) {
                for (int c = 0; c < cells; ++c) {
                    double c0 = lo + h * c, c1 = (c == cells - 1) ? hi : lo + h * (c + 1);
                    out.a.push_back(dir < 0 ? c0 : c1);
                    out.h.push_back(c1 - c0);
                    // |(x-a)/(x-a-ih)| <= 1/sqrt 2 on the cell, so 2^{-r/2} <= e^{-ell} needs r >= 2 ell / log 2.
                    out.r.push_back(static_cast<int>(std::ceil(2.0 * ell[static_cast<std::size_t>(c)] / std::numbers::ln2)));
                    out.level.push_back(k);
                }
                done = true;
                break;
            }
        }
        if (!done) throw Error("darboux-budget", "Darboux refinement exceeded the cell budget at level " + std::to_string(k));
        levels = std::max(levels, k);
    }
    return out;
}

struct SingleZeroCore {
    ProductPairs pairs;
    double C = 1.0;
    int levels = 0;
    double uncovered = 0.0;
    std::vector<double> level_g;
};

inline SingleZeroCore single_zero_core(const EquilibriumMeasure& m, const LogWeight& lw, double x0,
                                       const std::vector<double>& grid, const MinorantParams& prm) {
    const RealCompactSet& k = m.set();
    double scale = std::max(1.0, k.hull().length());
    int bi = k.band_index(x0, 1e-14 * scale);
    if (bi < 0) throw Error("not-in-set", "x0 must lie in K");
    const Interval& band = k.band(static_cast<std::size_t>(bi));
    double tol = 1e-14 * scale;
    bool at_hi = std::abs(x0 - band.hi) <= tol, at_lo = std::abs(x0 - band.lo) <= tol;
    if (at_hi) x0 = band.hi;
    if (at_lo) x0 = band.lo;

    // Rescale so that w' = w / (2 max w) <= 1/2.
    std::vector<double> dense = sample_set(k);
    dense.insert(dense.end(), grid.begin(), grid.end());
    double logmax = -std::numeric_limits<double>::infinity();
    for (double x : dense) logmax = std::max(logmax, lw(x));
    if (!std::isfinite(logmax)) throw Error("invalid-weight", "weight is zero or unbounded on the sample");
    double shift = logmax + std::numbers::ln2;

    double rho1 = at_hi || at_lo ? 0.5 * band.length() : 0.5 * std::min(x0 - band.lo, band.hi - x0);
    if (prm.radius > 0) rho1 = std::min(rho1, prm.radius);
    double delta = std::numeric_limits<double>::infinity();
    for (double g : grid)
        if (g != x0) delta = std::min(delta, std::abs(g - x0));
    double stop = 0.5 * std::min(delta, rho1);  // levels continue while their outer radius >= stop

    SingleZeroCore core;
    SideCells left, right;
    if (!at_lo) left = build_side(m, static_cast<std::size_t>(bi), lw, shift, x0, -1.0, rho1, stop, prm, core.levels);
    if (!at_hi) right = build_side(m, static_cast<std::size_t>(bi), lw, shift, x0, 1.0, rho1, stop, prm, core.levels);
    double last = rho1;
    while (last >= stop) last *= 0.5;
    core.uncovered = last;

    // a_0 = x0, b_0 = x0 + i, then right/left cells interleaved.
    ProductPairs& p = core.pairs;
    p.a.push_back(x0);
    p.b.push_back({x0, 1.0});
    p.r.push_back(1);
    std::vector<int> lvl{0};
    std::size_t n = std::max(left.a.size(), right.a.size());
    for (std::size_t j = 0; j < n; ++j) {
        for (const SideCells* s : {&right, &left}) {
            if (j >= s->a.size()) continue;
            p.a.push_back(s->a[j]);
            p.b.push_back({s->a[j], s->h[j]});
            p.r.push_back(s->r[j]);
            lvl.push_back(s->level[j]);
        }
    }
    p.limit_points = {x0};
    p.streams = 0;

    // C' = min(1, inf of w' outside the covered neighbourhood).
    double lmin = 0.0;  // log of the infimum
    bool any = false;
    for (double x : dense) {
        if (std::abs(x - x0) < rho1) continue;
        double v = lw(x) - shift;
        lmin = any ? std::min(lmin, v) : v;
        any = true;
    }
    if (any && !std::isfinite(lmin)) throw Error("not-bounded-below", "w vanishes outside the neighbourhood of x0");
    double logc = std::min(0.0, any ? lmin : 0.0) + shift;
    core.C = std::exp(logc);

    core.level_g.assign(static_cast<std::size_t>(core.levels) + 1, 0.0);
    for (std::size_t j = 0; j < p.size(); ++j)
        core.level_g[static_cast<std::size_t>(lvl[j])] += p.r[j] * green_band_bound(k, p.b[j]);
    return core;
}

inline MinorantResult finish(const EquilibriumMeasure& m, const LogWeight& lw, MinorantResult res,
                             const std::vector<double>& grid) {
    res.audit_x = grid;
    res.audit_ok = true;
    res.audit_max_ratio = 0.0;
    double logc = std::log(res.C);
    for (double x : grid) {
        double l0 = log_eval(res.w0, x) + logc;
        double l = lw(x);
        if (l0 == -std::numeric_limits<double>::infinity()) continue;
        if (!std::isfinite(l) || l0 > l + std::log1p(1e-9)) res.audit_ok = false;
        if (std::isfinite(l)) res.audit_max_ratio = std::max(res.audit_max_ratio, std::exp(l0 - l));
    }
    if (const auto* ip = std::get_if<InfiniteProduct>(&res.w0.node))
        res.validation = validate_product(m, ip->p, false);
    return res;
}

}  // namespace detail

/// Builds C and a product weight w0 with C w0 <= w near a single zero x0:
/// geometric points toward x0, Darboux-refined cells, one factor per cell
/// with multiplicity from the sampled supremum of -log w, plus the factor at x0.
inline MinorantResult minorant_single_zero(const EquilibriumMeasure& m, const WeightExpr& w, double x0,
                                           const MinorantParams& prm = {}) {
    detail::LogWeight lw = [&](double x) { return log_eval(w, x); };
    std::vector<double> grid = detail::audit_grid(m.set(), prm.audit_points, {x0});
    detail::SingleZeroCore core = detail::single_zero_core(m, lw, x0, grid, prm);
    MinorantResult res;
    res.w0 = InfiniteProduct{core.pairs};
    res.C = core.C;
    res.levels = core.levels;
    res.uncovered_radius = core.uncovered;
    res.level_g = core.level_g;
    return detail::finish(m, lw, std::move(res), grid);
}

/// Multi-zero version: w = w_1 ... w_{m+1} with w_j = w near x_j only, each
/// factor handled by the single-zero construction, pairs interleaved.
inline MinorantResult minorant_multi_zero(const EquilibriumMeasure& m, const WeightExpr& w, std::vector<double> zeros,
                                          const MinorantParams& prm = {}) {
    const RealCompactSet& k = m.set();
    std::sort(zeros.begin(), zeros.end());
    detail::LogWeight lw = [&](double x) { return log_eval(w, x); };
    std::vector<double> grid = detail::audit_grid(k, prm.audit_points, zeros);
    MinorantResult res;
    if (zeros.empty()) {
        double lmin = std::numeric_limits<double>::infinity();
        for (double x : detail::audit_grid(k, prm.audit_points, sample_set(k))) lmin = std::min(lmin, lw(x));
        if (!std::isfinite(lmin)) throw Error("not-bounded-below", "w vanishes on K but no zeros were given");
        res.w0 = Const{1.0};
        res.C = std::exp(lmin);
        return detail::finish(m, lw, std::move(res), grid);
    }
    if (zeros.size() == 1) return minorant_single_zero(m, w, zeros[0], prm);

    double ru = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < zeros.size(); ++i) ru = std::min(ru, 0.5 * (zeros[i + 1] - zeros[i]));
    std::vector<detail::SingleZeroCore> cores;
    double logc = 0.0;
    for (double z : zeros) {
        detail::LogWeight lwj = [&, z](double x) { return std::abs(x - z) < ru ? lw(x) : 0.0; };
        MinorantParams pj = prm;
        pj.radius = prm.radius > 0 ? std::min(prm.radius, 0.5 * ru) : 0.5 * ru;
        cores.push_back(detail::single_zero_core(m, lwj, z, grid, pj));
        logc += std::log(cores.back().C);
        res.levels = std::max(res.levels, cores.back().levels);
        res.uncovered_radius = std::max(res.uncovered_radius, cores.back().uncovered);
    }
    // w_{m+1}: w away from every neighbourhood, bounded below there.
    double lrest = 0.0;
    std::vector<double> dense = sample_set(k);
    dense.insert(dense.end(), grid.begin(), grid.end());
    for (double x : dense) {
        bool inside = std::any_of(zeros.begin(), zeros.end(), [&](double z) { return std::abs(x - z) < ru; });
        if (!inside) lrest = std::min(lrest, lw(x));
    }
    if (!std::isfinite(lrest)) throw Error("not-bounded-below", "w vanishes away from the listed zeros");
    logc += lrest;

    // Interleave: a_{(j-1)m + k} = a_{k, j}.
    ProductPairs all;
    std::size_t longest = 0;
    for (const auto& c : cores) longest = std::max(longest, c.pairs.size());
    for (std::size_t j = 0; j < longest; ++j)
        for (const auto& c : cores) {
            if (j >= c.pairs.size()) continue;
            all.a.push_back(c.pairs.a[j]);
            all.b.push_back(c.pairs.b[j]);
            all.r.push_back(c.pairs.r[j]);
        }
    all.limit_points = zeros;
    all.streams = 0;
    res.level_g.assign(static_cast<std::size_t>(res.levels) + 1, 0.0);
    for (const auto& c : cores)
        for (std::size_t l = 0; l < c.level_g.size(); ++l) res.level_g[l] += c.level_g[l];
    res.w0 = InfiniteProduct{std::move(all)};
    res.C = std::exp(logc);
    return detail::finish(m, lw, std::move(res), grid);
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

inline nlohmann::json root_json(const cplx& z) {
    if (z.imag() == 0.0) return z.real();
    return nlohmann::json::array({z.real(), z.imag()});
}

inline cplx root_from_json(const nlohmann::json& j) {
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (j.is_array() && j.size() == 2) return {j[0].get<double>(), j[1].get<double>()};
    throw Error("schema", "roots are numbers or [re, im] pairs");
}

inline nlohmann::json rational_json(const RationalFunction& r) {
    nlohmann::json z = nlohmann::json::array(), p = nlohmann::json::array();
    for (const auto& a : r.zeros) z.push_back(root_json(a));
    for (const auto& b : r.poles) p.push_back(root_json(b));
    return {{"c", r.c}, {"zeros", z}, {"poles", p}};
}

inline RationalFunction rational_from_json(const nlohmann::json& j) {
    RationalFunction r;
    r.c = j.value("c", 1.0);
    for (const auto& z : j.value("zeros", nlohmann::json::array())) r.zeros.push_back(root_from_json(z));
    for (const auto& p : j.value("poles", nlohmann::json::array())) r.poles.push_back(root_from_json(p));
    return r;
}

}  // namespace detail

inline nlohmann::json weight_to_json(const WeightExpr& w) {
    nlohmann::json j;
    j["type"] = kind_name(w);
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Const>) {
                j["value"] = n.v;
            } else if constexpr (std::is_same_v<T, AbsRational> || std::is_same_v<T, SqrtRational>) {
                j["r"] = detail::rational_json(n.r);
            } else if constexpr (std::is_same_v<T, MthRootRational>) {
                j["r"] = detail::rational_json(n.r);
                j["m"] = n.m;
            } else if constexpr (std::is_same_v<T, Jacobi>) {
                j["alpha"] = n.alpha;
                j["beta"] = n.beta;
                j["hull"] = {n.hull.lo, n.hull.hi};
            } else if constexpr (std::is_same_v<T, InfiniteProduct>) {
                nlohmann::json b = nlohmann::json::array();
                for (const auto& z : n.p.b) b.push_back(detail::root_json(z));
                j["a"] = n.p.a;
                j["b"] = b;
                j["r"] = n.p.r;
                j["limit_points"] = n.p.limit_points;
                j["streams"] = n.p.streams;
                if (n.p.tail) j["tail"] = {{"a", n.p.tail->a}, {"eps0", n.p.tail->eps0}, {"q", n.p.tail->q}, {"r", n.p.tail->r}};
            } else if constexpr (std::is_same_v<T, StrongZero>) {
                j["x0"] = n.x0;
                j["alpha"] = n.alpha;
            } else if constexpr (std::is_same_v<T, Product>) {
                j["factors"] = nlohmann::json::array();
                for (const auto& f : n.factors) j["factors"].push_back(weight_to_json(f));
            } else {
                j["x"] = n.x;
                j["y"] = n.y;
            }
        },
        w.node);
    return j;
}

inline WeightExpr weight_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("type")) throw Error("schema", "weight JSON needs a \"type\"");
    std::string t = j.at("type").get<std::string>();
    try {
        if (t == "const") return Const{j.value("value", 1.0)};
        if (t == "abs_rational") return AbsRational{detail::rational_from_json(j.at("r"))};
        if (t == "sqrt_rational") return SqrtRational{detail::rational_from_json(j.at("r"))};
        if (t == "mth_root_rational") return MthRootRational{detail::rational_from_json(j.at("r")), j.at("m").get<int>()};
        if (t == "jacobi") {
            Jacobi jac{j.at("alpha").get<double>(), j.at("beta").get<double>(), {-1.0, 1.0}};
            if (j.contains("hull")) jac.hull = {j["hull"][0].get<double>(), j["hull"][1].get<double>()};
            return jac;
        }
        if (t == "infinite_product") {
            ProductPairs p;
            p.a = j.value("a", std::vector<double>{});
            for (const auto& b : j.value("b", nlohmann::json::array())) p.b.push_back(detail::root_from_json(b));
            p.r = j.value("r", std::vector<int>(p.a.size(), 1));
            p.limit_points = j.value("limit_points", std::vector<double>{});
            p.streams = j.value("streams", 1);
            if (j.contains("tail")) {
                const auto& tj = j["tail"];
                p.tail = GeometricTail{tj.at("a").get<double>(), tj.at("eps0").get<double>(), tj.at("q").get<double>(),
                                       tj.value("r", 1)};
            }
            return InfiniteProduct{std::move(p)};
        }
        if (t == "strong_zero") return StrongZero{j.at("x0").get<double>(), j.at("alpha").get<double>()};
        if (t == "product") {
            Product p;
            for (const auto& f : j.at("factors")) p.factors.push_back(weight_from_json(f));
            return p;
        }
        if (t == "tabulated") return Tabulated{j.at("x").get<std::vector<double>>(), j.at("y").get<std::vector<double>>()};
    } catch (const nlohmann::json::exception& e) {
        throw Error("schema", std::string("weight ") + t + ": " + e.what());
    }
    throw Error("schema", "unknown weight type \"" + t + "\"");
}

}  // namespace widomlab

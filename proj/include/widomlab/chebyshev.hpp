#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/minima.hpp>
#include <nlohmann/json.hpp>

#include "widomlab/error.hpp"
#include "widomlab/polynomial.hpp"
#include "widomlab/potential.hpp"
#include "widomlab/preimage.hpp"
#include "widomlab/realsets.hpp"
#include "widomlab/weights.hpp"

namespace widomlab {

inline constexpr int kMaxChebyshevDegree = 128;

struct ExtremalPoint {
    double x = 0.0;
    int sign = 1;
};

namespace detail {

/// Monic polynomial of degree n in u through the levelled values at n + 1
/// reference nodes, kept in barycentric form: P(u) = l(u) sum_j omega_j / (u - u_j),
/// l(u) = prod (u - u_j). Well conditioned on gapped sets, unlike a power or
/// hull-Chebyshev expansion.
struct Levelled {
    std::vector<double> u;
    std::vector<double> omega;
    std::vector<double> value;  // P(u_j)
    double h = 0.0;             // signed levelled error: w_j P(u_j) = (-1)^j h
    bool ok = false;

    [[nodiscard]] double operator()(double x) const {
        double l = 1.0, s = 0.0;
        for (std::size_t j = 0; j < u.size(); ++j) {
            double d = x - u[j];
            if (d == 0.0) return value[j];
            l *= d;
            s += omega[j] / d;
        }
        return l * s;
    }
};

struct Grid {
    std::vector<double> x, u, w;
};

inline Levelled solve_reference(const Grid& g, const std::vector<int>& ref) {
    std::size_t m = ref.size();
    Levelled l;
    l.u.resize(m);
    std::vector<double> wj(m), loglam(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        l.u[j] = g.u[static_cast<std::size_t>(ref[j])];
        wj[j] = g.w[static_cast<std::size_t>(ref[j])];
    }
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t k = 0; k < m; ++k)
            if (k != j) {
                double d = l.u[j] - l.u[k];
                if (d == 0.0) return l;
                loglam[j] -= std::log(std::abs(d));
            }
    double top = *std::max_element(loglam.begin(), loglam.end());
    // s_j sign(lambda_j) = (-1)^n for every j, so the denominator has no cancellation.
    double dsum = 0.0;
    std::vector<double> lam(m);
    for (std::size_t j = 0; j < m; ++j) {
        lam[j] = std::exp(loglam[j] - top);
        dsum += lam[j] / wj[j];
    }
    double parity = ((m - 1) % 2 == 0) ? 1.0 : -1.0;
    // h = 1 / (M D) with M = exp(top), D = parity * dsum.
    l.h = parity * std::exp(-top - std::log(dsum));
    l.omega.resize(m);
    l.value.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
        double sj = (j % 2 == 0) ? 1.0 : -1.0;
        double sign_lam = (((m - 1 - j) % 2) == 0) ? 1.0 : -1.0;
        l.omega[j] = sj * sign_lam * lam[j] / (wj[j] * parity * dsum);
        l.value[j] = sj * l.h / wj[j];
    }
    l.ok = std::isfinite(l.h) && l.h != 0.0;
    return l;
}

inline Grid make_grid(const std::vector<double>& xs, const WeightExpr& w, const Interval& hull) {
    std::vector<double> s(xs);
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    Grid g;
    for (double x : s) {
        double lw = log_eval(w, x);
        if (std::isnan(lw) || lw == std::numeric_limits<double>::infinity())
            throw Error("unbounded-weight", "weight is not finite at x = " + std::to_string(x));
        double v = std::exp(lw);
        if (!(v > 0.0)) continue;
        g.x.push_back(x);
        g.u.push_back((x - hull.mid()) / hull.rad());
        g.w.push_back(v);
    }
    return g;
}

inline std::vector<double> lobatto(const Interval& b, int m) {
    std::vector<double> xs(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j)
        xs[static_cast<std::size_t>(j)] = b.mid() - b.rad() * std::cos(std::numbers::pi * j / (m - 1));
    xs.front() = b.lo;
    xs.back() = b.hi;
    return xs;
}

inline std::vector<int> band_counts(const EquilibriumMeasure& m, int total, int floor) {
    std::vector<double> mass = m.band_masses();
    std::vector<int> c;
    for (double v : mass) c.push_back(std::max(floor, static_cast<int>(std::lround(v * total))));
    return c;
}

// Reference of n + 1 run maxima with alternating signs, keeping the global maximum.
inline std::vector<int> multi_exchange(const std::vector<double>& e, int n) {
    std::vector<int> cand;
    for (std::size_t i = 0; i < e.size(); ++i) {
        int idx = static_cast<int>(i);
        if (!cand.empty() && std::signbit(e[static_cast<std::size_t>(cand.back())]) == std::signbit(e[i])) {
            if (std::abs(e[i]) > std::abs(e[static_cast<std::size_t>(cand.back())])) cand.back() = idx;
        } else {
            cand.push_back(idx);
        }
    }
    auto mag = [&](int i) { return std::abs(e[static_cast<std::size_t>(i)]); };
    while (static_cast<int>(cand.size()) > n + 1) {
        std::size_t k = 0;
        for (std::size_t i = 1; i < cand.size(); ++i)
            if (mag(cand[i]) < mag(cand[k])) k = i;
        if (k == 0 || k + 1 == cand.size()) {
            cand.erase(cand.begin() + static_cast<std::ptrdiff_t>(k));
        } else if (static_cast<int>(cand.size()) == n + 2) {
            if (mag(cand.front()) < mag(cand.back()))
                cand.erase(cand.begin());
            else
                cand.pop_back();
        } else {
            std::size_t other = mag(cand[k - 1]) < mag(cand[k + 1]) ? k - 1 : k + 1;
            std::size_t lo = std::min(k, other);
            cand.erase(cand.begin() + static_cast<std::ptrdiff_t>(lo), cand.begin() + static_cast<std::ptrdiff_t>(lo) + 2);
        }
    }
    return cand;
}

// Classic single-point exchange preserving alternation.
inline std::vector<int> single_exchange(std::vector<int> ref, const std::vector<double>& e, int p) {
    auto sg = [&](int i) { return std::signbit(e[static_cast<std::size_t>(i)]); };
    if (p < ref.front()) {
        if (sg(p) == sg(ref.front())) {
            ref.front() = p;
        } else {
            ref.pop_back();
            ref.insert(ref.begin(), p);
        }
    } else if (p > ref.back()) {
        if (sg(p) == sg(ref.back())) {
            ref.back() = p;
        } else {
            ref.erase(ref.begin());
            ref.push_back(p);
        }
    } else {
        auto it = std::upper_bound(ref.begin(), ref.end(), p);
        auto j = static_cast<std::size_t>(it - ref.begin()) - 1;
        if (sg(p) == sg(ref[j]))
            ref[j] = p;
        else
            ref[j + 1] = p;
    }
    return ref;
}

struct ExchangeState {
    std::vector<int> ref;
    Levelled lev;
    std::vector<double> e;
    int iterations = 0;
};

inline void errors(const Grid& g, const Levelled& l, std::vector<double>& e) {
    e.resize(g.x.size());
    for (std::size_t i = 0; i < g.x.size(); ++i) e[i] = g.w[i] * l(g.u[i]);
}

inline ExchangeState exchange(const Grid& g, std::vector<int> ref, int n, int max_iter) {
    ExchangeState s;
    s.ref = std::move(ref);
    s.lev = solve_reference(g, s.ref);
    if (!s.lev.ok) throw Error("degenerate", "singular reference");
    errors(g, s.lev, s.e);
    for (int it = 0; it < max_iter; ++it) {
        s.iterations = it + 1;
        std::size_t imax = 0;
        for (std::size_t i = 1; i < s.e.size(); ++i)
            if (std::abs(s.e[i]) > std::abs(s.e[imax])) imax = i;
        double big = std::abs(s.e[imax]), h = std::abs(s.lev.h);
        if (big <= h * (1.0 + 4e-15)) break;
        std::vector<int> next = multi_exchange(s.e, n);
        Levelled l2;
        if (static_cast<int>(next.size()) == n + 1) l2 = solve_reference(g, next);
        if (!(l2.ok && std::abs(l2.h) > h)) {
            next = single_exchange(s.ref, s.e, static_cast<int>(imax));
            l2 = solve_reference(g, next);
            if (!(l2.ok && std::abs(l2.h) > h)) break;  // stagnation at rounding level
        }
        s.ref = std::move(next);
        s.lev = std::move(l2);
        errors(g, s.lev, s.e);
    }
    return s;
}

inline double clenshaw(const std::vector<double>& c, double u) {
    double b1 = 0.0, b2 = 0.0;
    for (std::size_t k = c.size(); k-- > 1;) {
        double t = 2.0 * u * b1 - b2 + c[k];
        b2 = b1;
        b1 = t;
    }
    return u * b1 - b2 + c[0];
}

// Chebyshev coefficients of 2^{n-1} P (P monic of degree n in u), leading one exact.
inline std::vector<double> chebyshev_coeffs(const Levelled& l, int n) {
    int m = n + 1;
    std::vector<double> f(static_cast<std::size_t>(m)), c(static_cast<std::size_t>(m), 0.0);
    double lift = std::ldexp(1.0, n - 1);
    for (int j = 0; j < m; ++j) f[static_cast<std::size_t>(j)] = lift * l(std::cos(std::numbers::pi * (j + 0.5) / m));
    for (int k = 0; k < m; ++k) {
        double s = 0.0;
        for (int j = 0; j < m; ++j) s += f[static_cast<std::size_t>(j)] * std::cos(std::numbers::pi * k * (j + 0.5) / m);
        c[static_cast<std::size_t>(k)] = (k == 0 ? 1.0 : 2.0) * s / m;
    }
    c[static_cast<std::size_t>(n)] = 1.0;
    return c;
}

}  // namespace detail

/// T_{n,w}(x) = r^n P(u), u = (x - mid) / r the affine map of the hull onto
/// [-1, 1] and P monic in u. P is held in barycentric form on the final
/// reference; `coeffs` is its hull-Chebyshev expansion scaled so that
/// T_{n,w} = exp(log_scale) * sum_k coeffs[k] T_k(u) with coeffs[n] = 1.
struct MinimaxResult {
    int n = 0;
    Interval hull;
    std::vector<double> coeffs;
    double log_scale = 0.0;  // n log r + (1 - n) log 2
    double t_lower = 0.0;    // de la Vallee Poussin bound from the final reference
    double t_upper = 0.0;    // polished maximum of |w T| on K
    double log_t_lower = 0.0;
    double log_t_upper = 0.0;
    std::vector<ExtremalPoint> extremal_points;
    int iterations = 0;
    int refinements = 0;
    bool alternation_certified = false;
    detail::Levelled levelled;

    [[nodiscard]] double u_of(double x) const { return (x - hull.mid()) / hull.rad(); }
    /// T_{n,w}(x) / r^n, evaluated stably.
    [[nodiscard]] double eval_monic_u(double x) const { return levelled(u_of(x)); }
    /// T_{n,w}(x).
    [[nodiscard]] double operator()(double x) const { return std::exp(n * std::log(hull.rad())) * eval_monic_u(x); }
    /// The monic polynomial T_{n,w} in hull-Chebyshev form.
    [[nodiscard]] RealPolynomial poly() const {
        std::vector<double> c(coeffs);
        double s = std::exp(log_scale);
        for (double& v : c) v *= s;
        return RealPolynomial(hull, std::move(c));
    }
    /// T_{n,w} / t_n using the upper value, so that |w Q| <= 1 on K.
    [[nodiscard]] RealPolynomial normalized() const {
        std::vector<double> c(coeffs);
        double s = std::exp(log_scale - log_t_upper);
        for (double& v : c) v *= s;
        return RealPolynomial(hull, std::move(c));
    }
    [[nodiscard]] double rel_gap() const { return -std::expm1(log_t_lower - log_t_upper); }
};

struct MinimaxOptions {
    double tol = 1e-10;
    int grid_factor = 64;
    int scan_factor = 4;
    int max_rounds = 40;
};

/// Weighted Chebyshev polynomial T_{n,w} on K: discrete minimax on a grid by
/// Remez exchange on reference sets of n + 1 points, then continuous refinement
/// (polished local maxima are appended to the grid) until the bracket closes.
inline MinimaxResult weighted_chebyshev(const EquilibriumMeasure& m, const WeightExpr& w, int n,
                                        const MinimaxOptions& opt = {}) {
    if (n < 1) throw Error("invalid-degree", "weighted_chebyshev needs n >= 1");
    if (n > kMaxChebyshevDegree) throw Error("invalid-degree", "degree above the double-precision cap");
    const RealCompactSet& k = m.set();
    Interval hull = k.hull();
    if (WeightCheck c = check_weight(k, w); !c.ok)
        throw Error(c.reason.find("pole") != std::string::npos || c.reason.find("finite") != std::string::npos
                        ? "unbounded-weight"
                        : "invalid-weight",
                    c.reason);

    std::vector<int> counts = detail::band_counts(m, opt.grid_factor * n, 8);
    std::vector<double> xs;
    for (std::size_t b = 0; b < k.size(); ++b) {
        auto pts = detail::lobatto(k.band(b), counts[b]);
        xs.insert(xs.end(), pts.begin(), pts.end());
    }
    detail::Grid g = detail::make_grid(xs, w, hull);
    int size = static_cast<int>(g.x.size());
    if (size < n + 1) throw Error("degenerate", "weight positive at too few points");

    // Initial reference at equilibrium-mass quantiles (arcsine-like within a band).
    std::vector<double> mass = m.band_masses();
    std::vector<double> cum(g.x.size());
    for (std::size_t i = 0; i < g.x.size(); ++i) {
        int b = k.band_index(g.x[i]);
        double before = 0.0;
        for (int j = 0; j < b; ++j) before += mass[static_cast<std::size_t>(j)];
        const Interval& band = k.band(static_cast<std::size_t>(b));
        double th = std::acos(std::clamp((g.x[i] - band.mid()) / band.rad(), -1.0, 1.0));
        cum[i] = before + mass[static_cast<std::size_t>(b)] * (1.0 - th / std::numbers::pi);
    }
    std::vector<int> ref;
    for (int j = 0; j <= n; ++j) {
        auto it = std::lower_bound(cum.begin(), cum.end(), static_cast<double>(j) / n);
        int i = static_cast<int>(std::min<std::ptrdiff_t>(it - cum.begin(), size - 1));
        if (!ref.empty() && i <= ref.back()) i = ref.back() + 1;
        ref.push_back(i);
    }
    for (int j = n; j >= 0; --j) {
        auto jj = static_cast<std::size_t>(j);
        ref[jj] = std::min(ref[jj], size - 1 - (n - j));
        if (j < n && ref[jj] >= ref[jj + 1]) ref[jj] = ref[jj + 1] - 1;
    }

    MinimaxResult res;
    res.n = n;
    res.hull = hull;
    double log_r = n * std::log(hull.rad());
    res.log_scale = log_r + (1 - n) * std::numbers::ln2;

    auto wp = [&](const detail::Levelled& l, double x) {
        double lw = log_eval(w, x);
        if (lw == -std::numeric_limits<double>::infinity()) return 0.0;
        return std::exp(lw) * std::abs(l((x - hull.mid()) / hull.rad()));
    };

    int max_iter = 60 + 20 * n;
    for (int round = 0; round < opt.max_rounds; ++round) {
        detail::ExchangeState st = detail::exchange(g, ref, n, max_iter);
        res.iterations += st.iterations;
        res.refinements = round;
        const detail::Levelled& lev = st.lev;

        // Certified lower value: alternation of w P at the reference points.
        double lo = std::numeric_limits<double>::infinity();
        bool alt = true;
        for (std::size_t j = 0; j < st.ref.size(); ++j) {
            double e = st.e[static_cast<std::size_t>(st.ref[j])];
            lo = std::min(lo, std::abs(e));
            if (j > 0 && std::signbit(e) == std::signbit(st.e[static_cast<std::size_t>(st.ref[j - 1])])) alt = false;
        }
        if (!alt) lo = 0.0;

        // Continuous maximum: dense scan per band plus Brent polish of local maxima.
        double hi = 0.0;
        std::vector<double> add;
        for (std::size_t b = 0; b < k.size(); ++b) {
            int ns = std::max(32, opt.scan_factor * counts[b]);
            auto sx = detail::lobatto(k.band(b), ns);
            std::vector<double> sv(sx.size());
            for (std::size_t i = 0; i < sx.size(); ++i) sv[i] = wp(lev, sx[i]);
            for (std::size_t i = 0; i < sx.size(); ++i) {
                bool left = i == 0 || sv[i] >= sv[i - 1];
                bool right = i + 1 == sx.size() || sv[i] >= sv[i + 1];
                if (!(left && right) || sv[i] < 0.5 * lo) continue;
                double a = sx[i == 0 ? 0 : i - 1], bb = sx[i + 1 == sx.size() ? i : i + 1];
                auto r = boost::math::tools::brent_find_minima([&](double x) { return -wp(lev, x); }, a, bb,
                                                               std::numeric_limits<double>::digits / 2);
                double best = sv[i], bx = sx[i];
                if (-r.second > best) {
                    best = -r.second;
                    bx = r.first;
                }
                hi = std::max(hi, best);
                if (best > lo) add.push_back(bx);
            }
        }
        for (int i : st.ref) hi = std::max(hi, std::abs(st.e[static_cast<std::size_t>(i)]));
        hi *= 1.0 + 8.0 * std::numeric_limits<double>::epsilon();

        res.levelled = lev;
        res.alternation_certified = alt;
        res.log_t_lower = lo > 0 ? std::log(lo) + log_r : -std::numeric_limits<double>::infinity();
        res.log_t_upper = std::log(hi) + log_r;
        res.t_lower = std::exp(res.log_t_lower);
        res.t_upper = std::exp(res.log_t_upper);
        res.extremal_points.clear();
        for (int i : st.ref) {
            auto ii = static_cast<std::size_t>(i);
            res.extremal_points.push_back({g.x[ii], std::signbit(st.e[ii]) ? -1 : 1});
        }
        if (alt && hi - lo <= opt.tol * hi) break;

        // Refine: append the polished maxima and warm start from the current reference.
        std::vector<double> refx;
        for (int i : st.ref) refx.push_back(g.x[static_cast<std::size_t>(i)]);
        std::vector<double> all(g.x);
        std::size_t before = all.size();
        all.insert(all.end(), add.begin(), add.end());
        detail::Grid g2 = detail::make_grid(all, w, hull);
        if (g2.x.size() == before && round > 0) break;
        g = std::move(g2);
        ref.clear();
        for (double x : refx)
            ref.push_back(static_cast<int>(std::lower_bound(g.x.begin(), g.x.end(), x) - g.x.begin()));
    }
    if (!(res.rel_gap() <= opt.tol))
        throw Error("non-convergence", "minimax bracket did not close: relative gap " + std::to_string(res.rel_gap()));
    res.coeffs = detail::chebyshev_coeffs(res.levelled, n);
    return res;
}

struct WidomBracket {
    double lo = 0.0, hi = 0.0;
    double log_lo = 0.0, log_hi = 0.0;
    MinimaxResult minimax;
    [[nodiscard]] double mid() const { return 0.5 * (lo + hi); }
};

/// W_{inf,n}(K, w) = t_n / cap^n as a bracket, formed in the log domain and
/// widened by the capacity error estimate.
inline WidomBracket widom_infty(const EquilibriumMeasure& m, const WeightExpr& w, int n, const MinimaxOptions& opt = {}) {
    WidomBracket b;
    b.minimax = weighted_chebyshev(m, w, n, opt);
    double dc = m.log_capacity_error();
    b.log_lo = b.minimax.log_t_lower - n * (m.log_capacity() + dc);
    b.log_hi = b.minimax.log_t_upper - n * (m.log_capacity() - dc);
    b.lo = std::exp(b.log_lo);
    b.hi = std::exp(b.log_hi);
    return b;
}

// ---------------------------------------------------------------------------
// Weight normal forms used to decide which lower bounds apply.

struct WeightForms {
    std::optional<double> constant;
    std::optional<RationalFunction> abs_rational;   // w = |R|
    std::optional<RationalFunction> sqrt_rational;  // w = sqrt(R), R >= 0 on K
    std::optional<RationalFunction> root_r;         // w = |R|^{1/root_m}
    int root_m = 1;
    // w = |R| * prod_j |(x - a_j)/(x - b_j)|^{r_j}
    std::optional<RationalFunction> product_r;
    std::vector<ProductPairs> product_pairs;
};

namespace detail {

inline RationalFunction times(const RationalFunction& a, const RationalFunction& b) {
    RationalFunction r{a.c * b.c, a.zeros, a.poles};
    r.zeros.insert(r.zeros.end(), b.zeros.begin(), b.zeros.end());
    r.poles.insert(r.poles.end(), b.poles.begin(), b.poles.end());
    return r;
}

inline RationalFunction abs_squared(const RationalFunction& a) {
    RationalFunction r{std::norm(a.c), a.zeros, a.poles};
    for (const auto& z : a.zeros) r.zeros.push_back(std::conj(z));
    for (const auto& p : a.poles) r.poles.push_back(std::conj(p));
    return r;
}

inline bool half_integer(double v) { return v >= 0 && std::abs(2 * v - std::round(2 * v)) < 1e-14; }

inline bool is_integer(double v) { return v >= 0 && std::abs(v - std::round(v)) < 1e-14; }

// (1 - u)^{p} (1 + u)^{q} for integer p, q as c (x - hi)^p (x - lo)^q.
inline RationalFunction jacobi_rational(const Interval& hull, int p, int q) {
    RationalFunction r;
    r.c = std::pow(-1.0, p) * std::pow(hull.rad(), -(p + q));
    for (int i = 0; i < p; ++i) r.zeros.emplace_back(hull.hi, 0.0);
    for (int i = 0; i < q; ++i) r.zeros.emplace_back(hull.lo, 0.0);
    return r;
}

}  // namespace detail

inline WeightForms weight_forms(const WeightExpr& w) {
    WeightForms f;
    std::visit(
        [&](const auto& n) {
            using T = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<T, Const>) {
                f.constant = n.v;
                f.abs_rational = RationalFunction{n.v, {}, {}};
                f.sqrt_rational = RationalFunction{n.v * n.v, {}, {}};
                f.root_r = f.abs_rational;
                f.product_r = f.abs_rational;
            } else if constexpr (std::is_same_v<T, AbsRational>) {
                f.abs_rational = n.r;
                f.sqrt_rational = detail::abs_squared(n.r);
                f.root_r = n.r;
                f.product_r = n.r;
            } else if constexpr (std::is_same_v<T, SqrtRational>) {
                f.sqrt_rational = n.r;
                f.root_r = n.r;
                f.root_m = 2;
            } else if constexpr (std::is_same_v<T, MthRootRational>) {
                f.root_r = n.r;
                f.root_m = n.m;
                if (n.m == 1) {
                    f.abs_rational = n.r;
                    f.sqrt_rational = detail::abs_squared(n.r);
                    f.product_r = n.r;
                }
            } else if constexpr (std::is_same_v<T, Jacobi>) {
                if (detail::half_integer(n.alpha) && detail::half_integer(n.beta)) {
                    int p = static_cast<int>(std::lround(2 * n.alpha)), q = static_cast<int>(std::lround(2 * n.beta));
                    f.sqrt_rational = detail::jacobi_rational(n.hull, p, q);
                    f.root_r = f.sqrt_rational;
                    f.root_m = 2;
                    if (p % 2 == 0 && q % 2 == 0) {
                        f.abs_rational = detail::jacobi_rational(n.hull, p / 2, q / 2);
                        f.product_r = f.abs_rational;
                        f.root_r = f.abs_rational;
                        f.root_m = 1;
                    }
                }
            } else if constexpr (std::is_same_v<T, InfiniteProduct>) {
                f.product_r = RationalFunction{1.0, {}, {}};
                f.product_pairs.push_back(n.p);
            } else if constexpr (std::is_same_v<T, Product>) {
                std::vector<WeightForms> fs;
                for (const auto& x : n.factors) fs.push_back(weight_forms(x));
                auto all = [&](auto pick) { return std::all_of(fs.begin(), fs.end(), pick); };
                if (all([](const WeightForms& x) { return x.constant.has_value(); })) {
                    double c = 1.0;
                    for (const auto& x : fs) c *= *x.constant;
                    f.constant = c;
                }
                if (all([](const WeightForms& x) { return x.abs_rational.has_value(); })) {
                    RationalFunction r{1.0, {}, {}};
                    for (const auto& x : fs) r = detail::times(r, *x.abs_rational);
                    f.abs_rational = r;
                    f.root_r = r;
                }
                if (all([](const WeightForms& x) { return x.sqrt_rational.has_value(); })) {
                    RationalFunction r{1.0, {}, {}};
                    for (const auto& x : fs) r = detail::times(r, *x.sqrt_rational);
                    f.sqrt_rational = r;
                    if (!f.root_r) {
                        f.root_r = r;
                        f.root_m = 2;
                    }
                }
                if (all([](const WeightForms& x) { return x.product_r.has_value(); })) {
                    RationalFunction r{1.0, {}, {}};
                    for (const auto& x : fs) {
                        r = detail::times(r, *x.product_r);
                        f.product_pairs.insert(f.product_pairs.end(), x.product_pairs.begin(), x.product_pairs.end());
                    }
                    f.product_r = r;
                }
            }
        },
        w.node);
    return f;
}

// ---------------------------------------------------------------------------
// Bound audit

struct BoundReport {
    std::string bound_id;
    int n = 0;
    bool applicable = false;     // hypotheses verified: the bound is guaranteed
    bool informational = false;  // evaluated for reference only
    std::string reason;
    double lhs = std::numeric_limits<double>::quiet_NaN();
    double rhs = std::numeric_limits<double>::quiet_NaN();
    double margin = std::numeric_limits<double>::quiet_NaN();
};

inline void to_json(nlohmann::json& j, const BoundReport& r) {
    auto num = [](double v) -> nlohmann::json {
        if (std::isfinite(v)) return v;
        return nullptr;
    };
    j = nlohmann::json{{"bound_id", r.bound_id},   {"n", r.n},           {"applicable", r.applicable},
                       {"informational", r.informational}, {"reason", r.reason}, {"lhs", num(r.lhs)},
                       {"rhs", num(r.rhs)},        {"margin", num(r.margin)}};
}

namespace detail {

inline bool real_point_in(const RealCompactSet& k, const cplx& z) {
    double scale = std::max(1.0, k.hull().length());
    return std::abs(z.imag()) <= 1e-13 * scale && k.contains(z.real(), 1e-13 * scale);
}

// g_K vanishes on K (finite gap sets are regular), so points of K add exactly 0.
inline double sum_green(const EquilibriumMeasure& m, const std::vector<cplx>& pts) {
    double s = 0.0;
    for (const auto& z : pts)
        if (!real_point_in(m.set(), z)) s += green_value(m, z);
    return s;
}

inline bool all_in(const RealCompactSet& k, const std::vector<cplx>& pts) {
    return std::all_of(pts.begin(), pts.end(), [&](const cplx& z) { return real_point_in(k, z); });
}

inline bool none_in(const RealCompactSet& k, const std::vector<cplx>& pts) {
    return std::none_of(pts.begin(), pts.end(), [&](const cplx& z) { return real_point_in(k, z); });
}

// R >= 0 on K: every real zero inside a band has even multiplicity and R is
// positive somewhere on each band. Real poles on K are rejected elsewhere.
inline bool nonnegative_on(const RealCompactSet& k, const RationalFunction& r) {
    if (!r.is_real()) return false;
    double scale = std::max(1.0, k.hull().length());
    std::vector<double> real_zeros;
    for (const auto& z : r.zeros)
        if (std::abs(z.imag()) <= 1e-14 * std::max(1.0, std::abs(z))) real_zeros.push_back(z.real());
    std::sort(real_zeros.begin(), real_zeros.end());
    for (const auto& b : k.bands()) {
        for (std::size_t i = 0; i < real_zeros.size();) {
            std::size_t j = i;
            while (j < real_zeros.size() && real_zeros[j] - real_zeros[i] <= 1e-12 * scale) ++j;
            double z = real_zeros[i];
            if (z > b.lo + 1e-13 * scale && z < b.hi - 1e-13 * scale && (j - i) % 2 == 1) return false;
            i = j;
        }
        double best = 0.0, val = 0.0;
        for (int q = 0; q <= 32; ++q) {
            double x = b.lo + (b.hi - b.lo) * (q + 0.5) / 33.0;
            double v = r(x).real();
            if (std::abs(v) > best) {
                best = std::abs(v);
                val = v;
            }
        }
        if (!(val > 0.0)) return false;
    }
    return true;
}

struct ProductStatus {
    bool valid = true;
    bool a_in_k = true;
    double sum_g_a = 0.0;
    std::string why;
};

inline ProductStatus product_status(const EquilibriumMeasure& m, const std::vector<ProductPairs>& ps) {
    ProductStatus s;
    for (const auto& p : ps) {
        ProductValidation v = validate_product(m, p);
        if (!v.ok) {
            s.valid = false;
            s.why = v.violations.empty() ? "product validation failed" : v.violations.front();
        }
        for (std::size_t j = 0; j < p.size(); ++j) {
            if (!m.set().contains(p.a[j], 1e-14 * std::max(1.0, m.set().hull().length()))) s.a_in_k = false;
            s.sum_g_a += p.r[j] * green_value(m, p.a[j]);
        }
    }
    return s;
}

inline BoundReport make_report(std::string id, int n, double lhs) {
    BoundReport r;
    r.bound_id = std::move(id);
    r.n = n;
    r.lhs = lhs;
    return r;
}

inline void set_rhs(BoundReport& r, double rhs, bool applicable, std::string reason) {
    r.rhs = rhs;
    r.margin = r.lhs - rhs;
    r.applicable = applicable;
    r.informational = !applicable;
    r.reason = std::move(reason);
}

inline void not_applicable(BoundReport& r, std::string reason) {
    r.applicable = false;
    r.informational = false;
    r.reason = std::move(reason);
}

}  // namespace detail

/// Every sup-norm lower bound, with applicability decided from the weight's
/// normal forms. `lhs` is the certified lower end of the W_{inf,n} bracket.
inline std::vector<BoundReport> bound_audit(const EquilibriumMeasure& m, const WeightExpr& w, int n,
                                            const WidomBracket& wb, const SzegoResult& s) {
    const RealCompactSet& k = m.set();
    double lhs = wb.lo;
    double S = s.value;
    WeightForms f = weight_forms(w);
    WeightCheck chk = check_weight(k, w);
    std::vector<BoundReport> out;
    double best_guaranteed = -std::numeric_limits<double>::infinity();
    auto push = [&](BoundReport r) {
        if (r.applicable) best_guaranteed = std::max(best_guaranteed, r.rhs);
        out.push_back(std::move(r));
    };

    {
        auto r = detail::make_report("S-univ", n, lhs);
        if (chk.ok)
            detail::set_rhs(r, S, true, "bounded weight");
        else
            detail::set_rhs(r, S, false, chk.reason);
        push(r);
    }
    {
        auto r = detail::make_report("Schief", n, lhs);
        if (f.constant && *f.constant > 0)
            detail::set_rhs(r, 2.0 * *f.constant, true, "constant weight");
        else
            detail::not_applicable(r, "weight is not constant");
        push(r);
    }
    {
        auto r1 = detail::make_report("LB1-Cheb", n, lhs);
        auto r2 = detail::make_report("LB2-Cheb", n, lhs);
        if (!f.sqrt_rational) {
            detail::not_applicable(r1, "weight is not the square root of a rational function");
            detail::not_applicable(r2, "weight is not the square root of a rational function");
        } else {
            const RationalFunction& R = *f.sqrt_rational;
            bool ok = chk.ok && detail::nonnegative_on(k, R) && detail::none_in(k, R.poles);
            if (!ok) {
                detail::not_applicable(r1, "R is not bounded and non-negative on K");
                detail::not_applicable(r2, "R is not bounded and non-negative on K");
            } else if (!(2 * n > R.d())) {
                detail::not_applicable(r1, "needs n > d/2");
                detail::not_applicable(r2, "needs n > d/2");
            } else {
                double ga = detail::sum_green(m, R.zeros);
                detail::set_rhs(r1, 2.0 * S * std::exp(-0.5 * ga), true, "w = sqrt(R), n > d/2");
                if (detail::all_in(k, R.zeros))
                    detail::set_rhs(r2, 2.0 * S, true, "zeros of R are regular points of K");
                else
                    detail::not_applicable(r2, "some zero of R is not in K");
            }
        }
        push(r1);
        push(r2);
    }
    {
        auto r = detail::make_report("LB3-Cheb", n, lhs);
        if (!f.abs_rational)
            detail::not_applicable(r, "weight is not |R| for a rational R");
        else if (!detail::none_in(k, f.abs_rational->poles))
            detail::not_applicable(r, "pole of R on K");
        else if (!(n > f.abs_rational->d()))
            detail::not_applicable(r, "needs n > d");
        else
            detail::set_rhs(r, 2.0 * S * std::exp(-detail::sum_green(m, f.abs_rational->zeros)), true, "w = |R|, n > d");
        push(r);
    }
    {
        auto r = detail::make_report("LB4-Cheb", n, lhs);
        if (!f.root_r) {
            detail::not_applicable(r, "weight is not a root of a rational function");
        } else {
            const RationalFunction& R = *f.root_r;
            int mm = f.root_m;
            if (!detail::none_in(k, R.poles)) {
                detail::not_applicable(r, "pole of R on K");
            } else if (!(mm * n > R.d() && 2 * n > R.d())) {
                detail::not_applicable(r, "needs m n > d and n > d/2");
            } else {
                double a = (mm % 2 == 0 && detail::nonnegative_on(k, R)) ? 4.0 : 2.0;
                double rhs = std::pow(a, 1.0 / mm) * S * std::exp(-detail::sum_green(m, R.zeros) / mm);
                detail::set_rhs(r, rhs, true, "w = |R|^{1/" + std::to_string(mm) + "}");
            }
        }
        push(r);
    }
    {
        auto r5 = detail::make_report("LB5-Cheb", n, lhs);
        auto r6 = detail::make_report("LB6-Cheb", n, lhs);
        bool pure = f.product_r && !f.product_pairs.empty() && f.product_r->d0() == 0 && f.product_r->d1() == 0 &&
                    std::abs(std::abs(f.product_r->c) - 1.0) < 1e-15;
        if (!pure) {
            detail::not_applicable(r5, "weight is not a pure infinite product");
            detail::not_applicable(r6, "weight is not a pure infinite product");
        } else {
            auto ps = detail::product_status(m, f.product_pairs);
            if (!ps.valid) {
                detail::not_applicable(r5, ps.why);
                detail::not_applicable(r6, ps.why);
            } else {
                detail::set_rhs(r6, 2.0 * S * std::exp(-ps.sum_g_a), true, "validated product");
                if (ps.a_in_k)
                    detail::set_rhs(r5, 2.0 * S, true, "validated product with a_j in K");
                else
                    detail::not_applicable(r5, "some a_j not in K");
            }
        }
        push(r5);
        push(r6);
    }
    {
        auto r = detail::make_report("LB7-Cheb", n, lhs);
        if (!f.product_r) {
            detail::not_applicable(r, "weight is not a rational product weight");
        } else {
            const RationalFunction& R = *f.product_r;
            auto ps = detail::product_status(m, f.product_pairs);
            if (!detail::all_in(k, R.zeros) || !detail::none_in(k, R.poles))
                detail::not_applicable(r, "rational part needs zeros in K and poles off K");
            else if (!ps.valid)
                detail::not_applicable(r, ps.why);
            else if (!ps.a_in_k)
                detail::not_applicable(r, "some a_j not in K");
            else if (!(n > R.d1() - R.d0()))
                detail::not_applicable(r, "needs n > d1 - d0");
            else
                detail::set_rhs(r, 2.0 * S, true, "rational product weight");
        }
        push(r);
    }
    {
        auto r = detail::make_report("2S", n, lhs);
        bool g = best_guaranteed >= 2.0 * S * (1.0 - 1e-12);
        detail::set_rhs(r, 2.0 * S, g, g ? "implied by an applicable bound" : "no applicable bound; informational");
        out.push_back(r);
    }
    {
        auto r = detail::make_report("sqrt2S", n, lhs);
        detail::set_rhs(r, std::numbers::sqrt2 * S, false, "asymptotic statement; informational");
        out.push_back(r);
    }
    return out;
}

inline std::vector<BoundReport> bound_audit(const EquilibriumMeasure& m, const WeightExpr& w, int n,
                                            const MinimaxOptions& opt = {}) {
    WidomBracket wb = widom_infty(m, w, n, opt);
    return bound_audit(m, w, n, wb, szego_factor(m, w));
}

// ---------------------------------------------------------------------------
// Equality case

struct EqualityReport {
    double distance = std::numeric_limits<double>::infinity();
    RealCompactSet preimage = make_set({{0.0, 1.0}});
    bool zeros_avoid_poles = true;
    double min_pole_distance = std::numeric_limits<double>::infinity();
    bool holds = false;
    std::string error;
};

/// Compares K with {x : R(x) Q_n(x)^2 in [0, 1]}, Q_n = T_{n,w} / t_n.
inline EqualityReport equality_case_check(const EquilibriumMeasure& m, const RationalFunction& r,
                                          const MinimaxResult& res, double tol = 1e-6) {
    EqualityReport rep;
    RealPolynomial q = res.normalized();
    try {
        rep.preimage = sublevel_bands(r, q, {0.0, 1.0});
        rep.distance = hausdorff_distance(rep.preimage, m.set());
    } catch (const Error& e) {
        rep.error = e.what();
    }
    for (const auto& z : q.roots())
        for (const auto& p : r.poles) rep.min_pole_distance = std::min(rep.min_pole_distance, std::abs(z - p));
    double scale = std::max(1.0, m.set().hull().length());
    rep.zeros_avoid_poles = rep.min_pole_distance > 1e-8 * scale;
    rep.holds = rep.distance < tol && rep.zeros_avoid_poles;
    return rep;
}

// ---------------------------------------------------------------------------
// Asymptotic sweeps

struct SweepRow {
    int n = 0;
    double t_lower = 0.0, t_upper = 0.0;
    double w_lower = 0.0, w_upper = 0.0;
    double two_s = 0.0;
    double abs_diff = 0.0;  // |W - 2S| at the bracket midpoint
    std::string error;
};

struct SweepTable {
    double cap = 0.0;
    double s = 0.0;
    std::vector<SweepRow> rows;
    bool decreasing = false;  // see detail::trend_decreasing
};

namespace detail {

/// Each |value - limit| is strictly below its predecessor, or already at the
/// rounding floor (equality families sit at the limit for every n).
template <class Row>
bool trend_decreasing(const std::vector<Row>& rows, double floor) {
    double prev = std::numeric_limits<double>::infinity();
    int used = 0;
    for (const auto& r : rows) {
        if constexpr (requires { r.error; })
            if (!r.error.empty()) return false;
        if (!(r.abs_diff < prev || r.abs_diff <= floor)) return false;
        prev = r.abs_diff;
        ++used;
    }
    return used > 0;
}

}  // namespace detail

inline SweepTable asymptotic_sweep(const EquilibriumMeasure& m, const WeightExpr& w, const std::vector<int>& n_list,
                                   const MinimaxOptions& opt = {}, double floor = 1e-9) {
    if (!std::is_sorted(n_list.begin(), n_list.end())) throw Error("invalid-input", "n_list must increase");
    SweepTable t;
    t.cap = m.capacity();
    SzegoResult s = szego_factor(m, w);
    t.s = s.value;
    for (int n : n_list) {
        SweepRow row;
        row.n = n;
        row.two_s = 2.0 * t.s;
        try {
            WidomBracket b = widom_infty(m, w, n, opt);
            row.t_lower = b.minimax.t_lower;
            row.t_upper = b.minimax.t_upper;
            row.w_lower = b.lo;
            row.w_upper = b.hi;
            row.abs_diff = std::abs(b.mid() - row.two_s);
        } catch (const Error& e) {
            row.error = e.what();
        }
        t.rows.push_back(row);
    }
    t.decreasing = detail::trend_decreasing(t.rows, floor);
    return t;
}

}  // namespace widomlab

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "widomlab/chebyshev.hpp"
#include "widomlab/error.hpp"
#include "widomlab/polynomial.hpp"
#include "widomlab/potential.hpp"
#include "widomlab/preimage.hpp"
#include "widomlab/quadrature.hpp"
#include "widomlab/weights.hpp"

namespace widomlab {

/// Discrete approximation of w d mu_K: nodes in K with positive weights.
struct SpectralMeasure {
    EquilibriumMeasure measure;
    WeightExpr w;
    std::vector<double> x;
    std::vector<double> lambda;
    double total_mass = 0.0;
    int nodes_per_band = 0;  // budget that produced the discretization

    [[nodiscard]] const RealCompactSet& set() const { return measure.set(); }
};

/// Monic three-term recurrence P_{k+1} = (x - alpha_k) P_k - beta_k P_{k-1};
/// beta[0] is the total mass, so ||P_n||^2 = beta_0 ... beta_n.
struct RecurrenceTable {
    std::vector<double> alpha;
    std::vector<double> beta;
    std::vector<double> log_norm;  // log ||P_n||^2

    [[nodiscard]] int size() const { return static_cast<int>(log_norm.size()) - 1; }
};

namespace detail {

struct Panel {
    double lo, hi;          // angle range
    double theta_s = 0.0;   // singular angle the panel is graded toward
    bool graded = false;
};

inline std::vector<double> chebyshev_moments(const std::vector<double>& x, const std::vector<double>& lam,
                                             const Interval& hull, int count) {
    std::vector<double> mu(static_cast<std::size_t>(count), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        double u = (x[i] - hull.mid()) / hull.rad();
        double t0 = 1.0, t1 = u;
        for (int k = 0; k < count; ++k) {
            double tk = k == 0 ? t0 : (k == 1 ? t1 : 0.0);
            if (k >= 2) {
                tk = 2.0 * u * t1 - t0;
                t0 = t1;
                t1 = tk;
            }
            mu[static_cast<std::size_t>(k)] += lam[i] * tk;
        }
    }
    return mu;
}

inline void discretize_once(const EquilibriumMeasure& m, const WeightExpr& w, int budget, std::vector<double>& xs,
                            std::vector<double>& ls) {
    const RealCompactSet& k = m.set();
    std::vector<double> sing = singular_points(w);
    constexpr int kOrder = 32;
    const quad::Rule& rule = quad::gauss_legendre(kOrder);
    xs.clear();
    ls.clear();
    double scale = std::max(1.0, k.hull().length());
    for (std::size_t bi = 0; bi < k.size(); ++bi) {
        const Interval& b = k.band(bi);
        // Angles decrease as x increases; work with theta in [0, pi].
        auto theta_of = [&](double x) { return std::acos(std::clamp((x - b.mid()) / b.rad(), -1.0, 1.0)); };
        std::vector<std::pair<double, bool>> cuts{{0.0, false}, {std::numbers::pi, false}};
        for (double s : sing) {
            if (!std::isfinite(s)) continue;
            if (std::abs(s - b.hi) <= 1e-14 * scale)
                cuts[0].second = true;
            else if (std::abs(s - b.lo) <= 1e-14 * scale)
                cuts[1].second = true;
            else if (s > b.lo && s < b.hi)
                cuts.emplace_back(theta_of(s), true);
        }
        std::sort(cuts.begin(), cuts.end());
        double max_panel = std::numbers::pi * kOrder / budget;
        std::vector<Panel> panels;
        for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
            double a = cuts[c].first, z = cuts[c + 1].first;
            if (z <= a) continue;
            int np = std::max(1, static_cast<int>(std::ceil((z - a) / max_panel)));
            double h = (z - a) / np;
            for (int p = 0; p < np; ++p) {
                double lo = a + p * h, hi = (p + 1 == np) ? z : a + (p + 1) * h;
                bool sl = p == 0 && cuts[c].second, sh = p + 1 == np && cuts[c + 1].second;
                if (!sl && !sh) {
                    panels.push_back({lo, hi});
                    continue;
                }
                if (sl && sh) {
                    double mid = 0.5 * (lo + hi);
                    for (int side = 0; side < 2; ++side) {
                        double ts = side == 0 ? lo : hi, len = 0.5 * (hi - lo), dir = side == 0 ? 1.0 : -1.0;
                        for (double outer = len; outer > 1e-15 * len; outer *= 0.25) {
                            double inner = outer * 0.25;
                            double p1 = ts + dir * inner, p2 = ts + dir * outer;
                            panels.push_back({std::min(p1, p2), std::max(p1, p2), ts, true});
                        }
                        (void)mid;
                    }
                    continue;
                }
                double ts = sl ? lo : hi, len = hi - lo, dir = sl ? 1.0 : -1.0;
                for (double outer = len; outer > 1e-15 * len; outer *= 0.25) {
                    double inner = outer * 0.25;
                    double p1 = ts + dir * inner, p2 = ts + dir * outer;
                    panels.push_back({std::min(p1, p2), std::max(p1, p2), ts, true});
                }
            }
        }
        for (const Panel& pn : panels) {
            double mid = 0.5 * (pn.lo + pn.hi), half = 0.5 * (pn.hi - pn.lo);
            double xs_sing = b.mid() + b.rad() * std::cos(pn.theta_s);
            for (std::size_t q = 0; q < rule.x.size(); ++q) {
                double th = mid + half * rule.x[q];
                double x = b.mid() + b.rad() * std::cos(th);
                double lw;
                if (pn.graded) {
                    double dx = -2.0 * b.rad() * std::sin(0.5 * (th + pn.theta_s)) * std::sin(0.5 * (th - pn.theta_s));
                    double xsing = xs_sing;
                    if (pn.theta_s == 0.0) xsing = b.hi;
                    if (pn.theta_s == std::numbers::pi) xsing = b.lo;
                    lw = log_eval(w, x, dx, xsing);
                } else {
                    lw = log_eval(w, x);
                }
                double lam = rule.w[q] * half * m.rho_theta(bi, th) * std::exp(lw);
                if (!std::isfinite(lam)) throw Error("nan", "weight not finite at a quadrature node");
                if (lam > 0.0) {
                    xs.push_back(x);
                    ls.push_back(lam);
                }
            }
        }
    }
}

}  // namespace detail

/// Nodes of d mu_K (angle-variable Gauss-Legendre panels, split and graded at
/// the weight's singular points) reweighted by w; the budget doubles until the
/// first eight Chebyshev moments agree to 1e-12 relative.
inline SpectralMeasure discretize(const EquilibriumMeasure& m, const WeightExpr& w, int nodes_per_band = 512) {
    Interval hull = m.set().hull();
    std::vector<double> x0, l0, x1, l1;
    int budget = std::max(64, nodes_per_band);
    detail::discretize_once(m, w, budget, x0, l0);
    auto mu0 = detail::chebyshev_moments(x0, l0, hull, 8);
    for (int level = 0; level < 5; ++level) {
        detail::discretize_once(m, w, 2 * budget, x1, l1);
        auto mu1 = detail::chebyshev_moments(x1, l1, hull, 8);
        double diff = 0.0;
        for (std::size_t k = 0; k < mu0.size(); ++k) diff = std::max(diff, std::abs(mu1[k] - mu0[k]));
        if (!(mu1[0] > 0.0)) throw Error("degenerate", "weight vanishes on K");
        if (diff <= 1e-12 * mu1[0]) {
            SpectralMeasure s{m, w, std::move(x0), std::move(l0), 0.0, budget};
            double t = 0.0;
            for (double v : s.lambda) t += v;
            s.total_mass = t;
            return s;
        }
        budget *= 2;
        x0 = std::move(x1);
        l0 = std::move(l1);
        mu0 = std::move(mu1);
    }
    throw Error("non-convergence", "moments of the discretized measure did not stabilize");
}

namespace detail {

inline bool lanczos(const SpectralMeasure& s, int n, RecurrenceTable& out) {
    Interval hull = s.set().hull();
    std::size_t m = s.x.size();
    std::vector<double> u(m);
    for (std::size_t i = 0; i < m; ++i) u[i] = (s.x[i] - hull.mid()) / hull.rad();
    double b0 = 0.0;
    for (double l : s.lambda) b0 += l;
    std::vector<std::vector<double>> q;
    q.emplace_back(m);
    for (std::size_t i = 0; i < m; ++i) q[0][i] = std::sqrt(s.lambda[i] / b0);
    std::vector<double> alpha, beta{b0};
    std::vector<double> v(m);
    for (int k = 0; k <= n; ++k) {
        const auto& qk = q.back();
        for (std::size_t i = 0; i < m; ++i) v[i] = u[i] * qk[i];
        double a = 0.0;
        for (std::size_t i = 0; i < m; ++i) a += qk[i] * v[i];
        alpha.push_back(a);
        if (k == n) break;
        for (std::size_t i = 0; i < m; ++i) v[i] -= a * qk[i];
        if (k > 0) {
            double sb = std::sqrt(beta.back());
            const auto& qp = q[q.size() - 2];
            for (std::size_t i = 0; i < m; ++i) v[i] -= sb * qp[i];
        }
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& qj : q) {
                double d = 0.0;
                for (std::size_t i = 0; i < m; ++i) d += qj[i] * v[i];
                for (std::size_t i = 0; i < m; ++i) v[i] -= d * qj[i];
            }
        double nb = 0.0;
        for (double x : v) nb += x * x;
        if (!(nb > 0.0) || !std::isfinite(nb)) return false;
        beta.push_back(nb);
        std::vector<double> nq(m);
        double inv = 1.0 / std::sqrt(nb);
        for (std::size_t i = 0; i < m; ++i) nq[i] = v[i] * inv;
        q.push_back(std::move(nq));
    }
    out.alpha.clear();
    out.beta.clear();
    out.log_norm.clear();
    double r = hull.rad();
    for (double a : alpha) out.alpha.push_back(hull.mid() + r * a);
    out.beta.push_back(beta[0]);
    for (std::size_t k = 1; k < beta.size(); ++k) out.beta.push_back(r * r * beta[k]);
    double acc = 0.0;
    for (double b : out.beta) {
        acc += std::log(b);
        out.log_norm.push_back(acc);
    }
    return true;
}

}  // namespace detail

/// Recurrence coefficients up to degree n by discretized Stieltjes (Lanczos on
/// the node vector) with full reorthogonalization.
inline RecurrenceTable stieltjes(const SpectralMeasure& s, int n) {
    if (n < 0) throw Error("invalid-degree", "stieltjes needs n >= 0");
    if (4 * n > static_cast<int>(s.x.size())) throw Error("invalid-degree", "n exceeds a quarter of the node count");
    RecurrenceTable t;
    if (detail::lanczos(s, n, t)) return t;
    SpectralMeasure finer = discretize(s.measure, s.w, 2 * s.nodes_per_band);
    if (detail::lanczos(finer, n, t)) return t;
    throw Error("non-positive-beta", "recurrence broke down: discretization too coarse");
}

/// Discretize with the max(512, 8n) node budget and run stieltjes.
inline RecurrenceTable recurrence(const EquilibriumMeasure& m, const WeightExpr& w, int n) {
    return stieltjes(discretize(m, w, std::max(512, 8 * n)), n);
}

/// P_n from the recurrence, as a polynomial on the hull.
inline RealPolynomial monic_orthogonal(const RecurrenceTable& t, int n, Interval domain) {
    if (n > static_cast<int>(t.alpha.size())) throw Error("invalid-degree", "recurrence too short");
    RealPolynomial prev = RealPolynomial::constant(0.0, domain);
    RealPolynomial cur = RealPolynomial::constant(1.0, domain);
    RealPolynomial x = RealPolynomial::identity(domain);
    for (int k = 0; k < n; ++k) {
        RealPolynomial next = (x - RealPolynomial::constant(t.alpha[static_cast<std::size_t>(k)], domain)) * cur;
        if (k > 0) next = next - prev * t.beta[static_cast<std::size_t>(k)];
        prev = std::move(cur);
        cur = std::move(next);
    }
    return cur;
}

struct L2Widom {
    double value = 0.0;  // [W_{2,n}]^2
    double log_value = 0.0;
};

inline L2Widom widom_2(const EquilibriumMeasure& m, const RecurrenceTable& t, int n) {
    if (n > t.size()) throw Error("invalid-degree", "recurrence too short");
    L2Widom r;
    r.log_value = t.log_norm[static_cast<std::size_t>(n)] - 2.0 * n * m.log_capacity();
    r.value = std::exp(r.log_value);
    return r;
}

/// [W_{2,n}(K, w)]^2 = ||P_n||^2 / cap^{2n}, in the log domain.
inline L2Widom widom_2(const EquilibriumMeasure& m, const WeightExpr& w, int n) {
    return widom_2(m, recurrence(m, w, n), n);
}

// ---------------------------------------------------------------------------
// L^2 bound audit

/// Lower bounds for [W_{2,n}]^2. `lhs` is the squared Widom factor.
inline std::vector<BoundReport> l2_bound_audit(const EquilibriumMeasure& m, const WeightExpr& w, int n, double w2sq,
                                               const SzegoResult& s) {
    const RealCompactSet& k = m.set();
    double S = s.value;
    WeightForms f = weight_forms(w);
    WeightCheck chk = check_weight(k, w);
    std::vector<BoundReport> out;
    {
        auto r = detail::make_report("good-old-uni", n, w2sq);
        if (chk.ok)
            detail::set_rhs(r, S, true, "integrable weight");
        else
            detail::set_rhs(r, S, false, chk.reason);
        out.push_back(r);
    }
    auto r1 = detail::make_report("LB1-OP", n, w2sq);
    auto r2 = detail::make_report("LB2-OP", n, w2sq);
    if (!f.product_r) {
        detail::not_applicable(r1, "weight is not a rational product weight");
        detail::not_applicable(r2, "weight is not a rational product weight");
    } else {
        // The weight must itself be a rational function on K: R of constant sign
        // and product factors |(x - a)/(x - b)|^r with r even.
        RationalFunction R = *f.product_r;
        RationalFunction neg = R;
        neg.c = -neg.c;
        auto ps = detail::product_status(m, f.product_pairs);
        bool even = true;
        for (const auto& p : f.product_pairs) {
            for (int rj : p.r) even = even && rj % 2 == 0;
            if (p.tail) even = even && p.tail->r % 2 == 0;
        }
        std::string why;
        if (!detail::none_in(k, R.poles)) why = "pole of R on K";
        else if (!detail::nonnegative_on(k, R) && !detail::nonnegative_on(k, neg)) why = "weight is |R| with R changing sign on K, not a rational function";
        else if (!ps.valid) why = ps.why;
        else if (!ps.a_in_k) why = "some a_j not in K";
        else if (!even) why = "odd product multiplicity: weight is not rational";
        else if (!(2 * n > R.d())) why = "needs n > (d1 - d0) / 2";
        if (!why.empty()) {
            detail::not_applicable(r1, why);
            detail::not_applicable(r2, why);
        } else {
            double g2 = 2.0 * detail::sum_green(m, R.zeros);
            // 1 - exp(-x) without cancellation for small x.
            double rhs1 = 2.0 * S / (1.0 + std::sqrt(-std::expm1(-g2)));
            detail::set_rhs(r1, rhs1, true, "rational weight");
            if (detail::all_in(k, R.zeros))
                detail::set_rhs(r2, 2.0 * S, true, "zeros in K");
            else
                detail::not_applicable(r2, "some zero of the rational part is not in K");
        }
    }
    out.push_back(r1);
    out.push_back(r2);
    {
        auto r = detail::make_report("improv-l2", n, w2sq);
        bool g = r2.applicable;
        detail::set_rhs(r, 2.0 * S, g, g ? "implied by LB2-OP" : "no applicable bound; informational");
        out.push_back(r);
    }
    return out;
}

inline std::vector<BoundReport> l2_bound_audit(const EquilibriumMeasure& m, const WeightExpr& w, int n) {
    return l2_bound_audit(m, w, n, widom_2(m, w, n).value, szego_factor(m, w));
}

// ---------------------------------------------------------------------------
// Interval limit and equality case

struct L2Row {
    int n = 0;
    double w2sq = 0.0;
    double two_s = 0.0;
    double abs_diff = 0.0;
};

struct L2Table {
    double s = 0.0;
    std::vector<L2Row> rows;
    bool decreasing = false;
};

/// Rows (n, [W_{2,n}]^2, 2S) on an interval, where the limit is 2S.
inline L2Table szego_limit_check(const EquilibriumMeasure& m, const WeightExpr& w, const std::vector<int>& n_list,
                                 double floor = 1e-9) {
    if (m.set().size() != 1) throw Error("invalid-input", "szego_limit_check needs an interval");
    if (!std::is_sorted(n_list.begin(), n_list.end())) throw Error("invalid-input", "n_list must increase");
    L2Table t;
    t.s = szego_factor(m, w).value;
    RecurrenceTable rec = recurrence(m, w, n_list.empty() ? 0 : n_list.back());
    for (int n : n_list) {
        L2Row r;
        r.n = n;
        r.w2sq = widom_2(m, rec, n).value;
        r.two_s = 2.0 * t.s;
        r.abs_diff = std::abs(r.w2sq - r.two_s);
        t.rows.push_back(r);
    }
    t.decreasing = detail::trend_decreasing(t.rows, floor);
    return t;
}

struct L2EqualityReport {
    double distance = std::numeric_limits<double>::infinity();
    double q_norm = 0.0;      // int w Q_n^2 d mu_K by adaptive quadrature (1/2 by construction)
    double coeff_diff = 0.0;  // max |P_n - T_{n, sqrt w}| in hull-Chebyshev coefficients, relative
    bool zeros_avoid_poles = true;
    bool holds = false;
    std::string error;
};

/// With w = R: is K = (w Q_n^2)^{-1}([0, 1]) for Q_n = P_n / sqrt(2 ||P_n||^2), and
/// does P_n coincide with T_{n, sqrt w}?
inline L2EqualityReport l2_equality_case_check(const EquilibriumMeasure& m, const RationalFunction& r, int n,
                                               double tol = 1e-6) {
    L2EqualityReport rep;
    Interval hull = m.set().hull();
    WeightExpr w = AbsRational{r};
    RecurrenceTable t = recurrence(m, w, n);
    RealPolynomial p = monic_orthogonal(t, n, hull);
    RealPolynomial q = p * std::exp(-0.5 * (std::log(2.0) + t.log_norm[static_cast<std::size_t>(n)]));
    IntegrateOptions o;
    o.singular_points = singular_points(w);
    rep.q_norm = m.integrate([&](double x, double) { return eval(w, x) * q(x) * q(x); }, o);
    try {
        rep.distance = hausdorff_distance(sublevel_bands(r, q, {0.0, 1.0}), m.set());
    } catch (const Error& e) {
        rep.error = e.what();
    }
    for (const auto& z : q.roots())
        for (const auto& b : r.poles)
            if (std::abs(z - b) <= 1e-8 * std::max(1.0, hull.length())) rep.zeros_avoid_poles = false;
    try {
        MinimaxResult c = weighted_chebyshev(m, SqrtRational{r}, n);
        RealPolynomial tc = c.poly();
        double big = 0.0, diff = 0.0;
        for (std::size_t k = 0; k < p.cheb().size(); ++k) {
            big = std::max(big, std::abs(p.cheb()[k]));
            double tv = k < tc.cheb().size() ? tc.cheb()[k] : 0.0;
            diff = std::max(diff, std::abs(p.cheb()[k] - tv));
        }
        rep.coeff_diff = diff / big;
    } catch (const Error& e) {
        rep.coeff_diff = std::numeric_limits<double>::infinity();
        if (rep.error.empty()) rep.error = e.what();
    }
    rep.holds = rep.distance < tol && rep.coeff_diff < tol && rep.zeros_avoid_poles;
    return rep;
}

}  // namespace widomlab

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "instances.hpp"
#include "widomlab/chebyshev.hpp"

using namespace widomlab;

namespace {

const EquilibriumMeasure& interval() {
    static const EquilibriumMeasure m(make_set({{-1, 1}}));
    return m;
}

const EquilibriumMeasure& two_band() {
    static const EquilibriumMeasure m(make_set({{-1, -0.5}, {0.5, 1}}));
    return m;
}

// max |w p| over a dense uniform sample of K.
template <class P>
double dense_sup(const RealCompactSet& k, const WeightExpr& w, const P& p, int per_band = 20001) {
    double s = 0.0;
    for (const auto& b : k.bands())
        for (int i = 0; i < per_band; ++i) {
            double x = b.lo + (b.hi - b.lo) * i / (per_band - 1);
            s = std::max(s, std::abs(eval(w, x) * p(x)));
        }
    return s;
}

// Oracle for the odd monic cubic x^3 - a x on a symmetric set: golden section in a.
double odd_cubic_minimax(const RealCompactSet& k) {
    auto f = [&](double a) { return dense_sup(k, Const{1.0}, [a](double x) { return x * x * x - a * x; }, 4001); };
    double lo = 0.0, hi = 2.0, g = (std::sqrt(5.0) - 1) / 2;
    double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
    for (int i = 0; i < 80; ++i) {
        if (f(c) < f(d))
            hi = d;
        else
            lo = c;
        c = hi - g * (hi - lo);
        d = lo + g * (hi - lo);
    }
    return f(0.5 * (lo + hi));
}

const BoundReport& find(const std::vector<BoundReport>& v, const std::string& id) {
    for (const auto& r : v)
        if (r.bound_id == id) return r;
    throw std::runtime_error("missing bound " + id);
}

}  // namespace

TEST(WeightedChebyshev, ConstantWeightIntervalIsTwo) {
    for (int n = 1; n <= 30; ++n) {
        WidomBracket b = widom_infty(interval(), Const{1.0}, n);
        EXPECT_LE(b.lo, 2.0) << n;
        EXPECT_GE(b.hi, 2.0) << n;
        EXPECT_NEAR(b.mid(), 2.0, 1e-7) << n;
        EXPECT_LE(b.minimax.rel_gap(), 1e-10);
    }
}

TEST(WeightedChebyshev, ClassicalT5) {
    MinimaxResult r = weighted_chebyshev(interval(), Const{1.0}, 5);
    EXPECT_NEAR(r.t_upper, 0.0625, 1e-12);
    // 2^{-4} T_5 in hull-Chebyshev coefficients.
    RealPolynomial p = r.poly();
    for (std::size_t k = 0; k < p.cheb().size(); ++k) EXPECT_NEAR(p.cheb()[k], k == 5 ? 0.0625 : 0.0, 1e-12) << k;
    // Monic degree 5: n + 1 = 6 alternation points cos(k pi / 5).
    ASSERT_EQ(r.extremal_points.size(), 6u);
    EXPECT_TRUE(r.alternation_certified);
    for (std::size_t k = 0; k < 6; ++k) {
        double x = std::cos(std::numbers::pi * static_cast<double>(5 - k) / 5.0);
        EXPECT_NEAR(r.extremal_points[k].x, x, 1e-6);
    }
    for (std::size_t k = 1; k < 6; ++k) EXPECT_EQ(r.extremal_points[k].sign, -r.extremal_points[k - 1].sign);
}

TEST(WeightedChebyshev, SqrtOneMinusXSquaredEqualsTwoS) {
    for (int n = 1; n <= 20; ++n) {
        WidomBracket b = widom_infty(interval(), sqrt_one_minus_x2(), n);
        EXPECT_NEAR(b.minimax.t_upper, std::ldexp(1.0, -n), 1e-6 * std::ldexp(1.0, -n)) << n;
        EXPECT_NEAR(b.mid(), 1.0, 1e-6) << n;
    }
}

TEST(WeightedChebyshev, JacobiQuarterClosedForm) {
    // For n = 1 the minimax is x - c with c = 0 by symmetry; maximize |x|(1-x^2)^{1/4}.
    double a = 0.25;
    double closed = 2.0 * std::pow(2 * a, a) / std::pow(1 + 2 * a, a + 0.5);
    double x = std::sqrt(1.0 / (1 + 2 * a));  // critical point of x (1-x^2)^a
    double direct = 2.0 * x * std::pow(1 - x * x, a);
    ASSERT_NEAR(closed, direct, 1e-15);
    WidomBracket b = widom_infty(interval(), Jacobi{0.25, 0.25}, 1);
    EXPECT_NEAR(b.mid(), closed, 1e-6);
    EXPECT_LT(b.hi, std::sqrt(2.0));
}

TEST(WeightedChebyshev, TwoBandEvenAndOdd) {
    const auto& m = two_band();
    EXPECT_NEAR(m.capacity(), std::sqrt(3.0) / 4, 1e-10);
    // n = 2: x^2 - 5/8 has sup 3/8 = 2 cap^2.
    EXPECT_NEAR(widom_infty(m, Const{1.0}, 2).mid(), 2.0, 1e-8);
    WidomBracket b3 = widom_infty(m, Const{1.0}, 3);
    double oracle = odd_cubic_minimax(m.set()) / std::pow(m.capacity(), 3);
    EXPECT_NEAR(b3.mid(), oracle, 1e-6);
    EXPECT_NEAR(b3.mid(), 3.0792014357, 1e-8);
    EXPECT_GT(b3.lo, 2.0);
    EXPECT_NEAR(widom_infty(m, Const{1.0}, 32).mid(), 2.0, 1e-7);
}

TEST(WeightedChebyshev, BracketAndExtremalInvariants) {
    auto inst = fixtures::random_instances(12, 7);
    for (const auto& in : inst) {
        EquilibriumMeasure m(in.k);
        MinimaxResult r = weighted_chebyshev(m, in.w, std::min(in.n, 16));
        EXPECT_LE(r.t_lower, r.t_upper);
        EXPECT_LE(r.rel_gap(), 1e-10);
        EXPECT_EQ(r.coeffs.back(), 1.0);
        for (const auto& e : r.extremal_points) EXPECT_TRUE(in.k.contains(e.x, 1e-12)) << in.label;
        // Dense sampling never exceeds the certified upper value.
        EXPECT_LE(dense_sup(in.k, in.w, r, 2001), r.t_upper * (1 + 1e-9)) << in.label;
    }
}

TEST(WeightedChebyshev, RandomMonicPerturbationsAreNotSmaller) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g(0.0, 1.0);
    struct Case {
        const EquilibriumMeasure* m;
        WeightExpr w;
        int n;
    };
    std::vector<Case> cases{{&interval(), Jacobi{0.3, 0.7}, 6}, {&two_band(), abs_x(), 5}};
    for (const auto& c : cases) {
        MinimaxResult r = weighted_chebyshev(*c.m, c.w, c.n);
        RealPolynomial t = r.poly();
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<double> q(static_cast<std::size_t>(c.n), 0.0);
            double scale = std::pow(10.0, -1 - trial % 5) * r.t_upper;
            for (double& v : q) v = scale * g(rng);
            RealPolynomial p = t + RealPolynomial(r.hull, q);
            EXPECT_GE(dense_sup(c.m->set(), c.w, p), r.t_lower * (1 - 1e-12));
        }
    }
}

TEST(WeightedChebyshev, WidomOverSzegoIsScaleInvariant) {
    const auto& m = two_band();
    WeightExpr w = Jacobi{0.5, 1.5};
    for (double c : {0.01, 3.0, 250.0}) {
        WeightExpr cw = Product{{Const{c}, w}};
        for (int n : {3, 8}) {
            double base = widom_infty(m, w, n).mid() / szego_factor(m, w).value;
            double scaled = widom_infty(m, cw, n).mid() / szego_factor(m, cw).value;
            EXPECT_NEAR(scaled / base, 1.0, 1e-10);
        }
    }
}

TEST(WeightedChebyshev, UniversalAndSchiefBounds) {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 10; ++t) {
        RealCompactSet k = fixtures::random_set(rng);
        EquilibriumMeasure m(k);
        for (int n : {1, 4, 9}) {
            WidomBracket b = widom_infty(m, Const{1.0}, n);
            EXPECT_GE(b.hi, 2.0 * (1 - 1e-8));
            WeightExpr w = Jacobi{0.5, 0.25, k.hull()};
            EXPECT_GE(widom_infty(m, w, n).hi, szego_factor(m, w).value * (1 - 1e-8));
        }
    }
}

TEST(WeightedChebyshev, UnboundedWeightRejected) {
    RationalFunction r{1.0, {}, {{0.0, 0.0}}};
    EXPECT_THROW(weighted_chebyshev(interval(), AbsRational{r}, 3), Error);
    EXPECT_THROW(weighted_chebyshev(interval(), Const{1.0}, 0), Error);
    EXPECT_THROW(weighted_chebyshev(interval(), Const{1.0}, kMaxChebyshevDegree + 1), Error);
}

TEST(EqualityCase, IntervalFamilies) {
    RationalFunction one{1.0, {}, {}};
    RationalFunction r{-1.0, {{1, 0}, {-1, 0}}, {}};
    for (int n : {1, 3, 20}) {
        MinimaxResult a = weighted_chebyshev(interval(), Const{1.0}, n);
        EqualityReport ea = equality_case_check(interval(), one, a);
        EXPECT_TRUE(ea.holds) << n << " " << ea.error;
        EXPECT_LT(ea.distance, 1e-6);
        MinimaxResult b = weighted_chebyshev(interval(), SqrtRational{r}, n);
        EqualityReport eb = equality_case_check(interval(), r, b);
        EXPECT_TRUE(eb.holds) << n << " " << eb.error;
        EXPECT_LT(eb.distance, 1e-6);
    }
}

TEST(EqualityCase, TwoBandOddDegreeFails) {
    RationalFunction one{1.0, {}, {}};
    EXPECT_TRUE(equality_case_check(two_band(), one, weighted_chebyshev(two_band(), Const{1.0}, 2)).holds);
    EqualityReport e = equality_case_check(two_band(), one, weighted_chebyshev(two_band(), Const{1.0}, 3));
    EXPECT_FALSE(e.holds);
    EXPECT_GT(e.distance, 0.1);
}

TEST(BoundAudit, Examples) {
    auto w1 = bound_audit(interval(), Const{1.0}, 3);
    EXPECT_NEAR(find(w1, "S-univ").margin, 1.0, 1e-7);
    EXPECT_NEAR(find(w1, "Schief").margin, 0.0, 1e-7);
    EXPECT_TRUE(find(w1, "2S").applicable);
    EXPECT_NEAR(find(w1, "2S").margin, 0.0, 1e-7);

    auto sq = bound_audit(interval(), sqrt_one_minus_x2(), 5);
    EXPECT_TRUE(find(sq, "LB2-Cheb").applicable);
    EXPECT_NEAR(find(sq, "LB2-Cheb").margin, 0.0, 1e-7);

    auto jac = bound_audit(interval(), Jacobi{0.25, 0.25}, 1);
    const auto& two_s = find(jac, "2S");
    EXPECT_FALSE(two_s.applicable);
    EXPECT_TRUE(two_s.informational);
    EXPECT_NEAR(two_s.margin, -0.1734, 1e-4);
    EXPECT_TRUE(find(jac, "sqrt2S").informational);
}

TEST(BoundAudit, ApplicabilityOfRationalForms) {
    // |R| with a complex zero pair and a double pole off K on a two-band set.
    RationalFunction r{1.0, {{0.2, 0.3}, {0.2, -0.3}}, {{2, 0}, {2, 0}}};
    auto rep = bound_audit(two_band(), AbsRational{r}, 6);
    EXPECT_TRUE(find(rep, "LB1-Cheb").applicable);
    EXPECT_TRUE(find(rep, "LB3-Cheb").applicable);
    EXPECT_TRUE(find(rep, "LB4-Cheb").applicable);
    EXPECT_FALSE(find(rep, "LB2-Cheb").applicable);
    EXPECT_FALSE(find(rep, "LB7-Cheb").applicable);
    EXPECT_LT(find(rep, "LB1-Cheb").rhs, 2 * szego_factor(two_band(), AbsRational{r}).value);
    for (const auto& b : rep)
        if (b.applicable) EXPECT_GE(b.margin, -1e-7) << b.bound_id;
}

TEST(BoundAudit, RandomInstancesHaveNonNegativeMargins) {
    for (const auto& in : fixtures::random_instances(24, 2024)) {
        EquilibriumMeasure m(in.k);
        for (const auto& b : bound_audit(m, in.w, in.n)) {
            if (!b.applicable) continue;
            EXPECT_GE(b.margin, -1e-7) << in.label << " " << b.bound_id << " n=" << in.n;
        }
    }
}

TEST(BoundAudit, JsonHasNullForMissingValues) {
    auto rep = bound_audit(interval(), StrongZero{0.0, 0.5}, 4);
    nlohmann::json j = find(rep, "LB1-Cheb");
    EXPECT_FALSE(j.at("applicable").get<bool>());
    EXPECT_TRUE(j.at("rhs").is_null());
}

TEST(Sweep, AbsXTrend) {
    SweepTable even = asymptotic_sweep(interval(), abs_x(), {8, 16, 32, 64});
    EXPECT_NEAR(even.s, 0.5, 1e-10);
    EXPECT_TRUE(even.decreasing);
    EXPECT_LT(even.rows.back().abs_diff, 0.1);
    // Odd degrees sit strictly above 1 and approach it.
    SweepTable odd = asymptotic_sweep(interval(), abs_x(), {7, 15, 31, 63});
    EXPECT_TRUE(odd.decreasing);
    for (const auto& r : odd.rows) EXPECT_GT(r.w_lower, 1.0);
}

TEST(Sweep, StrongZeroApproachesTwoS) {
    SweepTable t = asymptotic_sweep(interval(), StrongZero{0.0, 0.5}, {8, 16, 32});
    EXPECT_TRUE(t.decreasing);
    for (const auto& r : t.rows) EXPECT_GT(r.w_lower, r.two_s);
}

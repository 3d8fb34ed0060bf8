#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <numbers>
#include <random>

#include "widomlab/weights.hpp"

using namespace widomlab;

namespace {

const EquilibriumMeasure& interval() {
    static const EquilibriumMeasure m(make_set({{-1, 1}}));
    return m;
}

ProductPairs geometric_pairs(double a, int n, double q = 0.5) {
    ProductPairs p;
    for (int j = 1; j <= n; ++j) {
        p.a.push_back(a);
        p.b.push_back({a, std::pow(q, j)});
        p.r.push_back(1);
    }
    p.limit_points = {a};
    return p;
}

}  // namespace

TEST(WeightEval, Examples) {
    EXPECT_NEAR(eval(sqrt_one_minus_x2(), 0.6), 0.8, 1e-15);
    EXPECT_NEAR(eval(Jacobi{0.25, 0.25}, 0.0), 1.0, 1e-15);
    EXPECT_NEAR(eval(Jacobi{1, 0}, 0.5), 0.5, 1e-15);
    EXPECT_NEAR(eval(abs_x(), -0.3), 0.3, 1e-15);
    EXPECT_NEAR(eval(StrongZero{0, 0.5}, 0.25), std::exp(-2.0), 1e-15);
    EXPECT_EQ(eval(StrongZero{0, 0.5}, 0.0), 0.0);
    EXPECT_NEAR(eval(Tabulated{{0, 1, 3}, {1, 3, 0}}, 2.0), 1.5, 1e-15);
    EXPECT_NEAR(eval(MthRootRational{RationalFunction{8.0, {}, {}}, 3}, 0.1), 2.0, 1e-14);
    Product p{{abs_x(), Const{3.0}}};
    EXPECT_NEAR(eval(p, 0.5), 1.5, 1e-15);
}

TEST(WeightEval, InfiniteProductPartialProductOracle) {
    // prod_{j=1}^{40} 0.5 / |0.5 - i 2^{-j}|, pinned from a 30-digit evaluation.
    WeightExpr w = InfiniteProduct{geometric_pairs(0.0, 40)};
    EXPECT_NEAR(eval(w, 0.5), 0.607252935008881256, 1e-15);
}

TEST(WeightEval, GeometricTailBracket) {
    ProductPairs p;
    p.tail = GeometricTail{0.0, 0.5, 0.5, 1};  // b_j = i 2^{-(j+1)}, j >= 0
    WeightExpr w = InfiniteProduct{p};
    WeightBracket b = eval_bracket(w, 0.5);
    EXPECT_LE(b.lo, b.hi);
    EXPECT_LT(b.hi - b.lo, 1e-15);
    EXPECT_NEAR(eval(w, 0.5, 1e-12), 0.607252935008881256, 1e-14);  // same factors, all of them
    EXPECT_EQ(eval(w, 0.0), 0.0);
}

TEST(WeightEval, PartialProductsDecrease) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int t = 0; t < 20; ++t) {
        double x = u(rng), prev = 1.0;
        for (int k = 1; k <= 30; ++k) {
            double v = eval(InfiniteProduct{geometric_pairs(0.3, k)}, x);
            EXPECT_LE(v, prev * (1 + 1e-15));
            prev = v;
        }
    }
}

TEST(Validate, AcceptsImaginaryOffsets) {
    ProductValidation v = validate_product(interval(), geometric_pairs(0.0, 30));
    EXPECT_TRUE(v.ok);
    EXPECT_LE(v.max_ratio_norm, 1.0 + 1e-12);
    EXPECT_GT(v.sum_g, 0.0);
    EXPECT_NEAR(v.szego_lower, std::exp(-v.sum_g), 1e-15);
}

TEST(Validate, RejectsRealOffsetInsideK) {
    ProductPairs p;
    for (int j = 1; j <= 10; ++j) {
        p.a.push_back(0.0);
        p.b.push_back({std::ldexp(1.0, -j), 0.0});
        p.r.push_back(1);
    }
    ProductValidation v = validate_product(interval(), p);
    EXPECT_FALSE(v.ok);
}

TEST(Validate, ClosednessOfLimitPoints) {
    ProductPairs p;
    for (int j = 1; j <= 30; ++j) {
        double a = 1 - std::ldexp(1.0, -j);
        p.a.push_back(a);
        p.b.push_back({a, std::ldexp(1.0, -2 * j)});
        p.r.push_back(1);
    }
    EXPECT_FALSE(validate_product(interval(), p).ok);
    p.a.push_back(1.0);
    p.b.push_back({1.0, 1e-20});
    p.r.push_back(1);
    EXPECT_TRUE(validate_product(interval(), p).ok);
    ProductPairs q = p;
    q.limit_points = {0.25};
    EXPECT_FALSE(validate_product(interval(), q).ok);
}

TEST(Validate, RatioNormAboveOneIsHardFailure) {
    ProductPairs p;
    p.a = {0.0};
    p.b = {{0.5, 0.1}};  // |x / (x - b)| is large near x = 0.5
    p.r = {1};
    ProductValidation v = validate_product(interval(), p);
    EXPECT_FALSE(v.ok);
    EXPECT_GT(v.max_ratio_norm, 1.0);
}

TEST(Validate, TailBoundIsCertified) {
    // g on an interval at end + i y is at most sqrt(4 y / len); check on a dense net.
    for (double y : {1e-12, 1e-8, 1e-4, 1e-2, 0.3, 1.0, 10.0, 1e3})
        for (int i = 0; i <= 200; ++i) {
            double x = -1 + 2.0 * i / 200;
            EXPECT_LE(green_interval_closed_form(-1, 1, {x, y}), std::sqrt(4 * y / 2) * (1 + 1e-12));
        }
    ProductPairs p;
    p.tail = GeometricTail{0.0, 0.25, 0.5, 2};
    ProductValidation v = validate_product(interval(), p);
    EXPECT_TRUE(v.ok);
    // Exact series: 2 sum_j g(i 2^{-j-2}) with g(iy) = asinh(y) on [-1, 1].
    double exact = 0.0;
    for (int j = 0; j < 200; ++j) exact += 2 * std::asinh(0.25 * std::pow(0.5, j));
    EXPECT_LE(v.sum_g - 1e-9, exact);
    EXPECT_GE(v.sum_g + v.sum_g_tail + 1e-9, exact);
}

TEST(Szego, ClosedForms) {
    const auto& m = interval();
    EXPECT_NEAR(szego_factor(m, sqrt_one_minus_x2()).value, 0.5, 1e-9);
    EXPECT_NEAR(szego_factor(m, Const{1}).value, 1.0, 1e-15);
    for (auto [a, b] : {std::pair{0.25, 0.25}, std::pair{1.0, 0.0}, std::pair{0.5, 1.5}})
        EXPECT_NEAR(szego_factor(m, Jacobi{a, b}).value, std::pow(2.0, -(a + b)), 1e-9);
    EXPECT_NEAR(szego_factor(m, abs_x()).value, 0.5, 1e-9);
}

TEST(Szego, StrongZeroInteriorBetaFunctionOracle) {
    // int |x|^{-1/2} d mu = B(1/4, 1/2) / pi on [-1, 1].
    double b = std::tgamma(0.25) * std::tgamma(0.5) / std::tgamma(0.75);
    SzegoResult s = szego_factor(interval(), StrongZero{0, 0.5});
    EXPECT_TRUE(s.szego_class);
    EXPECT_NEAR(s.value, std::exp(-b / std::numbers::pi), 1e-9);
    EXPECT_NEAR(s.value, 0.188387609997269628, 1e-9);
}

TEST(Szego, StrongZeroClassification) {
    const auto& m = interval();
    EXPECT_FALSE(szego_factor(m, StrongZero{1, 0.5}).szego_class);
    EXPECT_FALSE(szego_factor(m, StrongZero{0, 1.0}).szego_class);
    EXPECT_TRUE(szego_factor(m, StrongZero{1, 0.25}).szego_class);
    EXPECT_TRUE(szego_factor(m, StrongZero{0, 0.9}).szego_class);
    EXPECT_GT(szego_factor(m, StrongZero{1, 0.25}).value, 0.0);
}

TEST(Szego, EndpointStrongZeroOracle) {
    // int (1-x)^{-1/4} d mu on [-1, 1] = 2^{-1/4} B(1/4, 1/2) / pi (substitute x = cos t).
    double b = std::tgamma(0.25) * std::tgamma(0.5) / std::tgamma(0.75);
    EXPECT_NEAR(szego_factor(interval(), StrongZero{1, 0.25}).log_value, -std::pow(2.0, -0.25) * b / std::numbers::pi, 1e-9);
}

TEST(Szego, ClosedFormAgreesWithQuadrature) {
    std::vector<EquilibriumMeasure> ms;
    ms.emplace_back(make_set({{-1, 1}}));
    ms.emplace_back(make_set({{-1, -0.3}, {0.2, 1}}));
    std::vector<WeightExpr> ws{
        sqrt_one_minus_x2(),
        abs_x(),
        AbsRational{RationalFunction{2.0, {{0.5, 0}}, {{3.0, 0}, {0.1, 0.7}, {0.1, -0.7}}}},
        SqrtRational{RationalFunction{1.0, {{1.5, 0}, {-1.2, 0}}, {{2.5, 0}, {-2.5, 0}}}},
        MthRootRational{RationalFunction{1.0, {{0.8, 0}, {0.8, 0}, {-0.4, 0}}, {{0, 2}, {0, -2}}}, 3},
    };
    for (const auto& m : ms)
        for (const auto& w : ws) {
            if (!check_weight(m.set(), w).ok) continue;
            EXPECT_NEAR(szego_factor(m, w).log_value, szego_quadrature(m, w).log_value, 1e-7) << kind_name(w);
        }
}

TEST(Szego, Multiplicativity) {
    const auto& m = interval();
    std::vector<WeightExpr> ws{sqrt_one_minus_x2(), Jacobi{0.25, 0.75}, StrongZero{0, 0.5}, abs_x(),
                               InfiniteProduct{geometric_pairs(0.2, 20)}};
    for (std::size_t i = 0; i < ws.size(); ++i)
        for (std::size_t j = i; j < ws.size(); ++j) {
            double s1 = szego_factor(m, ws[i]).value, s2 = szego_factor(m, ws[j]).value;
            WeightExpr prod = Product{{ws[i], ws[j]}};
            EXPECT_NEAR(szego_factor(m, prod).value, s1 * s2, 1e-8);
            EXPECT_NEAR(szego_quadrature(m, prod).value, s1 * s2, 1e-8) << i << " " << j;
        }
}

TEST(Szego, JensenBound) {
    std::vector<EquilibriumMeasure> ms;
    ms.emplace_back(make_set({{-1, 1}}));
    ms.emplace_back(make_set({{-1, -0.5}, {0.5, 1}}));
    std::vector<WeightExpr> ws{sqrt_one_minus_x2(), Jacobi{0.25, 0.25}, abs_x(), StrongZero{0, 0.5},
                               Tabulated{{-1, 0, 1}, {0.2, 1.0, 0.5}}};
    for (const auto& m : ms)
        for (const auto& w : ws) {
            IntegrateOptions o;
            o.singular_points = singular_points(w);
            double mean = m.integrate([&](double x, double) { return eval(w, x); }, o);
            EXPECT_LE(szego_factor(m, w).value, mean + 1e-10);
        }
}

TEST(Szego, InfiniteProductMatchesGreenSum) {
    const auto& m = interval();
    ProductPairs p = geometric_pairs(0.0, 25);
    double sum = 0.0;
    for (int j = 1; j <= 25; ++j) sum += std::asinh(std::ldexp(1.0, -j));  // g_[-1,1](iy) = asinh y
    EXPECT_NEAR(szego_factor(m, InfiniteProduct{p}).value, std::exp(-sum), 1e-9);
    EXPECT_NEAR(szego_quadrature(m, InfiniteProduct{p}).value, std::exp(-sum), 1e-8);
}

TEST(Szego, ScalingMultipliesFactor) {
    const auto& m = interval();
    WeightExpr w = Jacobi{0.3, 0.6};
    WeightExpr cw = Product{{Const{2.5}, w}};
    EXPECT_NEAR(szego_factor(m, cw).value, 2.5 * szego_factor(m, w).value, 1e-12);
}

TEST(WeightJson, RoundTrip) {
    std::vector<WeightExpr> ws{Const{2},
                               sqrt_one_minus_x2(),
                               MthRootRational{RationalFunction{1.0, {{0, 1}, {0, -1}}, {}}, 4},
                               Jacobi{0.25, 0.5, {-2, 3}},
                               InfiniteProduct{geometric_pairs(0.1, 3)},
                               StrongZero{0.2, 0.4},
                               Product{{abs_x(), Const{3}}},
                               Tabulated{{0, 1}, {1, 2}}};
    ProductPairs tailp;
    tailp.tail = GeometricTail{0.0, 0.5, 0.25, 3};
    ws.push_back(InfiniteProduct{tailp});
    for (const auto& w : ws) {
        nlohmann::json j = weight_to_json(w);
        WeightExpr back = weight_from_json(j);
        EXPECT_EQ(weight_to_json(back), j);
        for (double x : {-0.7, 0.05, 0.6}) EXPECT_NEAR(eval(back, x), eval(w, x), 1e-15);
    }
    EXPECT_THROW(weight_from_json(nlohmann::json{{"type", "nope"}}), Error);
}

TEST(CheckWeight, Guards) {
    auto k = make_set({{-1, 1}});
    EXPECT_TRUE(check_weight(k, sqrt_one_minus_x2()).ok);
    EXPECT_FALSE(check_weight(k, SqrtRational{RationalFunction{1.0, {{1, 0}, {-1, 0}}, {}}}).ok);  // x^2 - 1 < 0
    EXPECT_FALSE(check_weight(k, AbsRational{RationalFunction{1.0, {}, {{0.5, 0}}}}).ok);
    EXPECT_FALSE(check_weight(k, Jacobi{-1, 0}).ok);
}

// Minorants ---------------------------------------------------------------

namespace {

void expect_minorant(const MinorantResult& r, const EquilibriumMeasure& m, const WeightExpr& w) {
    EXPECT_TRUE(r.audit_ok) << "max ratio " << r.audit_max_ratio;
    EXPECT_LE(r.audit_max_ratio, 1 + 1e-9);
    EXPECT_GE(r.audit_x.size(), 10000u);
    EXPECT_TRUE(r.validation.ok);
    EXPECT_TRUE(std::isfinite(r.validation.sum_g));
    EXPECT_GT(r.C, 0.0);
    // Independent audit on a shifted grid avoiding the zero.
    Interval h = m.set().hull();
    double logc = std::log(r.C);
    for (int i = 0; i < 10000; ++i) {
        double x = h.lo + h.length() * (i + 0.37) / 10000;
        if (!m.set().contains(x) || std::abs(x - 0.0) < r.uncovered_radius || std::abs(std::abs(x) - 1) < r.uncovered_radius)
            continue;
        EXPECT_LE(log_eval(r.w0, x) + logc, log_eval(w, x) + 1e-9) << x;
    }
}

}  // namespace

TEST(Minorant, EndpointStrongZero) {
    const auto& m = interval();
    WeightExpr w = StrongZero{1, 0.25};
    MinorantResult r = minorant_single_zero(m, w, 1.0);
    expect_minorant(r, m, w);
    EXPECT_EQ(eval(r.w0, 1.0), 0.0);
}

TEST(Minorant, InteriorStrongZero) {
    const auto& m = interval();
    WeightExpr w = StrongZero{0, 0.5};
    MinorantResult r = minorant_single_zero(m, w, 0.0);
    expect_minorant(r, m, w);
    // Per-level Green contributions shrink toward the zero.
    ASSERT_GE(r.level_g.size(), 6u);
    EXPECT_LT(r.level_g.back(), r.level_g[2]);
}

TEST(Minorant, JacobiEndpoint) {
    const auto& m = interval();
    WeightExpr w = Jacobi{1, 0};
    expect_minorant(minorant_single_zero(m, w, 1.0), m, w);
}

TEST(Minorant, MultiZero) {
    const auto& m = interval();
    WeightExpr w = AbsRational{RationalFunction{-1.0, {{0, 0}, {1, 0}, {-1, 0}}, {}}};  // |x| (1 - x^2)
    MinorantResult r = minorant_multi_zero(m, w, {-1, 0, 1});
    expect_minorant(r, m, w);
    for (double z : {-1.0, 0.0, 1.0}) EXPECT_EQ(eval(r.w0, z), 0.0);
}

TEST(Minorant, MultiZeroReducesToSingle) {
    const auto& m = interval();
    WeightExpr w = StrongZero{0, 0.5};
    MinorantResult a = minorant_multi_zero(m, w, {0.0});
    MinorantResult b = minorant_single_zero(m, w, 0.0);
    EXPECT_EQ(weight_to_json(a.w0), weight_to_json(b.w0));
    EXPECT_EQ(a.C, b.C);
}

TEST(Minorant, NoZerosGivesConstant) {
    const auto& m = interval();
    WeightExpr w = AbsRational{RationalFunction{1.0, {{2, 0}}, {}}};  // |x - 2| >= 1
    MinorantResult r = minorant_multi_zero(m, w, {});
    EXPECT_TRUE(r.w0.is<Const>());
    EXPECT_NEAR(r.C, 1.0, 1e-12);
    EXPECT_TRUE(r.audit_ok);
}

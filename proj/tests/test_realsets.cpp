#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "widomlab/polynomial.hpp"
#include "widomlab/preimage.hpp"
#include "widomlab/realsets.hpp"

using namespace widomlab;

namespace {

void expect_bands(const RealCompactSet& k, std::vector<Interval> want, double tol) {
    ASSERT_EQ(k.size(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i) {
        EXPECT_NEAR(k.band(i).lo, want[i].lo, tol) << "band " << i;
        EXPECT_NEAR(k.band(i).hi, want[i].hi, tol) << "band " << i;
    }
}

std::string error_kind(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    return "";
}

}  // namespace

TEST(Normalize, MergesOverlap) { expect_bands(normalize({{0, 1}, {0.5, 2}}), {{0, 2}}, 0); }

TEST(Normalize, MergesTouchingAndSorts) {
    expect_bands(normalize({{3, 4}, {1, 2}, {2, 2.5}}), {{1, 2.5}, {3, 4}}, 0);
}

TEST(Normalize, KeepsDisjoint) { expect_bands(normalize({{-1, -0.5}, {0.5, 1}}), {{-1, -0.5}, {0.5, 1}}, 0); }

TEST(Normalize, Errors) {
    EXPECT_EQ(error_kind([] { normalize({{1, 1}}); }), "degenerate");
    EXPECT_EQ(error_kind([] { normalize({}); }), "empty-input");
    EXPECT_EQ(error_kind([] { normalize({{0, NAN}}); }), "invalid-band");
}

TEST(Normalize, DropsSubFloorBandButKeepsOthers) {
    expect_bands(normalize({{0, 1}, {2, 2 + 1e-15}}), {{0, 1}}, 0);
}

TEST(Normalize, Idempotent) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Interval> raw;
        for (int i = 0; i < 6; ++i) raw.push_back({u(rng), u(rng)});
        RealCompactSet a = normalize(raw);
        RealCompactSet b = normalize(std::vector<Interval>(a.bands().begin(), a.bands().end()));
        EXPECT_EQ(a, b);
        for (std::size_t i = 0; i + 1 < a.size(); ++i) EXPECT_LT(a.band(i).hi, a.band(i + 1).lo);
    }
}

TEST(Hausdorff, Examples) {
    EXPECT_EQ(hausdorff_distance(make_set({{-1, 1}}), make_set({{-1, 1}})), 0.0);
    EXPECT_NEAR(hausdorff_distance(make_set({{-1, 1}}), make_set({{-1, 0}, {0.1, 1}})), 0.05, 1e-15);
    EXPECT_NEAR(hausdorff_distance(make_set({{0, 1}}), make_set({{0, 1.2}})), 0.2, 1e-15);
}

TEST(Hausdorff, MatchesDenseOracle) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int trial = 0; trial < 50; ++trial) {
        RealCompactSet a = normalize({{u(rng), u(rng)}, {u(rng), u(rng)}, {u(rng), u(rng)}});
        RealCompactSet b = normalize({{u(rng), u(rng)}, {u(rng), u(rng)}});
        double oracle = 0.0;
        for (auto [from, to] : {std::pair{&a, &b}, std::pair{&b, &a}})
            for (const auto& band : from->bands())
                for (int k = 0; k <= 20000; ++k)
                    oracle = std::max(oracle, to->distance(band.lo + band.length() * k / 20000.0));
        EXPECT_NEAR(hausdorff_distance(a, b), oracle, 1e-3);
        EXPECT_GE(hausdorff_distance(a, b), oracle - 1e-12);
    }
}

TEST(SetJson, RoundTrip) {
    RealCompactSet k = make_set({{-1, -0.5}, {0.5, 1}});
    nlohmann::json j = k;
    EXPECT_EQ(j.dump(), R"({"bands":[[-1.0,-0.5],[0.5,1.0]]})");
    EXPECT_EQ(set_from_json(j), k);
    EXPECT_EQ(error_kind([] { set_from_json(nlohmann::json::object()); }), "schema");
}

TEST(Polynomial, MonomialAndRootFormsAgree) {
    RealPolynomial a = RealPolynomial::from_monomial({2.0, -3.0, 0.0, 1.0}, {-2, 3});
    std::vector<double> roots{1.0, 1.0, -2.0};  // x^3 - 3x + 2
    RealPolynomial b = RealPolynomial::from_roots(1.0, roots, {-2, 3});
    for (double x = -2; x <= 3; x += 0.37) EXPECT_NEAR(a(x), b(x), 1e-12 * std::max(1.0, std::abs(a(x))));
    EXPECT_EQ(a.degree(), 3);
    EXPECT_NEAR(a.leading(), 1.0, 1e-14);
    EXPECT_NEAR(b.leading(), 1.0, 1e-14);
}

TEST(Polynomial, ArithmeticAndDerivative) {
    RealPolynomial x = RealPolynomial::identity({0, 2});
    RealPolynomial p = x * x * 3.0 - x + RealPolynomial::constant(5.0, {0, 2});
    RealPolynomial dp = p.derivative();
    for (double t = 0; t <= 2; t += 0.25) {
        EXPECT_NEAR(p(t), 3 * t * t - t + 5, 1e-13);
        EXPECT_NEAR(dp(t), 6 * t - 1, 1e-12);
    }
    cplx z(0.3, 0.7);
    EXPECT_LT(std::abs(p(z) - (3.0 * z * z - z + 5.0)), 1e-13);
}

TEST(Polynomial, ChebyshevTIdentity) {
    for (int d = 0; d <= 8; ++d) {
        RealPolynomial t = RealPolynomial::chebyshev_t(d);
        for (double th = 0.1; th < 3.1; th += 0.3) EXPECT_NEAR(t(std::cos(th)), std::cos(d * th), 1e-13);
        if (d >= 1) EXPECT_NEAR(t.leading(), std::ldexp(1.0, d - 1), 1e-12);
    }
}

TEST(Polynomial, RealRoots) {
    std::vector<double> r{-0.9, -0.1, 0.2, 0.75};
    RealPolynomial p = RealPolynomial::from_monomial({1, 0, 1}) * RealPolynomial::from_roots(2.0, r);
    auto rr = p.real_roots();
    ASSERT_EQ(rr.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(rr[i], r[i], 1e-12);
}

TEST(Rational, DegreesAndReduction) {
    RationalFunction r{2.0, {{1, 0}, {-1, 0}}, {{1, 0}, {0, 1}, {0, -1}}};
    EXPECT_EQ(r.d0(), 2);
    EXPECT_EQ(r.d1(), 3);
    RationalFunction rr = r.reduced();
    EXPECT_EQ(rr.d0(), 1);
    EXPECT_EQ(rr.d1(), 2);
    EXPECT_TRUE(rr.is_real());
    EXPECT_NEAR(rr(0.5).real(), r(0.5).real(), 1e-14);
    EXPECT_NEAR(rr(0.5).real(), 2.0 * (0.5 + 1) / (0.25 + 1), 1e-14);
}

TEST(Preimage, SquareOnTwoIntervals) {
    RealPolynomial p = RealPolynomial::from_monomial({0, 0, 1});
    expect_bands(polynomial_preimage(p, {0.25, 1}), {{-1, -0.5}, {0.5, 1}}, 1e-13);
}

TEST(Preimage, ChebyshevMapsOntoInterval) {
    for (int d = 2; d <= 6; ++d)
        expect_bands(polynomial_preimage(RealPolynomial::chebyshev_t(d), {-1, 1}), {{-1, 1}}, 1e-12);
}

TEST(Preimage, CantorFirstMap) {
    RealPolynomial f1 = RealPolynomial::from_monomial({1, -16, 16});
    double s = std::sqrt(2.0);
    expect_bands(polynomial_preimage(f1, {-1, 1}), {{0, (2 - s) / 4}, {(2 + s) / 4, 1}}, 1e-13);
}

TEST(Preimage, EmptyAndDegree) {
    RealPolynomial p = RealPolynomial::from_monomial({2, 0, 1});
    EXPECT_EQ(error_kind([&] { polynomial_preimage(p, {-1, 1}); }), "empty-preimage");
    EXPECT_EQ(error_kind([] { polynomial_preimage(RealPolynomial::constant(1.0), {-1, 1}); }), "invalid-degree");
}

TEST(Preimage, MembershipProperty) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> roots;
        for (int i = 0; i < 5; ++i) roots.push_back(u(rng));
        RealPolynomial p = RealPolynomial::from_roots(8.0, roots);
        Interval target{-0.05, 0.1};
        RealCompactSet k = polynomial_preimage(p, target);
        Interval h = k.hull();
        double tol = 1e-9;
        for (int i = 0; i < 1000; ++i) {
            double x = h.lo + h.length() * (i + 0.5) / 1000;
            double v = p(x);
            if (k.contains(x))
                EXPECT_TRUE(target.contains(v, tol)) << x;
            else if (k.distance(x) > 1e-9)
                EXPECT_FALSE(target.contains(v, 0.0)) << x;
        }
    }
}

TEST(Sublevel, SineProductIdentity) {
    RationalFunction r{-1.0, {{1, 0}, {-1, 0}}, {}};  // 1 - x^2
    RealPolynomial q = RealPolynomial::identity();
    expect_bands(sublevel_bands(r, q, {0, 1}), {{-1, 1}}, 1e-12);
    double mx = 0.0;
    for (int i = 0; i <= 100000; ++i) {
        double x = -1 + 2.0 * i / 100000;
        mx = std::max(mx, (1 - x * x) * x * x);
    }
    EXPECT_NEAR(mx, 0.25, 1e-9);
}

TEST(Sublevel, ConstantRMatchesPolynomialPreimage) {
    RealPolynomial q = RealPolynomial::chebyshev_t(2);
    RealCompactSet a = sublevel_bands(RationalFunction{1.0, {}, {}}, q, {0, 1});
    RealCompactSet b = polynomial_preimage(q * q, {0, 1});
    EXPECT_LT(hausdorff_distance(a, b), 1e-12);
}

TEST(Sublevel, UnboundedGuard) {
    RationalFunction r{1.0, {}, {{0, 1}, {0, -1}}};  // 1/(x^2+1)
    EXPECT_EQ(error_kind([&] { sublevel_bands(r, RealPolynomial::constant(1.0), {0, 1}); }), "unbounded-preimage");
}

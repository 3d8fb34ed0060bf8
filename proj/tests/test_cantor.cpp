#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "widomlab/cantor.hpp"
#include "widomlab/chebyshev.hpp"

using namespace widomlab;

namespace {

const GammaSequence kEighth = GammaSequence::constant(0.125);

// Forward oracle: F_s evaluated as an explicit composition of the maps.
double compose(const std::vector<double>& g, double x) {
    double v = 2.0 * x * (x - 1.0) / g[0] + 1.0;
    for (std::size_t k = 1; k < g.size(); ++k) v = v * v / (2.0 * g[k]) + 1.0 - 1.0 / (2.0 * g[k]);
    return v;
}

}  // namespace

TEST(CantorIterate, FirstLevelQuadraticSolve) {
    CantorIterate it = iterate(kEighth, 1);
    ASSERT_EQ(it.bands.size(), 2u);
    EXPECT_EQ(it.bands.band(0).lo, 0.0);
    EXPECT_NEAR(it.bands.band(0).hi, (2 - std::sqrt(2.0)) / 4, 1e-16);
    EXPECT_NEAR(it.bands.band(1).lo, (2 + std::sqrt(2.0)) / 4, 1e-16);
    EXPECT_EQ(it.bands.band(1).hi, 1.0);
}

TEST(CantorIterate, SecondLevelEndpoints) {
    CantorIterate it = iterate(kEighth, 2);
    ASSERT_EQ(it.bands.size(), 4u);
    // f_2 maps u to [-1, 1] iff u^2 in [1/2, 1]; inner endpoints solve f_1(x) = +-sqrt(1/2).
    for (double u : {std::sqrt(0.5), -std::sqrt(0.5)}) {
        double y = (u - 1.0) * 0.125 / 2.0;
        double z = 0.5 - std::sqrt(0.25 + y);
        bool found = false;
        for (const auto& b : it.bands.bands()) found = found || std::abs(b.lo - z) < 1e-15 || std::abs(b.hi - z) < 1e-15;
        EXPECT_TRUE(found) << z;
    }
    EXPECT_NEAR(it.bands.band(0).hi, 0.018653790059421763, 1e-16);
    EXPECT_NEAR(it.bands.band(1).lo, 0.12144244007569895, 1e-16);
}

TEST(CantorIterate, StructureAndNesting) {
    std::vector<GammaSequence> gs{kEighth, GammaSequence::saturating(), GammaSequence{{0.2, 0.05, 0.1, 0.24, 0.01, 0.15, 0.2, 0.2}, {}}};
    for (const auto& g : gs) {
        for (int s = 0; s <= 8; ++s) {
            CantorIterate it = iterate(g, s);
            ASSERT_EQ(it.bands.size(), std::size_t{1} << s);
            EXPECT_EQ(it.bands.hull().lo, 0.0);
            EXPECT_EQ(it.bands.hull().hi, 1.0);
            if (s > 0) {
                CantorIterate prev = iterate(g, s - 1);
                for (const auto& b : it.bands.bands()) {
                    EXPECT_TRUE(prev.bands.contains(b.lo, 1e-15));
                    EXPECT_TRUE(prev.bands.contains(b.hi, 1e-15));
                }
            }
        }
    }
}

TEST(CantorIterate, EndpointsMapToPlusMinusOne) {
    std::vector<double> g{0.2, 0.05, 0.1, 0.24};
    CantorIterate it = iterate(GammaSequence{g, {}}, 4);
    for (const auto& b : it.bands.bands())
        for (double e : {b.lo, b.hi}) EXPECT_NEAR(std::abs(compose(g, e)), 1.0, 1e-9);
    // Interior points map into [-1, 1], gap midpoints outside.
    for (std::size_t i = 0; i < it.bands.size(); ++i) {
        const auto& b = it.bands.band(i);
        EXPECT_LE(std::abs(compose(g, b.mid())), 1.0);
        if (i + 1 < it.bands.size())
            EXPECT_GT(std::abs(compose(g, 0.5 * (b.hi + it.bands.band(i + 1).lo))), 1.0);
    }
}

TEST(CantorIterate, RejectsBadGamma) {
    EXPECT_THROW(iterate(GammaSequence{{0.25}, {}}, 1), Error);
    EXPECT_THROW(iterate(GammaSequence{{0.1}, {}}, 2), Error);
    EXPECT_THROW(iterate(kEighth, 13), Error);
    EXPECT_THROW((void)GammaSequence::constant(0.3).tail_sum(0), Error);
    EXPECT_THROW(iterate(GammaSequence::constant(0.3), 1), Error);
}

TEST(CantorCapacity, ClosedForms) {
    EXPECT_NEAR(capacity_limit(kEighth), 0.125, 1e-12);
    EXPECT_NEAR(capacity_exact(kEighth, 3), std::exp((-1.0 / 8 - 3 + 0.25) * std::log(2.0)), 1e-15);
    EXPECT_NEAR(capacity_exact(kEighth, 0), 0.25, 1e-16);
    double prev = 1.0;
    for (int s = 0; s <= 10; ++s) {
        double c = capacity_exact(kEighth, s);
        EXPECT_LT(c, prev);
        EXPECT_GT(c, 0.125);
        prev = c;
    }
    EXPECT_NEAR(capacity_exact(kEighth, 12), 0.125, 1e-3);
}

TEST(CantorCapacity, MatchesEquilibriumSolver) {
    GammaSequence mixed{{0.2, 0.05, 0.1, 0.24}, {}};
    for (const GammaSequence* g : {&kEighth, static_cast<const GammaSequence*>(&mixed)})
        for (int s = 1; s <= 4; ++s) {
            EquilibriumMeasure m(iterate(*g, s).bands);
            EXPECT_NEAR(m.capacity(), capacity_exact(*g, s), 1e-6) << s;
        }
}

TEST(CantorCapacity, GreenPullback) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> re(-0.5, 1.5), im(-0.7, 0.7);
    for (int s : {2, 4}) {
        EquilibriumMeasure m(iterate(kEighth, s).bands);
        for (int i = 0; i < 20; ++i) {
            cplx z{re(rng), im(rng)};
            if (std::abs(z.imag()) < 0.05) z += cplx(0, 0.1);
            EXPECT_NEAR(green_value(m, z), green_exact(kEighth, s, z), 1e-6);
        }
    }
}

TEST(CantorWidom, ConstantGamma) {
    for (int n = 0; n <= 10; ++n) {
        EXPECT_NEAR(widom_infty_exact(kEighth, n), 4.0, 1e-12);
        EXPECT_NEAR(std::pow(widom_2_exact(kEighth, n), 2), 12.0, 1e-11);
    }
}

TEST(CantorWidom, SaturatingFamilyApproachesTwo) {
    GammaSequence g = GammaSequence::saturating();
    double di = INFINITY, d2 = INFINITY;
    for (int n = 0; n <= 8; ++n) {
        double wi = widom_infty_exact(g, n), w2 = std::pow(widom_2_exact(g, n), 2);
        EXPECT_NEAR(wi, 2.0 * std::exp(std::ldexp(1.0, -n) / 3.0), 1e-13);
        EXPECT_GE(w2, 2.0);
        EXPECT_LE(std::abs(wi - 2), di / 1.5);
        EXPECT_LE(std::abs(w2 - 2), d2 / 1.5);
        di = std::abs(wi - 2);
        d2 = std::abs(w2 - 2);
    }
}

TEST(CantorWidom, ExplicitValuesWithTail) {
    // Explicit head followed by the constant tail equals the sum written out.
    GammaSequence g{{0.2, 0.05, 0.1}, {GammaTail::Kind::constant, 0.125, 0.0}};
    double t1 = std::ldexp(-std::log(0.05), -2) + std::ldexp(-std::log(0.1), -3) + std::ldexp(std::log(8.0), -3);
    EXPECT_NEAR(widom_infty_exact(g, 1), 0.5 * std::exp(2 * t1), 1e-13);
    EXPECT_NEAR(widom_2_exact(g, 1), std::sqrt(1 - 2 * 0.05) * 0.5 * std::exp(2 * t1), 1e-13);
    EXPECT_GE(widom_infty_exact(g, 1), 2.0);
    // A lower bound on gamma only brackets the value.
    GammaSequence b{{0.2}, {GammaTail::Kind::bounded, 0.01, 0.0}};
    auto [lo, hi] = widom_infty_exact_bracket(b, 1);
    EXPECT_NEAR(lo, 2.0, 1e-14);
    EXPECT_NEAR(hi, 50.0, 1e-12);
    EXPECT_THROW(widom_infty_exact(b, 1), Error);
    EXPECT_THROW(widom_infty_exact(GammaSequence{{0.2}, {}}, 0), Error);
}

TEST(CantorWidom, NumericChebyshevOnIterates) {
    for (int s = 1; s <= 5; ++s) {
        EquilibriumMeasure m(iterate(kEighth, s).bands);
        for (int n : {1, 2, 4, 8, 16}) EXPECT_GE(widom_infty(m, Const{1.0}, n).hi, 2.0 * (1 - 1e-8)) << s << " " << n;
        // Degree 2^s is the full pullback: W = 2.
        EXPECT_NEAR(widom_infty(m, Const{1.0}, 1 << s).mid(), 2.0, 1e-7);
    }
}

#pragma once

// Random (K, w, n) instances for the bound audits.

#include <random>
#include <string>
#include <vector>

#include "widomlab/chebyshev.hpp"

namespace widomlab::fixtures {

struct Instance {
    RealCompactSet k = make_set({{-1.0, 1.0}});
    WeightExpr w;
    int n = 1;
    std::string label;
};

inline RealCompactSet random_set(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> nb(1, 3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int bands = nb(rng);
    std::vector<double> cuts;
    for (int i = 0; i < 2 * bands; ++i) cuts.push_back(-2.0 + 4.0 * u(rng));
    std::sort(cuts.begin(), cuts.end());
    std::vector<Interval> iv;
    for (int i = 0; i < bands; ++i) {
        double a = cuts[static_cast<std::size_t>(2 * i)], b = cuts[static_cast<std::size_t>(2 * i + 1)];
        if (b - a < 0.05) b = a + 0.05;
        iv.push_back({a, b});
    }
    return normalize(iv);
}

inline double point_in(const RealCompactSet& k, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, k.size() - 1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Interval& b = k.band(pick(rng));
    return b.lo + (b.hi - b.lo) * u(rng);
}

// A complex point at distance >= 0.2 from the real axis, or a real point outside the hull.
inline cplx point_off(const RealCompactSet& k, std::mt19937_64& rng, bool allow_real = true) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (allow_real && u(rng) < 0.3) {
        double d = 0.2 + u(rng);
        return u(rng) < 0.5 ? cplx(k.hull().lo - d, 0) : cplx(k.hull().hi + d, 0);
    }
    return {-2.5 + 5.0 * u(rng), 0.2 + u(rng)};
}

inline void add_off(std::vector<cplx>& v, const cplx& z) {
    v.push_back(z);
    if (z.imag() != 0.0) v.push_back(std::conj(z));
}

inline RationalFunction random_rational(const RealCompactSet& k, std::mt19937_64& rng, bool zeros_in_k) {
    std::uniform_int_distribution<int> cnt(0, 2);
    RationalFunction r{1.0, {}, {}};
    int zin = cnt(rng), zoff = zeros_in_k ? 0 : cnt(rng), poff = cnt(rng);
    for (int i = 0; i < zin; ++i) r.zeros.push_back({point_in(k, rng), 0.0});
    for (int i = 0; i < zoff; ++i) add_off(r.zeros, point_off(k, rng));
    for (int i = 0; i < poff; ++i) add_off(r.poles, point_off(k, rng));
    return r;
}

inline ProductPairs random_pairs(const RealCompactSet& k, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ProductPairs p;
    double a = point_in(k, rng);
    double eps = 0.05 + 0.3 * u(rng);
    for (int j = 0; j < 12; ++j) {
        p.a.push_back(a);
        p.b.push_back({a, eps * std::ldexp(1.0, -j)});
        p.r.push_back(1);
    }
    p.limit_points = {a};
    return p;
}

/// Cycles through |R|, sqrt(R) with R = |Q|^2 >= 0, zeros-in-K rational
/// weights and rational products; n in [1, 32].
inline std::vector<Instance> random_instances(int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> deg(1, 32);
    std::vector<Instance> out;
    int attempts = 0;
    while (static_cast<int>(out.size()) < count && attempts < 20 * count) {
        ++attempts;
        Instance in;
        in.k = random_set(rng);
        in.n = deg(rng);
        int kind = static_cast<int>(out.size() % 4);
        switch (kind) {
            case 0:
                in.w = AbsRational{random_rational(in.k, rng, false)};
                in.label = "abs-rational";
                break;
            case 1: {
                RationalFunction q = random_rational(in.k, rng, false);
                in.w = SqrtRational{detail::abs_squared(q)};
                in.label = "sqrt-rational";
                break;
            }
            case 2:
                in.w = AbsRational{random_rational(in.k, rng, true)};
                in.label = "abs-rational-zeros-in-K";
                break;
            default:
                in.w = Product{{AbsRational{random_rational(in.k, rng, true)}, InfiniteProduct{random_pairs(in.k, rng)}}};
                in.label = "rational-product";
                break;
        }
        if (!check_weight(in.k, in.w).ok) continue;
        out.push_back(std::move(in));
    }
    return out;
}

}  // namespace widomlab::fixtures

#pragma once

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <vector>

namespace widomlab::quad {

struct Rule {
    std::vector<double> x;  // nodes on [-1, 1]
    std::vector<double> w;
};

/// Gauss-Legendre rule with n nodes (Newton on the three-term recurrence).
inline Rule gauss_legendre_compute(int n) {
    Rule r;
    r.x.resize(static_cast<std::size_t>(n));
    r.w.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 1; j <= n; ++j) {
                double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            double dz = p1 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        double w = 2.0 / ((1.0 - z * z) * pp * pp);
        auto a = static_cast<std::size_t>(i), b = static_cast<std::size_t>(n - 1 - i);
        r.x[a] = -z;
        r.x[b] = z;
        r.w[a] = w;
        r.w[b] = w;
    }
    return r;
}

/// Cached Gauss-Legendre rule; thread safe.
inline const Rule& gauss_legendre(int n) {
    static std::mutex mu;
    static std::map<int, Rule> cache;
    std::lock_guard lock(mu);
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, gauss_legendre_compute(n)).first;
    return it->second;
}

template <class F>
double gl(F&& f, double a, double b, int n) {
    const Rule& r = gauss_legendre(n);
    double m = 0.5 * (a + b), h = 0.5 * (b - a), s = 0.0;
    for (std::size_t i = 0; i < r.x.size(); ++i) s += r.w[i] * f(m + h * r.x[i]);
    return s * h;
}

/// Integral of f(s) over s in [0, len] for f singular at s = 0: geometric
/// grading toward 0 with a fixed Gauss-Legendre rule per piece. Handles log
/// and integrable algebraic singularities. f is never evaluated at 0, and the
/// caller computes anything singular from the offset s directly.
template <class F>
double graded(F&& f, double len, int order = 20, double ratio = 0.15, double depth = 1e-40) {
    if (len <= 0.0) return 0.0;
    double s = 0.0;
    double outer = len;
    while (outer > len * depth) {
        double inner = outer * ratio;
        s += gl(f, inner, outer, order);
        outer = inner;
    }
    return s + gl(f, 0.0, outer, order);
}

}  // namespace widomlab::quad

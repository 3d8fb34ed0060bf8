#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "widomlab/polynomial.hpp"
#include "widomlab/realsets.hpp"

namespace widomlab {

namespace detail {

/// Band decomposition of {x : N(x)/D(x) in target}. Boundary candidates are
/// the real roots of N - lo*D, N - hi*D and D; membership is decided at the
/// midpoint of each candidate cell, so tangential (even order) roots merge away.
inline RealCompactSet level_set(const RealPolynomial& num, const RealPolynomial& den,
                                const std::function<double(double)>& f, Interval target) {
    std::vector<double> cand;
    auto add_roots = [&](const RealPolynomial& p) {
        if (p.degree() < 1) return;
        for (double r : p.real_roots()) cand.push_back(r);
    };
    add_roots(num - den * target.lo);
    add_roots(num - den * target.hi);
    add_roots(den);
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());

    double tau = 1e-12 * std::max({1.0, std::abs(target.lo), std::abs(target.hi)});
    auto member = [&](double x) {
        double v = f(x);
        return std::isfinite(v) && v >= target.lo - tau && v <= target.hi + tau;
    };

    double span = cand.empty() ? 1.0 : std::max(1.0, cand.back() - cand.front());
    double left = cand.empty() ? 0.0 : cand.front();
    double right = cand.empty() ? 0.0 : cand.back();
    for (double far : {1.0, 1e3, 1e6}) {
        if (member(left - far * span) || member(right + far * span))
            throw Error("unbounded-preimage", "the preimage is not bounded");
    }
    if (cand.size() < 2) throw Error("empty-preimage", "the real preimage is empty");

    std::vector<Interval> bands;
    for (std::size_t i = 0; i + 1 < cand.size(); ++i) {
        double a = cand[i], b = cand[i + 1];
        if (b <= a) continue;
        if (member(0.5 * (a + b))) bands.push_back({a, b});
    }
    if (bands.empty()) throw Error("empty-preimage", "the real preimage is empty");
    return normalize(std::move(bands));
}

}  // namespace detail

/// {x in R : P(x) in target}.
inline RealCompactSet polynomial_preimage(const RealPolynomial& p, Interval target) {
    if (p.degree() < 1) throw Error("invalid-degree", "polynomial_preimage needs deg P >= 1");
    RealPolynomial one = RealPolynomial::constant(1.0, p.domain());
    return detail::level_set(p, one, [&](double x) { return p(x); }, target);
}

/// {x in R : R(x) Q(x)^2 in target}, poles of R excluded.
inline RealCompactSet sublevel_bands(const RationalFunction& r, const RealPolynomial& q, Interval target) {
    if (!r.is_real()) throw Error("not-real", "sublevel_bands needs a real rational function");
    RationalFunction rr = r.reduced();
    Interval dom = q.domain();
    RealPolynomial num = rr.numerator(dom) * q * q;
    RealPolynomial den = rr.denominator(dom);
    if (num.degree() == den.degree() && num.degree() == 0)
        throw Error("constant", "R Q^2 is constant");
    auto f = [&](double x) {
        double qx = q(x);
        return rr(x).real() * qx * qx;
    };
    return detail::level_set(num, den, f, target);
}

}  // namespace widomlab

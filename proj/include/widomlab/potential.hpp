#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "widomlab/error.hpp"
#include "widomlab/polynomial.hpp"
#include "widomlab/quadrature.hpp"
#include "widomlab/realsets.hpp"

namespace widomlab {

/// Integrand against the equilibrium measure. Near a declared singular
/// abscissa x_s, `dx` carries x - x_s computed without cancellation; away from
/// singular points it is NaN and the integrand should use x itself.
using Integrand = std::function<double(double x, double dx)>;
inline constexpr double kNoOffset = std::numeric_limits<double>::quiet_NaN();

struct IntegrateOptions {
    double tol = 1e-10;
    std::vector<double> singular_points{};
    int max_level = 6;  // midpoint rule doubles from 256 up to 256 * 2^max_level per band
};

/// Equilibrium measure of a finite band union. On band [a, b] the substitution
/// x = mid + rad cos(theta) turns d mu_K into rho(theta) d theta with
/// rho = |q(x)| / (pi sqrt|rest(x)|), where q is the monic gap polynomial
/// (one root per gap) and rest is W(x) with the band's own endpoints removed.
class EquilibriumMeasure {
public:
    explicit EquilibriumMeasure(RealCompactSet k) : set_(std::move(k)), cache_(std::make_shared<Cache>()) {
        ends_ = set_.endpoints();
        solve_gap_roots();
        build_log_capacity();
    }

    [[nodiscard]] const RealCompactSet& set() const noexcept { return set_; }
    [[nodiscard]] double log_capacity() const noexcept { return log_cap_; }
    [[nodiscard]] double capacity() const noexcept { return std::exp(log_cap_); }
    /// Roots of the monic gap polynomial, one per gap, increasing.
    [[nodiscard]] std::span<const double> gap_roots() const noexcept { return gap_roots_; }
    [[nodiscard]] RealPolynomial gap_poly() const {
        return RealPolynomial::from_roots(1.0, gap_roots_, set_.hull());
    }
    [[nodiscard]] int nodes_per_band() const noexcept { return base_nodes_; }

    /// Density of mu_K with respect to dx at an interior band point.
    [[nodiscard]] double density(double x) const {
        int i = set_.band_index(x);
        if (i < 0) return 0.0;
        const Interval& b = set_.band(static_cast<std::size_t>(i));
        double w = (x - b.lo) * (b.hi - x);
        if (w <= 0.0) return std::numeric_limits<double>::infinity();
        return rho_x(static_cast<std::size_t>(i), x) / std::sqrt(w);
    }

    /// Density in the angle variable of band i: d mu = rho(theta) d theta.
    [[nodiscard]] double rho_theta(std::size_t band, double theta) const {
        const Interval& b = set_.band(band);
        return rho_x(band, b.mid() + b.rad() * std::cos(theta));
    }

    /// mu_K of each band.
    [[nodiscard]] std::vector<double> band_masses() const {
        const auto& t = table(1);
        std::vector<double> m(set_.size(), 0.0);
        for (std::size_t i = 0; i < set_.size(); ++i)
            for (double w : t.w[i]) m[i] += w;
        return m;
    }

    /// mu_K([u, v]) for u <= v (any real u, v).
    [[nodiscard]] double mass(double u, double v) const {
        double s = 0.0;
        for (std::size_t i = 0; i < set_.size(); ++i) {
            const Interval& b = set_.band(i);
            double lo = std::max(u, b.lo), hi = std::min(v, b.hi);
            if (hi <= lo) continue;
            s += integrate_band_range(i, lo, hi, [](double, double) { return 1.0; });
        }
        return s;
    }

    /// Integral of f over [u, v] intersected with band `band`, against mu_K,
    /// by Gauss-Legendre in the angle variable (f smooth on the range).
    template <class F>
    [[nodiscard]] double integrate_band_range(std::size_t band, double u, double v, F&& f, int panels = 4) const {
        const Interval& b = set_.band(band);
        u = std::clamp(u, b.lo, b.hi);
        v = std::clamp(v, b.lo, b.hi);
        if (v <= u) return 0.0;
        double th_hi = std::acos(std::clamp((u - b.mid()) / b.rad(), -1.0, 1.0));
        double th_lo = std::acos(std::clamp((v - b.mid()) / b.rad(), -1.0, 1.0));
        double s = 0.0;
        double h = (th_hi - th_lo) / panels;
        for (int p = 0; p < panels; ++p) {
            s += quad::gl(
                [&](double th) {
                    double x = b.mid() + b.rad() * std::cos(th);
                    return f(x, kNoOffset) * rho_theta(band, th);
                },
                th_lo + p * h, th_lo + (p + 1) * h, 32);
        }
        return s;
    }

    /// Integral of f against mu_K. Declared singular abscissae are resolved by
    /// splitting the band at them and grading the quadrature toward them.
    [[nodiscard]] double integrate(const Integrand& f, const IntegrateOptions& opts = {}) const {
        double total = 0.0;
        double band_tol = opts.tol / static_cast<double>(set_.size());
        for (std::size_t i = 0; i < set_.size(); ++i) {
            const Interval& b = set_.band(i);
            std::vector<double> sing;
            double near_lo = kNoOffset, near_hi = kNoOffset;
            for (double s : opts.singular_points) {
                if (!std::isfinite(s)) continue;
                if (s > b.lo && s < b.hi)
                    sing.push_back(s);
                else if (s <= b.lo && b.lo - s <= 1e-2 * b.rad())
                    near_lo = s;
                else if (s >= b.hi && s - b.hi <= 1e-2 * b.rad())
                    near_hi = s;
            }
            if (sing.empty() && std::isnan(near_lo) && std::isnan(near_hi))
                total += integrate_band_smooth(i, f, band_tol, opts.max_level);
            else
                total += integrate_band_singular(i, f, sing, near_lo, near_hi);
        }
        if (!std::isfinite(total)) throw Error("nan", "integrand produced a non-finite value");
        return total;
    }

    /// Logarithmic potential U(z) = int log|z - t| d mu_K(t).
    [[nodiscard]] double log_potential(cplx z) const {
        double y = z.imag();
        IntegrateOptions o;
        o.tol = 1e-13;
        o.singular_points = {z.real()};
        return integrate(
            [&](double x, double dx) {
                double d = std::isnan(dx) ? x - z.real() : dx;
                return 0.5 * std::log(d * d + y * y);
            },
            o);
    }

    /// Integral of q / sqrt|W| over each gap (should vanish).
    [[nodiscard]] std::vector<double> gap_residuals(int n = 4096) const {
        std::vector<double> out;
        for (std::size_t j = 0; j < set_.gap_count(); ++j) {
            double scale = 0.0;
            double v = gap_integral(
                j,
                [&](double x, double lg) {
                    double sgn = 1.0, tot = lg;
                    for (double c : gap_roots_) {
                        tot += std::log(std::abs(x - c));
                        if (x < c) sgn = -sgn;
                    }
                    scale += std::exp(tot);
                    return sgn * std::exp(tot);
                },
                n);
            out.push_back(v / std::max(1e-300, scale * std::numbers::pi / n));
        }
        return out;
    }

    /// Frostman potential at the three probe points used for the capacity.
    [[nodiscard]] std::vector<double> frostman_probes() const { return probes_; }
    /// Error estimate for log_capacity(): probe spread, floored at a few ulps.
    [[nodiscard]] double log_capacity_error() const {
        double lo = *std::min_element(probes_.begin(), probes_.end());
        double hi = *std::max_element(probes_.begin(), probes_.end());
        return std::max(hi - lo, 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(log_cap_)));
    }

private:
    struct Table {
        std::vector<std::vector<double>> x, w;
    };
    struct Cache {
        std::mutex mu;
        std::vector<std::unique_ptr<Table>> levels;
    };

    // |q(x)| / (pi sqrt|rest_band(x)|), evaluated in log form.
    [[nodiscard]] double rho_x(std::size_t band, double x) const {
        const Interval& b = set_.band(band);
        double lg = 0.0;
        for (double c : gap_roots_) lg += std::log(std::abs(x - c));
        for (double e : ends_) {
            if (e == b.lo || e == b.hi) continue;
            lg -= 0.5 * std::log(std::abs(x - e));
        }
        return std::exp(lg) / std::numbers::pi;
    }

    const Table& table(int level) const {
        std::lock_guard lock(cache_->mu);
        auto& lv = cache_->levels;
        if (lv.size() <= static_cast<std::size_t>(level)) lv.resize(static_cast<std::size_t>(level) + 1);
        auto& slot = lv[static_cast<std::size_t>(level)];
        if (!slot) {
            auto t = std::make_unique<Table>();
            int n = base_nodes_ << level;
            t->x.resize(set_.size());
            t->w.resize(set_.size());
            for (std::size_t i = 0; i < set_.size(); ++i) {
                const Interval& b = set_.band(i);
                for (int k = 0; k < n; ++k) {
                    double th = std::numbers::pi * (k + 0.5) / n;
                    double x = b.mid() + b.rad() * std::cos(th);
                    t->x[i].push_back(x);
                    t->w[i].push_back(rho_x(i, x) * std::numbers::pi / n);
                }
            }
            slot = std::move(t);
        }
        return *slot;
    }

    double integrate_band_smooth(std::size_t i, const Integrand& f, double tol, int max_level) const {
        auto at = [&](int level) {
            const Table& t = table(level);
            double s = 0.0;
            for (std::size_t k = 0; k < t.x[i].size(); ++k) s += t.w[i][k] * f(t.x[i][k], kNoOffset);
            return s;
        };
        double prev = at(0);
        for (int level = 1; level <= max_level; ++level) {
            double cur = at(level);
            if (std::abs(cur - prev) <= tol * std::max(1.0, std::abs(cur))) return cur;
            prev = cur;
        }
        throw Error("non-convergence", "equilibrium quadrature did not converge at max refinement");
    }

    // near_lo / near_hi: a singular abscissa at or just outside that band end (NaN if none).
    double integrate_band_singular(std::size_t i, const Integrand& f, std::vector<double> sing, double near_lo,
                                   double near_hi) const {
        const Interval& b = set_.band(i);
        const double m = b.mid(), r = b.rad();
        // Breakpoints in theta (theta = pi at lo, 0 at hi), each tagged singular or not.
        struct Bp {
            double th;
            double x;
            bool singular;
            double base;  // x(th) - x_s, exact for band ends
        };
        std::vector<Bp> bps{{0.0, b.hi, !std::isnan(near_hi), b.hi - near_hi},
                            {std::numbers::pi, b.lo, !std::isnan(near_lo), b.lo - near_lo}};
        for (double s : sing) bps.push_back({std::acos(std::clamp((s - m) / r, -1.0, 1.0)), s, true, 0.0});
        std::sort(bps.begin(), bps.end(), [](const Bp& a, const Bp& c) { return a.th < c.th; });

        // Integrate from a singular breakpoint over offset s in [0, len] in direction dir.
        auto side = [&](const Bp& bp, double dir, double len) {
            const double th0 = bp.th;
            return quad::graded(
                [&](double s) {
                    double th = th0 + dir * s;
                    double x = m + r * std::cos(th);
                    // x - x0 = r (cos(th0 + dir s) - cos th0), cancellation free
                    double dx = bp.base - 2.0 * r * std::sin(th0 + 0.5 * dir * s) * std::sin(0.5 * dir * s);
                    return f(x, dx) * rho_theta(i, th);
                },
                len, 24, 0.25);
        };
        double total = 0.0;
        for (std::size_t k = 0; k + 1 < bps.size(); ++k) {
            const Bp& a = bps[k];
            const Bp& c = bps[k + 1];
            double len = c.th - a.th;
            if (len <= 0.0) continue;
            if (a.singular && c.singular) {
                total += side(a, 1.0, 0.5 * len) + side(c, -1.0, 0.5 * len);
            } else if (a.singular) {
                total += side(a, 1.0, len);
            } else if (c.singular) {
                total += side(c, -1.0, len);
            } else {
                for (int p = 0; p < 8; ++p) {
                    double t0 = a.th + len * p / 8.0, t1 = a.th + len * (p + 1) / 8.0;
                    total += quad::gl(
                        [&](double th) {
                            double x = m + r * std::cos(th);
                            return f(x, kNoOffset) * rho_theta(i, th);
                        },
                        t0, t1, 32);
                }
            }
        }
        return total;
    }

    // Gap integral of phi(x) / sqrt|W(x)| over gap j in the angle variable.
    template <class Phi>
    double gap_integral(std::size_t j, Phi&& phi, int n) const {
        Interval g = set_.gap(j);
        double s = 0.0;
        for (int k = 0; k < n; ++k) {
            double th = std::numbers::pi * (k + 0.5) / n;
            double x = g.mid() + g.rad() * std::cos(th);
            double lg = 0.0;
            for (double e : ends_) {
                if (e == g.lo || e == g.hi) continue;
                lg -= 0.5 * std::log(std::abs(x - e));
            }
            s += phi(x, lg);
        }
        return s * std::numbers::pi / n;
    }

    void solve_gap_roots() {
        std::size_t g = set_.gap_count();
        if (g == 0) return;
        std::vector<double> mids(g);
        for (std::size_t j = 0; j < g; ++j) mids[j] = set_.gap(j).mid();

        // Linear solve for q = prod(x - m_j) + sum_i c_i prod_{j != i}(x - m_j).
        auto solve_linear = [&](int n) {
            Eigen::MatrixXd A(g, g);
            Eigen::VectorXd rhs(g);
            for (std::size_t k = 0; k < g; ++k) {
                std::vector<double> row(g + 1, 0.0);
                Interval gp = set_.gap(k);
                for (int q = 0; q < n; ++q) {
                    double th = std::numbers::pi * (q + 0.5) / n;
                    double x = gp.mid() + gp.rad() * std::cos(th);
                    double lg = 0.0, sgn = 1.0;
                    for (double e : ends_)
                        if (e != gp.lo && e != gp.hi) lg -= 0.5 * std::log(std::abs(x - e));
                    std::vector<double> lm(g);
                    double tot = 0.0;
                    for (std::size_t j = 0; j < g; ++j) {
                        double d = x - mids[j];
                        lm[j] = std::log(std::abs(d));
                        tot += lm[j];
                        if (d < 0) sgn = -sgn;
                    }
                    row[0] += sgn * std::exp(tot + lg);
                    for (std::size_t i = 0; i < g; ++i) {
                        double si = (x - mids[i] < 0) ? -sgn : sgn;
                        row[i + 1] += si * std::exp(tot - lm[i] + lg);
                    }
                }
                double scale = 0.0;
                for (double v : row) scale = std::max(scale, std::abs(v));
                if (scale == 0.0) scale = 1.0;
                for (std::size_t i = 0; i < g; ++i) A(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = row[i + 1] / scale;
                rhs(static_cast<Eigen::Index>(k)) = -row[0] / scale;
            }
            Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
            if (lu.rcond() < 1e-14)
                throw Error("singular-system", "gap moment system is singular (rcond " + std::to_string(lu.rcond()) + ")");
            Eigen::VectorXd c = lu.solve(rhs);
            // Root of q in each gap by bisection on the Lagrange form.
            auto qv = [&](double x) {
                double s = 1.0, lag = 0.0;
                for (std::size_t j = 0; j < g; ++j) {
                    double d = x - mids[j];
                    if (d == 0.0) return c(static_cast<Eigen::Index>(j));
                    lag += c(static_cast<Eigen::Index>(j)) / d;
                    s *= (d < 0 ? -1.0 : 1.0);
                }
                return s * (1.0 + lag);  // sign of q only
            };
            std::vector<double> roots(g);
            for (std::size_t j = 0; j < g; ++j) {
                Interval gp = set_.gap(j);
                double a = gp.lo, b = gp.hi, fa = qv(a), fb = qv(b);
                if (!(fa * fb < 0.0))
                    throw Error("gap-root", "gap polynomial has no sign change in gap " + std::to_string(j));
                for (int it = 0; it < 200 && b - a > 1e-17 * std::max(1.0, std::abs(a)); ++it) {
                    double mm = 0.5 * (a + b), fm = qv(mm);
                    if ((fm < 0) == (fa < 0)) {
                        a = mm;
                        fa = fm;
                    } else {
                        b = mm;
                    }
                }
                roots[j] = 0.5 * (a + b);
            }
            return roots;
        };

        // Newton polish directly on the roots: F_k(c) = int_gap_k prod(x - c_j)/sqrt|W|.
        auto newton = [&](std::vector<double> c, int n) {
            for (int it = 0; it < 4; ++it) {
                Eigen::MatrixXd J(g, g);
                Eigen::VectorXd F(g);
                for (std::size_t k = 0; k < g; ++k) {
                    std::vector<double> acc(g + 1, 0.0);
                    gap_integral(
                        k,
                        [&](double x, double lg) {
                            double sgn = 1.0, tot = 0.0;
                            std::vector<double> lm(g);
                            for (std::size_t j = 0; j < g; ++j) {
                                double d = x - c[j];
                                lm[j] = std::log(std::abs(d));
                                tot += lm[j];
                                if (d < 0) sgn = -sgn;
                            }
                            acc[0] += sgn * std::exp(tot + lg);
                            for (std::size_t i = 0; i < g; ++i) {
                                double si = (x - c[i] < 0) ? -sgn : sgn;
                                acc[i + 1] -= si * std::exp(tot - lm[i] + lg);
                            }
                            return 0.0;
                        },
                        n);
                    double scale = 0.0;
                    for (std::size_t i = 1; i <= g; ++i) scale = std::max(scale, std::abs(acc[i]));
                    if (scale == 0.0) scale = 1.0;
                    F(static_cast<Eigen::Index>(k)) = acc[0] / scale;
                    for (std::size_t i = 0; i < g; ++i) J(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = acc[i + 1] / scale;
                }
                Eigen::VectorXd dc = J.fullPivLu().solve(F);
                double mx = 0.0;
                for (std::size_t j = 0; j < g; ++j) {
                    Interval gp = set_.gap(j);
                    double step = dc(static_cast<Eigen::Index>(j));
                    c[j] = std::clamp(c[j] - step, gp.lo + 1e-3 * gp.length(), gp.hi - 1e-3 * gp.length());
                    mx = std::max(mx, std::abs(step) / gp.length());
                }
                if (mx < 1e-15) break;
            }
            return c;
        };

        std::vector<double> prev;
        for (int n = 256; n <= (256 << 6); n *= 2) {
            std::vector<double> c = newton(solve_linear(n), n);
            if (!prev.empty()) {
                double diff = 0.0;
                for (std::size_t j = 0; j < g; ++j) diff = std::max(diff, std::abs(c[j] - prev[j]) / set_.gap(j).length());
                if (diff < 1e-13) {
                    gap_roots_ = std::move(c);
                    base_nodes_ = std::max(256, n);
                    return;
                }
            }
            prev = std::move(c);
        }
        throw Error("non-convergence", "gap polynomial did not stabilize under quadrature refinement");
    }

    void build_log_capacity() {
        // Frostman: U(x0) = log cap for x0 in K; probe three interior points.
        std::vector<double> xs;
        if (set_.size() >= 3) {
            xs = {set_.band(0).mid(), set_.band(set_.size() / 2).mid(), set_.band(set_.size() - 1).mid()};
        } else {
            const Interval& b = set_.band(0);
            xs = {b.lo + 0.3 * b.length(), b.lo + 0.55 * b.length(), set_.band(set_.size() - 1).lo + 0.8 * set_.band(set_.size() - 1).length()};
        }
        for (double x0 : xs) probes_.push_back(log_potential({x0, 0.0}));
        double lo = *std::min_element(probes_.begin(), probes_.end());
        double hi = *std::max_element(probes_.begin(), probes_.end());
        if (hi - lo > 1e-8) throw Error("frostman", "Frostman cross-check disagreement " + std::to_string(hi - lo));
        log_cap_ = (probes_[0] + probes_[1] + probes_[2]) / 3.0;
    }

    RealCompactSet set_;
    std::vector<double> ends_;
    std::vector<double> gap_roots_;
    std::vector<double> probes_;
    double log_cap_ = 0.0;
    int base_nodes_ = 256;
    std::shared_ptr<Cache> cache_;
};

struct GreenValue {
    cplx z;
    double value = 0.0;
};

/// g_K(z) = -log cap(K) + int log|z - t| d mu_K(t), clamped at 0.
inline GreenValue green(const EquilibriumMeasure& m, cplx z) {
    double v = m.log_potential(z) - m.log_capacity();
    return {z, std::max(0.0, v)};
}

inline double green_value(const EquilibriumMeasure& m, cplx z) { return green(m, z).value; }

/// Green function of [alpha, beta] in closed form.
inline double green_interval_closed_form(double alpha, double beta, cplx z) {
    if (!(alpha < beta)) throw Error("invalid-interval", "need alpha < beta");
    cplx zeta = (2.0 * z - alpha - beta) / (beta - alpha);
    cplx w = zeta + std::sqrt(zeta - 1.0) * std::sqrt(zeta + 1.0);
    return std::abs(std::log(std::abs(w)));
}

/// cap(P^{-1}(K)) for deg P = n with |leading coefficient| = c_abs.
inline double capacity_preimage_poly(double cap_k, double c_abs, int n) {
    if (!(cap_k > 0.0) || !(c_abs > 0.0) || n < 1) throw Error("invalid-argument", "need capK > 0, c > 0, n >= 1");
    return std::pow(cap_k / c_abs, 1.0 / n);
}

/// |log cap K - log|c| - n log cap L + sum g_L(b_j)| for L = R^{-1}(K) real.
inline double capacity_preimage_rational_check(const EquilibriumMeasure& k, const RationalFunction& r,
                                               const EquilibriumMeasure& l) {
    int n = r.d0() - r.d1();
    if (n < 1) throw Error("invalid-argument", "R needs a pole of order >= 1 at infinity");
    double sum_g = 0.0;
    for (const cplx& b : r.poles) {
        if (std::abs(b.imag()) == 0.0 && l.set().contains(b.real()))
            throw Error("pole-in-set", "a pole of R lies inside L");
        sum_g += green_value(l, b);
    }
    return std::abs(k.log_capacity() - std::log(std::abs(r.c)) - n * l.log_capacity() + sum_g);
}

/// g_K(P(z)) / deg P, which equals g_L(z) for L = P^{-1}(K).
inline double green_pullback_poly(const EquilibriumMeasure& k, const RealPolynomial& p, cplx z) {
    return green_value(k, p(z)) / p.degree();
}

}  // namespace widomlab

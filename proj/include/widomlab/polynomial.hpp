#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "widomlab/error.hpp"
#include "widomlab/realsets.hpp"

namespace widomlab {

using cplx = std::complex<double>;

/// Real polynomial stored as a Chebyshev series on an affine domain
/// (u = (x - mid)/rad, p(x) = sum c_k T_k(u)). When the real roots and the
/// leading coefficient are known the product form is kept as well and is
/// preferred for evaluation near band endpoints.
class RealPolynomial {
public:
    RealPolynomial() : domain_{-1.0, 1.0}, cheb_{0.0} {}

    RealPolynomial(Interval domain, std::vector<double> cheb)
        : domain_(domain), cheb_(std::move(cheb)) {
        if (domain_.hi <= domain_.lo) throw Error("invalid-domain", "polynomial domain must have lo < hi");
        if (cheb_.empty()) cheb_.push_back(0.0);
        trim();
    }

    static RealPolynomial constant(double c, Interval domain = {-1.0, 1.0}) {
        return RealPolynomial(domain, {c});
    }

    /// From monomial coefficients c0 + c1 x + c2 x^2 + ...
    static RealPolynomial from_monomial(std::span<const double> mono, Interval domain = {-1.0, 1.0}) {
        // Horner in the Chebyshev algebra of the target domain.
        RealPolynomial acc = constant(0.0, domain);
        RealPolynomial x = identity(domain);
        for (auto it = mono.rbegin(); it != mono.rend(); ++it) acc = acc * x + constant(*it, domain);
        return acc;
    }
    static RealPolynomial from_monomial(std::initializer_list<double> mono, Interval domain = {-1.0, 1.0}) {
        std::vector<double> v(mono);
        return from_monomial(std::span<const double>(v), domain);
    }

    /// lead * prod (x - r_j); keeps the product form for evaluation.
    static RealPolynomial from_roots(double lead, std::span<const double> roots, Interval domain = {-1.0, 1.0}) {
        RealPolynomial acc = constant(lead, domain);
        for (double r : roots) acc = acc * (identity(domain) - constant(r, domain));
        acc.roots_ = std::vector<double>(roots.begin(), roots.end());
        acc.root_lead_ = lead;
        return acc;
    }

    static RealPolynomial identity(Interval domain = {-1.0, 1.0}) {
        double m = domain.mid(), r = domain.rad();
        return RealPolynomial(domain, {m, r});
    }

    /// Classical Chebyshev polynomial T_d on [-1, 1].
    static RealPolynomial chebyshev_t(int d) {
        std::vector<double> c(static_cast<std::size_t>(d) + 1, 0.0);
        c.back() = 1.0;
        return RealPolynomial({-1.0, 1.0}, std::move(c));
    }

    [[nodiscard]] int degree() const noexcept { return static_cast<int>(cheb_.size()) - 1; }
    [[nodiscard]] const Interval& domain() const noexcept { return domain_; }
    [[nodiscard]] std::span<const double> cheb() const noexcept { return cheb_; }
    [[nodiscard]] bool has_root_form() const noexcept { return roots_.has_value(); }

    /// Leading coefficient in the monomial sense.
    [[nodiscard]] double leading() const {
        int n = degree();
        if (n == 0) return cheb_[0];
        return cheb_.back() * std::pow(2.0, n - 1) / std::pow(domain_.rad(), n);
    }
    /// log |leading coefficient|, safe for large degrees.
    [[nodiscard]] double log_abs_leading() const {
        int n = degree();
        if (n == 0) return std::log(std::abs(cheb_[0]));
        return std::log(std::abs(cheb_.back())) + (n - 1) * std::numbers::ln2 - n * std::log(domain_.rad());
    }

    [[nodiscard]] double operator()(double x) const {
        if (roots_) {
            double v = root_lead_;
            for (double r : *roots_) v *= (x - r);
            return v;
        }
        return clenshaw((x - domain_.mid()) / domain_.rad());
    }

    [[nodiscard]] cplx operator()(cplx z) const {
        if (roots_) {
            cplx v = root_lead_;
            for (double r : *roots_) v *= (z - r);
            return v;
        }
        cplx u = (z - domain_.mid()) / domain_.rad();
        cplx b1 = 0.0, b2 = 0.0;
        for (std::size_t k = cheb_.size(); k-- > 1;) {
            cplx b0 = 2.0 * u * b1 - b2 + cheb_[k];
            b2 = b1;
            b1 = b0;
        }
        return u * b1 - b2 + cheb_[0];
    }

    [[nodiscard]] RealPolynomial derivative() const {
        int n = degree();
        if (n == 0) return constant(0.0, domain_);
        std::vector<double> d(static_cast<std::size_t>(n) + 1, 0.0);
        // d_{k-1} = d_{k+1} + 2k c_k, then halve d_0.
        for (int k = n; k >= 1; --k) {
            double next = (k + 1 <= n) ? d[static_cast<std::size_t>(k + 1)] : 0.0;
            d[static_cast<std::size_t>(k - 1)] = next + 2.0 * k * cheb_[static_cast<std::size_t>(k)];
        }
        d[0] *= 0.5;
        d.pop_back();
        for (double& v : d) v /= domain_.rad();
        return RealPolynomial(domain_, std::move(d));
    }

    /// Re-expands the polynomial on another domain by interpolation at
    /// Chebyshev points of the new domain.
    [[nodiscard]] RealPolynomial on_domain(Interval dom) const {
        if (dom == domain_) return *this;
        int n = degree();
        std::size_t m = static_cast<std::size_t>(n) + 1;
        std::vector<double> vals(m), c(m, 0.0);
        for (std::size_t j = 0; j < m; ++j) {
            double th = std::numbers::pi * (static_cast<double>(j) + 0.5) / static_cast<double>(m);
            vals[j] = (*this)(dom.mid() + dom.rad() * std::cos(th));
        }
        for (std::size_t k = 0; k < m; ++k) {
            double s = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                double th = std::numbers::pi * (static_cast<double>(j) + 0.5) / static_cast<double>(m);
                s += vals[j] * std::cos(static_cast<double>(k) * th);
            }
            c[k] = s * (k == 0 ? 1.0 : 2.0) / static_cast<double>(m);
        }
        RealPolynomial out(dom, std::move(c));
        out.roots_ = roots_;
        out.root_lead_ = root_lead_;
        return out;
    }

    friend RealPolynomial operator+(const RealPolynomial& a, const RealPolynomial& b) {
        RealPolynomial bb = b.on_domain(a.domain_);
        std::vector<double> c(std::max(a.cheb_.size(), bb.cheb_.size()), 0.0);
        for (std::size_t k = 0; k < a.cheb_.size(); ++k) c[k] += a.cheb_[k];
        for (std::size_t k = 0; k < bb.cheb_.size(); ++k) c[k] += bb.cheb_[k];
        return RealPolynomial(a.domain_, std::move(c));
    }
    friend RealPolynomial operator-(const RealPolynomial& a, const RealPolynomial& b) {
        return a + b * (-1.0);
    }
    friend RealPolynomial operator*(const RealPolynomial& a, double s) {
        std::vector<double> c(a.cheb_);
        for (double& v : c) v *= s;
        RealPolynomial out(a.domain_, std::move(c));
        if (a.roots_ && s != 0.0) {
            out.roots_ = a.roots_;
            out.root_lead_ = a.root_lead_ * s;
        }
        return out;
    }
    friend RealPolynomial operator*(const RealPolynomial& a, const RealPolynomial& b) {
        RealPolynomial bb = b.on_domain(a.domain_);
        std::vector<double> c(a.cheb_.size() + bb.cheb_.size() - 1, 0.0);
        for (std::size_t i = 0; i < a.cheb_.size(); ++i)
            for (std::size_t j = 0; j < bb.cheb_.size(); ++j) {
                double p = 0.5 * a.cheb_[i] * bb.cheb_[j];
                c[i + j] += p;
                c[i > j ? i - j : j - i] += p;
            }
        RealPolynomial out(a.domain_, std::move(c));
        if (a.roots_ && bb.roots_) {
            std::vector<double> r(*a.roots_);
            r.insert(r.end(), bb.roots_->begin(), bb.roots_->end());
            out.roots_ = std::move(r);
            out.root_lead_ = a.root_lead_ * bb.root_lead_;
        }
        return out;
    }

    /// All complex roots from the eigenvalues of the colleague matrix.
    [[nodiscard]] std::vector<cplx> roots() const {
        int n = degree();
        if (n <= 0) return {};
        if (roots_) return {roots_->begin(), roots_->end()};
        std::vector<cplx> out;
        if (n == 1) {
            out.emplace_back(domain_.mid() - domain_.rad() * cheb_[0] / cheb_[1], 0.0);
            return out;
        }
        Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, n);
        C(0, 1) = 1.0;
        for (int i = 1; i < n - 1; ++i) {
            C(i, i - 1) = 0.5;
            C(i, i + 1) = 0.5;
        }
        C(n - 1, n - 2) = 0.5;
        double lead = cheb_.back();
        for (int j = 0; j < n; ++j) C(n - 1, j) -= cheb_[static_cast<std::size_t>(j)] / (2.0 * lead);
        Eigen::EigenSolver<Eigen::MatrixXd> es(C, false);
        if (es.info() == Eigen::Success) {
            for (int i = 0; i < n; ++i) out.push_back(domain_.mid() + domain_.rad() * es.eigenvalues()[i]);
            return out;
        }
        // The real QR iteration occasionally stalls on highly symmetric
        // matrices; the complex solver uses different shifts.
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> ces(C.cast<cplx>(), false);
        if (ces.info() != Eigen::Success) throw Error("non-convergence", "colleague eigenvalue solve failed");
        for (int i = 0; i < n; ++i) out.push_back(domain_.mid() + domain_.rad() * ces.eigenvalues()[i]);
        return out;
    }

    /// Real roots: near-real eigenvalues, polished by bisection where the
    /// polynomial changes sign nearby. Roots of even multiplicity are kept.
    [[nodiscard]] std::vector<double> real_roots(double imag_tol = 1e-6) const {
        std::vector<double> out;
        double scale = std::max(domain_.rad(), 1.0);
        for (const cplx& z : roots()) {
            if (std::abs(z.imag()) > imag_tol * std::max(scale, std::abs(z))) continue;
            out.push_back(polish(z.real()));
        }
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    [[nodiscard]] double clenshaw(double u) const {
        double b1 = 0.0, b2 = 0.0;
        for (std::size_t k = cheb_.size(); k-- > 1;) {
            double b0 = 2.0 * u * b1 - b2 + cheb_[k];
            b2 = b1;
            b1 = b0;
        }
        return u * b1 - b2 + cheb_[0];
    }

    [[nodiscard]] double polish(double x) const {
        double h = 1e-7 * std::max(domain_.rad(), std::abs(x));
        double a = x - h, b = x + h;
        double fa = (*this)(a), fb = (*this)(b);
        if (!(fa * fb < 0.0)) return x;
        for (int it = 0; it < 200 && b - a > 4 * std::numeric_limits<double>::epsilon() * std::abs(x); ++it) {
            double m = 0.5 * (a + b);
            double fm = (*this)(m);
            if (fm == 0.0) return m;
            if ((fm < 0.0) == (fa < 0.0)) {
                a = m;
                fa = fm;
            } else {
                b = m;
            }
        }
        return 0.5 * (a + b);
    }

    void trim() {
        double mx = 0.0;
        for (double v : cheb_) mx = std::max(mx, std::abs(v));
        while (cheb_.size() > 1 && std::abs(cheb_.back()) <= 1e-15 * mx) cheb_.pop_back();
        if (cheb_.size() > 1 && cheb_.back() == 0.0) cheb_.pop_back();
    }

    Interval domain_;
    std::vector<double> cheb_;
    std::optional<std::vector<double>> roots_;
    double root_lead_ = 1.0;
};

/// Rational function c * prod(z - a_j) / prod(z - b_j) with complex zeros and
/// poles. Real-coefficient functions keep zeros and poles closed under
/// conjugation.
struct RationalFunction {
    double c = 1.0;
    std::vector<cplx> zeros;
    std::vector<cplx> poles;

    [[nodiscard]] int d0() const noexcept { return static_cast<int>(zeros.size()); }
    [[nodiscard]] int d1() const noexcept { return static_cast<int>(poles.size()); }
    /// Order of decay at infinity: R(z) ~ c z^{-d}.
    [[nodiscard]] int d() const noexcept { return d1() - d0(); }

    [[nodiscard]] cplx operator()(cplx z) const {
        cplx v = c;
        for (const auto& a : zeros) v *= (z - a);
        for (const auto& b : poles) v /= (z - b);
        return v;
    }
    [[nodiscard]] cplx operator()(double x) const { return (*this)(cplx(x, 0.0)); }

    [[nodiscard]] bool is_real() const {
        auto closed = [](const std::vector<cplx>& v) {
            std::vector<bool> used(v.size(), false);
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (std::abs(v[i].imag()) <= 1e-14 * std::max(1.0, std::abs(v[i]))) continue;
                if (used[i]) continue;
                bool found = false;
                for (std::size_t j = 0; j < v.size(); ++j)
                    if (j != i && !used[j] && std::abs(v[j] - std::conj(v[i])) <= 1e-12 * std::max(1.0, std::abs(v[i]))) {
                        used[i] = used[j] = true;
                        found = true;
                        break;
                    }
                if (!found) return false;
            }
            return true;
        };
        return closed(zeros) && closed(poles);
    }

    [[nodiscard]] RealPolynomial numerator(Interval domain = {-1.0, 1.0}) const {
        return real_poly(zeros, c, domain);
    }
    [[nodiscard]] RealPolynomial denominator(Interval domain = {-1.0, 1.0}) const {
        return real_poly(poles, 1.0, domain);
    }

    /// Removes zero/pole pairs that coincide.
    [[nodiscard]] RationalFunction reduced(double tol = 1e-12) const {
        RationalFunction out{c, {}, {}};
        std::vector<bool> used(poles.size(), false);
        for (const auto& a : zeros) {
            bool cancelled = false;
            for (std::size_t j = 0; j < poles.size(); ++j)
                if (!used[j] && std::abs(a - poles[j]) <= tol * std::max(1.0, std::abs(a))) {
                    used[j] = true;
                    cancelled = true;
                    break;
                }
            if (!cancelled) out.zeros.push_back(a);
        }
        for (std::size_t j = 0; j < poles.size(); ++j)
            if (!used[j]) out.poles.push_back(poles[j]);
        return out;
    }

private:
    static RealPolynomial real_poly(const std::vector<cplx>& rts, double lead, Interval domain) {
        RealPolynomial acc = RealPolynomial::constant(lead, domain);
        std::vector<bool> used(rts.size(), false);
        for (std::size_t i = 0; i < rts.size(); ++i) {
            if (used[i]) continue;
            used[i] = true;
            const cplx& r = rts[i];
            if (std::abs(r.imag()) <= 1e-14 * std::max(1.0, std::abs(r))) {
                acc = acc * (RealPolynomial::identity(domain) - RealPolynomial::constant(r.real(), domain));
                continue;
            }
            bool paired = false;
            for (std::size_t j = i + 1; j < rts.size(); ++j)
                if (!used[j] && std::abs(rts[j] - std::conj(r)) <= 1e-12 * std::max(1.0, std::abs(r))) {
                    used[j] = true;
                    paired = true;
                    break;
                }
            if (!paired) throw Error("not-real", "zeros/poles are not closed under conjugation");
            // (x - r)(x - conj r) = x^2 - 2 Re r x + |r|^2
            double mono[3] = {std::norm(r), -2.0 * r.real(), 1.0};
            acc = acc * RealPolynomial::from_monomial(std::span<const double>(mono, 3), domain);
        }
        return acc;
    }
};

}  // namespace widomlab

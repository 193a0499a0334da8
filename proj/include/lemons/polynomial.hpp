#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace lemons {

/// Dense power-basis polynomial p(t) = c0 + c1 t + c2 t^2 + ...
template <typename Scalar>
class Polynomial {
 public:
  using Coefficients = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Polynomial() : coeffs_(Coefficients::Zero(1)) {}
  explicit Polynomial(Coefficients c) : coeffs_(std::move(c)) {
    if (coeffs_.size() == 0) coeffs_ = Coefficients::Zero(1);
  }
  Polynomial(std::initializer_list<Scalar> c) : coeffs_(static_cast<Eigen::Index>(c.size())) {
    Eigen::Index i = 0;
    for (Scalar v : c) coeffs_(i++) = v;
    if (coeffs_.size() == 0) coeffs_ = Coefficients::Zero(1);
  }

  static Polynomial constant(Scalar v) { return Polynomial({v}); }

  const Coefficients& coefficients() const { return coeffs_; }
  Eigen::Index degree() const { return coeffs_.size() - 1; }

  Scalar operator()(Scalar t) const {
    Scalar acc = coeffs_(coeffs_.size() - 1);
    for (Eigen::Index k = coeffs_.size() - 2; k >= 0; --k) acc = acc * t + coeffs_(k);
    return acc;
  }

  Polynomial derivative() const {
    if (coeffs_.size() == 1) return Polynomial();
    Coefficients d(coeffs_.size() - 1);
    for (Eigen::Index k = 1; k < coeffs_.size(); ++k) d(k - 1) = Scalar(k) * coeffs_(k);
    return Polynomial(d);
  }

  /// Antiderivative vanishing at t = 0.
  Polynomial antiderivative() const {
    Coefficients a(coeffs_.size() + 1);
    a(0) = Scalar(0);
    for (Eigen::Index k = 0; k < coeffs_.size(); ++k) a(k + 1) = coeffs_(k) / Scalar(k + 1);
    return Polynomial(a);
  }

  Polynomial operator+(const Polynomial& o) const {
    Coefficients r = Coefficients::Zero(std::max(coeffs_.size(), o.coeffs_.size()));
    r.head(coeffs_.size()) += coeffs_;
    r.head(o.coeffs_.size()) += o.coeffs_;
    return Polynomial(r);
  }
  Polynomial operator-(const Polynomial& o) const { return *this + o * Scalar(-1); }
  Polynomial operator*(Scalar s) const { return Polynomial(Coefficients(coeffs_ * s)); }
  Polynomial operator*(const Polynomial& o) const {
    Coefficients r = Coefficients::Zero(coeffs_.size() + o.coeffs_.size() - 1);
    for (Eigen::Index i = 0; i < coeffs_.size(); ++i)
      for (Eigen::Index j = 0; j < o.coeffs_.size(); ++j) r(i + j) += coeffs_(i) * o.coeffs_(j);
    return Polynomial(r);
  }

  /// Simple roots in [lo, hi]; even-multiplicity touch points are returned through `touches`.
  std::vector<Scalar> roots(Scalar lo, Scalar hi, Scalar tol, std::vector<Scalar>* touches = nullptr) const {
    std::vector<Scalar> out;
    Eigen::Index deg = degree();
    while (deg > 0 && coeffs_(deg) == Scalar(0)) --deg;
    if (deg == 0) return out;
    if (deg == 1) {
      Scalar r = -coeffs_(0) / coeffs_(1);
      if (r >= lo && r <= hi) out.push_back(r);
      return out;
    }
    // split at critical points so that each sub-interval is monotone
    std::vector<Scalar> cuts{lo};
    for (Scalar r : derivative().roots(lo, hi, tol)) cuts.push_back(r);
    cuts.push_back(hi);
    std::sort(cuts.begin(), cuts.end());
    const Scalar zero_tol = tol;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      Scalar a = cuts[k], b = cuts[k + 1];
      Scalar fa = (*this)(a), fb = (*this)(b);
      if (std::abs(fa) <= zero_tol && k > 0) continue;  // handled as critical point below
      if (fa == Scalar(0)) {
        out.push_back(a);
        continue;
      }
      if (fb == Scalar(0)) {
        if (k + 2 == cuts.size()) out.push_back(b);
        continue;
      }
      if ((fa < 0) == (fb < 0)) continue;
      for (int it = 0; it < 200 && b - a > tol * Scalar(1e-3); ++it) {
        Scalar m = Scalar(0.5) * (a + b);
        Scalar fm = (*this)(m);
        if (fm == Scalar(0)) { a = b = m; break; }
        if ((fm < 0) == (fa < 0)) { a = m; fa = fm; } else { b = m; }
      }
      out.push_back(Scalar(0.5) * (a + b));
    }
    // interior critical points that sit on the axis
    for (std::size_t k = 1; k + 1 < cuts.size(); ++k) {
      Scalar r = cuts[k];
      if (std::abs((*this)(r)) > zero_tol) continue;
      Scalar eps = std::max(Scalar(1e-6), tol * Scalar(100));
      Scalar left = (*this)(std::max(lo, r - eps)), right = (*this)(std::min(hi, r + eps));
      if ((left < 0) != (right < 0))
        out.push_back(r);
      else if (touches)
        touches->push_back(r);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end(), [&](Scalar x, Scalar y) { return std::abs(x - y) <= tol; }),
              out.end());
    return out;
  }

 private:
  Coefficients coeffs_;
};

/// Piecewise polynomial on [knots.front(), knots.back()]; every piece uses the global variable t.
template <typename Scalar>
class PiecewisePolynomial {
 public:
  PiecewisePolynomial() = default;
  PiecewisePolynomial(std::vector<Scalar> knots, std::vector<Polynomial<Scalar>> pieces)
      : knots_(std::move(knots)), pieces_(std::move(pieces)) {
    if (knots_.size() < 2 || pieces_.size() + 1 != knots_.size())
      throw std::invalid_argument("piecewise polynomial: need one piece per knot interval");
    for (std::size_t i = 0; i + 1 < knots_.size(); ++i)
      if (!(knots_[i] < knots_[i + 1])) throw std::invalid_argument("piecewise polynomial: knots must increase");
  }

  static PiecewisePolynomial single(Polynomial<Scalar> p, Scalar lo = 0, Scalar hi = 1) {
    return PiecewisePolynomial({lo, hi}, {std::move(p)});
  }

  const std::vector<Scalar>& knots() const { return knots_; }
  const std::vector<Polynomial<Scalar>>& pieces() const { return pieces_; }
  Scalar lower() const { return knots_.front(); }
  Scalar upper() const { return knots_.back(); }

  /// Index of the piece owning t; outside the support the end pieces extrapolate.
  std::size_t piece_index(Scalar t) const {
    auto it = std::upper_bound(knots_.begin() + 1, knots_.end() - 1, t);
    return static_cast<std::size_t>(it - (knots_.begin() + 1));
  }

  Scalar operator()(Scalar t) const { return pieces_[piece_index(t)](t); }

  PiecewisePolynomial derivative() const { return map([](const Polynomial<Scalar>& p) { return p.derivative(); }); }

  /// Continuous antiderivative vanishing at the first knot.
  PiecewisePolynomial antiderivative() const {
    std::vector<Polynomial<Scalar>> out;
    Scalar carry = 0;
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      Polynomial<Scalar> a = pieces_[i].antiderivative();
      a = a + Polynomial<Scalar>::constant(carry - a(knots_[i]));
      carry = a(knots_[i + 1]);
      out.push_back(std::move(a));
    }
    return PiecewisePolynomial(knots_, std::move(out));
  }

  /// Exact integral over [a, b] within the support.
  Scalar integrate(Scalar a, Scalar b) const {
    if (b < a) return -integrate(b, a);
    Scalar total = 0;
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      Scalar lo = std::max(a, knots_[i]), hi = std::min(b, knots_[i + 1]);
      if (i == 0) lo = a < knots_[0] ? a : lo;
      if (i + 1 == pieces_.size()) hi = b > knots_.back() ? b : hi;
      if (hi <= lo) continue;
      Polynomial<Scalar> p = pieces_[i].antiderivative();
      total += p(hi) - p(lo);
    }
    return total;
  }

  /// Refines onto the union of both knot sets and combines piecewise.
  template <typename Op>
  PiecewisePolynomial combine(const PiecewisePolynomial& o, Op op) const {
    std::vector<Scalar> k = knots_;
    k.insert(k.end(), o.knots_.begin(), o.knots_.end());
    std::sort(k.begin(), k.end());
    k.erase(std::unique(k.begin(), k.end()), k.end());
    std::vector<Polynomial<Scalar>> out;
    for (std::size_t i = 0; i + 1 < k.size(); ++i) {
      Scalar mid = Scalar(0.5) * (k[i] + k[i + 1]);
      out.push_back(op(pieces_[piece_index(mid)], o.pieces_[o.piece_index(mid)]));
    }
    return PiecewisePolynomial(std::move(k), std::move(out));
  }

  PiecewisePolynomial operator*(const PiecewisePolynomial& o) const {
    return combine(o, [](const auto& p, const auto& q) { return p * q; });
  }
  PiecewisePolynomial operator+(const PiecewisePolynomial& o) const {
    return combine(o, [](const auto& p, const auto& q) { return p + q; });
  }
  PiecewisePolynomial operator-(const PiecewisePolynomial& o) const {
    return combine(o, [](const auto& p, const auto& q) { return p - q; });
  }
  PiecewisePolynomial operator*(Scalar s) const {
    return map([s](const Polynomial<Scalar>& p) { return p * s; });
  }

  template <typename F>
  PiecewisePolynomial map(F fn) const {
    std::vector<Polynomial<Scalar>> out;
    out.reserve(pieces_.size());
    for (const auto& p : pieces_) out.push_back(fn(p));
    return PiecewisePolynomial(knots_, std::move(out));
  }

  /// Roots in [lo, hi] across all pieces, sorted and de-duplicated.
  std::vector<Scalar> roots(Scalar lo, Scalar hi, Scalar tol, std::vector<Scalar>* touches = nullptr) const {
    std::vector<Scalar> out;
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      Scalar a = std::max(lo, knots_[i]), b = std::min(hi, knots_[i + 1]);
      if (b < a) continue;
      for (Scalar r : pieces_[i].roots(a, b, tol, touches)) out.push_back(r);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end(), [&](Scalar x, Scalar y) { return std::abs(x - y) <= tol; }),
              out.end());
    // a sign flip exactly at a knot shows up as an endpoint root on both neighbouring pieces; a touch
    // at a knot shows up on one side only and is filtered out here
    std::vector<Scalar> kept;
    for (Scalar r : out) {
      Scalar eps = std::max(Scalar(1e-9), tol * Scalar(10));
      if (r - eps < lo || r + eps > hi) {
        kept.push_back(r);
        continue;
      }
      Scalar l = (*this)(r - eps), h = (*this)(r + eps);
      if ((l < 0) != (h < 0))
        kept.push_back(r);
      else if (touches)
        touches->push_back(r);
    }
    return kept;
  }

 private:
  std::vector<Scalar> knots_;
  std::vector<Polynomial<Scalar>> pieces_;
};

using Poly = Polynomial<double>;
using PiecewisePoly = PiecewisePolynomial<double>;

}  // namespace lemons

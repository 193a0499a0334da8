#include "lemons/matching.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/tools/roots.hpp>
#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <array>
#include <functional>
#include <limits>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace lemons {

namespace {

namespace odeint = boost::numeric::odeint;
using State = std::array<double, 2>;  // (a, J)

std::vector<double> kernel_slopes(const std::vector<double>& x, const std::vector<double>& a) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = 1.0 / (x[i] - a[i]);
  return out;
}

double solve_bracketed(const std::function<double(double)>& fn, double lo, double hi) {
  double flo = fn(lo), fhi = fn(hi);
  if (flo == 0) return lo;
  if (fhi == 0) return hi;
  if ((flo < 0) == (fhi < 0)) throw NoBracketError("root not bracketed");
  std::uintmax_t iters = 200;
  auto r = boost::math::tools::toms748_solve(fn, lo, hi, flo, fhi, boost::math::tools::eps_tolerance<double>(52),
                                             iters);
  return 0.5 * (r.first + r.second);
}

}  // namespace

double ode_rhs(const MarketInstance& inst, double x, double a) {
  const double b = inst.inverse_cost(x);
  if (std::abs(a - x) < 1e-14) {
    if (std::abs(b - x) < 1e-12) return 0.0;
    std::ostringstream os;
    os << "matching ODE singular at x = a = " << x;
    throw SingularityError(os.str());
  }
  const double db = 1.0 / inst.cost_slope(b);
  return db * inst.density(b) / inst.density(a) * (b - x) / (a - x);
}

MatchingCurve::MatchingCurve(std::vector<double> x, std::vector<double> a, std::vector<double> slope,
                             std::vector<double> j, std::optional<CurveSeed> seed, double residual)
    : x_(std::move(x)),
      a_(std::move(a)),
      s_(std::move(slope)),
      j_(std::move(j)),
      seed_(seed),
      residual_(residual),
      a_interp_(std::vector<double>(x_), std::vector<double>(a_), std::vector<double>(s_)),
      j_interp_(std::vector<double>(x_), std::vector<double>(j_), kernel_slopes(x_, a_)) {
  for (std::size_t i = 1; i < x_.size(); ++i)
    if (!(a_[i] < a_[i - 1])) throw std::runtime_error("matching curve is not strictly decreasing");
}

Interval MatchingCurve::means() const { return {seed_ ? seed_->crossing : x_.front(), x_.back()}; }

double MatchingCurve::a(double x) const {
  if (seed_ && x < x_.front()) return seed_->crossing + seed_->slope * (x - seed_->crossing);
  if (x < x_.front() - 1e-12 || x > x_.back() + 1e-12) throw DomainError("matching curve evaluated outside its means");
  return a_interp_(std::clamp(x, x_.front(), x_.back()));
}

double MatchingCurve::slope(double x) const {
  if (seed_ && x < x_.front()) return seed_->slope;
  if (x < x_.front() - 1e-12 || x > x_.back() + 1e-12) throw DomainError("matching curve evaluated outside its means");
  return a_interp_.prime(std::clamp(x, x_.front(), x_.back()));
}

double MatchingCurve::log_kernel(double x) const {
  if (seed_ && x < x_.front()) {
    const double d = x - seed_->crossing;
    if (d <= 0) return -std::numeric_limits<double>::infinity();
    return j_.front() + std::log(d / (x_.front() - seed_->crossing)) / (1.0 - seed_->slope);
  }
  if (x < x_.front() - 1e-12 || x > x_.back() + 1e-12) throw DomainError("matching curve evaluated outside its means");
  x = std::clamp(x, x_.front(), x_.back());
  // node value plus quadrature of 1/(s − a(s)) from the nearest node below
  auto it = std::upper_bound(x_.begin(), x_.end(), x);
  const std::size_t k = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
  if (x == x_[k]) return j_[k];
  return j_[k] + boost::math::quadrature::gauss<double, 10>::integrate(
                     [&](double s) { return 1.0 / (s - a_interp_(s)); }, x_[k], x);
}

double MatchingCurve::log_kernel_slope(double x) const {
  if (seed_ && x < x_.front()) return 1.0 / ((1.0 - seed_->slope) * (x - seed_->crossing));
  if (x < x_.front() - 1e-12 || x > x_.back() + 1e-12) throw DomainError("matching curve evaluated outside its means");
  return j_interp_.prime(std::clamp(x, x_.front(), x_.back()));
}

double MatchingCurve::x_of(double type) const {
  if (seed_ && type >= a_.front()) {
    if (type > seed_->crossing + 1e-12) throw DomainError("type above the matched range");
    return seed_->crossing + (type - seed_->crossing) / seed_->slope;
  }
  if (type > a_.front() + 1e-12 || type < a_.back() - 1e-12) throw DomainError("type outside the matched range");
  if (type >= a_.front()) return x_.front();
  if (type <= a_.back()) return x_.back();
  // a_ is decreasing: first node with a < type closes the bracket
  auto it = std::upper_bound(a_.begin(), a_.end(), type, [](double t, double v) { return t > v; });
  std::size_t k = static_cast<std::size_t>(it - a_.begin());
  if (a_[k] == type) return x_[k];
  return solve_bracketed([&](double x) { return a_interp_(x) - type; }, x_[k - 1], x_[k]);
}

CurveSolution integrate_curve(const MarketInstance& inst, const CurveProblem& p, const CurveOptions& opt) {
  const double dir = p.x_end >= p.x_start ? 1.0 : -1.0;
  const double range = std::abs(p.x_end - p.x_start);
  if (range <= 0) throw DomainError("empty integration range");

  std::optional<CurveSeed> seed;
  double x = p.x_start;
  State y{p.a_start, 0.0};
  if (p.seeded) {
    const double crossing = p.x_start;
    const double slope = 1.0 - 1.0 / inst.cost_slope(inst.inverse_cost(crossing));
    seed = CurveSeed{crossing, slope};
    x = crossing + dir * opt.seed_offset;
    y[0] = crossing + slope * (x - crossing);
  }

  auto system = [&](const State& s, State& ds, double t) {
    ds[0] = ode_rhs(inst, t, s[0]);
    ds[1] = 1.0 / (t - s[0]);
  };

  std::vector<double> xs{x}, as{y[0]}, ss, js{y[1]};
  State d0;
  system(y, d0, x);
  ss.push_back(d0[0]);

  auto stepper = odeint::make_controlled(opt.abs_tol, opt.rel_tol, odeint::runge_kutta_dopri5<State>());
  const double max_step = range / opt.min_steps;
  double dt = dir * max_step * 0.1;
  bool hit = false;
  double x_hit = 0;

  for (long guard = 0; dir * (p.x_end - x) > 1e-15; ++guard) {
    if (guard > 10'000'000) throw std::runtime_error("matching ODE: step budget exhausted");
    if (std::abs(dt) > max_step) dt = dir * max_step;
    if (dir * (x + dt - p.x_end) > 0) dt = p.x_end - x;
    const State y_prev = y;
    const double x_prev = x;
    if (stepper.try_step(system, y, x, dt) != odeint::success) {
      if (std::abs(dt) < 1e-15) throw std::runtime_error("matching ODE: step size underflow");
      continue;
    }
    State dy;
    system(y, dy, x);
    if (y[0] > p.ceiling) {
      std::ostringstream os;
      os << "matching curve escaped above " << p.ceiling << " at x = " << x;
      throw EscapeError(os.str(), x, y[0]);
    }
    if (y[0] < p.floor) {
      if (!p.stop_at_floor) {
        std::ostringstream os;
        os << "matching curve escaped below " << p.floor << " at x = " << x << " before reaching " << p.x_end;
        throw EscapeError(os.str(), x, y[0]);
      }
      // locate the floor on the step's Hermite cubic, then land on it with a single exact step
      const double h = x - x_prev, s0 = ss.back(), s1 = dy[0], a0 = y_prev[0], a1 = y[0];
      auto herm = [&](double t) {
        const double u = (t - x_prev) / h, u2 = u * u, u3 = u2 * u;
        return (2 * u3 - 3 * u2 + 1) * a0 + (u3 - 2 * u2 + u) * h * s0 + (-2 * u3 + 3 * u2) * a1 +
               (u3 - u2) * h * s1 - p.floor;
      };
      x_hit = solve_bracketed(herm, std::min(x_prev, x), std::max(x_prev, x));
      hit = true;
      if (std::abs(x_hit - x_prev) < 1e-13) {
        x_hit = x_prev;
        break;
      }
      y = y_prev;
      odeint::runge_kutta_dopri5<State> single;
      single.do_step(system, y, x_prev, x_hit - x_prev);
      x = x_hit;
      system(y, dy, x);
    }
    xs.push_back(x);
    as.push_back(y[0]);
    ss.push_back(dy[0]);
    js.push_back(y[1]);
    if (hit) break;
  }

  if (dir < 0) {
    std::reverse(xs.begin(), xs.end());
    std::reverse(as.begin(), as.end());
    std::reverse(ss.begin(), ss.end());
    std::reverse(js.begin(), js.end());
  }

  MatchingCurve probe(xs, as, ss, js, seed, 0.0);
  double residual = 0;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    const double xm = 0.5 * (xs[i] + xs[i + 1]);
    residual = std::max(residual, std::abs(probe.slope(xm) - ode_rhs(inst, xm, probe.a(xm))));
  }
  return {MatchingCurve(std::move(xs), std::move(as), std::move(ss), std::move(js), seed, residual), hit, x_hit};
}

MatchingCurve solve_g2(const MarketInstance& inst, double crossing, double top_eff, const CurveOptions& opt) {
  CurveProblem p;
  p.x_start = crossing;
  p.a_start = crossing;
  p.x_end = inst.cost(top_eff);
  p.seeded = true;
  p.floor = 0.0;
  p.ceiling = crossing;
  return integrate_curve(inst, p, opt).curve;
}

MatchingCurve solve_g1(const MarketInstance& inst, double theta_start, double crossing, double top_eff,
                       const CurveOptions& opt) {
  if (!(theta_start >= 0 && theta_start < crossing)) throw DomainError("upper curve start must lie in [0, crossing)");
  CurveProblem p;
  p.x_start = inst.cost(top_eff);
  p.a_start = theta_start;
  p.x_end = crossing;
  p.floor = 0.0;
  p.ceiling = crossing;
  return integrate_curve(inst, p, opt).curve;
}

void write_curve_csv(std::ostream& os, const MarketInstance& inst, const MatchingCurve& curve,
                     const std::string& label) {
  const auto& x = curve.node_x();
  os << std::setprecision(17);
  for (std::size_t i = 0; i < x.size(); ++i) {
    double res = 0;
    if (i + 1 < x.size()) {
      const double xm = 0.5 * (x[i] + x[i + 1]);
      res = std::abs(curve.slope(xm) - ode_rhs(inst, xm, curve.a(xm)));
    }
    os << label << ',' << x[i] << ',' << curve.node_a()[i] << ',' << ode_rhs(inst, x[i], curve.node_a()[i]) << ','
       << res << '\n';
  }
}

}  // namespace lemons

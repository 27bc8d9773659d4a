#include "ot/oracle1d.hpp"

#include <algorithm>
#include <cmath>

#include "ot/error.hpp"

namespace ot {

namespace {

void require1d(Index d, const char* who) {
  if (d != 1)
    throw UnsupportedError(std::string(who) + ": only 1D measures supported");
}

/// Exact integral of |f(u)| ^p over u in [0, L] where f is affine with
/// f(0) = a, f(L) = b.  The antiderivative |f|^{p+1} sgn(f) / ((p+1) f')
/// is smooth through the sign change, so no crossing split is needed.
double absPowSegment(double a, double b, double L, double p) {
  if (L <= 0.0) return 0.0;
  if (a == b) return std::pow(std::abs(a), p) * L;
  auto prim = [&](double f) {
    return std::pow(std::abs(f), p + 1.0) * (f >= 0.0 ? 1.0 : -1.0);
  };
  return L * (prim(b) - prim(a)) / ((b - a) * (p + 1.0));
}

}  // namespace

PiecewiseCdf PiecewiseCdf::from(const DiscreteMeasure& mu) {
  require1d(mu.dim(), "cdf");
  // Atoms arrive sorted and distinct from the measure constructor.
  PiecewiseCdf f;
  const Index k = mu.size();
  f.x_ = mu.points().col(0);
  f.fRight_.resize(k);
  f.slope_ = Vector::Zero(k);
  double acc = 0.0;
  for (Index i = 0; i < k; ++i) {
    acc += mu.weights()[i];
    f.fRight_[i] = acc;
  }
  f.fRight_[k - 1] = 1.0;
  return f;
}

PiecewiseCdf PiecewiseCdf::from(const GridDensity& rho) {
  require1d(rho.dim(), "cdf");
  const Index m = rho.shape()[0];
  const double h = rho.spacing(0);
  PiecewiseCdf f;
  f.x_.resize(m + 1);
  f.fRight_.resize(m + 1);
  f.slope_.resize(m + 1);
  double acc = 0.0;
  for (Index i = 0; i <= m; ++i) {
    f.x_[i] = static_cast<double>(i) * h;
    f.fRight_[i] = acc;
    f.slope_[i] = i < m ? rho.values()[i] : 0.0;
    if (i < m) acc += rho.values()[i] * h;
  }
  f.fRight_[m] = 1.0;
  return f;
}

double PiecewiseCdf::operator()(double x) const {
  const Index n = x_.size();
  if (x < x_[0]) return 0.0;
  const auto it = std::upper_bound(x_.data(), x_.data() + n, x);
  const Index i = static_cast<Index>(it - x_.data()) - 1;
  if (i >= n - 1) return fRight_[n - 1];
  return fRight_[i] + slope_[i] * (x - x_[i]);
}

double PiecewiseCdf::quantile(double s) const {
  const Index n = x_.size();
  if (s <= 0.0) return x_[0];
  if (s > 1.0) s = 1.0;
  // Smallest i with F(x_i^+) >= s.
  const auto it = std::lower_bound(fRight_.data(), fRight_.data() + n, s);
  Index i = static_cast<Index>(it - fRight_.data());
  if (i >= n) i = n - 1;
  if (i > 0) {
    // s may be reached inside segment (x_{i-1}, x_i) before the breakpoint.
    const double fLeft = fRight_[i - 1] + slope_[i - 1] * (x_[i] - x_[i - 1]);
    if (fLeft >= s && slope_[i - 1] > 0.0) {
      const double x = x_[i - 1] + (s - fRight_[i - 1]) / slope_[i - 1];
      return std::min(x, x_[i]);
    }
  }
  return x_[i];
}

double w1_cdf(const PiecewiseCdf& f0, const PiecewiseCdf& f1) {
  // Merge breakpoints; F0 - F1 is affine on each open interval.  Evaluate
  // at the left endpoint (right limit) and at the midpoint to recover the
  // affine segment without touching jump ambiguities.
  std::vector<double> xs(f0.breakpoints().data(),
                         f0.breakpoints().data() + f0.breakpoints().size());
  xs.insert(xs.end(), f1.breakpoints().data(),
            f1.breakpoints().data() + f1.breakpoints().size());
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  double total = 0.0;
  for (size_t i = 0; i + 1 < xs.size(); ++i) {
    const double u = xs[i], v = xs[i + 1];
    const double L = v - u;
    if (L <= 0.0) continue;
    const double mid = 0.5 * (u + v);
    const double dA = f0(u) - f1(u);
    const double dM = f0(mid) - f1(mid);
    const double dB = dA + 2.0 * (dM - dA);
    total += absPowSegment(dA, dB, L, 1.0);
  }
  return total;
}

double w1_cdf(const DiscreteMeasure& mu, const DiscreteMeasure& nu) {
  return w1_cdf(PiecewiseCdf::from(mu), PiecewiseCdf::from(nu));
}
double w1_cdf(const GridDensity& mu, const GridDensity& nu) {
  return w1_cdf(PiecewiseCdf::from(mu), PiecewiseCdf::from(nu));
}
double w1_cdf(const DiscreteMeasure& mu, const GridDensity& nu) {
  return w1_cdf(PiecewiseCdf::from(mu), PiecewiseCdf::from(nu));
}

namespace {

/// Mass coordinates where a quantile function can change slope or jump:
/// the CDF value on each side of every breakpoint.
std::vector<double> massBreakpoints(const PiecewiseCdf& f) {
  std::vector<double> s{0.0, 1.0};
  const Index n = f.breakpoints().size();
  for (Index i = 0; i < n; ++i) {
    s.push_back(f.valueRight()[i]);
    if (i + 1 < n)
      s.push_back(f.valueRight()[i] +
                  f.slope()[i] * (f.breakpoints()[i + 1] - f.breakpoints()[i]));
  }
  return s;
}

}  // namespace

double wp_quantile(const PiecewiseCdf& f0, const PiecewiseCdf& f1, double p) {
  if (!(p >= 1.0) || !std::isfinite(p))
    throw UnsupportedError("wp_quantile: exponent must satisfy p >= 1");
  std::vector<double> s = massBreakpoints(f0);
  const std::vector<double> s1 = massBreakpoints(f1);
  s.insert(s.end(), s1.begin(), s1.end());
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  double cost = 0.0;
  for (size_t i = 0; i + 1 < s.size(); ++i) {
    const double a = s[i], b = s[i + 1];
    const double L = b - a;
    if (L <= 0.0) continue;
    // Q0 - Q1 is affine on the open interval (a, b); sample two interior
    // points and extrapolate to the endpoints, which sidesteps the jump
    // ambiguity of Q at the breakpoints themselves.
    const double u1 = a + L / 3.0, u2 = a + 2.0 * L / 3.0;
    const double d1 = f0.quantile(u1) - f1.quantile(u1);
    const double d2 = f0.quantile(u2) - f1.quantile(u2);
    const double da = d1 - (d2 - d1);
    const double db = d2 + (d2 - d1);
    cost += absPowSegment(da, db, L, p);
  }
  return std::pow(cost, 1.0 / p);
}

double wp_quantile(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                   double p) {
  return wp_quantile(PiecewiseCdf::from(mu), PiecewiseCdf::from(nu), p);
}
double wp_quantile(const GridDensity& mu, const GridDensity& nu, double p) {
  return wp_quantile(PiecewiseCdf::from(mu), PiecewiseCdf::from(nu), p);
}
double wp_quantile(const DiscreteMeasure& mu, const GridDensity& nu,
                   double p) {
  return wp_quantile(PiecewiseCdf::from(mu), PiecewiseCdf::from(nu), p);
}

IntervalAssignment semidiscrete_1d(const DiscreteMeasure& mu,
                                   const GridDensity& rho) {
  require1d(mu.dim(), "semidiscrete_1d");
  require1d(rho.dim(), "semidiscrete_1d");
  const PiecewiseCdf f = PiecewiseCdf::from(rho);
  // Atoms are already in increasing position order (canonical measure), so
  // the monotone optimal map hands atom i the slab between consecutive
  // cumulative-weight quantiles of the target; no interval leapfrogs.
  IntervalAssignment out;
  double acc = 0.0;
  for (Index i = 0; i < mu.size(); ++i) {
    IntervalAssignment::Piece piece;
    piece.sourceIndex = i;
    piece.b = f.quantile(acc);
    acc = std::min(acc + mu.weights()[i], 1.0);
    piece.c = f.quantile(acc);
    piece.mass = mu.weights()[i];
    out.pieces.push_back(piece);
  }
  return out;
}

}  // namespace ot

#include "ot/semidiscrete.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ot/error.hpp"

namespace ot {

double Rect::diagonal() const { return std::hypot(width(), height()); }

namespace {

using Vec2 = Eigen::Vector2d;

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double polygon_area(const std::vector<Vec2>& v) {
  double s = 0.0;
  for (size_t k = 0; k < v.size(); ++k)
    s += cross2(v[k], v[(k + 1) % v.size()]);
  return 0.5 * s;
}

struct TaggedPolygon {
  std::vector<Vec2> v;
  std::vector<int> tag;  // tag[e]: id of the line carrying edge v[e]->v[e+1]
};

// One Sutherland–Hodgman pass against the half-plane n·y <= rhs (n unit
// length).  Edges newly created along the clip line receive tag lineId.
void clip_halfplane(TaggedPolygon& poly, const Vec2& n, double rhs,
                    int lineId, double tol) {
  const size_t count = poly.v.size();
  if (count == 0) return;
  std::vector<Vec2> outV;
  std::vector<int> entering;  // tag of the edge through which we enter v
  outV.reserve(count + 2);
  entering.reserve(count + 2);
  for (size_t e = 0; e < count; ++e) {
    const Vec2& a = poly.v[e];
    const Vec2& b = poly.v[(e + 1) % count];
    const int t = poly.tag[e];
    const double sa = n.dot(a) - rhs;
    const double sb = n.dot(b) - rhs;
    const bool aIn = sa <= tol;
    const bool bIn = sb <= tol;
    if (aIn && bIn) {
      outV.push_back(b);
      entering.push_back(t);
    } else if (aIn && !bIn) {
      const double u = std::clamp(sa / (sa - sb), 0.0, 1.0);
      outV.push_back(a + u * (b - a));
      entering.push_back(t);
    } else if (!aIn && bIn) {
      const double u = std::clamp(sa / (sa - sb), 0.0, 1.0);
      outV.push_back(a + u * (b - a));
      entering.push_back(lineId);
      outV.push_back(b);
      entering.push_back(t);
    }
  }
  const size_t m = outV.size();
  poly.v = std::move(outV);
  poly.tag.assign(m, 0);
  for (size_t e = 0; e < m; ++e) poly.tag[e] = entering[(e + 1) % m];
}

// Merge coincident consecutive vertices; a polygon collapsing below three
// vertices becomes empty.
void dedupe_polygon(TaggedPolygon& poly, double tol) {
  std::vector<Vec2> v2;
  std::vector<int> t2;
  for (size_t k = 0; k < poly.v.size(); ++k) {
    if (!v2.empty() && (poly.v[k] - v2.back()).norm() <= tol) {
      t2.back() = poly.tag[k];  // zero-length edge: keep the continuation
      continue;
    }
    v2.push_back(poly.v[k]);
    t2.push_back(poly.tag[k]);
  }
  while (v2.size() >= 2 && (v2.back() - v2.front()).norm() <= tol) {
    v2.pop_back();
    t2.pop_back();
  }
  if (v2.size() < 3) {
    v2.clear();
    t2.clear();
  }
  poly.v = std::move(v2);
  poly.tag = std::move(t2);
}

// Untagged half-plane clip used for integration pieces.
void clip_plain(std::vector<Vec2>& poly, const Vec2& n, double rhs) {
  if (poly.empty()) return;
  std::vector<Vec2> out;
  out.reserve(poly.size() + 2);
  for (size_t e = 0; e < poly.size(); ++e) {
    const Vec2& a = poly[e];
    const Vec2& b = poly[(e + 1) % poly.size()];
    const double sa = n.dot(a) - rhs;
    const double sb = n.dot(b) - rhs;
    const bool aIn = sa <= 0.0;
    const bool bIn = sb <= 0.0;
    if (aIn && bIn) {
      out.push_back(b);
    } else if (aIn != bIn) {
      const double u = std::clamp(sa / (sa - sb), 0.0, 1.0);
      out.push_back(a + u * (b - a));
      if (bIn) out.push_back(b);
    }
  }
  poly = std::move(out);
}

// Exact integral of a quadratic integrand over a convex CCW polygon:
// triangle fan with edge-midpoint quadrature (degree-2 exact).
template <typename Q>
double polygon_quadratic_integral(const std::vector<Vec2>& v, Q&& q) {
  double total = 0.0;
  for (size_t t = 1; t + 1 < v.size(); ++t) {
    const Vec2& p0 = v[0];
    const Vec2& p1 = v[t];
    const Vec2& p2 = v[t + 1];
    const double area = 0.5 * cross2(p1 - p0, p2 - p0);
    if (area == 0.0) continue;
    total += area / 3.0 *
             (q(0.5 * (p0 + p1)) + q(0.5 * (p1 + p2)) + q(0.5 * (p2 + p0)));
  }
  return total;
}

void check_density_domain(const GridDensity& rho, const Rect& domain,
                          const char* what) {
  if (rho.dim() != 2)
    throw UnsupportedError(std::string(what) + ": density must be 2D");
  const double tol = 1e-9 * (1.0 + domain.diagonal());
  if (std::abs(domain.x0) > tol || std::abs(domain.y0) > tol ||
      std::abs(domain.x1 - rho.extent()[0]) > tol ||
      std::abs(domain.y1 - rho.extent()[1]) > tol)
    throw InvalidInputError(std::string(what) +
                            ": density box does not match the diagram domain");
}

// Visit every (piece, density value) of a cell polygon intersected with
// the grid cells covered by its bounding box.
template <typename F>
void for_each_piece(const std::vector<Vec2>& poly, const GridDensity& rho,
                    F&& f) {
  if (poly.size() < 3) return;
  const Index m0 = rho.shape()[0];
  const Index m1 = rho.shape()[1];
  const double h0 = rho.spacing(0);
  const double h1 = rho.spacing(1);
  double minX = poly[0].x(), maxX = poly[0].x();
  double minY = poly[0].y(), maxY = poly[0].y();
  for (const Vec2& p : poly) {
    minX = std::min(minX, p.x());
    maxX = std::max(maxX, p.x());
    minY = std::min(minY, p.y());
    maxY = std::max(maxY, p.y());
  }
  const Index ix0 = std::clamp<Index>(
      static_cast<Index>(std::floor(minX / h0)), 0, m0 - 1);
  const Index ix1 = std::clamp<Index>(
      static_cast<Index>(std::floor(maxX / h0)), 0, m0 - 1);
  const Index iy0 = std::clamp<Index>(
      static_cast<Index>(std::floor(minY / h1)), 0, m1 - 1);
  const Index iy1 = std::clamp<Index>(
      static_cast<Index>(std::floor(maxY / h1)), 0, m1 - 1);
  std::vector<Vec2> piece;
  for (Index iy = iy0; iy <= iy1; ++iy) {
    for (Index ix = ix0; ix <= ix1; ++ix) {
      const double value = rho.values()[ix + m0 * iy];
      if (value == 0.0) continue;
      piece = poly;
      clip_plain(piece, Vec2(1.0, 0.0), static_cast<double>(ix + 1) * h0);
      clip_plain(piece, Vec2(-1.0, 0.0), -static_cast<double>(ix) * h0);
      clip_plain(piece, Vec2(0.0, 1.0), static_cast<double>(iy + 1) * h1);
      clip_plain(piece, Vec2(0.0, -1.0), -static_cast<double>(iy) * h1);
      if (piece.size() < 3) continue;
      f(piece, value);
    }
  }
}

// Integral of the piecewise-constant density along a segment.
double density_line_integral(const Vec2& a, const Vec2& b,
                             const GridDensity& rho) {
  const double len = (b - a).norm();
  if (len == 0.0) return 0.0;
  const Index m0 = rho.shape()[0];
  const Index m1 = rho.shape()[1];
  const double h0 = rho.spacing(0);
  const double h1 = rho.spacing(1);
  std::vector<double> ts = {0.0, 1.0};
  const auto crossings = [&ts](double pa, double pb, double h) {
    const double lo = std::min(pa, pb);
    const double hi = std::max(pa, pb);
    if (pb == pa) return;
    for (Index g = static_cast<Index>(std::ceil(lo / h));
         static_cast<double>(g) * h < hi; ++g) {
      const double t = (static_cast<double>(g) * h - pa) / (pb - pa);
      if (t > 0.0 && t < 1.0) ts.push_back(t);
    }
  };
  crossings(a.x(), b.x(), h0);
  crossings(a.y(), b.y(), h1);
  std::sort(ts.begin(), ts.end());
  double total = 0.0;
  for (size_t k = 0; k + 1 < ts.size(); ++k) {
    const double dt = ts[k + 1] - ts[k];
    if (dt <= 0.0) continue;
    const Vec2 mid = a + (0.5 * (ts[k] + ts[k + 1])) * (b - a);
    const Index ix = std::clamp<Index>(
        static_cast<Index>(std::floor(mid.x() / h0)), 0, m0 - 1);
    const Index iy = std::clamp<Index>(
        static_cast<Index>(std::floor(mid.y() / h1)), 0, m1 - 1);
    total += rho.values()[ix + m0 * iy] * dt * len;
  }
  return total;
}

// Negated Hessian of the dual objective (positive semidefinite), built
// from density line integrals over the shared bisector edges.
Matrix negated_hessian(const PowerDiagram& dia, const GridDensity& rho) {
  const Index k = dia.siteCount();
  Matrix h = Matrix::Zero(k, k);
  for (Index i = 0; i < k; ++i) {
    for (const PowerDiagram::BisectorEdge& e :
         dia.bisectorEdges[static_cast<size_t>(i)]) {
      if (e.neighbor <= i) continue;  // each pair once
      const double lineMass = density_line_integral(e.a, e.b, rho);
      if (lineMass <= 0.0) continue;
      const double dist =
          (dia.sites.row(i) - dia.sites.row(e.neighbor)).norm();
      const double val = lineMass / dist;
      h(i, e.neighbor) -= val;
      h(e.neighbor, i) -= val;
      h(i, i) += val;
      h(e.neighbor, e.neighbor) += val;
    }
  }
  return h;
}

struct Evaluation {
  PowerDiagram diagram;
  Vector masses;
  double value = 0.0;
};

Evaluation evaluate_dual(const Matrix& sites, const Vector& a,
                         const Vector& phi, const GridDensity& rho) {
  Rect domain;
  domain.x1 = rho.extent()[0];
  domain.y1 = rho.extent()[1];
  Evaluation ev;
  ev.diagram = build_power_diagram(sites, phi, domain);
  const Index k = sites.rows();
  ev.masses = Vector::Zero(k);
  double value = 0.0;
  for (Index i = 0; i < k; ++i) {
    const Vec2 xi = sites.row(i).transpose();
    double mass = 0.0;
    double costIntegral = 0.0;
    for_each_piece(ev.diagram.cells[static_cast<size_t>(i)], rho,
                   [&](const std::vector<Vec2>& piece, double rhoValue) {
                     mass += rhoValue * polygon_area(piece);
                     costIntegral +=
                         rhoValue *
                         polygon_quadratic_integral(piece, [&](const Vec2& y) {
                           return 0.5 * (y - xi).squaredNorm();
                         });
                   });
    ev.masses[i] = mass;
    value += a[i] * phi[i] + costIntegral - phi[i] * mass;
  }
  ev.value = value;
  return ev;
}

double sample_unit(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

}  // namespace

PowerDiagram build_power_diagram(const Matrix& sites, const Vector& phi,
                                 const Rect& domain) {
  const Index k = sites.rows();
  if (k < 1) throw InvalidInputError("build_power_diagram: no sites");
  if (sites.cols() != 2)
    throw DimensionError("build_power_diagram: sites must be k x 2");
  if (phi.size() != k)
    throw DimensionError("build_power_diagram: phi size mismatch");
  detail::require_finite(sites, "build_power_diagram sites");
  detail::require_finite(phi, "build_power_diagram phi");
  if (!(domain.x1 > domain.x0) || !(domain.y1 > domain.y0))
    throw InvalidInputError("build_power_diagram: empty domain rectangle");

  const double diag = domain.diagonal();
  const double tolDup = 1e-15 * (1.0 + diag);
  {
    std::vector<Index> order(static_cast<size_t>(k));
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
      if (sites(a, 0) != sites(b, 0)) return sites(a, 0) < sites(b, 0);
      return sites(a, 1) < sites(b, 1);
    });
    for (size_t t = 0; t + 1 < order.size(); ++t)
      if ((sites.row(order[t]) - sites.row(order[t + 1])).norm() <= tolDup)
        throw InvalidInputError("build_power_diagram: duplicate sites");
  }

  PowerDiagram dia;
  dia.sites = sites;
  dia.phi = phi;
  dia.domain = domain;
  dia.cells.resize(static_cast<size_t>(k));
  dia.neighbors.resize(static_cast<size_t>(k));
  dia.bisectorEdges.resize(static_cast<size_t>(k));

  const double tolGeom = 1e-12 * (1.0 + diag);
  for (Index i = 0; i < k; ++i) {
    TaggedPolygon poly;
    poly.v = {Vec2(domain.x0, domain.y0), Vec2(domain.x1, domain.y0),
              Vec2(domain.x1, domain.y1), Vec2(domain.x0, domain.y1)};
    poly.tag = {-1, -2, -3, -4};
    const Vec2 xi = sites.row(i).transpose();
    for (Index j = 0; j < k && !poly.v.empty(); ++j) {
      if (j == i) continue;
      const Vec2 xj = sites.row(j).transpose();
      const Vec2 dir = xj - xi;
      const double len = dir.norm();
      const Vec2 n = dir / len;
      const double rhs =
          (0.5 * (xj.squaredNorm() - xi.squaredNorm()) + phi[i] - phi[j]) /
          len;
      clip_halfplane(poly, n, rhs, static_cast<int>(j), tolGeom);
    }
    dedupe_polygon(poly, tolGeom);
    if (!poly.v.empty() && polygon_area(poly.v) <= 0.0) {
      poly.v.clear();
      poly.tag.clear();
    }
    auto& nbrs = dia.neighbors[static_cast<size_t>(i)];
    auto& edges = dia.bisectorEdges[static_cast<size_t>(i)];
    for (size_t e = 0; e < poly.v.size(); ++e) {
      if (poly.tag[e] < 0) continue;
      const Index j = static_cast<Index>(poly.tag[e]);
      edges.push_back(
          {j, poly.v[e], poly.v[(e + 1) % poly.v.size()]});
      nbrs.push_back(j);
    }
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
    dia.cells[static_cast<size_t>(i)] = std::move(poly.v);
  }
  return dia;
}

Vector cell_masses(const PowerDiagram& diagram, const GridDensity& rho) {
  check_density_domain(rho, diagram.domain, "cell_masses");
  const Index k = diagram.siteCount();
  Vector masses = Vector::Zero(k);
  for (Index i = 0; i < k; ++i) {
    double mass = 0.0;
    for_each_piece(diagram.cells[static_cast<size_t>(i)], rho,
                   [&](const std::vector<Vec2>& piece, double value) {
                     mass += value * polygon_area(piece);
                   });
    masses[i] = std::max(mass, 0.0);
  }
  return masses;
}

SemidiscreteObjective objective_and_gradient(const Matrix& sites,
                                             const Vector& a,
                                             const Vector& phi,
                                             const GridDensity& rho) {
  if (a.size() != sites.rows())
    throw DimensionError("objective_and_gradient: weight count mismatch");
  if ((a.array() < 0.0).any() || std::abs(a.sum() - 1.0) > 1e-9)
    throw InvalidInputError(
        "objective_and_gradient: target weights must lie on the simplex");
  if (rho.dim() != 2)
    throw UnsupportedError("objective_and_gradient: density must be 2D");
  Evaluation ev = evaluate_dual(sites, a, phi, rho);
  SemidiscreteObjective out;
  out.value = ev.value;
  out.gradient = a - ev.masses;
  return out;
}

SemidiscreteResult solve_semidiscrete(const Matrix& sites, const Vector& a,
                                      const GridDensity& rho,
                                      const SemidiscreteOptions& opt) {
  if (a.size() != sites.rows())
    throw DimensionError("solve_semidiscrete: weight count mismatch");
  if ((a.array() <= 0.0).any())
    throw InvalidInputError(
        "solve_semidiscrete: target weights must be strictly positive");
  if (std::abs(a.sum() - 1.0) > 1e-9)
    throw InvalidInputError(
        "solve_semidiscrete: target weights must sum to one");
  if (rho.dim() != 2)
    throw UnsupportedError("solve_semidiscrete: density must be 2D");
  if (!(opt.tol > 0.0) || opt.maxIter < 1)
    throw InvalidInputError("solve_semidiscrete: bad options");

  const Index k = sites.rows();
  Vector phi = Vector::Zero(k);
  Evaluation ev = evaluate_dual(sites, a, phi, rho);
  double ascentStep = 1.0;

  SemidiscreteResult res;
  res.usedFallback = false;
  int it = 0;
  while (it < opt.maxIter) {
    ++it;
    const Vector grad = a - ev.masses;
    res.gradientNorm = grad.cwiseAbs().maxCoeff();
    if (res.gradientNorm <= opt.tol) {
      res.converged = true;
      break;
    }

    bool stepped = false;
    if (opt.method == SemidiscreteMethod::newton &&
        (ev.masses.array() > 0.0).all()) {
      Matrix sys = negated_hessian(ev.diagram, rho);
      sys(0, 0) += 1.0;  // ground the constant gauge direction
      Eigen::LDLT<Matrix> ldlt(sys);
      if (ldlt.info() == Eigen::Success) {
        const Vector delta = ldlt.solve(grad);
        if (delta.allFinite()) {
          double s = 1.0;
          for (int half = 0; half < 40; ++half) {
            Evaluation trial = evaluate_dual(sites, a, phi + s * delta, rho);
            if ((trial.masses.array() > 0.0).all() &&
                trial.value >= ev.value) {
              phi += s * delta;
              ev = std::move(trial);
              stepped = true;
              break;
            }
            s *= 0.5;
          }
        }
      }
    }

    if (!stepped) {
      if (opt.method == SemidiscreteMethod::newton) res.usedFallback = true;
      const double gradSq = grad.squaredNorm();
      double s = ascentStep;
      for (int half = 0; half < 60; ++half) {
        Evaluation trial = evaluate_dual(sites, a, phi + s * grad, rho);
        if (trial.value >= ev.value + 1e-4 * s * gradSq) {
          phi += s * grad;
          ev = std::move(trial);
          ascentStep = 2.0 * s;
          stepped = true;
          break;
        }
        s *= 0.5;
      }
      if (!stepped) break;  // no progress possible at machine precision
    }
  }

  res.iterations = it;
  res.phi = phi;
  res.masses = ev.masses;
  res.w2sq = 2.0 * ev.value;
  res.diagram = std::move(ev.diagram);
  if (!res.converged)
    res.gradientNorm = (a - res.masses).cwiseAbs().maxCoeff();
  return res;
}

StippleResult lloyd_stipple(const GridDensity& rho, Index n, int outerIters,
                            double innerTol, std::uint64_t seed) {
  if (rho.dim() != 2)
    throw UnsupportedError("lloyd_stipple: density must be 2D");
  if (n < 1) throw InvalidInputError("lloyd_stipple: need at least one point");
  if (outerIters < 1 || innerTol < 0.0)
    throw InvalidInputError("lloyd_stipple: bad options");

  const Index m0 = rho.shape()[0];
  const double h0 = rho.spacing(0);
  const double h1 = rho.spacing(1);

  // Density-proportional initial sites: pick a cell by cumulative mass,
  // then a uniform position inside it.
  std::mt19937_64 gen(seed);
  std::vector<double> cum(static_cast<size_t>(rho.cellCount()));
  double acc = 0.0;
  for (Index c = 0; c < rho.cellCount(); ++c) {
    acc += rho.values()[c];
    cum[static_cast<size_t>(c)] = acc;
  }
  Matrix sites(n, 2);
  for (Index i = 0; i < n; ++i) {
    const double u = sample_unit(gen) * acc;
    const auto itCell = std::lower_bound(cum.begin(), cum.end(), u);
    const Index c = std::min<Index>(
        static_cast<Index>(itCell - cum.begin()), rho.cellCount() - 1);
    const Index ix = c % m0;
    const Index iy = c / m0;
    sites(i, 0) = (static_cast<double>(ix) + sample_unit(gen)) * h0;
    sites(i, 1) = (static_cast<double>(iy) + sample_unit(gen)) * h1;
  }

  const Vector a = Vector::Constant(n, 1.0 / static_cast<double>(n));
  SemidiscreteOptions solveOpt;
  solveOpt.tol = 1e-7;

  std::vector<double> history;
  int outerDone = 0;
  double lastMove = 0.0;
  for (int outer = 0; outer < outerIters; ++outer) {
    SemidiscreteResult sol = solve_semidiscrete(sites, a, rho, solveOpt);
    history.push_back(sol.w2sq);
    outerDone = outer + 1;

    double maxMove = 0.0;
    for (Index i = 0; i < n; ++i) {
      double mass = 0.0;
      Vec2 first = Vec2::Zero();
      for_each_piece(sol.diagram.cells[static_cast<size_t>(i)], rho,
                     [&](const std::vector<Vec2>& piece, double value) {
                       mass += value * polygon_area(piece);
                       first.x() += value * polygon_quadratic_integral(
                                        piece, [](const Vec2& y) {
                                          return y.x();
                                        });
                       first.y() += value * polygon_quadratic_integral(
                                        piece, [](const Vec2& y) {
                                          return y.y();
                                        });
                     });
      if (mass <= 0.0) continue;
      const Vec2 centroid = first / mass;
      maxMove = std::max(maxMove,
                         (centroid - sites.row(i).transpose()).norm());
      sites.row(i) = centroid.transpose();
    }
    lastMove = maxMove;
    if (maxMove <= innerTol) break;
  }

  return StippleResult{DiscreteMeasure(sites, a), std::move(history),
                       outerDone, lastMove};
}

}  // namespace ot

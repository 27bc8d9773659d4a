#include "ot/measures.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <queue>
#include <set>

#include "ot/error.hpp"

namespace ot {

namespace detail {

void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite())
    throw InvalidInputError(std::string(what) + ": non-finite entry");
}

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite())
    throw InvalidInputError(std::string(what) + ": non-finite entry");
}

}  // namespace detail

Vector normalize_weights(Vector w) {
  detail::require_finite(w, "weights");
  if ((w.array() < 0.0).any())
    throw InvalidInputError("weights: negative entry");
  const double total = w.sum();
  if (!(total > 0.0)) throw ZeroMassError("weights: total mass is zero");
  return w / total;
}

DiscreteMeasure::DiscreteMeasure(Matrix points, Vector weights) {
  if (points.rows() == 0) throw InvalidInputError("measure: no atoms");
  if (points.rows() != weights.size())
    throw DimensionError("measure: point/weight count mismatch");
  if (points.cols() < 1 || points.cols() > 3)
    throw UnsupportedError("measure: dimension must be 1, 2 or 3");
  detail::require_finite(points, "points");
  weights = normalize_weights(std::move(weights));

  // Merge exactly coincident atoms; order by lexicographic position so the
  // representation is canonical.
  const Index k = points.rows();
  const Index d = points.cols();
  std::vector<Index> order(static_cast<size_t>(k));
  std::iota(order.begin(), order.end(), Index{0});
  auto lexLess = [&](Index a, Index b) {
    for (Index c = 0; c < d; ++c) {
      if (points(a, c) != points(b, c)) return points(a, c) < points(b, c);
    }
    return false;
  };
  std::sort(order.begin(), order.end(), lexLess);

  std::vector<Eigen::RowVectorXd> mergedPts;
  std::vector<double> mergedW;
  for (Index r : order) {
    if (!mergedPts.empty() && mergedPts.back() == points.row(r)) {
      mergedW.back() += weights[r];
    } else {
      mergedPts.push_back(points.row(r));
      mergedW.push_back(weights[r]);
    }
  }
  points_.resize(static_cast<Index>(mergedPts.size()), d);
  weights_.resize(static_cast<Index>(mergedW.size()));
  for (size_t r = 0; r < mergedPts.size(); ++r) {
    points_.row(static_cast<Index>(r)) = mergedPts[r];
    weights_[static_cast<Index>(r)] = mergedW[r];
  }
}

GridDensity::GridDensity(std::vector<Index> shape, Vector values,
                         std::vector<double> extent)
    : shape_(std::move(shape)), extent_(std::move(extent)) {
  if (shape_.empty() || shape_.size() > 2)
    throw UnsupportedError("grid: dimension must be 1 or 2");
  Index cells = 1;
  for (Index m : shape_) {
    if (m < 2) throw InvalidInputError("grid: each axis needs >= 2 cells");
    cells *= m;
  }
  if (extent_.empty()) extent_.assign(shape_.size(), 1.0);
  if (extent_.size() != shape_.size())
    throw DimensionError("grid: extent/shape rank mismatch");
  for (double e : extent_) {
    if (!(e > 0.0) || !std::isfinite(e))
      throw InvalidInputError("grid: extent must be positive");
  }
  if (values.size() != cells)
    throw DimensionError("grid: value count does not match shape");
  detail::require_finite(values, "grid values");
  if ((values.array() < 0.0).any())
    throw InvalidInputError("grid values: negative entry");
  values_ = std::move(values);
  const double total = values_.sum() * cellVolume();
  if (!(total > 0.0)) throw ZeroMassError("grid: total mass is zero");
  values_ /= total;
}

double GridDensity::cellVolume() const {
  double v = 1.0;
  for (size_t a = 0; a < shape_.size(); ++a)
    v *= extent_[a] / static_cast<double>(shape_[a]);
  return v;
}

Eigen::RowVectorXd GridDensity::center(Index i) const {
  Eigen::RowVectorXd x(dim());
  Index rest = i;
  for (size_t a = 0; a < shape_.size(); ++a) {
    const Index ia = rest % shape_[a];
    rest /= shape_[a];
    x[static_cast<Index>(a)] =
        (static_cast<double>(ia) + 0.5) * spacing(static_cast<Index>(a));
  }
  return x;
}

namespace {

Vector lumpedVertexAreas(const Matrix& vertices,
                         const Eigen::MatrixX3i& triangles) {
  Vector area = Vector::Zero(vertices.rows());
  for (Index f = 0; f < triangles.rows(); ++f) {
    const Index a = triangles(f, 0), b = triangles(f, 1), c = triangles(f, 2);
    const Eigen::Vector3d e1 = vertices.row(b) - vertices.row(a);
    const Eigen::Vector3d e2 = vertices.row(c) - vertices.row(a);
    const double tA = 0.5 * e1.cross(e2).norm();
    if (!(tA > 0.0)) throw GeometryError("mesh: degenerate triangle");
    for (int v = 0; v < 3; ++v) area[triangles(f, v)] += tA / 3.0;
  }
  return area;
}

void requireManifoldConnected(Index nV, const Eigen::MatrixX3i& triangles) {
  std::map<std::pair<Index, Index>, int> edgeUse;
  std::vector<std::vector<Index>> adj(static_cast<size_t>(nV));
  for (Index f = 0; f < triangles.rows(); ++f) {
    for (int e = 0; e < 3; ++e) {
      Index u = triangles(f, e), v = triangles(f, (e + 1) % 3);
      if (u == v || u < 0 || v < 0 || u >= nV || v >= nV)
        throw InvalidInputError("mesh: bad triangle index");
      if (u > v) std::swap(u, v);
      if (++edgeUse[{u, v}] > 2)
        throw GeometryError("mesh: edge shared by more than two triangles");
      adj[static_cast<size_t>(u)].push_back(v);
      adj[static_cast<size_t>(v)].push_back(u);
    }
  }
  std::vector<char> seen(static_cast<size_t>(nV), 0);
  std::queue<Index> bfs;
  bfs.push(0);
  seen[0] = 1;
  Index reached = 1;
  while (!bfs.empty()) {
    const Index u = bfs.front();
    bfs.pop();
    for (Index v : adj[static_cast<size_t>(u)]) {
      if (!seen[static_cast<size_t>(v)]) {
        seen[static_cast<size_t>(v)] = 1;
        ++reached;
        bfs.push(v);
      }
    }
  }
  if (reached != nV)
    throw GeometryError("mesh: not a single connected component");
}

}  // namespace

MeshDensity::MeshDensity(Matrix vertices, Eigen::MatrixX3i triangles,
                         Vector density)
    : vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
  if (vertices_.cols() != 3)
    throw DimensionError("mesh: vertices must be 3D");
  if (vertices_.rows() < 3 || triangles_.rows() < 1)
    throw InvalidInputError("mesh: too small");
  detail::require_finite(vertices_, "mesh vertices");
  if (density.size() != vertices_.rows())
    throw DimensionError("mesh: density/vertex count mismatch");
  detail::require_finite(density, "mesh density");
  if ((density.array() < 0.0).any())
    throw InvalidInputError("mesh density: negative entry");

  requireManifoldConnected(vertices_.rows(), triangles_);
  vertexArea_ = lumpedVertexAreas(vertices_, triangles_);
  if ((vertexArea_.array() <= 0.0).any())
    throw GeometryError("mesh: vertex with no incident triangle");

  const double total = (density.array() * vertexArea_.array()).sum();
  if (!(total > 0.0)) throw ZeroMassError("mesh: total mass is zero");
  density_ = density / total;
}

double MeshDensity::diameter() const {
  double d2 = 0.0;
  for (Index i = 0; i < vertices_.rows(); ++i)
    for (Index j = i + 1; j < vertices_.rows(); ++j)
      d2 = std::max(d2, (vertices_.row(i) - vertices_.row(j)).squaredNorm());
  return std::sqrt(d2);
}

Matrix TransportPlan::dense() const {
  Matrix t = Matrix::Zero(rows, cols);
  for (const Entry& e : entries) t(e.i, e.j) += e.mass;
  return t;
}

Vector TransportPlan::computeRowMarginal() const {
  Vector v = Vector::Zero(rows);
  for (const Entry& e : entries) v[e.i] += e.mass;
  return v;
}

Vector TransportPlan::computeColMarginal() const {
  Vector w = Vector::Zero(cols);
  for (const Entry& e : entries) w[e.j] += e.mass;
  return w;
}

double TransportPlan::costAgainst(const CostMatrix& c) const {
  if (c.rows() != rows || c.cols() != cols)
    throw DimensionError("plan/cost shape mismatch");
  double s = 0.0;
  for (const Entry& e : entries) s += e.mass * c.c(e.i, e.j);
  return s;
}

CostMatrix build_cost_matrix(const Matrix& x, const Matrix& y, double p) {
  if (x.cols() != y.cols())
    throw DimensionError("cost: point sets of different dimension");
  if (!(p > 0.0) || !std::isfinite(p))
    throw UnsupportedError("cost: exponent must be positive");
  CostMatrix out;
  out.exponent = p;
  out.c.resize(x.rows(), y.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < y.rows(); ++j) {
      const double d = (x.row(i) - y.row(j)).norm();
      out.c(i, j) = (p == 2.0) ? d * d : (p == 1.0 ? d : std::pow(d, p));
    }
  }
  return out;
}

CostMatrix build_cost_matrix(const DiscreteMeasure& mu,
                             const DiscreteMeasure& nu, double p) {
  return build_cost_matrix(mu.points(), nu.points(), p);
}

DiscreteMeasure normalize(const DiscreteMeasure& mu) {
  return DiscreteMeasure(mu.points(), mu.weights());
}

GridDensity normalize(const GridDensity& rho) {
  return GridDensity(rho.shape(), rho.values(), rho.extent());
}

DiscreteMeasure grid_to_discrete(const GridDensity& rho) {
  const double vol = rho.cellVolume();
  std::vector<Index> keep;
  for (Index i = 0; i < rho.cellCount(); ++i)
    if (rho.values()[i] > 0.0) keep.push_back(i);
  if (keep.empty()) throw ZeroMassError("grid: no positive cells");
  Matrix pts(static_cast<Index>(keep.size()), rho.dim());
  Vector w(static_cast<Index>(keep.size()));
  for (size_t r = 0; r < keep.size(); ++r) {
    pts.row(static_cast<Index>(r)) = rho.center(keep[r]);
    w[static_cast<Index>(r)] = rho.values()[keep[r]] * vol;
  }
  return DiscreteMeasure(std::move(pts), std::move(w));
}

}  // namespace ot

#pragma once

#include <Eigen/Dense>
#include <vector>

namespace ot {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Weighted point cloud in R^d, d in {1,2,3}.  Normalized to unit mass at
/// construction; coincident points are merged (weights summed).  Immutable
/// after construction.
class DiscreteMeasure {
 public:
  /// points: k x d row-per-atom.  weights: k nonnegative, not all zero.
  DiscreteMeasure(Matrix points, Vector weights);

  Index size() const { return points_.rows(); }
  Index dim() const { return points_.cols(); }
  const Matrix& points() const { return points_; }
  const Vector& weights() const { return weights_; }
  Eigen::RowVectorXd point(Index i) const { return points_.row(i); }

 private:
  Matrix points_;
  Vector weights_;
};

/// Piecewise-constant probability density on a regular grid over a box
/// [0,extent_0] x ... , d in {1,2}.  Cell (i0,i1) has center
/// ((i0+1/2)h0, (i1+1/2)h1) and values are stored with axis 0 fastest:
/// index = i0 + shape[0]*i1.  Normalized to unit mass at construction.
class GridDensity {
 public:
  GridDensity(std::vector<Index> shape, Vector values,
              std::vector<double> extent = {});

  Index dim() const { return static_cast<Index>(shape_.size()); }
  const std::vector<Index>& shape() const { return shape_; }
  const std::vector<double>& extent() const { return extent_; }
  const Vector& values() const { return values_; }
  Index cellCount() const { return values_.size(); }
  double spacing(Index axis) const {
    return extent_[static_cast<size_t>(axis)] /
           static_cast<double>(shape_[static_cast<size_t>(axis)]);
  }
  double cellVolume() const;
  /// Center coordinates of flat cell index i.
  Eigen::RowVectorXd center(Index i) const;
  double totalMass() const { return values_.sum() * cellVolume(); }

 private:
  std::vector<Index> shape_;
  std::vector<double> extent_;
  Vector values_;
};

/// Triangle mesh embedded in R^3 with a per-vertex probability density
/// against the lumped (one-third) vertex area measure.  Single connected
/// component, every vertex referenced, every triangle non-degenerate.
class MeshDensity {
 public:
  MeshDensity(Matrix vertices, Eigen::MatrixX3i triangles, Vector density);

  Index vertexCount() const { return vertices_.rows(); }
  Index triangleCount() const { return triangles_.rows(); }
  const Matrix& vertices() const { return vertices_; }
  const Eigen::MatrixX3i& triangles() const { return triangles_; }
  const Vector& density() const { return density_; }
  const Vector& vertexArea() const { return vertexArea_; }
  double totalArea() const { return vertexArea_.sum(); }
  double diameter() const;  // max pairwise vertex distance

 private:
  Matrix vertices_;
  Eigen::MatrixX3i triangles_;
  Vector density_;
  Vector vertexArea_;
};

/// Pairwise cost c_ij = |x_i - y_j|_2^p between two point clouds.
struct CostMatrix {
  Matrix c;
  double exponent = 2.0;

  Index rows() const { return c.rows(); }
  Index cols() const { return c.cols(); }
};

/// Coupling between two discrete measures, stored as coordinate triples.
/// Marginals and attained cost are recorded by the producing solver.
struct TransportPlan {
  struct Entry {
    Index i;
    Index j;
    double mass;
  };

  Index rows = 0;
  Index cols = 0;
  std::vector<Entry> entries;
  Vector rowMarginal;
  Vector colMarginal;
  double attainedCost = 0.0;

  Matrix dense() const;
  Vector computeRowMarginal() const;
  Vector computeColMarginal() const;
  double costAgainst(const CostMatrix& c) const;
};

/// Dual variables (phi, psi) of the discrete transport problem, one entry
/// per source/target atom.
struct DualPotentials {
  Vector phi;
  Vector psi;
};

/// Densities rho(t_k) along a transport path; times[0] = 0, times back = 1,
/// strictly increasing.
struct InterpolationSequence {
  std::vector<GridDensity> frames;
  std::vector<double> times;
};

/// c_ij = |x_i - y_j|^p.  Throws DimensionError on mismatched point
/// dimensions, UnsupportedError for p <= 0.  The raw overload takes
/// row-per-point matrices in the given order; the measure overload uses
/// the measures' canonical atom order.
CostMatrix build_cost_matrix(const Matrix& x, const Matrix& y, double p);
CostMatrix build_cost_matrix(const DiscreteMeasure& mu,
                             const DiscreteMeasure& nu, double p);

/// Rescale weights to unit total mass.  Throws ZeroMassError if the total
/// is not positive.  These also run inside every measure constructor; the
/// free functions exist for raw data and for re-validation.
Vector normalize_weights(Vector w);
DiscreteMeasure normalize(const DiscreteMeasure& mu);
GridDensity normalize(const GridDensity& rho);

/// Atom at every cell center carrying that cell's mass; zero-mass cells are
/// dropped.
DiscreteMeasure grid_to_discrete(const GridDensity& rho);

namespace detail {
void require_finite(const Vector& v, const char* what);
void require_finite(const Matrix& m, const char* what);
}  // namespace detail

}  // namespace ot

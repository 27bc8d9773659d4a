#include "ot/lp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "ot/error.hpp"

namespace ot {

namespace {

struct BasicCell {
  Index i;
  Index j;
  double mass;
};

/// Bipartite node ids: rows are [0, k1), columns are [k1, k1+k2).
class Basis {
 public:
  Basis(Index k1, Index k2) : k1_(k1), adj_(static_cast<size_t>(k1 + k2)) {}

  Index colNode(Index j) const { return k1_ + j; }

  void add(BasicCell c) {
    const int id = static_cast<int>(cells_.size());
    cells_.push_back(c);
    adj_[static_cast<size_t>(c.i)].push_back(id);
    adj_[static_cast<size_t>(colNode(c.j))].push_back(id);
  }

  void remove(int id) {
    const BasicCell c = cells_[static_cast<size_t>(id)];
    auto drop = [&](Index node) {
      auto& v = adj_[static_cast<size_t>(node)];
      v.erase(std::find(v.begin(), v.end(), id));
    };
    drop(c.i);
    drop(colNode(c.j));
    // Swap-with-last keeps ids dense.
    const int last = static_cast<int>(cells_.size()) - 1;
    if (id != last) {
      cells_[static_cast<size_t>(id)] = cells_[static_cast<size_t>(last)];
      const BasicCell& m = cells_[static_cast<size_t>(id)];
      for (Index node : {m.i, colNode(m.j)}) {
        auto& v = adj_[static_cast<size_t>(node)];
        *std::find(v.begin(), v.end(), last) = id;
      }
    }
    cells_.pop_back();
  }

  std::vector<BasicCell>& cells() { return cells_; }
  const std::vector<BasicCell>& cells() const { return cells_; }
  const std::vector<int>& incident(Index node) const {
    return adj_[static_cast<size_t>(node)];
  }
  Index nodeCount() const { return static_cast<Index>(adj_.size()); }

  Index otherEnd(int cellId, Index node) const {
    const BasicCell& c = cells_[static_cast<size_t>(cellId)];
    return node == c.i ? colNode(c.j) : c.i;
  }

 private:
  Index k1_;
  std::vector<BasicCell> cells_;
  std::vector<std::vector<int>> adj_;
};

void computeDuals(const Basis& basis, const Matrix& c, Index k1, Index k2,
                  Vector& phi, Vector& psi) {
  phi.resize(k1);
  psi.resize(k2);
  std::vector<char> seen(static_cast<size_t>(k1 + k2), 0);
  std::deque<Index> frontier{0};
  phi[0] = 0.0;
  seen[0] = 1;
  while (!frontier.empty()) {
    const Index node = frontier.front();
    frontier.pop_front();
    for (int id : basis.incident(node)) {
      const Index next = basis.otherEnd(id, node);
      if (seen[static_cast<size_t>(next)]) continue;
      seen[static_cast<size_t>(next)] = 1;
      const BasicCell& cell = basis.cells()[static_cast<size_t>(id)];
      if (next >= k1)
        psi[next - k1] = c(cell.i, cell.j) - phi[cell.i];
      else
        phi[next] = c(cell.i, cell.j) - psi[cell.j];
      frontier.push_back(next);
    }
  }
}

/// Tree path from `from` to `to` as a list of cell ids.
std::vector<int> treePath(const Basis& basis, Index from, Index to) {
  const Index n = basis.nodeCount();
  std::vector<int> parentCell(static_cast<size_t>(n), -1);
  std::vector<Index> parentNode(static_cast<size_t>(n), -1);
  std::vector<char> seen(static_cast<size_t>(n), 0);
  std::deque<Index> frontier{from};
  seen[static_cast<size_t>(from)] = 1;
  while (!frontier.empty()) {
    const Index node = frontier.front();
    frontier.pop_front();
    if (node == to) break;
    for (int id : basis.incident(node)) {
      const Index next = basis.otherEnd(id, node);
      if (seen[static_cast<size_t>(next)]) continue;
      seen[static_cast<size_t>(next)] = 1;
      parentCell[static_cast<size_t>(next)] = id;
      parentNode[static_cast<size_t>(next)] = node;
      frontier.push_back(next);
    }
  }
  std::vector<int> path;
  for (Index node = to; node != from;
       node = parentNode[static_cast<size_t>(node)]) {
    path.push_back(parentCell[static_cast<size_t>(node)]);
  }
  return path;  // ordered from `to` back to `from`
}

}  // namespace

LpResult solve_lp(const Vector& vIn, const Vector& wIn,
                  const CostMatrix& cost) {
  const Index k1 = vIn.size(), k2 = wIn.size();
  if (cost.rows() != k1 || cost.cols() != k2)
    throw DimensionError("solve_lp: cost shape does not match marginals");
  if (k1 == 0 || k2 == 0) throw InvalidInputError("solve_lp: empty marginal");
  if (!cost.c.allFinite())
    throw InvalidCostError("solve_lp: non-finite cost entry");
  detail::require_finite(vIn, "solve_lp v");
  detail::require_finite(wIn, "solve_lp w");
  if ((vIn.array() < 0.0).any() || (wIn.array() < 0.0).any())
    throw InvalidInputError("solve_lp: negative marginal entry");

  Vector v = vIn, w = wIn;
  const double imbalance = v.sum() - w.sum();
  if (std::abs(imbalance) > 1e-8)
    throw InfeasibleMarginalsError(
        "solve_lp: marginal sums differ by more than 1e-8");
  // Fold the (tiny) imbalance into the largest entry of the lighter side.
  if (imbalance > 0.0) {
    Index jmax;
    w.maxCoeff(&jmax);
    w[jmax] += imbalance;
  } else if (imbalance < 0.0) {
    Index imax;
    v.maxCoeff(&imax);
    v[imax] -= imbalance;
  }

  // North-west corner start: advance one index per allocation so the basis
  // has exactly k1 + k2 - 1 cells and forms a spanning tree.
  Basis basis(k1, k2);
  {
    Vector a = v, b = w;
    Index i = 0, j = 0;
    while (true) {
      const double theta = std::min(a[i], b[j]);
      basis.add({i, j, theta});
      a[i] -= theta;
      b[j] -= theta;
      if (i == k1 - 1 && j == k2 - 1) break;
      if (a[i] == 0.0 && i < k1 - 1)
        ++i;
      else
        ++j;
    }
  }

  const double costScale = 1.0 + cost.c.cwiseAbs().maxCoeff();
  const double enterTol = 1e-12 * costScale;
  Vector phi, psi;
  int pivots = 0;
  const int pivotCap =
      100000 + 64 * static_cast<int>(k1) * static_cast<int>(k2);

  while (true) {
    computeDuals(basis, cost.c, k1, k2, phi, psi);

    // Bland: first cell in (i, j) order with negative reduced cost.
    Index ei = -1, ej = -1;
    for (Index i = 0; i < k1 && ei < 0; ++i) {
      for (Index j = 0; j < k2; ++j) {
        if (cost.c(i, j) - phi[i] - psi[j] < -enterTol) {
          ei = i;
          ej = j;
          break;
        }
      }
    }
    if (ei < 0) break;  // optimal

    if (++pivots > pivotCap)
      throw StateError("solve_lp: pivot limit exceeded");

    // Unique basis cycle: entering arc plus the tree path from its column
    // node back to its row node.  Walking that path starting at the column,
    // cells alternately give up and receive mass.
    const std::vector<int> path = treePath(basis, ei, basis.colNode(ej));
    double theta = std::numeric_limits<double>::infinity();
    int leaving = -1;
    for (size_t step = 0; step < path.size(); ++step) {
      if (step % 2 != 0) continue;  // only the give-up cells bound theta
      const BasicCell& cell = basis.cells()[static_cast<size_t>(path[step])];
      const bool better =
          cell.mass < theta ||
          (cell.mass == theta &&
           (leaving < 0 ||
            std::make_pair(cell.i, cell.j) <
                std::make_pair(
                    basis.cells()[static_cast<size_t>(leaving)].i,
                    basis.cells()[static_cast<size_t>(leaving)].j)));
      if (better) {
        theta = cell.mass;
        leaving = path[step];
      }
    }
    for (size_t step = 0; step < path.size(); ++step) {
      BasicCell& cell = basis.cells()[static_cast<size_t>(path[step])];
      cell.mass += (step % 2 == 0) ? -theta : theta;
    }
    basis.remove(leaving);
    basis.add({ei, ej, theta});
  }

  computeDuals(basis, cost.c, k1, k2, phi, psi);

  LpResult out;
  out.pivots = pivots;
  out.duals.phi = phi;
  out.duals.psi = psi;
  out.plan.rows = k1;
  out.plan.cols = k2;
  double attained = 0.0;
  for (const BasicCell& cell : basis.cells()) {
    if (cell.mass > 0.0) {
      out.plan.entries.push_back({cell.i, cell.j, cell.mass});
      attained += cell.mass * cost.c(cell.i, cell.j);
    }
  }
  out.plan.rowMarginal = v;
  out.plan.colMarginal = w;
  out.plan.attainedCost = attained;
  return out;
}

LpResult solve_lp(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                  const CostMatrix& cost) {
  return solve_lp(mu.weights(), nu.weights(), cost);
}

OptimalityReport verify_optimality(const TransportPlan& plan,
                                   const DualPotentials& duals,
                                   const CostMatrix& cost, const Vector& v,
                                   const Vector& w, double tol) {
  OptimalityReport rep;
  const Index k1 = v.size(), k2 = w.size();
  if (plan.rows != k1 || plan.cols != k2 || cost.rows() != k1 ||
      cost.cols() != k2 || duals.phi.size() != k1 || duals.psi.size() != k2)
    throw DimensionError("verify_optimality: inconsistent shapes");
  const double scale = 1.0 + cost.c.cwiseAbs().maxCoeff();

  const Vector rowM = plan.computeRowMarginal();
  const Vector colM = plan.computeColMarginal();
  rep.maxMarginalViolation = std::max((rowM - v).cwiseAbs().maxCoeff(),
                                      (colM - w).cwiseAbs().maxCoeff());
  if (rep.maxMarginalViolation > tol)
    rep.violations.push_back("primal marginal violation " +
                             std::to_string(rep.maxMarginalViolation));

  for (Index i = 0; i < k1; ++i) {
    for (Index j = 0; j < k2; ++j) {
      const double slack = duals.phi[i] + duals.psi[j] - cost.c(i, j);
      rep.maxDualViolation = std::max(rep.maxDualViolation, slack);
    }
  }
  if (rep.maxDualViolation > tol * scale)
    rep.violations.push_back("dual feasibility violation " +
                             std::to_string(rep.maxDualViolation));

  for (const auto& e : plan.entries) {
    if (e.mass <= tol) continue;
    const double gap =
        std::abs(cost.c(e.i, e.j) - duals.phi[e.i] - duals.psi[e.j]);
    rep.maxSlacknessViolation = std::max(rep.maxSlacknessViolation, gap);
  }
  if (rep.maxSlacknessViolation > tol * scale)
    rep.violations.push_back("complementary slackness violation " +
                             std::to_string(rep.maxSlacknessViolation));

  rep.primalCost = plan.costAgainst(cost);
  rep.dualValue = duals.phi.dot(v) + duals.psi.dot(w);
  rep.dualityGap = std::abs(rep.primalCost - rep.dualValue);
  if (rep.dualityGap > tol * (1.0 + std::abs(rep.primalCost)))
    rep.violations.push_back("duality gap " + std::to_string(rep.dualityGap));

  rep.optimal = rep.violations.empty();
  return rep;
}

double emd(const Vector& v, const Vector& w, const CostMatrix& cost) {
  return solve_lp(v, w, cost).plan.attainedCost;
}

}  // namespace ot

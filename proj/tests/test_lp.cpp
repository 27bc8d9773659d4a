#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "ot/error.hpp"
#include "ot/lp.hpp"
#include "ot/measures.hpp"
#include "ot/oracle1d.hpp"

using namespace ot;

namespace {

CostMatrix metric_cost_1d(const Vector& xs, double p) {
  Matrix pts(xs.size(), 1);
  pts.col(0) = xs;
  return build_cost_matrix(pts, pts, p);
}

Index support_size(const TransportPlan& plan) {
  Index n = 0;
  for (const auto& e : plan.entries)
    if (e.mass > 1e-12) ++n;
  return n;
}

}  // namespace

TEST_CASE("solve_lp: identical marginals with zero-diagonal cost") {
  const Index k = 5;
  auto gen = testutil::rng(3);
  const Vector v = testutil::random_simplex(gen, k);
  Matrix c = Matrix::Constant(k, k, 2.0);
  c.diagonal().setZero();
  const LpResult res = solve_lp(v, v, CostMatrix{c, 1.0});
  CHECK(res.plan.attainedCost == doctest::Approx(0.0).epsilon(1e-15));
  const Matrix dense = res.plan.dense();
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < k; ++j)
      if (i != j) CHECK(dense(i, j) <= 1e-12);
}

TEST_CASE("solve_lp: single source split across two targets") {
  Vector v(1), w(2);
  v << 1.0;
  w << 0.5, 0.5;
  Matrix c(1, 2);
  c << 1.0, 3.0;
  const LpResult res = solve_lp(v, w, CostMatrix{c, 1.0});
  const Matrix dense = res.plan.dense();
  CHECK(dense(0, 0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(dense(0, 1) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(res.plan.attainedCost == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("solve_lp agrees with the 1D quantile oracle on random atoms") {
  auto gen = testutil::rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    const DiscreteMeasure mu = testutil::random_atoms_1d(gen, 8);
    const DiscreteMeasure nu = testutil::random_atoms_1d(gen, 8);
    const CostMatrix cost =
        build_cost_matrix(mu.points(), nu.points(), 2.0);
    const LpResult res = solve_lp(mu, nu, cost);
    const double oracle = wp_quantile(mu, nu, 2.0);
    CHECK(std::abs(res.plan.attainedCost - oracle * oracle) <=
          1e-9 * (1.0 + oracle * oracle));
  }
}

TEST_CASE("solve_lp: 1D agreement holds up to k = 64") {
  auto gen = testutil::rng(17);
  for (Index k : {16, 64}) {
    const DiscreteMeasure mu = testutil::random_atoms_1d(gen, k);
    const DiscreteMeasure nu = testutil::random_atoms_1d(gen, k);
    const CostMatrix cost =
        build_cost_matrix(mu.points(), nu.points(), 2.0);
    const LpResult res = solve_lp(mu, nu, cost);
    const double oracle = wp_quantile(mu, nu, 2.0);
    CHECK(std::abs(res.plan.attainedCost - oracle * oracle) <=
          1e-9 * (1.0 + oracle * oracle));
  }
}

TEST_CASE("basic solutions carry at most k1 + k2 - 1 support entries") {
  auto gen = testutil::rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const Index k1 = 3 + static_cast<Index>(trial % 6);
    const Index k2 = 4 + static_cast<Index>(trial % 5);
    const Vector v = testutil::random_simplex(gen, k1);
    const Vector w = testutil::random_simplex(gen, k2);
    Matrix c(k1, k2);
    for (Index i = 0; i < k1; ++i)
      for (Index j = 0; j < k2; ++j) c(i, j) = testutil::uniform(gen, 0, 5);
    const LpResult res = solve_lp(v, w, CostMatrix{c, 1.0});
    CHECK(support_size(res.plan) <= k1 + k2 - 1);
  }
}

TEST_CASE("strong duality and dual feasibility on random instances") {
  auto gen = testutil::rng(29);
  for (int trial = 0; trial < 30; ++trial) {
    const Index k1 = 2 + static_cast<Index>(trial % 7);
    const Index k2 = 2 + static_cast<Index>((trial * 3) % 7);
    const Vector v = testutil::random_simplex(gen, k1);
    const Vector w = testutil::random_simplex(gen, k2);
    Matrix c(k1, k2);
    for (Index i = 0; i < k1; ++i)
      for (Index j = 0; j < k2; ++j) c(i, j) = testutil::uniform(gen, 0, 3);
    const LpResult res = solve_lp(v, w, CostMatrix{c, 1.0});
    const double dual =
        res.duals.phi.dot(v) + res.duals.psi.dot(w);
    CHECK(std::abs(res.plan.attainedCost - dual) <=
          1e-9 * (1.0 + std::abs(res.plan.attainedCost)));
    for (Index i = 0; i < k1; ++i)
      for (Index j = 0; j < k2; ++j)
        CHECK(res.duals.phi[i] + res.duals.psi[j] <= c(i, j) + 1e-9);
  }
}

TEST_CASE("verify_optimality certifies solver output") {
  auto gen = testutil::rng(37);
  const Vector v = testutil::random_simplex(gen, 6);
  const Vector w = testutil::random_simplex(gen, 4);
  Matrix c(6, 4);
  for (Index i = 0; i < 6; ++i)
    for (Index j = 0; j < 4; ++j) c(i, j) = testutil::uniform(gen, 0, 2);
  const CostMatrix cost{c, 1.0};
  const LpResult res = solve_lp(v, w, cost);

  SUBCASE("solver output passes") {
    const OptimalityReport rep =
        verify_optimality(res.plan, res.duals, cost, v, w, 1e-9);
    CHECK(rep.optimal);
    CHECK(rep.violations.empty());
    CHECK(rep.dualityGap <= 1e-9 * (1.0 + std::abs(rep.primalCost)));
  }

  SUBCASE("perturbed marginal fails with a primal flag") {
    Vector bad = v;
    bad[0] += 1e-3;
    const OptimalityReport rep =
        verify_optimality(res.plan, res.duals, cost, bad, w, 1e-6);
    CHECK_FALSE(rep.optimal);
    CHECK(rep.maxMarginalViolation > 1e-6);
    bool flagged = false;
    for (const auto& msg : rep.violations)
      if (msg.find("marginal") != std::string::npos) flagged = true;
    CHECK(flagged);
  }

  SUBCASE("zero duals fail slackness when the optimal cost is positive") {
    // Disjoint supports force every transported unit to pay: cost > 0, so
    // phi = psi = 0 cannot certify the plan.
    Vector v1(2), w1(2);
    v1 << 0.5, 0.5;
    w1 << 0.5, 0.5;
    Matrix cpos(2, 2);
    cpos << 1.0, 2.0, 2.0, 1.0;
    const CostMatrix costPos{cpos, 1.0};
    const LpResult pos = solve_lp(v1, w1, costPos);
    REQUIRE(pos.plan.attainedCost > 0.5);
    DualPotentials zero;
    zero.phi = Vector::Zero(2);
    zero.psi = Vector::Zero(2);
    const OptimalityReport rep =
        verify_optimality(pos.plan, zero, costPos, v1, w1, 1e-9);
    CHECK_FALSE(rep.optimal);
    CHECK(rep.maxSlacknessViolation > 1e-9);
  }
}

TEST_CASE("emd examples and metric behaviour") {
  SUBCASE("self distance is zero") {
    auto gen = testutil::rng(41);
    const Vector xs = Vector::LinSpaced(5, 0.0, 1.0);
    const CostMatrix cost = metric_cost_1d(xs, 1.0);
    const Vector v = testutil::random_simplex(gen, 5);
    CHECK(emd(v, v, cost) == doctest::Approx(0.0).epsilon(1e-14));
  }
  SUBCASE("disjoint single atoms pay the pairwise cost") {
    Vector v(2), w(2);
    v << 1.0, 0.0;
    w << 0.0, 1.0;
    Matrix c(2, 2);
    c << 0.0, 0.7, 0.7, 0.0;
    CHECK(emd(v, w, CostMatrix{c, 1.0}) ==
          doctest::Approx(0.7).epsilon(1e-14));
  }
  SUBCASE("triangle inequality over random triples") {
    auto gen = testutil::rng(43);
    const Index k = 6;
    const Vector xs = Vector::LinSpaced(k, 0.0, 1.0);
    const CostMatrix cost = metric_cost_1d(xs, 1.0);
    for (int trial = 0; trial < 150; ++trial) {
      const Vector a = testutil::random_simplex(gen, k);
      const Vector b = testutil::random_simplex(gen, k);
      const Vector c2 = testutil::random_simplex(gen, k);
      CHECK(emd(a, c2, cost) <= emd(a, b, cost) + emd(b, c2, cost) + 1e-9);
      // Symmetric cost: swapping arguments must not change the value.
      CHECK(std::abs(emd(a, b, cost) - emd(b, a, cost)) <= 1e-10);
    }
  }
}

TEST_CASE("permutation of atoms leaves the cost unchanged") {
  auto gen = testutil::rng(47);
  const Index k = 7;
  const Vector v = testutil::random_simplex(gen, k);
  const Vector w = testutil::random_simplex(gen, 5);
  Matrix c(k, 5);
  for (Index i = 0; i < k; ++i)
    for (Index j = 0; j < 5; ++j) c(i, j) = testutil::uniform(gen, 0, 4);
  const double base = emd(v, w, CostMatrix{c, 1.0});
  std::vector<Index> perm(static_cast<size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), gen);
  Vector pv(k);
  Matrix pc(k, 5);
  for (Index i = 0; i < k; ++i) {
    pv[i] = v[perm[static_cast<size_t>(i)]];
    pc.row(i) = c.row(perm[static_cast<size_t>(i)]);
  }
  CHECK(emd(pv, w, CostMatrix{pc, 1.0}) ==
        doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("typed errors: infeasible marginals and invalid costs") {
  Vector v(2), w(2);
  v << 0.7, 0.3;
  w << 0.5, 0.4;  // sums differ by 0.1 > 1e-8
  Matrix c = Matrix::Zero(2, 2);
  CHECK_THROWS_AS(solve_lp(v, w, CostMatrix{c, 1.0}),
                  InfeasibleMarginalsError);
  Vector w2(2);
  w2 << 0.5, 0.5;
  Matrix bad = c;
  bad(0, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(solve_lp(v, w2, CostMatrix{bad, 1.0}), InvalidCostError);
}

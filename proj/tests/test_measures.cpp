#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "ot/error.hpp"
#include "ot/measures.hpp"

using namespace ot;

TEST_CASE("cost matrix: single pair squared distance") {
  Matrix a(1, 1), b(1, 1);
  a << 0.0;
  b << 3.0;
  const CostMatrix c = build_cost_matrix(DiscreteMeasure(a, Vector::Ones(1)),
                                         DiscreteMeasure(b, Vector::Ones(1)),
                                         2.0);
  CHECK(c.rows() == 1);
  CHECK(c.cols() == 1);
  CHECK(c.c(0, 0) == doctest::Approx(9.0).epsilon(1e-15));
}

TEST_CASE("cost matrix: hand-evaluated p=1 column") {
  Matrix src(2, 2), dst(1, 2);
  src << 0.0, 0.0, 1.0, 0.0;
  dst << 0.0, 1.0;
  const CostMatrix c =
      build_cost_matrix(DiscreteMeasure(src, Vector::Constant(2, 0.5)),
                        DiscreteMeasure(dst, Vector::Ones(1)), 1.0);
  CHECK(c.c(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  // Independent route: hypot on the raw coordinates.
  CHECK(c.c(1, 0) ==
        doctest::Approx(std::hypot(1.0 - 0.0, 0.0 - 1.0)).epsilon(1e-15));
  CHECK(c.c(1, 0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("cost matrix: zero diagonal and symmetry on self") {
  auto gen = testutil::rng(11);
  for (double p : {1.0, 1.5, 2.0, 3.0}) {
    const DiscreteMeasure m = testutil::random_atoms_2d(gen, 9);
    const CostMatrix c = build_cost_matrix(m, m, p);
    for (Index i = 0; i < c.rows(); ++i) {
      CHECK(c.c(i, i) == 0.0);
      for (Index j = 0; j < c.cols(); ++j)
        CHECK(c.c(i, j) == doctest::Approx(c.c(j, i)).epsilon(1e-14));
    }
  }
}

TEST_CASE("cost matrix: dimension mismatch throws") {
  Matrix a(1, 1), b(1, 2);
  a << 0.0;
  b << 0.0, 1.0;
  CHECK_THROWS_AS(build_cost_matrix(DiscreteMeasure(a, Vector::Ones(1)),
                                    DiscreteMeasure(b, Vector::Ones(1)), 2.0),
                  DimensionError);
}

TEST_CASE("normalize: uniform grid rescales to unit mass") {
  GridDensity g({4}, Vector::Constant(4, 2.0), {1.0});
  for (Index i = 0; i < 4; ++i)
    CHECK(g.values()[i] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g.totalMass() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("normalize: weight proportions preserved") {
  Matrix pts(2, 1);
  pts << 0.0, 1.0;
  Vector w(2);
  w << 2.0, 2.0;
  DiscreteMeasure even(pts, w);
  CHECK(even.weights()[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(even.weights()[1] == doctest::Approx(0.5).epsilon(1e-15));

  w << 1.0, 3.0;
  DiscreteMeasure skew(pts, w);
  CHECK(skew.weights()[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(skew.weights()[1] == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("normalize: zero mass throws") {
  CHECK_THROWS_AS(GridDensity({2}, Vector::Zero(2), {1.0}), ZeroMassError);
  Matrix pts(1, 1);
  pts << 0.5;
  CHECK_THROWS_AS(DiscreteMeasure(pts, Vector::Zero(1)), ZeroMassError);
}

TEST_CASE("constructors reject NaN and negative input") {
  Matrix pts(1, 1);
  pts << std::nan("");
  CHECK_THROWS_AS(DiscreteMeasure(pts, Vector::Ones(1)), Error);

  Matrix ok(1, 1);
  ok << 0.5;
  Vector wneg(1);
  wneg << -1.0;
  CHECK_THROWS_AS(DiscreteMeasure(ok, wneg), Error);

  Vector gneg(2);
  gneg << 1.0, -0.5;
  CHECK_THROWS_AS(GridDensity({2}, gneg, {1.0}), Error);
}

TEST_CASE("duplicate atoms merge with summed weights") {
  Matrix pts(3, 1);
  pts << 0.25, 0.25, 0.75;
  Vector w(3);
  w << 1.0, 1.0, 2.0;
  DiscreteMeasure m(pts, w);
  CHECK(m.size() == 2);
  CHECK(m.weights().sum() == doctest::Approx(1.0).epsilon(1e-15));
  // merged atom carries half the mass
  for (Index i = 0; i < m.size(); ++i)
    if (m.points()(i, 0) == 0.25)
      CHECK(m.weights()[i] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("grid_to_discrete: cell centers and masses") {
  SUBCASE("two uniform cells") {
    GridDensity g({2}, Vector::Constant(2, 1.0), {1.0});
    DiscreteMeasure m = grid_to_discrete(g);
    REQUIRE(m.size() == 2);
    CHECK(m.points()(0, 0) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(m.points()(1, 0) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(m.weights()[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(m.weights()[1] == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("zero cells dropped") {
    Vector v(2);
    v << 2.0, 0.0;
    GridDensity g({2}, v, {1.0});
    DiscreteMeasure m = grid_to_discrete(g);
    REQUIRE(m.size() == 1);
    CHECK(m.points()(0, 0) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(m.weights()[0] == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("2x2 uniform square") {
    GridDensity g({2, 2}, Vector::Constant(4, 1.0), {1.0, 1.0});
    DiscreteMeasure m = grid_to_discrete(g);
    REQUIRE(m.size() == 4);
    for (Index i = 0; i < 4; ++i)
      CHECK(m.weights()[i] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(m.points()(0, 0) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(m.points()(0, 1) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(m.points()(3, 0) == doctest::Approx(0.75).epsilon(1e-15));
    CHECK(m.points()(3, 1) == doctest::Approx(0.75).epsilon(1e-15));
  }
}

TEST_CASE("grid_to_discrete preserves total mass exactly") {
  auto gen = testutil::rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const GridDensity g = testutil::random_smooth_grid_1d(gen, 32);
    const DiscreteMeasure m = grid_to_discrete(g);
    CHECK(m.weights().sum() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("plan dense/marginal helpers are consistent") {
  TransportPlan plan;
  plan.rows = 2;
  plan.cols = 2;
  plan.entries = {{0, 0, 0.25}, {0, 1, 0.25}, {1, 1, 0.5}};
  const Matrix d = plan.dense();
  CHECK(d(0, 0) == 0.25);
  CHECK(d(1, 0) == 0.0);
  const Vector r = plan.computeRowMarginal();
  const Vector c = plan.computeColMarginal();
  CHECK(r[0] == doctest::Approx(0.5));
  CHECK(r[1] == doctest::Approx(0.5));
  CHECK(c[0] == doctest::Approx(0.25));
  CHECK(c[1] == doctest::Approx(0.75));
}

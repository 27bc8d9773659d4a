#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "ot/error.hpp"
#include "ot/measures.hpp"
#include "ot/oracle1d.hpp"

using namespace ot;

namespace {

DiscreteMeasure atoms(std::vector<double> xs, std::vector<double> ws) {
  Matrix pts(static_cast<Index>(xs.size()), 1);
  for (Index i = 0; i < pts.rows(); ++i) pts(i, 0) = xs[static_cast<size_t>(i)];
  Vector w(static_cast<Index>(ws.size()));
  for (Index i = 0; i < w.size(); ++i) w[i] = ws[static_cast<size_t>(i)];
  return DiscreteMeasure(pts, w);
}

}  // namespace

TEST_CASE("w1_cdf: two deltas") {
  CHECK(w1_cdf(atoms({0.0}, {1.0}), atoms({3.0}, {1.0})) ==
        doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("w1_cdf: paired atoms shifted by 2") {
  const DiscreteMeasure mu = atoms({0.0, 1.0}, {0.5, 0.5});
  const DiscreteMeasure nu = atoms({2.0, 3.0}, {0.5, 0.5});
  CHECK(w1_cdf(mu, nu) == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("w1_cdf: distance grows linearly with a rigid shift") {
  // 256 cells over [0,16]: h = 1/16, so integer shifts move whole cells and
  // the translate is exact.  No floor, so no mass is clipped at the walls.
  const GridDensity base =
      testutil::bump_grid_1d(256, {{3.0, 0.3, 1.0}}, 16.0, 0.0);
  for (double shift : {1.0, 2.0, 3.0, 4.0}) {
    Vector shifted = Vector::Zero(base.cellCount());
    const Index offset = static_cast<Index>(std::lround(shift * 16.0));
    for (Index i = 0; i + offset < base.cellCount(); ++i)
      shifted[i + offset] = base.values()[i];
    const GridDensity moved(base.shape(), shifted, base.extent());
    CHECK(w1_cdf(base, moved) == doctest::Approx(shift).epsilon(1e-6));
  }
}

TEST_CASE("w1_cdf rejects non-1D input") {
  const GridDensity g2 = testutil::bump_grid_2d(4, 0.5, 0.5, 0.25);
  CHECK_THROWS_AS(w1_cdf(g2, g2), UnsupportedError);
}

TEST_CASE("wp_quantile: two deltas give |x - y| for every p") {
  const DiscreteMeasure mu = atoms({0.3}, {1.0});
  const DiscreteMeasure nu = atoms({0.9}, {1.0});
  for (double p : {1.0, 1.5, 2.0, 3.0})
    CHECK(wp_quantile(mu, nu, p) == doctest::Approx(0.6).epsilon(1e-12));
}

TEST_CASE("wp_quantile: translated uniform blocks, p = 2") {
  // Uniform on [0,1] vs uniform on [1/2, 3/2]: pure translation by 1/2.
  const Index m = 200;
  Vector left = Vector::Zero(2 * m), right = Vector::Zero(2 * m);
  for (Index i = 0; i < m; ++i) left[i] = 1.0;
  for (Index i = m / 2; i < m + m / 2; ++i) right[i] = 1.0;
  const GridDensity a({2 * m}, left, {2.0});
  const GridDensity b({2 * m}, right, {2.0});
  CHECK(wp_quantile(a, b, 2.0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("wp_quantile self-distance is exactly zero") {
  auto gen = testutil::rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const DiscreteMeasure mu = testutil::random_atoms_1d(gen, 6);
    CHECK(wp_quantile(mu, mu, 2.0) == 0.0);
    CHECK(w1_cdf(mu, mu) == 0.0);
  }
}

TEST_CASE("wp_quantile rejects p < 1") {
  const DiscreteMeasure mu = atoms({0.0}, {1.0});
  CHECK_THROWS_AS(wp_quantile(mu, mu, 0.5), UnsupportedError);
}

TEST_CASE("metric axioms on random 1D triples") {
  auto gen = testutil::rng(21);
  for (double p : {1.0, 2.0}) {
    for (int trial = 0; trial < 200; ++trial) {
      const DiscreteMeasure a = testutil::random_atoms_1d(gen, 5);
      const DiscreteMeasure b = testutil::random_atoms_1d(gen, 4);
      const DiscreteMeasure c = testutil::random_atoms_1d(gen, 6);
      const double ab = wp_quantile(a, b, p);
      const double ba = wp_quantile(b, a, p);
      const double bc = wp_quantile(b, c, p);
      const double ac = wp_quantile(a, c, p);
      CHECK(std::abs(ab - ba) <= 1e-12);
      CHECK(ac <= ab + bc + 1e-12);
      CHECK(ab >= 0.0);
    }
  }
}

TEST_CASE("w1_cdf equals wp_quantile at p = 1") {
  auto gen = testutil::rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    const DiscreteMeasure a = testutil::random_atoms_1d(gen, 7);
    const DiscreteMeasure b = testutil::random_atoms_1d(gen, 5);
    CHECK(w1_cdf(a, b) ==
          doctest::Approx(wp_quantile(a, b, 1.0)).epsilon(1e-11));
  }
}

TEST_CASE("mixed atom/grid overloads agree with the pure-CDF core") {
  auto gen = testutil::rng(41);
  const DiscreteMeasure mu = testutil::random_atoms_1d(gen, 6);
  const GridDensity rho = testutil::random_smooth_grid_1d(gen, 64);
  const PiecewiseCdf fm = PiecewiseCdf::from(mu);
  const PiecewiseCdf fr = PiecewiseCdf::from(rho);
  CHECK(w1_cdf(mu, rho) == doctest::Approx(w1_cdf(fm, fr)).epsilon(1e-13));
  CHECK(wp_quantile(mu, rho, 2.0) ==
        doctest::Approx(wp_quantile(fm, fr, 2.0)).epsilon(1e-13));
}

TEST_CASE("PiecewiseCdf: CDF and quantile are mutual inverses on ramps") {
  auto gen = testutil::rng(51);
  const GridDensity rho = testutil::random_smooth_grid_1d(gen, 64);
  const PiecewiseCdf f = PiecewiseCdf::from(rho);
  CHECK(f(-1.0) == 0.0);
  CHECK(f(2.0) == doctest::Approx(1.0).epsilon(1e-12));
  for (double s : {0.1, 0.25, 0.5, 0.75, 0.9}) {
    const double x = f.quantile(s);
    CHECK(f(x) == doctest::Approx(s).epsilon(1e-9));
  }
}

TEST_CASE("semidiscrete_1d: single atom takes the whole uniform target") {
  const GridDensity uni({64}, Vector::Constant(64, 1.0), {1.0});
  const IntervalAssignment asg =
      semidiscrete_1d(atoms({0.5}, {1.0}), uni);
  REQUIRE(asg.pieces.size() == 1);
  CHECK(asg.pieces[0].b == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(asg.pieces[0].c == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(asg.pieces[0].mass == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("semidiscrete_1d: equal weights split the target at 1/2") {
  const GridDensity uni({64}, Vector::Constant(64, 1.0), {1.0});
  const IntervalAssignment asg =
      semidiscrete_1d(atoms({0.2, 0.8}, {0.5, 0.5}), uni);
  REQUIRE(asg.pieces.size() == 2);
  CHECK(asg.pieces[0].b == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(asg.pieces[0].c == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(asg.pieces[1].b == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(asg.pieces[1].c == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("semidiscrete_1d: weights (1/4, 3/4) split at 1/4") {
  const GridDensity uni({64}, Vector::Constant(64, 1.0), {1.0});
  const IntervalAssignment asg =
      semidiscrete_1d(atoms({0.1, 0.9}, {0.25, 0.75}), uni);
  REQUIRE(asg.pieces.size() == 2);
  CHECK(asg.pieces[0].c == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(asg.pieces[1].b == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("semidiscrete_1d invariants: ordered intervals carrying a_i") {
  auto gen = testutil::rng(61);
  for (int trial = 0; trial < 20; ++trial) {
    const DiscreteMeasure mu = testutil::random_atoms_1d(gen, 8);
    const GridDensity rho = testutil::random_smooth_grid_1d(gen, 128);
    const IntervalAssignment asg = semidiscrete_1d(mu, rho);
    REQUIRE(asg.pieces.size() == static_cast<size_t>(mu.size()));
    const PiecewiseCdf f = PiecewiseCdf::from(rho);
    double total = 0.0;
    // Atom order (by position) must match interval order: no leapfrogging.
    std::vector<double> pos;
    for (const auto& piece : asg.pieces)
      pos.push_back(mu.points()(piece.sourceIndex, 0));
    CHECK(std::is_sorted(pos.begin(), pos.end()));
    for (size_t i = 0; i < asg.pieces.size(); ++i) {
      const auto& piece = asg.pieces[i];
      CHECK(piece.b <= piece.c + 1e-15);
      if (i > 0) CHECK(asg.pieces[i - 1].c <= piece.b + 1e-12);
      const double carried = f(piece.c) - f(piece.b);
      CHECK(std::abs(carried - mu.weights()[piece.sourceIndex]) <= 1e-10);
      CHECK(std::abs(piece.mass - mu.weights()[piece.sourceIndex]) <= 1e-10);
      total += piece.mass;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
  }
}

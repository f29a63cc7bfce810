#include <catch2/catch_amalgamated.hpp>

#include <pursuit/pursuit.hpp>

#include <array>
#include <cmath>
#include <set>

#include "helpers.hpp"

using namespace pursuit;

TEST_CASE("canonical indicator atoms") {
  Dictionary d = Dictionary::canonical(4);
  CHECK(d.total_atoms() == 4);
  const Eigen::MatrixXd pts = Dictionary::grid_points(4);
  const VectorF v = d.atom_eval(2, pts);
  VectorF expected(4);
  expected << 0, 0, 1, 0;
  CHECK((v - expected).norm() == 0.0);

  CHECK_THROWS_AS(d.atom_eval(4, pts), std::invalid_argument);
  CHECK_THROWS_AS(d.atom_eval(-1, pts), std::invalid_argument);
  CHECK_THROWS_AS(Dictionary::canonical(0), std::invalid_argument);
}

TEST_CASE("grid lookup rounds and clamps") {
  Dictionary d = Dictionary::canonical(4);
  Eigen::MatrixXd pts(3, 1);
  pts << -2.0, 1.4, 9.0;
  CHECK(d.atom_eval(0, pts)(0) == 1.0);  // clamped up to cell 0
  CHECK(d.atom_eval(1, pts)(1) == 1.0);  // 1.4 rounds to 1
  CHECK(d.atom_eval(3, pts)(2) == 1.0);  // clamped down to the last cell
}

TEST_CASE("ridge heaviside atom on two points") {
  Dictionary d = Dictionary::ridge_explicit(
      {Eigen::VectorXd::Constant(1, 1.0)}, {0.0}, Activation::heaviside);
  Eigen::MatrixXd pts(2, 1);
  pts << -1.0, 1.0;
  const VectorF v = d.atom_eval(0, pts);
  CHECK(v(0) == 0.0);
  CHECK(v(1) == 1.0);
}

TEST_CASE("logistic atom with zero direction is one half everywhere") {
  Dictionary d = Dictionary::ridge_explicit(
      {Eigen::VectorXd::Zero(2)}, {0.0}, Activation::logistic);
  Eigen::MatrixXd pts(3, 2);
  pts << 0, 0, 5, -1, -2, 7;
  const VectorF v = d.atom_eval(0, pts);
  for (int i = 0; i < 3; ++i) CHECK(v(i) == Catch::Approx(0.5));
}

TEST_CASE("normalization divides by the context norm") {
  // heaviside step active on half of four unit-weight points: raw norm sqrt(2)
  Dictionary d = Dictionary::ridge_explicit(
      {Eigen::VectorXd::Constant(1, 1.0)}, {0.0}, Activation::heaviside);
  Eigen::MatrixXd pts(4, 1);
  pts << -1.0, -0.5, 0.5, 1.0;
  SpaceContext ctx = SpaceContext::unit(4);
  auto g = normalize(d, 0, ctx, pts);
  REQUIRE(g.has_value());
  CHECK((*g)(2) == Catch::Approx(1.0 / std::sqrt(2.0)));
  CHECK((*g)(3) == Catch::Approx(1.0 / std::sqrt(2.0)));
  CHECK(ctx.norm(*g) == Catch::Approx(1.0));

  // a threshold above the data range leaves the atom identically zero: dead
  Dictionary dd = Dictionary::ridge_explicit(
      {Eigen::VectorXd::Constant(1, 1.0)}, {2.0}, Activation::heaviside);
  CHECK_FALSE(normalize(dd, 0, ctx, pts).has_value());
}

TEST_CASE("materialized prefix marks dead atoms and unit-normalizes live ones") {
  Dictionary d = Dictionary::ridge(1, 2, 8, -1.0, 1.0, Activation::heaviside);
  const Eigen::MatrixXd pts = [] {
    Eigen::MatrixXd p(16, 1);
    for (int i = 0; i < 16; ++i) p(i, 0) = -1.0 + (2.0 * i + 1.0) / 16.0;
    return p;
  }();
  SpaceContext ctx = SpaceContext::empirical(16);
  MaterializedDictionary md = materialize(d, ctx, pts);
  REQUIRE(md.size() == d.total_atoms());
  for (int j = 0; j < md.size(); ++j) {
    if (md.dead[j]) {
      CHECK(md.atoms.col(j).norm() == 0.0);
    } else {
      CHECK(ctx.norm(md.atoms.col(j)) == Catch::Approx(1.0).epsilon(1e-12));
      CHECK(md.scales(j) > kDeadTol);
    }
  }
  CHECK(md.live_count() >= md.size() / 2);
}

TEST_CASE("exhaustion order: prefixes nest and ridge pairs appear exactly once") {
  Dictionary d = Dictionary::ridge(2, 5, 7, -1.0, 1.0, Activation::logistic);
  CHECK(d.total_atoms() == 35);
  std::set<std::pair<int, int>> seen(d.ridge_order.begin(), d.ridge_order.end());
  CHECK(seen.size() == 35u);

  Rng rng(3);
  Eigen::MatrixXd pts(10, 2);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 2; ++j) pts(i, j) = rng.uniform(-1.0, 1.0);
  SpaceContext ctx = SpaceContext::empirical(10);
  MaterializedDictionary small = materialize(d, ctx, pts, 12);
  MaterializedDictionary big = materialize(d, ctx, pts, 30);
  REQUIRE(small.size() == 12);
  REQUIRE(big.size() == 30);
  CHECK((big.atoms.leftCols(12) - small.atoms).norm() == 0.0);
}

TEST_CASE("ridge exhaustion interleaves directions and thresholds") {
  // square shells: refinements of early directions come before direction k+1
  Dictionary d = Dictionary::ridge(1, 2, 3, -1.0, 1.0, Activation::heaviside);
  const std::vector<std::pair<int, int>> expected = {
      {0, 0}, {0, 1}, {1, 0}, {1, 1}, {0, 2}, {1, 2}};
  REQUIRE(d.ridge_order.size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    CHECK(d.ridge_order[i].first == expected[i].first);
    CHECK(d.ridge_order[i].second == expected[i].second);
  }
  // coarse-to-fine thresholds over [-1, 1]: midpoint first, then quarters
  CHECK(d.thresholds[0] == Catch::Approx(0.0).margin(1e-15));
  CHECK(d.thresholds[1] == Catch::Approx(-0.5));
  CHECK(d.thresholds[2] == Catch::Approx(0.5));
}

TEST_CASE("one-dimensional direction sequence alternates signs") {
  Dictionary d = Dictionary::ridge(1, 4, 1, 0.0, 0.0, Activation::heaviside);
  CHECK(d.directions[0](0) == 1.0);
  CHECK(d.directions[1](0) == -1.0);
  CHECK(d.directions[2](0) == 1.0);
  CHECK(d.directions[3](0) == -1.0);
}

TEST_CASE("sphere directions are unit and spread") {
  auto dirs = detail::sphere_directions(3, 50);
  REQUIRE(dirs.size() == 50u);
  std::set<std::array<long, 3>> rounded;
  for (const auto& u : dirs) {
    CHECK(u.norm() == Catch::Approx(1.0).epsilon(1e-9));
    rounded.insert({std::lround(u(0) * 1e6), std::lround(u(1) * 1e6),
                    std::lround(u(2) * 1e6)});
  }
  CHECK(rounded.size() == 50u);  // no repeats at 1e-6 resolution
}

TEST_CASE("union of bases holds two complete orthonormal bases") {
  const int m = 8;
  Dictionary d = Dictionary::union_of_bases(m);
  CHECK(d.total_atoms() == 2 * m);
  const Eigen::MatrixXd pts = Dictionary::grid_points(m);
  SpaceContext ctx = SpaceContext::unit(m);
  MaterializedDictionary md = materialize(d, ctx, pts);
  // even exhaustion slots: canonical indicators; odd: cosine basis
  for (int a = 0; a < 2; ++a) {
    for (int i = a; i < 2 * m; i += 2) {
      for (int j = a; j <= i; j += 2) {
        const double ip = ctx.inner(md.atoms.col(i), md.atoms.col(j));
        CHECK(ip == Catch::Approx(i == j ? 1.0 : 0.0).margin(1e-12));
      }
    }
  }
  // the constant cosine atom
  const VectorF flat = md.atoms.col(1);
  for (int i = 0; i < m; ++i)
    CHECK(flat(i) == Catch::Approx(1.0 / std::sqrt(double(m))));
}

TEST_CASE("truncation size floor(n^a) with cap") {
  CHECK(truncation_size(10, 2.0) == 100);
  CHECK(truncation_size(1, 0.5) == 1);
  CHECK(truncation_size(1, 3.0) == 1);
  CHECK(truncation_size(7, 1.5) == 18);
  CHECK(truncation_size(4096, 1.0) == 4096);
  CHECK(truncation_size(100, 1.0, 64) == 64);  // capped by the dictionary
  CHECK(truncation_size(100, 0.0) == 1);
  CHECK_THROWS_AS(truncation_size(0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(truncation_size(5, -0.1), std::invalid_argument);
}

TEST_CASE("selection takes the largest absolute correlation, keeping its sign") {
  SpaceContext ctx = SpaceContext::unit(3);
  Dictionary d = Dictionary::canonical(3);
  MaterializedDictionary md = materialize(d, ctx, Dictionary::grid_points(3));
  VectorF r(3);
  r << 0.9, -1.1, 0.3;
  const Selection s = select_max_correlation(md, 3, ctx, r);
  CHECK(s.index == 1);
  CHECK(s.correlation == Catch::Approx(-1.1));

  // restricting the prefix hides the better atom
  const Selection s1 = select_max_correlation(md, 1, ctx, r);
  CHECK(s1.index == 0);
  CHECK(s1.correlation == Catch::Approx(0.9));

  CHECK_THROWS_AS(select_max_correlation(md, 0, ctx, r), std::invalid_argument);
}

TEST_CASE("selection ties break to the lowest index") {
  SpaceContext ctx = SpaceContext::unit(2);
  Eigen::MatrixXd raw(2, 3);
  raw << 1, 0, 1, 0, 1, 0;  // atoms e1, e2, e1 again
  MaterializedDictionary md = materialize_columns(ctx, raw);
  VectorF r(2);
  r << 0.7, -0.7;
  const Selection s = select_max_correlation(md, 3, ctx, r);
  CHECK(s.index == 0);
}

TEST_CASE("selection skips dead atoms") {
  SpaceContext ctx = SpaceContext::unit(2);
  Eigen::MatrixXd raw(2, 2);
  raw.setZero();
  raw(1, 1) = 1.0;  // first atom dead, second is e2
  MaterializedDictionary md = materialize_columns(ctx, raw);
  VectorF r(2);
  r << 5, 1;
  const Selection s = select_max_correlation(md, 2, ctx, r);
  CHECK(s.index == 1);

  Eigen::MatrixXd all_zero = Eigen::MatrixXd::Zero(2, 2);
  MaterializedDictionary dead = materialize_columns(ctx, all_zero);
  CHECK_THROWS_AS(select_max_correlation(dead, 2, ctx, r), std::runtime_error);
}

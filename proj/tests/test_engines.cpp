#include <catch2/catch_amalgamated.hpp>

#include <pursuit/pursuit.hpp>

#include <limits>
#include <set>

#include "helpers.hpp"

using namespace pursuit;

namespace {

MaterializedDictionary canonical_md(int m) {
  return materialize(Dictionary::canonical(m), SpaceContext::unit(m),
                     Dictionary::grid_points(m));
}

// Rebuilds the approximant of step k from the coefficient snapshot and checks
// it against the recorded residual norm.
void check_snapshots(const SpaceContext& ctx, const MaterializedDictionary& md,
                     const VectorF& f, const GreedyTrace& trace) {
  REQUIRE(trace.step_coeffs.size() == trace.steps.size());
  for (std::size_t k = 0; k < trace.steps.size(); ++k) {
    const auto& c = trace.step_coeffs[k];
    VectorF approx = VectorF::Zero(ctx.dim());
    for (std::size_t i = 0; i < c.size(); ++i)
      approx += c[i] * md.atoms.col(trace.selected[i]);
    CHECK(ctx.norm(f - approx) ==
          Catch::Approx(trace.steps[k].residual_norm).margin(1e-9));
  }
  if (!trace.steps.empty()) {
    REQUIRE(trace.coefficients == trace.step_coeffs.back());
  }
}

}  // namespace

TEST_CASE("pure greedy peels orthonormal coefficients largest first") {
  MaterializedDictionary md = canonical_md(3);
  SpaceContext ctx = SpaceContext::unit(3);
  VectorF f(3);
  f << 1.0, 0.5, 0.25;

  GreedyConfig cfg;
  cfg.max_steps = 2;
  GreedyTrace t = run_pga(ctx, md, f, cfg);
  REQUIRE(t.steps.size() == 2);
  CHECK(t.steps[0].atom == 0);
  CHECK(t.steps[0].beta == Catch::Approx(1.0));
  CHECK(t.steps[1].atom == 1);
  CHECK(t.steps[0].residual_norm ==
        Catch::Approx(std::sqrt(0.25 + 0.0625)));
  CHECK(t.steps[1].residual_norm == Catch::Approx(0.25));

  cfg.max_steps = 8;
  t = run_pga(ctx, md, f, cfg);
  CHECK(t.stopped_reason == StopReason::tol);
  CHECK(t.steps.back().residual_norm <= 1e-12 * t.initial_norm);
  check_snapshots(ctx, md, f, t);
}

TEST_CASE("orthogonal greedy equals best-term truncation on orthonormal atoms") {
  MaterializedDictionary md = canonical_md(3);
  SpaceContext ctx = SpaceContext::unit(3);
  VectorF f(3);
  f << 3, 2, 1;

  GreedyConfig cfg;
  cfg.max_steps = 2;
  const GreedyTrace t = run_oga(ctx, md, f, cfg);
  REQUIRE(t.steps.size() == 2);
  CHECK(t.steps[0].atom == 0);
  CHECK(t.steps[1].atom == 1);
  CHECK(t.steps[1].residual_norm == Catch::Approx(1.0));

  const auto [thresh_err, kept] = testutil::threshold_oracle({3, 2, 1}, 2);
  CHECK(t.steps[1].residual_norm == Catch::Approx(thresh_err));
  CHECK(t.selected == kept);
  check_snapshots(ctx, md, f, t);
}

TEST_CASE("all four engines agree after one step") {
  Rng rng(21);
  SpaceContext ctx = SpaceContext::unit(12);
  MaterializedDictionary md = testutil::random_unit_atoms(ctx, 20, rng);
  VectorF f(12);
  for (int i = 0; i < 12; ++i) f(i) = rng.normal();

  GreedyConfig cfg;
  cfg.max_steps = 1;
  const GreedyTrace pga = run_pga(ctx, md, f, cfg);
  const GreedyTrace oga = run_oga(ctx, md, f, cfg);
  const GreedyTrace spa = run_spa(ctx, md, f, cfg);
  cfg.alpha_schedule = AlphaSchedule::two_over_k;
  const GreedyTrace rga = run_rga(ctx, md, f, cfg);

  REQUIRE(pga.steps.size() == 1);
  const int atom = pga.steps[0].atom;
  const double res = pga.steps[0].residual_norm;
  for (const GreedyTrace* t : {&oga, &spa, &rga}) {
    REQUIRE(t->steps.size() == 1);
    CHECK(t->steps[0].atom == atom);
    CHECK(t->steps[0].residual_norm == Catch::Approx(res).margin(1e-12));
  }
  CHECK(rga.steps[0].alpha == 0.0);
}

TEST_CASE("projection engines match the dense least-squares oracle") {
  Rng rng(33);
  SpaceContext ctx = SpaceContext::unit(10);
  MaterializedDictionary md = testutil::random_unit_atoms(ctx, 25, rng);
  VectorF f(10);
  for (int i = 0; i < 10; ++i) f(i) = rng.normal();

  GreedyConfig cfg;
  cfg.max_steps = 6;
  for (Algorithm alg : {Algorithm::oga, Algorithm::spa}) {
    cfg.algorithm = alg;
    const GreedyTrace t = run_greedy(ctx, md, f, cfg);
    REQUIRE(t.steps.size() == 6);
    std::vector<VectorF> picked;
    for (std::size_t k = 0; k < t.steps.size(); ++k) {
      picked.push_back(md.atoms.col(t.steps[k].atom));
      const VectorF proj = testutil::dense_projection(ctx, picked, f);
      CHECK(t.steps[k].residual_norm ==
            Catch::Approx(ctx.norm(f - proj)).margin(1e-9));
    }
    check_snapshots(ctx, md, f, t);
  }
}

TEST_CASE("pure greedy energy identity and monotone residuals") {
  Rng rng(44);
  SpaceContext ctx = SpaceContext::unit(15);
  MaterializedDictionary md = testutil::random_unit_atoms(ctx, 40, rng);
  VectorF f(15);
  for (int i = 0; i < 15; ++i) f(i) = rng.normal();

  GreedyConfig cfg;
  cfg.max_steps = 30;
  const GreedyTrace t = run_pga(ctx, md, f, cfg);
  double prev_sq = t.initial_norm * t.initial_norm;
  for (const GreedyStep& s : t.steps) {
    const double now_sq = s.residual_norm * s.residual_norm;
    CHECK(now_sq == Catch::Approx(prev_sq - s.beta * s.beta).margin(1e-9));
    CHECK(s.residual_norm <= std::sqrt(prev_sq) + 1e-12);
    prev_sq = now_sq;
  }
  check_snapshots(ctx, md, f, t);
}

TEST_CASE("greedy selection maximizes the absolute correlation") {
  Rng rng(55);
  SpaceContext ctx = SpaceContext::unit(9);
  MaterializedDictionary md = testutil::random_unit_atoms(ctx, 18, rng);
  VectorF f(9);
  for (int i = 0; i < 9; ++i) f(i) = rng.normal();

  GreedyConfig cfg;
  cfg.max_steps = 5;
  const GreedyTrace t = run_oga(ctx, md, f, cfg);
  VectorF r = f;
  GramState span(9);
  for (const GreedyStep& s : t.steps) {
    double best = 0.0;
    for (int j = 0; j < md.size(); ++j)
      best = std::max(best, std::abs(ctx.inner(r, md.atoms.col(j))));
    CHECK(std::abs(ctx.inner(r, md.atoms.col(s.atom))) ==
          Catch::Approx(best).margin(1e-10));
    CHECK(std::abs(s.beta) == Catch::Approx(best).margin(1e-10));
    REQUIRE(span.try_extend(ctx, md.atoms.col(s.atom)));
    r = f - project_onto_span(ctx, span, f).value;
  }
}

TEST_CASE("stepwise engine minimizes the post-projection error at every step") {
  Rng rng(66);
  SpaceContext ctx = SpaceContext::unit(7);
  MaterializedDictionary md = testutil::random_unit_atoms(ctx, 14, rng);
  VectorF f(7);
  for (int i = 0; i < 7; ++i) f(i) = rng.normal();

  GreedyConfig cfg;
  cfg.max_steps = 4;
  const GreedyTrace t = run_spa(ctx, md, f, cfg);
  REQUIRE(t.steps.size() == 4);

  std::vector<int> chosen;
  for (const GreedyStep& s : t.steps) {
    // brute force: projection error after adding each candidate to the span
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < md.size(); ++j) {
      std::vector<VectorF> candidate;
      for (int c : chosen) candidate.push_back(md.atoms.col(c));
      candidate.push_back(md.atoms.col(j));
      const VectorF proj = testutil::dense_projection(ctx, candidate, f);
      best = std::min(best, ctx.norm(f - proj));
    }
    CHECK(s.residual_norm == Catch::Approx(best).margin(1e-9));
    chosen.push_back(s.atom);
  }
}

TEST_CASE("relaxed engine follows its schedule and recursion") {
  Rng rng(77);
  SpaceContext ctx = SpaceContext::unit(10);
  MaterializedDictionary md = testutil::random_unit_atoms(ctx, 24, rng);
  const Representation target = testutil::random_l1_target(md, 6, rng);
  const VectorF f = target.values;

  GreedyConfig cfg;
  cfg.algorithm = Algorithm::rga;
  cfg.max_steps = 12;

  SECTION("harmonic alphas 0, 1/2, 2/3, ...") {
    cfg.alpha_schedule = AlphaSchedule::harmonic;
    const GreedyTrace t = run_rga(ctx, md, f, cfg);
    REQUIRE(t.steps.size() == 12);
    for (std::size_t k = 0; k < t.steps.size(); ++k)
      CHECK(t.steps[k].alpha == Catch::Approx(1.0 - 1.0 / (k + 1)));
    check_snapshots(ctx, md, f, t);
  }

  SECTION("two-over-k alphas 0, 0, 1/3, 1/2, ...") {
    cfg.alpha_schedule = AlphaSchedule::two_over_k;
    const GreedyTrace t = run_rga(ctx, md, f, cfg);
    REQUIRE(t.steps.size() >= 4);
    CHECK(t.steps[0].alpha == 0.0);
    CHECK(t.steps[1].alpha == 0.0);
    CHECK(t.steps[2].alpha == Catch::Approx(1.0 / 3.0));
    CHECK(t.steps[3].alpha == Catch::Approx(0.5));
    check_snapshots(ctx, md, f, t);
  }

  SECTION("lambda schedule clamps at zero and validates lambda") {
    cfg.alpha_schedule = AlphaSchedule::lambda_over_k;
    cfg.lambda = 3.0;
    const GreedyTrace t = run_rga(ctx, md, f, cfg);
    REQUIRE(t.steps.size() >= 4);
    CHECK(t.steps[0].alpha == 0.0);
    CHECK(t.steps[1].alpha == 0.0);
    CHECK(t.steps[2].alpha == 0.0);
    CHECK(t.steps[3].alpha == Catch::Approx(0.25));
    CHECK_FALSE(t.schedule_flagged);

    cfg.lambda = 1.0;
    CHECK(run_rga(ctx, md, f, cfg).schedule_flagged);
    cfg.lambda = 0.5;
    CHECK_THROWS_AS(run_rga(ctx, md, f, cfg), std::invalid_argument);
  }

  SECTION("relaxed beta is the correlation of the shrunk target") {
    cfg.alpha_schedule = AlphaSchedule::harmonic;
    const GreedyTrace t = run_rga(ctx, md, f, cfg);
    VectorF fk = VectorF::Zero(10);
    for (const GreedyStep& s : t.steps) {
      const VectorF u = f - s.alpha * fk;
      const Selection sel = select_max_correlation(md, md.size(), ctx, u);
      CHECK(sel.index == s.atom);
      CHECK(sel.correlation == Catch::Approx(s.beta));
      fk = s.alpha * fk + s.beta * md.atoms.col(s.atom);
      CHECK(ctx.norm(f - fk) == Catch::Approx(s.residual_norm).margin(1e-12));
    }
  }
}

TEST_CASE("stopping behavior") {
  MaterializedDictionary md = canonical_md(3);
  SpaceContext ctx = SpaceContext::unit(3);
  VectorF f(3);
  f << 3, 2, 1;

  GreedyConfig cfg;

  SECTION("max_steps zero runs nothing") {
    cfg.max_steps = 0;
    const GreedyTrace t = run_oga(ctx, md, f, cfg);
    CHECK(t.steps.empty());
    CHECK(t.stopped_reason == StopReason::max_steps);
    CHECK(t.initial_norm == Catch::Approx(std::sqrt(14.0)));
  }

  SECTION("absolute tolerance stops early") {
    cfg.max_steps = 10;
    cfg.residual_stop_tol = 1.5;
    const GreedyTrace t = run_oga(ctx, md, f, cfg);
    REQUIRE(t.steps.size() == 2);  // residuals sqrt(5), then 1 <= 1.5
    CHECK(t.stopped_reason == StopReason::tol);
  }

  SECTION("zero target stops before any step") {
    cfg.max_steps = 10;
    const GreedyTrace t = run_oga(ctx, md, VectorF::Zero(3), cfg);
    CHECK(t.steps.empty());
    CHECK(t.stopped_reason == StopReason::tol);
  }

  SECTION("exact recovery flips the reason to tol") {
    cfg.max_steps = 10;
    const GreedyTrace t = run_oga(ctx, md, f, cfg);
    CHECK(t.steps.size() == 3);
    CHECK(t.stopped_reason == StopReason::tol);
    CHECK(t.steps.back().residual_norm <= 1e-12 * t.initial_norm);
  }

  SECTION("dead prefix is degenerate") {
    Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(3, 2);
    MaterializedDictionary deadmd = materialize_columns(ctx, zero);
    const GreedyTrace t = run_oga(ctx, deadmd, f, cfg);
    CHECK(t.steps.empty());
    CHECK(t.stopped_reason == StopReason::degenerate);
  }

  SECTION("orthogonal remainder stops with zero correlation") {
    cfg.max_steps = 10;
    cfg.truncation = 2;
    const GreedyTrace t = run_oga(ctx, md, f, cfg);
    REQUIRE(t.steps.size() == 2);
    CHECK(t.stopped_reason == StopReason::tol);
    CHECK(t.steps.back().residual_norm == Catch::Approx(1.0));
  }

  SECTION("bad configs throw") {
    cfg.max_steps = -1;
    CHECK_THROWS_AS(run_oga(ctx, md, f, cfg), std::invalid_argument);
    cfg.max_steps = 4;
    cfg.truncation = 0;
    CHECK_THROWS_AS(run_oga(ctx, md, f, cfg), std::invalid_argument);
  }
}

TEST_CASE("truncation restricts selection to the prefix") {
  Rng rng(88);
  SpaceContext ctx = SpaceContext::unit(8);
  MaterializedDictionary md = testutil::random_unit_atoms(ctx, 30, rng);
  VectorF f(8);
  for (int i = 0; i < 8; ++i) f(i) = rng.normal();

  GreedyConfig cfg;
  cfg.max_steps = 6;
  cfg.truncation = 5;
  for (Algorithm alg : {Algorithm::pga, Algorithm::oga, Algorithm::rga, Algorithm::spa}) {
    cfg.algorithm = alg;
    const GreedyTrace t = run_greedy(ctx, md, f, cfg);
    for (const GreedyStep& s : t.steps) CHECK(s.atom < 5);
  }
}

TEST_CASE("projection residuals never increase and strictly improve off the span") {
  Rng rng(99);
  SpaceContext ctx = SpaceContext::unit(20);
  MaterializedDictionary md = testutil::random_unit_atoms(ctx, 60, rng);
  VectorF f(20);
  for (int i = 0; i < 20; ++i) f(i) = rng.normal();

  GreedyConfig cfg;
  cfg.max_steps = 20;
  for (Algorithm alg : {Algorithm::oga, Algorithm::spa, Algorithm::pga}) {
    cfg.algorithm = alg;
    const GreedyTrace t = run_greedy(ctx, md, f, cfg);
    double prev = t.initial_norm;
    for (const GreedyStep& s : t.steps) {
      CHECK(s.residual_norm <= prev + 1e-12);
      prev = s.residual_norm;
    }
  }
}

TEST_CASE("trace bookkeeping: selected atoms unique, slots align") {
  Rng rng(111);
  SpaceContext ctx = SpaceContext::unit(6);
  MaterializedDictionary md = testutil::random_unit_atoms(ctx, 10, rng);
  VectorF f(6);
  for (int i = 0; i < 6; ++i) f(i) = rng.normal();

  GreedyConfig cfg;
  cfg.max_steps = 25;
  for (Algorithm alg : {Algorithm::pga, Algorithm::rga}) {
    cfg.algorithm = alg;
    cfg.alpha_schedule = AlphaSchedule::harmonic;
    const GreedyTrace t = run_greedy(ctx, md, f, cfg);
    std::set<int> uniq(t.selected.begin(), t.selected.end());
    CHECK(uniq.size() == t.selected.size());
    for (std::size_t k = 0; k < t.step_coeffs.size(); ++k) {
      CHECK(t.step_coeffs[k].size() <= t.selected.size());
      if (k > 0) CHECK(t.step_coeffs[k].size() >= t.step_coeffs[k - 1].size());
    }
    check_snapshots(ctx, md, f, t);
  }
}

TEST_CASE("variation-norm residual guarantees hold on unit-weight targets") {
  Rng rng(123);
  SpaceContext ctx = SpaceContext::unit(16);
  MaterializedDictionary md = testutil::random_unit_atoms(ctx, 48, rng);

  for (int trial = 0; trial < 10; ++trial) {
    const Representation target = testutil::random_l1_target(md, 8, rng);
    const VectorF f = target.values;
    REQUIRE(target.l1() == Catch::Approx(1.0));

    GreedyConfig cfg;
    cfg.max_steps = 24;
    cfg.residual_stop_tol = 0.0;

    const GreedyTrace oga = run_oga(ctx, md, f, cfg);
    CHECK(residual_bound_check(oga, 1.0, 0.0, BoundKind::oga_l1).passed);

    cfg.alpha_schedule = AlphaSchedule::harmonic;
    const GreedyTrace rga_h = run_rga(ctx, md, f, cfg);
    CHECK(residual_bound_check(rga_h, 1.0, 0.0, BoundKind::rga_l1).passed);
    CHECK(residual_bound_check(rga_h, 1.0, 0.0, BoundKind::rga_additive, 2.0,
                               ctx.norm(f))
              .passed);

    cfg.alpha_schedule = AlphaSchedule::two_over_k;
    const GreedyTrace rga_2 = run_rga(ctx, md, f, cfg);
    CHECK(residual_bound_check(rga_2, 1.0, 0.0, BoundKind::rga_surrogate, 2.0,
                               ctx.norm(f))
              .passed);

    cfg.alpha_schedule = AlphaSchedule::lambda_over_k;
    cfg.lambda = 2.0;
    const GreedyTrace rga_l = run_rga(ctx, md, f, cfg);
    CHECK(residual_bound_check(rga_l, 1.0, 0.0, BoundKind::rga_surrogate_lambda,
                               cfg.lambda, ctx.norm(f))
              .passed);

    const GreedyTrace spa = run_spa(ctx, md, f, cfg);
    CHECK(residual_bound_check(spa, 1.0, 0.0, BoundKind::oga_l1).passed);
  }
}

TEST_CASE("bound right-hand sides are the advertised closed forms") {
  GreedyTrace t;
  t.initial_norm = 0.6;
  for (int k = 1; k <= 4; ++k)
    t.steps.push_back({0, 1.0, 0.0, 0.0});  // residuals all zero: never violate

  SECTION("variation-only forms") {
    const BoundCheck oga = residual_bound_check(t, 1.0, 0.0, BoundKind::oga_l1);
    CHECK(oga.rhs[0] == Catch::Approx(1.0 / std::sqrt(2.0)));
    CHECK(oga.rhs[3] == Catch::Approx(1.0 / std::sqrt(5.0)));

    // sqrt(M^2 - ||f||^2) = 0.8 with M = 1, ||f|| = 0.6
    const BoundCheck rga = residual_bound_check(t, 1.0, 0.0, BoundKind::rga_l1);
    CHECK(rga.rhs[0] == Catch::Approx(0.8));
    CHECK(rga.rhs[3] == Catch::Approx(0.4));
    CHECK(rga.passed);
  }

  SECTION("surrogate forms add the approximation distance") {
    const BoundCheck oga =
        residual_bound_check(t, 2.0, 0.5, BoundKind::oga_surrogate);
    CHECK(oga.rhs[0] == Catch::Approx(std::sqrt(0.25 + 16.0)));
    CHECK(oga.rhs[3] == Catch::Approx(std::sqrt(0.25 + 4.0)));

    const BoundCheck rga = residual_bound_check(t, 2.0, 0.5, BoundKind::rga_surrogate,
                                                2.0, 1.0);
    CHECK(rga.rhs[0] == Catch::Approx(std::sqrt(0.25 + 12.0)));

    // lambda = 2 gives the same constant 4 as the dedicated two-over-k form
    const BoundCheck lam = residual_bound_check(
        t, 2.0, 0.5, BoundKind::rga_surrogate_lambda, 2.0, 1.0);
    const BoundCheck two = residual_bound_check(t, 2.0, 0.5, BoundKind::rga_surrogate,
                                                2.0, 1.0);
    for (int i = 0; i < 4; ++i) CHECK(lam.rhs[i] == Catch::Approx(two.rhs[i]));

    const BoundCheck add = residual_bound_check(t, 2.0, 0.5, BoundKind::rga_additive,
                                                2.0, 1.0);
    CHECK(add.rhs[0] == Catch::Approx(0.5 + std::sqrt(3.0)));
    CHECK(add.rhs[3] == Catch::Approx(0.5 + std::sqrt(3.0) / 2.0));
  }

  SECTION("violations report the first offending step") {
    GreedyTrace bad = t;
    bad.steps[2].residual_norm = 10.0;
    const BoundCheck chk = residual_bound_check(bad, 1.0, 0.0, BoundKind::oga_l1);
    CHECK_FALSE(chk.passed);
    CHECK(chk.first_violation == 3);

    // a generous absolute tolerance absorbs the excursion
    CHECK(residual_bound_check(bad, 1.0, 0.0, BoundKind::oga_l1, 2.0, 0.0, 10.0)
              .passed);
  }

  SECTION("argument validation") {
    CHECK_THROWS_AS(residual_bound_check(t, -1.0, 0.0, BoundKind::oga_l1),
                    std::invalid_argument);
    CHECK_THROWS_AS(residual_bound_check(t, 1.0, 0.5, BoundKind::oga_l1),
                    std::invalid_argument);
    CHECK_THROWS_AS(residual_bound_check(t, 1.0, 0.5, BoundKind::rga_l1),
                    std::invalid_argument);
    CHECK_THROWS_AS(
        residual_bound_check(t, 1.0, 0.0, BoundKind::rga_surrogate_lambda, 1.0),
        std::invalid_argument);
  }
}

TEST_CASE("pure and orthogonal greedy coincide on orthonormal dictionaries") {
  Rng rng(17);
  const int m = 12;
  MaterializedDictionary md = canonical_md(m);
  SpaceContext ctx = SpaceContext::unit(m);
  VectorF f(m);
  for (int i = 0; i < m; ++i) f(i) = rng.normal();

  GreedyConfig cfg;
  cfg.max_steps = 8;
  const GreedyTrace pga = run_pga(ctx, md, f, cfg);
  const GreedyTrace oga = run_oga(ctx, md, f, cfg);
  const GreedyTrace spa = run_spa(ctx, md, f, cfg);
  REQUIRE(pga.steps.size() == oga.steps.size());
  REQUIRE(spa.steps.size() == oga.steps.size());
  for (std::size_t k = 0; k < oga.steps.size(); ++k) {
    CHECK(pga.steps[k].atom == oga.steps[k].atom);
    CHECK(spa.steps[k].atom == oga.steps[k].atom);
    CHECK(pga.steps[k].residual_norm ==
          Catch::Approx(oga.steps[k].residual_norm).margin(1e-10));
    CHECK(spa.steps[k].residual_norm ==
          Catch::Approx(oga.steps[k].residual_norm).margin(1e-10));
  }
}

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dictionary.hpp"
#include "gram.hpp"
#include "space.hpp"

namespace pursuit {

enum class Algorithm { pga, oga, rga, spa };

// Relaxation schedules, by step k = 1, 2, ...
//   harmonic:    alpha_k = 1 - 1/k
//   two_over_k:  alpha_1 = 0, alpha_k = 1 - 2/k
//   lambda_over_k: alpha_k = max(0, 1 - lambda/k); requires lambda >= 1, and
//   lambda == 1 is accepted but flagged on the trace (the usual error bound
//   needs lambda > 1).
enum class AlphaSchedule { harmonic, two_over_k, lambda_over_k };

struct GreedyConfig {
  Algorithm algorithm = Algorithm::oga;
  AlphaSchedule alpha_schedule = AlphaSchedule::harmonic;
  double lambda = 2.0;
  int max_steps = 64;
  // Absolute residual-norm stop; negative selects 1e-12 * ||f||.
  double residual_stop_tol = -1.0;
  // Dictionary prefix D_m to search; negative means all atoms.
  int truncation = -1;
};

enum class StopReason { max_steps, tol, degenerate };

struct GreedyStep {
  int atom = -1;
  double alpha = 1.0;
  double beta = 0.0;
  double residual_norm = 0.0;
};

struct GreedyTrace {
  double initial_norm = 0.0;
  std::vector<GreedyStep> steps;
  // Unique selected atoms in first-selection order, plus per-step snapshots of
  // the expansion coefficients over that list (prefix sized).  The last
  // snapshot reproduces the final approximant.
  std::vector<int> selected;
  std::vector<std::vector<double>> step_coeffs;
  std::vector<double> coefficients;  // == step_coeffs.back() (empty if no steps)
  StopReason stopped_reason = StopReason::max_steps;
  bool schedule_flagged = false;  // lambda == 1

  // Residual norms indexed by step count: entry 0 is the starting norm and
  // entry k the norm after k steps.
  std::vector<double> residual_norms() const {
    std::vector<double> r;
    r.reserve(steps.size() + 1);
    r.push_back(initial_norm);
    for (const auto& s : steps) r.push_back(s.residual_norm);
    return r;
  }
};

namespace detail {

inline double alpha_for_step(const GreedyConfig& cfg, int k) {
  switch (cfg.alpha_schedule) {
    case AlphaSchedule::harmonic: return 1.0 - 1.0 / k;
    case AlphaSchedule::two_over_k: return k == 1 ? 0.0 : 1.0 - 2.0 / k;
    case AlphaSchedule::lambda_over_k: return std::max(0.0, 1.0 - cfg.lambda / k);
  }
  return 0.0;
}

inline int coeff_slot(std::vector<int>& selected, int atom) {
  for (int i = 0; i < static_cast<int>(selected.size()); ++i)
    if (selected[i] == atom) return i;
  selected.push_back(atom);
  return static_cast<int>(selected.size()) - 1;
}

}  // namespace detail

// Runs the configured greedy algorithm on target f over the dictionary prefix.
//
//   pga: f_k = f_{k-1} + <r_{k-1}, g_k> g_k, g_k maximizing |<r_{k-1}, g>|.
//   oga: f_k = orthogonal projection of f onto span{g_1..g_k}, same selection.
//   rga: f_k = alpha_k f_{k-1} + beta_k g_k with g_k maximizing
//        |<f - alpha_k f_{k-1}, g>| and beta_k the optimal coefficient.
//   spa: g_k chosen to minimize the post-projection error; equivalently it
//        maximizes <r, g>^2 / ||g - P_k g||^2, which costs O(m * k) inner
//        products per step (one reorthogonalization of every candidate
//        against the current factorization).
//
// Stops at max_steps, when the residual norm falls to the stop tolerance,
// when the best correlation is exactly zero (reason tol), or when a selected
// atom is numerically inside the current span (reason degenerate).
inline GreedyTrace run_greedy(const SpaceContext& ctx,
                              const MaterializedDictionary& md, const VectorF& f,
                              const GreedyConfig& cfg) {
  if (cfg.max_steps < 0) throw std::invalid_argument("run_greedy: negative max_steps");
  if (cfg.alpha_schedule == AlphaSchedule::lambda_over_k && cfg.lambda < 1.0)
    throw std::invalid_argument("run_greedy: lambda schedule requires lambda >= 1");
  const int m = cfg.truncation < 0 ? md.size()
                                   : std::min(cfg.truncation, md.size());
  if (m < 1) throw std::invalid_argument("run_greedy: empty dictionary prefix");

  GreedyTrace trace;
  trace.initial_norm = ctx.norm(f);
  trace.schedule_flagged =
      cfg.alpha_schedule == AlphaSchedule::lambda_over_k && cfg.lambda == 1.0;
  const double tol = cfg.residual_stop_tol >= 0.0 ? cfg.residual_stop_tol
                                                  : 1e-12 * trace.initial_norm;

  if (md.live_count(m) == 0) {
    trace.stopped_reason = StopReason::degenerate;
    return trace;
  }
  if (trace.initial_norm <= tol) {
    trace.stopped_reason = StopReason::tol;
    return trace;
  }

  const bool projecting = cfg.algorithm == Algorithm::oga || cfg.algorithm == Algorithm::spa;
  GramState span(ctx.dim());
  VectorF r = f;                                     // current residual
  VectorF fk = VectorF::Zero(ctx.dim());             // pga/rga approximant
  std::vector<double> coeffs;                        // over trace.selected
  trace.stopped_reason = StopReason::max_steps;

  for (int k = 1; k <= cfg.max_steps; ++k) {
    GreedyStep step;
    step.alpha = projecting || cfg.algorithm == Algorithm::pga
                     ? 1.0
                     : detail::alpha_for_step(cfg, k);

    if (cfg.algorithm == Algorithm::spa) {
      // Residual is orthogonal to the span, so <r, g - P g> = <r, g>; the
      // error decrease of a candidate is corr^2 over its orthogonal mass.
      const Eigen::VectorXd corr = md.atoms.leftCols(m).transpose() * ctx.weighted(r);
      const double rtol = span.rank_tol_effective() > 0 ? span.rank_tol_effective() : 1e-10;
      int best = -1;
      double best_gain = -1.0, best_corr = 0.0;
      Eigen::MatrixXd proj;
      if (span.size() > 0)
        proj = span.basis_storage().leftCols(span.size()).transpose() *
               (ctx.weights().asDiagonal() * md.atoms.leftCols(m));
      for (int j = 0; j < m; ++j) {
        if (md.dead[j]) continue;
        double ortho_sq = 1.0;
        if (span.size() > 0) ortho_sq -= proj.col(j).squaredNorm();
        if (ortho_sq <= rtol * rtol) continue;  // candidate inside the span
        const double gain = corr(j) * corr(j) / ortho_sq;
        if (gain > best_gain) {
          best_gain = gain;
          best = j;
          best_corr = corr(j);
        }
      }
      if (best < 0) {
        trace.stopped_reason = StopReason::degenerate;
        break;
      }
      if (best_corr == 0.0) {
        trace.stopped_reason = StopReason::tol;
        break;
      }
      step.atom = best;
      step.beta = best_corr;
      if (!span.try_extend(ctx, md.atoms.col(best))) {
        trace.stopped_reason = StopReason::degenerate;
        break;
      }
    } else if (cfg.algorithm == Algorithm::rga) {
      const VectorF u = f - step.alpha * fk;
      const Selection sel = select_max_correlation(md, m, ctx, u);
      if (sel.correlation == 0.0) {
        trace.stopped_reason = StopReason::tol;
        break;
      }
      step.atom = sel.index;
      step.beta = sel.correlation;
    } else {  // pga, oga
      const Selection sel = select_max_correlation(md, m, ctx, r);
      if (sel.correlation == 0.0) {
        trace.stopped_reason = StopReason::tol;
        break;
      }
      step.atom = sel.index;
      step.beta = sel.correlation;
      if (cfg.algorithm == Algorithm::oga &&
          !span.try_extend(ctx, md.atoms.col(sel.index))) {
        trace.stopped_reason = StopReason::degenerate;
        break;
      }
    }

    // Update approximant, residual and the coefficient snapshot.
    switch (cfg.algorithm) {
      case Algorithm::pga: {
        r -= step.beta * md.atoms.col(step.atom);
        const int slot = detail::coeff_slot(trace.selected, step.atom);
        coeffs.resize(trace.selected.size(), 0.0);
        coeffs[slot] += step.beta;
        break;
      }
      case Algorithm::rga: {
        fk = step.alpha * fk + step.beta * md.atoms.col(step.atom);
        r = f - fk;
        for (double& c : coeffs) c *= step.alpha;
        const int slot = detail::coeff_slot(trace.selected, step.atom);
        coeffs.resize(trace.selected.size(), 0.0);
        coeffs[slot] += step.beta;
        break;
      }
      case Algorithm::oga:
      case Algorithm::spa: {
        // New basis vector absorbs its share of the residual.
        const int kk = span.size();
        const VectorF q = span.basis_storage().col(kk - 1);
        r -= ctx.inner(q, r) * q;
        trace.selected.push_back(step.atom);
        const Eigen::VectorXd y = span.basis_coeffs(ctx, f);
        const Eigen::VectorXd a = span.atom_coeffs_from_basis(y);
        coeffs.assign(a.data(), a.data() + a.size());
        break;
      }
    }

    step.residual_norm = ctx.norm(r);
    trace.steps.push_back(step);
    trace.step_coeffs.push_back(coeffs);
    if (step.residual_norm <= tol) {
      trace.stopped_reason = StopReason::tol;
      break;
    }
  }

  if (!trace.step_coeffs.empty()) trace.coefficients = trace.step_coeffs.back();
  return trace;
}

inline GreedyTrace run_pga(const SpaceContext& ctx, const MaterializedDictionary& md,
                           const VectorF& f, GreedyConfig cfg = {}) {
  cfg.algorithm = Algorithm::pga;
  return run_greedy(ctx, md, f, cfg);
}
inline GreedyTrace run_oga(const SpaceContext& ctx, const MaterializedDictionary& md,
                           const VectorF& f, GreedyConfig cfg = {}) {
  cfg.algorithm = Algorithm::oga;
  return run_greedy(ctx, md, f, cfg);
}
inline GreedyTrace run_rga(const SpaceContext& ctx, const MaterializedDictionary& md,
                           const VectorF& f, GreedyConfig cfg = {}) {
  cfg.algorithm = Algorithm::rga;
  return run_greedy(ctx, md, f, cfg);
}
inline GreedyTrace run_spa(const SpaceContext& ctx, const MaterializedDictionary& md,
                           const VectorF& f, GreedyConfig cfg = {}) {
  cfg.algorithm = Algorithm::spa;
  return run_greedy(ctx, md, f, cfg);
}

// A priori residual bounds for greedy runs on targets with known variation
// norm.  With M an upper bound on the variation norm of the surrogate h and
// d = ||f - h||:
//   oga_l1:          ||r_N|| <= M / sqrt(N + 1)          (needs f = h, d = 0)
//   rga_l1:          ||r_N|| <= sqrt(M^2 - ||f||^2) / sqrt(N)   (d = 0;
//                    relaxed algorithm with the harmonic schedule)
//   oga_surrogate:   ||r_N||^2 <= d^2 + 4 M^2 / N
//   rga_surrogate:   ||r_N||^2 <= d^2 + 4 (M^2 - ||h||^2) / N   (two_over_k)
//   rga_surrogate_lambda: same with constant lambda^2/(lambda-1), lambda > 1
//   rga_additive:    ||r_N|| <= d + sqrt(M^2 - ||h||^2) / sqrt(N) (harmonic)
// Passing h_norm = 0 (unknown) keeps every bound valid, just looser.
enum class BoundKind {
  oga_l1,
  rga_l1,
  oga_surrogate,
  rga_surrogate,
  rga_surrogate_lambda,
  rga_additive,
};

struct BoundCheck {
  bool passed = true;
  int first_violation = -1;  // 1-based step, -1 if none
  std::vector<double> rhs;   // per executed step
};

inline BoundCheck residual_bound_check(const GreedyTrace& trace, double h_l1,
                                       double h_dist, BoundKind kind,
                                       double lambda = 2.0, double h_norm = 0.0,
                                       double abs_tol = 0.0) {
  if (h_l1 < 0 || h_dist < 0)
    throw std::invalid_argument("residual_bound_check: negative norm argument");
  if (kind == BoundKind::rga_surrogate_lambda && lambda <= 1.0)
    throw std::invalid_argument(
        "residual_bound_check: lambda bound requires lambda > 1");
  if ((kind == BoundKind::oga_l1 || kind == BoundKind::rga_l1) && h_dist != 0.0)
    throw std::invalid_argument(
        "residual_bound_check: pure variation bound requires h_dist == 0");

  BoundCheck out;
  out.rhs.reserve(trace.steps.size());
  const double fnorm = trace.initial_norm;
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    const double n = static_cast<double>(i + 1);
    double rhs = 0.0;
    switch (kind) {
      case BoundKind::oga_l1:
        rhs = h_l1 / std::sqrt(n + 1.0);
        break;
      case BoundKind::rga_l1:
        rhs = std::sqrt(std::max(h_l1 * h_l1 - fnorm * fnorm, 0.0) / n);
        break;
      case BoundKind::oga_surrogate:
        rhs = std::sqrt(h_dist * h_dist + 4.0 * h_l1 * h_l1 / n);
        break;
      case BoundKind::rga_surrogate:
        rhs = std::sqrt(h_dist * h_dist +
                        4.0 * std::max(h_l1 * h_l1 - h_norm * h_norm, 0.0) / n);
        break;
      case BoundKind::rga_surrogate_lambda: {
        const double c = lambda * lambda / (lambda - 1.0);
        rhs = std::sqrt(h_dist * h_dist +
                        c * std::max(h_l1 * h_l1 - h_norm * h_norm, 0.0) / n);
        break;
      }
      case BoundKind::rga_additive:
        rhs = h_dist +
              std::sqrt(std::max(h_l1 * h_l1 - h_norm * h_norm, 0.0) / n);
        break;
    }
    out.rhs.push_back(rhs);
    if (out.passed && trace.steps[i].residual_norm > rhs + abs_tol) {
      out.passed = false;
      out.first_violation = static_cast<int>(i + 1);
    }
  }
  return out;
}

inline const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::pga: return "pga";
    case Algorithm::oga: return "oga";
    case Algorithm::rga: return "rga";
    case Algorithm::spa: return "spa";
  }
  return "?";
}

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::max_steps: return "max_steps";
    case StopReason::tol: return "tol";
    case StopReason::degenerate: return "degenerate";
  }
  return "?";
}

inline const char* to_string(AlphaSchedule s) {
  switch (s) {
    case AlphaSchedule::harmonic: return "harmonic";
    case AlphaSchedule::two_over_k: return "two_over_k";
    case AlphaSchedule::lambda_over_k: return "lambda_over_k";
  }
  return "?";
}

inline const char* to_string(BoundKind k) {
  switch (k) {
    case BoundKind::oga_l1: return "oga_l1";
    case BoundKind::rga_l1: return "rga_l1";
    case BoundKind::oga_surrogate: return "oga_surrogate";
    case BoundKind::rga_surrogate: return "rga_surrogate";
    case BoundKind::rga_surrogate_lambda: return "rga_surrogate_lambda";
    case BoundKind::rga_additive: return "rga_additive";
  }
  return "?";
}

}  // namespace pursuit

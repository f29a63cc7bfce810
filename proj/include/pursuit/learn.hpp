#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "analysis.hpp"
#include "dictionary.hpp"
#include "engines.hpp"
#include "rng.hpp"
#include "space.hpp"

namespace pursuit {

// Clamp to [-bound, bound].
inline double truncate(double value, double bound) {
  if (bound < 0) throw std::invalid_argument("truncate: negative bound");
  return std::min(bound, std::abs(value)) * (value < 0 ? -1.0 : 1.0);
}

// Reference penalty constant kappa0 = 2568 B^4 (a + 5).  Far too conservative
// for desk-scale runs (kappa ~ 1 behaves well); exposed for reference.
inline double penalty_kappa0(double b, double a_exp) {
  return 2568.0 * b * b * b * b * (a_exp + 5.0);
}

// n labelled points with a known bound |y_i| <= B.
struct SampleSet {
  Eigen::MatrixXd xs;  // n x D
  Eigen::VectorXd ys;  // n
  double B = 0.0;

  int n() const { return static_cast<int>(xs.rows()); }
  int feature_dim() const { return static_cast<int>(xs.cols()); }

  void validate() const {
    if (xs.rows() != ys.size() || xs.rows() == 0)
      throw std::invalid_argument("SampleSet: shape mismatch or empty");
    if (B < 0) throw std::invalid_argument("SampleSet: negative bound");
    if ((ys.array().abs() > B).any())
      throw std::invalid_argument("SampleSet: |y| exceeds B");
  }
};

// Empirical inner-product context of a sample set: every point weighs 1/n,
// repeated x values staying separate coordinates.
inline SpaceContext empirical_context(const SampleSet& s) {
  return SpaceContext::empirical(s.n());
}

enum class SelectionRule { penalized, holdout };

struct LearnConfig {
  double kappa = 1.0;
  double a_exp = 1.0;  // dictionary truncation m(n) = floor(n^a)
  GreedyConfig algorithm{};
  SelectionRule selection = SelectionRule::penalized;
  double holdout_fraction = 0.5;
  int k_cap = 64;
};

struct RiskRow {
  int k = 0;
  double empirical_risk = 0.0;  // after truncating the predictor at B
  double penalty = 0.0;
  double penalized = 0.0;
};

struct FitResult {
  int k_star = 0;
  std::vector<int> atoms;      // dictionary indices, selection order
  std::vector<double> coeffs;  // pre-truncation expansion over those atoms
  std::vector<double> scales;  // per-atom raw norms in the fit context
  double B = 0.0;
  double kappa = 0.0;
  int n = 0;
  int m = 0;  // dictionary prefix used
  std::vector<RiskRow> risk_table;
  GreedyTrace trace;  // diagnostics
};

namespace detail {

inline void require_learnable(const GreedyConfig& g) {
  if (g.algorithm == Algorithm::pga)
    throw std::invalid_argument(
        "fit: pure greedy has no risk guarantee here; use oga, spa or rga");
}

// Relaxed greedy in the learning setting always runs the two_over_k schedule.
inline GreedyConfig learning_greedy(const LearnConfig& cfg, int k_cap, int m) {
  GreedyConfig g = cfg.algorithm;
  require_learnable(g);
  if (g.algorithm == Algorithm::rga) g.alpha_schedule = AlphaSchedule::two_over_k;
  g.max_steps = k_cap;
  g.truncation = m;
  g.residual_stop_tol = 0.0;  // run the full ladder; model choice prunes
  return g;
}

inline int effective_k_cap(const LearnConfig& cfg, const SampleSet& s, int m) {
  int cap = std::min(cfg.k_cap, std::min(s.n(), m));
  // Penalty alone exceeds the trivial risk beyond B^2 n / (kappa log n).
  if (cfg.selection == SelectionRule::penalized) {
    const double n = s.n();
    const double limit = std::ceil(s.B * s.B * n / (cfg.kappa * std::log(n)));
    if (limit < cap) cap = static_cast<int>(std::max(1.0, limit));
  }
  return cap;
}

// Predictions at each prefix k from the coefficient snapshots.
inline VectorF prefix_prediction(const MaterializedDictionary& md,
                                 const GreedyTrace& trace, int k) {
  VectorF p = VectorF::Zero(md.atoms.rows());
  if (k == 0) return p;
  const auto& coef = trace.step_coeffs[k - 1];
  for (std::size_t j = 0; j < coef.size(); ++j)
    p += coef[j] * md.atoms.col(trace.selected[j]);
  return p;
}

inline double truncated_risk(const SpaceContext& ctx, const Eigen::VectorXd& y,
                             VectorF pred, double b) {
  for (int i = 0; i < pred.size(); ++i) pred(i) = truncate(pred(i), b);
  return ctx.norm_sq(y - pred);
}

}  // namespace detail

// Greedy least squares on the sample with complexity-penalized model choice:
// runs the configured algorithm on y in the empirical norm over the prefix
// m = floor(n^a) of the dictionary, then picks
//   k* = argmin_k ||y - T_B f_k||_n^2 + kappa k log(n) / n,
// including k = 0 (the zero model).  Ties go to the smallest k.
inline FitResult fit(const SampleSet& s, const Dictionary& dict,
                     const LearnConfig& cfg) {
  s.validate();
  if (cfg.kappa <= 0) throw std::invalid_argument("fit: kappa must be positive");
  const int n = s.n();
  const int m = truncation_size(n, cfg.a_exp, dict.total_atoms());
  if (m < 1) throw std::invalid_argument("fit: empty dictionary prefix");

  const SpaceContext ctx = empirical_context(s);
  const MaterializedDictionary md = materialize(dict, ctx, s.xs, m);
  if (md.live_count() == 0) throw std::runtime_error("fit: all atoms dead on sample");

  const int k_cap = detail::effective_k_cap(cfg, s, m);
  const GreedyConfig g = detail::learning_greedy(cfg, k_cap, m);
  GreedyTrace trace = run_greedy(ctx, md, s.ys, g);

  FitResult out;
  out.B = s.B;
  out.kappa = cfg.kappa;
  out.n = n;
  out.m = m;

  const double logn_over_n = std::log(static_cast<double>(n)) / n;
  const int k_max = static_cast<int>(trace.steps.size());
  int best_k = 0;
  double best_pen = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= k_max; ++k) {
    RiskRow row;
    row.k = k;
    row.empirical_risk =
        detail::truncated_risk(ctx, s.ys, detail::prefix_prediction(md, trace, k), s.B);
    row.penalty = cfg.kappa * k * logn_over_n;
    row.penalized = row.empirical_risk + row.penalty;
    out.risk_table.push_back(row);
    if (row.penalized < best_pen) {
      best_pen = row.penalized;
      best_k = k;
    }
  }
  out.k_star = best_k;

  if (best_k > 0) {
    const auto& coef = trace.step_coeffs[best_k - 1];
    for (std::size_t j = 0; j < coef.size(); ++j) {
      out.atoms.push_back(trace.selected[j]);
      out.coeffs.push_back(coef[j]);
      out.scales.push_back(md.scales(trace.selected[j]));
    }
  }
  out.trace = std::move(trace);
  return out;
}

// Hold-out model choice: the greedy ladder is built on the first part of the
// sample, k* minimizes the validation risk on the rest (ties to smallest k).
inline FitResult holdout_fit(const SampleSet& s, const Dictionary& dict,
                             const LearnConfig& cfg) {
  s.validate();
  const int n = s.n();
  const int n1 = static_cast<int>(std::floor(cfg.holdout_fraction * n));
  if (n1 < 1 || n1 >= n)
    throw std::invalid_argument("holdout_fit: split leaves an empty part");

  SampleSet train{s.xs.topRows(n1), s.ys.head(n1), s.B};
  const SpaceContext ctx1 = empirical_context(train);
  const int m = truncation_size(n1, cfg.a_exp, dict.total_atoms());
  const MaterializedDictionary md1 = materialize(dict, ctx1, train.xs, m);
  if (md1.live_count() == 0)
    throw std::runtime_error("holdout_fit: all atoms dead on training part");

  const int k_cap = std::min(cfg.k_cap, std::min(n1, m));
  GreedyTrace trace = run_greedy(ctx1, md1, train.ys, detail::learning_greedy(cfg, k_cap, m));

  const int n2 = n - n1;
  const SpaceContext ctx2 = SpaceContext::empirical(n2);
  const Eigen::MatrixXd x2 = s.xs.bottomRows(n2);
  const Eigen::VectorXd y2 = s.ys.tail(n2);

  // Validation-side atom values, renormalized by the training scales.
  const int k_max = static_cast<int>(trace.steps.size());
  Eigen::MatrixXd a2(n2, trace.selected.size());
  for (std::size_t j = 0; j < trace.selected.size(); ++j)
    a2.col(j) = dict.atom_eval(trace.selected[j], x2) / md1.scales(trace.selected[j]);

  FitResult out;
  out.B = s.B;
  out.kappa = 0.0;
  out.n = n;
  out.m = m;
  int best_k = 0;
  double best_risk = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= k_max; ++k) {
    VectorF pred = VectorF::Zero(n2);
    if (k > 0) {
      const auto& coef = trace.step_coeffs[k - 1];
      for (std::size_t j = 0; j < coef.size(); ++j) pred += coef[j] * a2.col(j);
    }
    RiskRow row;
    row.k = k;
    row.empirical_risk = detail::truncated_risk(ctx2, y2, std::move(pred), s.B);
    row.penalized = row.empirical_risk;
    out.risk_table.push_back(row);
    if (row.empirical_risk < best_risk) {
      best_risk = row.empirical_risk;
      best_k = k;
    }
  }
  out.k_star = best_k;
  if (best_k > 0) {
    const auto& coef = trace.step_coeffs[best_k - 1];
    for (std::size_t j = 0; j < coef.size(); ++j) {
      out.atoms.push_back(trace.selected[j]);
      out.coeffs.push_back(coef[j]);
      out.scales.push_back(md1.scales(trace.selected[j]));
    }
  }
  out.trace = std::move(trace);
  return out;
}

// Raw (untruncated) predictions of a fitted model at new points.
inline VectorF predict_raw(const Dictionary& dict, const FitResult& fr,
                           const Eigen::MatrixXd& points) {
  VectorF p = VectorF::Zero(points.rows());
  for (std::size_t j = 0; j < fr.atoms.size(); ++j)
    p += fr.coeffs[j] * dict.atom_eval(fr.atoms[j], points) / fr.scales[j];
  return p;
}

// Predictions truncated at the sample bound B — the actual estimator.
inline VectorF predict(const Dictionary& dict, const FitResult& fr,
                       const Eigen::MatrixXd& points) {
  VectorF p = predict_raw(dict, fr, points);
  for (int i = 0; i < p.size(); ++i) p(i) = truncate(p(i), fr.B);
  return p;
}

// Ground truth for synthetic experiments: a regression function given as an
// expansion over the dictionary atoms normalized in L2(rho_X), with rho_X
// uniform-or-weighted on a finite grid and centered bounded noise.
struct SyntheticModel {
  Dictionary dict;
  Eigen::MatrixXd grid;          // G x D support of the x-marginal
  Eigen::VectorXd grid_weights;  // sums to 1
  std::vector<int> atoms;
  std::vector<double> coeffs;    // over rho-normalized atoms
  double noise_amplitude = 0.0;  // uniform on [-amp, amp]
  double B = 0.0;                // >= sup|f_rho| + noise_amplitude
  VectorF f_rho;                 // values on the grid

  SpaceContext rho_context() const { return SpaceContext(grid_weights); }

  // Raw norm of atom j under rho_X, for rho-normalized evaluation anywhere.
  double rho_scale(int atom) const {
    return rho_context().norm(dict.atom_eval(atom, grid));
  }

  // Draw n points: grid cell by inverse CDF, then one uniform noise variate.
  SampleSet sample(int n, Rng& rng) const {
    SampleSet s;
    s.xs.resize(n, grid.cols());
    s.ys.resize(n);
    s.B = B;
    Eigen::VectorXd cdf(grid_weights.size());
    double acc = 0.0;
    for (int i = 0; i < grid_weights.size(); ++i) {
      acc += grid_weights(i);
      cdf(i) = acc;
    }
    for (int i = 0; i < n; ++i) {
      const double u = rng.uniform();
      int cell = 0;
      while (cell + 1 < cdf.size() && u > cdf(cell)) ++cell;
      s.xs.row(i) = grid.row(cell);
      s.ys(i) = f_rho(cell) + noise_amplitude * (2.0 * rng.uniform() - 1.0);
    }
    return s;
  }
};

inline SyntheticModel make_synthetic_model(Dictionary dict, Eigen::MatrixXd grid,
                                           Eigen::VectorXd grid_weights,
                                           std::vector<int> atoms,
                                           std::vector<double> coeffs,
                                           double noise_amplitude) {
  if (atoms.size() != coeffs.size())
    throw std::invalid_argument("make_synthetic_model: length mismatch");
  if (std::abs(grid_weights.sum() - 1.0) > 1e-12)
    throw std::invalid_argument("make_synthetic_model: weights must sum to 1");
  SyntheticModel m;
  m.dict = std::move(dict);
  m.grid = std::move(grid);
  m.grid_weights = std::move(grid_weights);
  m.atoms = std::move(atoms);
  m.coeffs = std::move(coeffs);
  m.noise_amplitude = noise_amplitude;
  const SpaceContext rho = m.rho_context();
  m.f_rho = VectorF::Zero(m.grid.rows());
  for (std::size_t j = 0; j < m.atoms.size(); ++j) {
    const VectorF raw = m.dict.atom_eval(m.atoms[j], m.grid);
    const double s = rho.norm(raw);
    if (s <= kDeadTol)
      throw std::invalid_argument("make_synthetic_model: dead atom in truth");
    m.f_rho += m.coeffs[j] / s * raw;
  }
  m.B = m.f_rho.cwiseAbs().maxCoeff() + noise_amplitude;
  return m;
}

struct RiskEstimate {
  double value = 0.0;
  double std_error = 0.0;  // 0 for exact integration
};

// Excess risk ||T_B f_hat - f_rho||^2 in L2(rho_X), exact on the finite grid.
inline RiskEstimate excess_risk(const Dictionary& fit_dict, const FitResult& fr,
                                const SyntheticModel& truth) {
  const VectorF pred = predict(fit_dict, fr, truth.grid);
  const VectorF diff = pred - truth.f_rho;
  return {truth.rho_context().norm_sq(diff), 0.0};
}

// Monte Carlo variant for marginals too large to enumerate.  Cells are drawn
// from the grid weights, matching the exact integral's measure.
inline RiskEstimate excess_risk_mc(const Dictionary& fit_dict, const FitResult& fr,
                                   const SyntheticModel& truth, int n_points,
                                   Rng& rng) {
  if (n_points < 2) throw std::invalid_argument("excess_risk_mc: need >= 2 points");
  Eigen::VectorXd cdf(truth.grid_weights.size());
  double acc = 0.0;
  for (int i = 0; i < truth.grid_weights.size(); ++i) {
    acc += truth.grid_weights(i);
    cdf(i) = acc;
  }
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n_points; ++i) {
    const double u = rng.uniform();
    int cell = 0;
    while (cell + 1 < cdf.size() && u > cdf(cell)) ++cell;
    Eigen::MatrixXd x = truth.grid.row(cell);
    const double d = predict(fit_dict, fr, x)(0) - truth.f_rho(cell);
    sum += d * d;
    sum_sq += d * d * d * d;
  }
  const double mean = sum / n_points;
  const double var = std::max(sum_sq / n_points - mean * mean, 0.0);
  return {mean, std::sqrt(var / n_points)};
}

struct L1nCheck {
  double mean_sq_l1n = 0.0;  // E (sum |c_g| ||g||_n)^2 over designs
  double l1_sq = 0.0;        // (sum |c_g|)^2
  double std_error = 0.0;
};

namespace detail {

inline double l1n_value(const SyntheticModel& truth,
                        const std::vector<int>& atoms,
                        const std::vector<double>& coeffs,
                        const std::vector<double>& rho_scales,
                        const Eigen::MatrixXd& design_xs) {
  const SpaceContext ctx = SpaceContext::empirical(static_cast<int>(design_xs.rows()));
  double v = 0.0;
  for (std::size_t j = 0; j < atoms.size(); ++j) {
    const VectorF g = truth.dict.atom_eval(atoms[j], design_xs) / rho_scales[j];
    v += std::abs(coeffs[j]) * ctx.norm(g);  // dead-on-design atoms add zero
  }
  return v;
}

}  // namespace detail

// Monte Carlo check that the expected squared empirical-renormalized l1 value
// of a fixed expansion does not exceed its population counterpart.  Returns
// the two sides and the standard error of the Monte Carlo mean.
inline L1nCheck l1n_vs_l1_check(const std::vector<int>& atoms,
                                const std::vector<double>& coeffs,
                                const SyntheticModel& truth, int design_n,
                                int trials, Rng& rng) {
  if (trials < 30)
    throw std::invalid_argument("l1n_vs_l1_check: need at least 30 trials");
  if (atoms.size() != coeffs.size())
    throw std::invalid_argument("l1n_vs_l1_check: length mismatch");
  std::vector<double> scales;
  double l1 = 0.0;
  for (std::size_t j = 0; j < atoms.size(); ++j) {
    scales.push_back(truth.rho_scale(atoms[j]));
    l1 += std::abs(coeffs[j]);
  }
  double sum = 0.0, sum_sq = 0.0;
  for (int t = 0; t < trials; ++t) {
    const SampleSet s = truth.sample(design_n, rng);
    const double v = detail::l1n_value(truth, atoms, coeffs, scales, s.xs);
    sum += v * v;
    sum_sq += v * v * v * v;
  }
  L1nCheck out;
  out.mean_sq_l1n = sum / trials;
  out.l1_sq = l1 * l1;
  const double var = std::max(sum_sq / trials - out.mean_sq_l1n * out.mean_sq_l1n, 0.0);
  out.std_error = std::sqrt(var / trials);
  return out;
}

// Exact expectation of the same quantity by enumerating every design of size
// design_n over the truth's grid (G^n designs; guarded).
inline L1nCheck l1n_vs_l1_exact(const std::vector<int>& atoms,
                                const std::vector<double>& coeffs,
                                const SyntheticModel& truth, int design_n) {
  const int g = static_cast<int>(truth.grid.rows());
  double count = 1.0;
  for (int i = 0; i < design_n; ++i) count *= g;
  if (count > 1e6)
    throw std::invalid_argument("l1n_vs_l1_exact: too many designs to enumerate");
  std::vector<double> scales;
  double l1 = 0.0;
  for (std::size_t j = 0; j < atoms.size(); ++j) {
    scales.push_back(truth.rho_scale(atoms[j]));
    l1 += std::abs(coeffs[j]);
  }
  std::vector<int> idx(design_n, 0);
  Eigen::MatrixXd xs(design_n, truth.grid.cols());
  double expectation = 0.0;
  while (true) {
    double w = 1.0;
    for (int i = 0; i < design_n; ++i) {
      xs.row(i) = truth.grid.row(idx[i]);
      w *= truth.grid_weights(idx[i]);
    }
    const double v = detail::l1n_value(truth, atoms, coeffs, scales, xs);
    expectation += w * v * v;
    int i = design_n - 1;
    while (i >= 0 && idx[i] == g - 1) idx[i--] = 0;
    if (i < 0) break;
    ++idx[i];
  }
  L1nCheck out;
  out.mean_sq_l1n = expectation;
  out.l1_sq = l1 * l1;
  return out;
}

}  // namespace pursuit

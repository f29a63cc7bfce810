#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "dictionary.hpp"
#include "gram.hpp"
#include "rng.hpp"
#include "simplex.hpp"
#include "space.hpp"

namespace pursuit {

// Expansion over normalized dictionary atoms, with the synthesized vector kept
// alongside the coefficients.
struct Representation {
  std::vector<int> atoms;
  std::vector<double> coeffs;
  VectorF values;

  double l1() const {
    double s = 0.0;
    for (double c : coeffs) s += std::abs(c);
    return s;
  }
};

inline Representation make_representation(const MaterializedDictionary& md,
                                          std::vector<int> atoms,
                                          std::vector<double> coeffs) {
  if (atoms.size() != coeffs.size())
    throw std::invalid_argument("make_representation: length mismatch");
  Representation rep;
  rep.values = VectorF::Zero(md.atoms.rows());
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    if (md.dead[atoms[i]])
      throw std::invalid_argument("make_representation: dead atom in support");
    rep.values += coeffs[i] * md.atoms.col(atoms[i]);
  }
  rep.atoms = std::move(atoms);
  rep.coeffs = std::move(coeffs);
  return rep;
}

inline bool representation_consistent(const Representation& rep,
                                      const MaterializedDictionary& md,
                                      const SpaceContext& ctx,
                                      double tol = 1e-10) {
  VectorF v = VectorF::Zero(md.atoms.rows());
  for (std::size_t i = 0; i < rep.atoms.size(); ++i)
    v += rep.coeffs[i] * md.atoms.col(rep.atoms[i]);
  return ctx.norm(v - rep.values) <= tol * std::max(1.0, ctx.norm(rep.values));
}

namespace detail {

inline double binomial_guard(int m, int n) {
  double c = 1.0;
  for (int i = 0; i < n; ++i) c *= static_cast<double>(m - i) / (i + 1);
  return c;
}

}  // namespace detail

struct BestTermResult {
  double error = 0.0;
  std::vector<int> support;  // empty for N = 0
};

// Best approximation of f from at most N atoms of the prefix D_m, by
// exhaustive support enumeration with a least-squares solve per support.
// Exponential in N by design; refuses instances beyond ~1e6 supports.
inline BestTermResult best_n_term_bruteforce(const SpaceContext& ctx,
                                             const MaterializedDictionary& md,
                                             int m, int n_terms, const VectorF& f) {
  if (m < 0 || m > md.size())
    throw std::invalid_argument("best_n_term_bruteforce: bad prefix");
  if (n_terms < 0) throw std::invalid_argument("best_n_term_bruteforce: negative N");
  std::vector<int> live;
  for (int j = 0; j < m; ++j)
    if (!md.dead[j]) live.push_back(j);
  const int l = static_cast<int>(live.size());
  n_terms = std::min(n_terms, l);
  if (n_terms == 0) return {ctx.norm(f), {}};
  if (detail::binomial_guard(l, n_terms) > 1e6)
    throw std::invalid_argument("best_n_term_bruteforce: too many supports");

  const Eigen::VectorXd sqw = ctx.weights().cwiseSqrt();
  const Eigen::VectorXd fw = sqw.cwiseProduct(f);

  BestTermResult best;
  best.error = std::numeric_limits<double>::infinity();
  std::vector<int> idx(n_terms);
  for (int i = 0; i < n_terms; ++i) idx[i] = i;
  Eigen::MatrixXd cols(ctx.dim(), n_terms);
  while (true) {
    for (int i = 0; i < n_terms; ++i)
      cols.col(i) = sqw.cwiseProduct(md.atoms.col(live[idx[i]]));
    const Eigen::VectorXd sol = cols.colPivHouseholderQr().solve(fw);
    const double err = (fw - cols * sol).norm();
    if (err < best.error) {
      best.error = err;
      best.support.clear();
      for (int i : idx) best.support.push_back(live[i]);
    }
    // next combination
    int i = n_terms - 1;
    while (i >= 0 && idx[i] == l - n_terms + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < n_terms; ++j) idx[j] = idx[j - 1] + 1;
  }
  return best;
}

// Minimal-l1 exact expansion cost of f over the prefix D_m:
//   min sum |c_g|  s.t.  sum c_g g = f.
// Solved as a linear program in split variables after projecting the equality
// constraints onto an orthonormal basis of span(D_m).  f must lie in the span
// (relative distance <= 1e-8), otherwise the distance is reported in the
// exception message.
inline double l1_norm_lp(const SpaceContext& ctx, const MaterializedDictionary& md,
                         int m, const VectorF& f) {
  if (m < 1 || m > md.size()) throw std::invalid_argument("l1_norm_lp: bad prefix");
  if (m > 64) throw std::invalid_argument("l1_norm_lp: prefix too large (max 64)");

  std::vector<int> live;
  std::vector<VectorF> atoms;
  for (int j = 0; j < m; ++j)
    if (!md.dead[j]) {
      live.push_back(j);
      atoms.push_back(md.atoms.col(j));
    }
  if (live.empty()) throw std::runtime_error("l1_norm_lp: all atoms dead");

  const GramBuild span = gram_build(ctx, atoms);
  const int r = span.state.size();
  const Eigen::VectorXd y = span.state.basis_coeffs(ctx, f);
  const double dist = std::sqrt(std::max(ctx.norm_sq(f) - y.squaredNorm(), 0.0));
  const double fnorm = ctx.norm(f);
  if (fnorm == 0.0) return 0.0;
  if (dist > 1e-8 * fnorm)
    throw std::invalid_argument("l1_norm_lp: target outside span, distance " +
                                std::to_string(dist));

  const int v = static_cast<int>(live.size());
  Eigen::MatrixXd basis_coords(r, v);
  for (int j = 0; j < v; ++j)
    basis_coords.col(j) = span.state.basis_coeffs(ctx, atoms[j]);

  Eigen::MatrixXd a(r, 2 * v);
  a.leftCols(v) = basis_coords;
  a.rightCols(v) = -basis_coords;
  const LpResult lp =
      solve_lp_equality(a, y, Eigen::VectorXd::Ones(2 * v));
  if (!lp.feasible) throw std::runtime_error("l1_norm_lp: infeasible");
  return lp.value;
}

// Weak-lp quasi-norm of a coefficient sequence:
//   ( sup_eta  eta^p * #{ |c| >= eta } )^(1/p),
// with the sup attained at the distinct values of |c|.
inline double weak_lp_quasinorm(std::vector<double> c, double p) {
  if (p <= 0) throw std::invalid_argument("weak_lp_quasinorm: p must be positive");
  for (double& x : c) x = std::abs(x);
  std::sort(c.begin(), c.end(), std::greater<double>());
  double best = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k)
    best = std::max(best, c[k] * std::pow(static_cast<double>(k + 1), 1.0 / p));
  return best;
}

// Soft thresholding at level t: shrink |c| by t/2, snap to zero below t/2.
inline double soft_threshold(double c, double t) {
  const double h = 0.5 * t;
  if (std::abs(c) <= h) return 0.0;
  return c > 0 ? c - h : c + h;
}

struct KProfile {
  Eigen::VectorXd t_grid;
  Eigen::VectorXd k_values;
  double theta = 0.0;
  double p = 0.0;
};

// Default evaluation grid: 32 log-spaced points in [1e-3, 1e1] scaled by
// ||f|| / max(1, l1_estimate).
inline Eigen::VectorXd default_t_grid(const SpaceContext& ctx, const VectorF& f,
                                      double l1_estimate, int count = 32) {
  const double scale = ctx.norm(f) / std::max(1.0, l1_estimate);
  Eigen::VectorXd t(count);
  for (int i = 0; i < count; ++i) {
    const double u = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    t(i) = scale * std::pow(10.0, -3.0 + 4.0 * u);
  }
  return t;
}

namespace detail {

// Exact K(f, t) when the atoms are orthonormal.  The minimizer over h of
// ||f - h|| + t * sum|d_g| soft-thresholds the coefficients at some level tau,
// so it is enough to minimize
//   phi(tau) = sqrt(out^2 + sum min(c^2, tau^2)) + t * sum max(|c| - tau, 0)
// over tau >= 0.  Between consecutive distinct |c| values phi is smooth and
// convex with a closed-form interior stationary point.
inline double k_exact_orthonormal(const std::vector<double>& abs_coeffs,
                                  double out_sq, double t) {
  std::vector<double> c = abs_coeffs;
  std::sort(c.begin(), c.end());
  const int n = static_cast<int>(c.size());

  std::vector<double> breaks{0.0};
  for (double x : c)
    if (x > breaks.back()) breaks.push_back(x);

  // prefix_sq[i]: sum of c^2 over the i smallest coefficients
  std::vector<double> prefix_sq(n + 1, 0.0), suffix_abs(n + 1, 0.0);
  for (int i = 0; i < n; ++i) prefix_sq[i + 1] = prefix_sq[i] + c[i] * c[i];
  for (int i = n - 1; i >= 0; --i) suffix_abs[i] = suffix_abs[i + 1] + c[i];

  auto phi = [&](double tau) {
    // first index with c > tau
    const int lo = static_cast<int>(
        std::upper_bound(c.begin(), c.end(), tau) - c.begin());
    const int k = n - lo;
    const double e = std::sqrt(out_sq + prefix_sq[lo] + k * tau * tau);
    const double l = suffix_abs[lo] - k * tau;
    return e + t * l;
  };

  double best = phi(breaks.back());  // h = 0 (and beyond); phi constant there
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double a = breaks[i], b = breaks[i + 1];
    best = std::min(best, std::min(phi(a), phi(b)));
    // Interior stationary point: tau* = t * sqrt(c1 / (1 - k t^2)).
    const int lo = static_cast<int>(
        std::upper_bound(c.begin(), c.end(), 0.5 * (a + b)) - c.begin());
    const int k = n - lo;
    const double c1 = out_sq + prefix_sq[lo];
    if (k > 0 && k * t * t < 1.0) {
      const double tau = t * std::sqrt(c1 / (1.0 - k * t * t));
      if (tau > a && tau < b) best = std::min(best, phi(tau));
    }
  }
  return best;
}

inline bool is_orthonormal(const SpaceContext& ctx,
                           const MaterializedDictionary& md, int m,
                           double tol = 1e-10) {
  for (int i = 0; i < m; ++i) {
    if (md.dead[i]) continue;
    for (int j = i; j < m; ++j) {
      if (md.dead[j]) continue;
      const double g = ctx.inner(md.atoms.col(i), md.atoms.col(j));
      if (std::abs(g - (i == j ? 1.0 : 0.0)) > tol) return false;
    }
  }
  return true;
}

// l1-penalized least squares by cyclic coordinate descent over unit-norm
// atoms.  Used to trace the error/variation trade-off for the upper-bound
// K estimate on general dictionaries.
inline Eigen::VectorXd lasso_path_point(const SpaceContext& ctx,
                                        const MaterializedDictionary& md, int m,
                                        const VectorF& f, double tau,
                                        Eigen::VectorXd warm) {
  VectorF r = f;
  for (int j = 0; j < m; ++j)
    if (warm(j) != 0.0) r -= warm(j) * md.atoms.col(j);
  for (int sweep = 0; sweep < 400; ++sweep) {
    double max_delta = 0.0;
    for (int j = 0; j < m; ++j) {
      if (md.dead[j]) continue;
      const double rho = ctx.inner(r, md.atoms.col(j)) + warm(j);
      const double next = soft_threshold(rho, 2.0 * tau);
      const double delta = next - warm(j);
      if (delta != 0.0) {
        r -= delta * md.atoms.col(j);
        warm(j) = next;
        max_delta = std::max(max_delta, std::abs(delta));
      }
    }
    if (max_delta < 1e-12) break;
  }
  return warm;
}

}  // namespace detail

// Estimate of K(f, t) = inf_h { ||f - h|| + t ||h||_variation } over the
// prefix D_m, per t in t_grid.  Exact for orthonormal prefixes; otherwise an
// upper bound from the penalized trade-off path plus the candidates h = 0 and
// (when f lies in the span and the prefix is small) h = f.
inline KProfile k_functional_estimate(const SpaceContext& ctx,
                                      const MaterializedDictionary& md, int m,
                                      const VectorF& f,
                                      const Eigen::VectorXd& t_grid,
                                      double p = 0.0) {
  if (m < 1 || m > md.size())
    throw std::invalid_argument("k_functional_estimate: bad prefix");
  KProfile prof;
  prof.t_grid = t_grid;
  prof.k_values.resize(t_grid.size());
  prof.p = p;
  prof.theta = p > 0.0 ? 2.0 / p - 1.0 : 0.0;

  if (detail::is_orthonormal(ctx, md, m)) {
    // out-of-span energy via the explicit residual: subtracting squared norms
    // instead would turn rounding noise into a sqrt-sized floor on K
    std::vector<double> abs_c;
    VectorF resid = f;
    for (int j = 0; j < m; ++j) {
      if (md.dead[j]) continue;
      const double c = ctx.inner(f, md.atoms.col(j));
      abs_c.push_back(std::abs(c));
      resid -= c * md.atoms.col(j);
    }
    const double out_sq = ctx.norm_sq(resid);
    for (int i = 0; i < t_grid.size(); ++i)
      prof.k_values(i) = detail::k_exact_orthonormal(abs_c, out_sq, t_grid(i));
    return prof;
  }

  if (m > 64)
    throw std::invalid_argument(
        "k_functional_estimate: general prefixes limited to 64 atoms");

  // Trade-off curve (error, variation) from the penalized path.
  std::vector<std::pair<double, double>> curve;
  curve.emplace_back(ctx.norm(f), 0.0);  // h = 0
  double tau_max = 0.0;
  for (int j = 0; j < m; ++j)
    if (!md.dead[j]) tau_max = std::max(tau_max, std::abs(ctx.inner(f, md.atoms.col(j))));
  if (tau_max > 0.0) {
    Eigen::VectorXd warm = Eigen::VectorXd::Zero(m);
    for (int i = 0; i < 40; ++i) {
      const double tau = tau_max * std::pow(10.0, -4.0 * i / 39.0);
      warm = detail::lasso_path_point(ctx, md, m, f, tau, warm);
      VectorF h = VectorF::Zero(ctx.dim());
      double l1 = 0.0;
      for (int j = 0; j < m; ++j) {
        if (warm(j) == 0.0) continue;
        h += warm(j) * md.atoms.col(j);
        l1 += std::abs(warm(j));
      }
      curve.emplace_back(ctx.norm(f - h), l1);
    }
  }
  // h = f, when representable.
  try {
    curve.emplace_back(0.0, l1_norm_lp(ctx, md, m, f));
  } catch (const std::exception&) {
    // outside the span; skip the exact-interpolation candidate
  }

  for (int i = 0; i < t_grid.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [e, l] : curve) best = std::min(best, e + t_grid(i) * l);
    prof.k_values(i) = best;
  }
  return prof;
}

// Target with coefficients j^(-1/p), j = 1..m, random signs: its weak-lp
// quasi-norm equals 1 by construction.
inline Representation synth_power_decay(const MaterializedDictionary& md, int m,
                                        double p, Rng& rng) {
  if (p <= 0) throw std::invalid_argument("synth_power_decay: p must be positive");
  if (m < 1 || m > md.size())
    throw std::invalid_argument("synth_power_decay: bad prefix");
  std::vector<int> atoms;
  std::vector<double> coeffs;
  for (int j = 0; j < m; ++j) {
    if (md.dead[j]) throw std::invalid_argument("synth_power_decay: dead atom");
    atoms.push_back(j);
    coeffs.push_back(rng.sign() * std::pow(static_cast<double>(j + 1), -1.0 / p));
  }
  return make_representation(md, std::move(atoms), std::move(coeffs));
}

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 1.0;
};

// Least-squares slope of log(err) against log(N).  Natural logarithms.
inline SlopeFit rate_slope(const std::vector<std::pair<double, double>>& pts) {
  if (pts.size() < 3)
    throw std::invalid_argument("rate_slope: need at least 3 points");
  double sx = 0, sy = 0;
  for (const auto& [n, e] : pts) {
    if (!(n > 0) || !(e > 0))
      throw std::invalid_argument("rate_slope: nonpositive input");
    sx += std::log(n);
    sy += std::log(e);
  }
  const double mx = sx / pts.size(), my = sy / pts.size();
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& [n, e] : pts) {
    const double dx = std::log(n) - mx, dy = std::log(e) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0) throw std::invalid_argument("rate_slope: degenerate abscissa");
  SlopeFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  const double ss_res = syy - fit.slope * sxy;
  fit.r_squared = syy > 1e-30 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

}  // namespace pursuit

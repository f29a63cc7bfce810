#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include <pursuit/pursuit.hpp>

namespace testutil {

using pursuit::MaterializedDictionary;
using pursuit::Representation;
using pursuit::Rng;
using pursuit::SpaceContext;
using pursuit::VectorF;

// Random dictionary of unit-norm dense atoms (not orthogonal, usually coherent).
inline MaterializedDictionary random_unit_atoms(const SpaceContext& ctx, int m,
                                                Rng& rng) {
  Eigen::MatrixXd raw(ctx.dim(), m);
  for (int j = 0; j < m; ++j)
    for (int i = 0; i < ctx.dim(); ++i) raw(i, j) = rng.normal();
  return pursuit::materialize_columns(ctx, raw);
}

// Random target with synthesis l1 weight exactly 1 over n_terms distinct atoms.
inline Representation random_l1_target(const MaterializedDictionary& md,
                                       int n_terms, Rng& rng) {
  std::vector<int> pool;
  for (int j = 0; j < md.size(); ++j)
    if (!md.dead[j]) pool.push_back(j);
  n_terms = std::min<int>(n_terms, static_cast<int>(pool.size()));
  for (int i = 0; i < n_terms; ++i) {
    const int j = i + static_cast<int>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  std::vector<int> atoms(pool.begin(), pool.begin() + n_terms);
  std::sort(atoms.begin(), atoms.end());
  std::vector<double> coeffs;
  double total = 0.0;
  for (int i = 0; i < n_terms; ++i) {
    coeffs.push_back(rng.sign() * rng.uniform(0.25, 1.0));
    total += std::abs(coeffs.back());
  }
  for (double& c : coeffs) c /= total;
  return pursuit::make_representation(md, std::move(atoms), std::move(coeffs));
}

// Dense least-squares projection of f onto the given atom columns, computed
// independently of the incremental factorization under test.
inline VectorF dense_projection(const SpaceContext& ctx,
                                const std::vector<VectorF>& atoms,
                                const VectorF& f) {
  const Eigen::VectorXd sw = ctx.weights().cwiseSqrt();
  Eigen::MatrixXd a(ctx.dim(), atoms.size());
  for (std::size_t j = 0; j < atoms.size(); ++j)
    a.col(j) = atoms[j].cwiseProduct(sw);
  const Eigen::VectorXd coef =
      a.colPivHouseholderQr().solve(f.cwiseProduct(sw).eval());
  VectorF proj = VectorF::Zero(ctx.dim());
  for (std::size_t j = 0; j < atoms.size(); ++j) proj += coef(j) * atoms[j];
  return proj;
}

// Residual after keeping the k largest-magnitude coefficients (orthonormal
// expansions; lowest index wins ties), plus the kept index set.
inline std::pair<double, std::vector<int>> threshold_oracle(
    const std::vector<double>& coeffs, int k) {
  std::vector<int> order(coeffs.size());
  for (std::size_t i = 0; i < coeffs.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(coeffs[a]) > std::abs(coeffs[b]);
  });
  std::vector<int> kept(order.begin(),
                        order.begin() + std::min<std::size_t>(k, order.size()));
  double tail = 0.0;
  for (std::size_t i = k; i < order.size(); ++i)
    tail += coeffs[order[i]] * coeffs[order[i]];
  std::sort(kept.begin(), kept.end());
  return {std::sqrt(tail), kept};
}

// Independent K(f,t) oracle for orthonormal expansions: minimizes
//   phi(tau) = ||f - h_tau|| + t * |h_tau|_1,   h_tau = coefficients shrunk
// by tau, via golden-section search inside every bracket between consecutive
// magnitude breakpoints.  No closed forms shared with the implementation.
inline double k_oracle_orthonormal(const std::vector<double>& coeffs, double t) {
  auto phi = [&](double tau) {
    double err_sq = 0.0, l1 = 0.0;
    for (double c : coeffs) {
      const double a = std::abs(c);
      const double shrunk = std::max(a - tau, 0.0);
      const double removed = a - shrunk;
      err_sq += removed * removed;
      l1 += shrunk;
    }
    return std::sqrt(err_sq) + t * l1;
  };
  std::vector<double> brk{0.0};
  for (double c : coeffs) brk.push_back(std::abs(c));
  std::sort(brk.begin(), brk.end());
  brk.erase(std::unique(brk.begin(), brk.end()), brk.end());
  double best = phi(brk.back());
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  for (std::size_t i = 0; i + 1 < brk.size(); ++i) {
    double lo = brk[i], hi = brk[i + 1];
    best = std::min(best, std::min(phi(lo), phi(hi)));
    double c = hi - gr * (hi - lo), d = lo + gr * (hi - lo);
    double fc = phi(c), fd = phi(d);
    for (int it = 0; it < 200 && hi - lo > 1e-13 * (1.0 + brk.back()); ++it) {
      if (fc < fd) {
        hi = d;
        d = c;
        fd = fc;
        c = hi - gr * (hi - lo);
        fc = phi(c);
      } else {
        lo = c;
        c = d;
        fc = fd;
        d = lo + gr * (hi - lo);
        fd = phi(d);
      }
    }
    best = std::min(best, phi(0.5 * (lo + hi)));
  }
  return best;
}

}  // namespace testutil

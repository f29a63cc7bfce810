#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "space.hpp"

namespace pursuit {

// Atoms whose raw norm falls at or below this are dead in the given context
// and never eligible for selection.
inline constexpr double kDeadTol = 1e-12;

enum class DictKind { orthonormal_canonical, union_of_bases, ridge };
enum class Activation { heaviside, logistic };

namespace detail {

// Base-2 van der Corput value of i >= 1: 1/2, 1/4, 3/4, 1/8, 5/8, ...
// Used to exhaust offset grids coarse-to-fine.
inline double van_der_corput(std::uint64_t i) {
  double value = 0.0, denom = 1.0;
  while (i > 0) {
    denom *= 2.0;
    value += static_cast<double>(i & 1) / denom;
    i >>= 1;
  }
  return value;
}

// Acklam-style rational approximation of the standard normal quantile,
// accurate to ~1e-9.  Enough to push a low-discrepancy sequence onto the
// sphere deterministically.
inline double inverse_normal_cdf(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1.0 - plow;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > phigh) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5, r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

// Deterministic low-discrepancy directions on the unit sphere in R^dim.
// An additive Kronecker sequence in the cube, mapped through the normal
// quantile and normalized.  dim == 1 degenerates to alternating +/-1.
inline std::vector<Eigen::VectorXd> sphere_directions(int dim, int count) {
  std::vector<Eigen::VectorXd> dirs;
  dirs.reserve(count);
  if (dim == 1) {
    for (int i = 0; i < count; ++i)
      dirs.push_back(Eigen::VectorXd::Constant(1, i % 2 == 0 ? 1.0 : -1.0));
    return dirs;
  }
  // Generalized golden-ratio alphas (Kronecker sequence generators).
  double phi = 1.0;
  for (int it = 0; it < 64; ++it) phi = std::pow(1.0 + phi, 1.0 / (dim + 1));
  Eigen::VectorXd alpha(dim);
  for (int j = 0; j < dim; ++j) alpha(j) = std::fmod(std::pow(1.0 / phi, j + 1), 1.0);
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXd u(dim);
    for (int j = 0; j < dim; ++j) {
      double x = std::fmod(0.5 + (i + 1) * alpha(j), 1.0);
      x = std::min(std::max(x, 1e-12), 1.0 - 1e-12);
      u(j) = inverse_normal_cdf(x);
    }
    const double n = u.norm();
    dirs.push_back(n > 0 ? Eigen::VectorXd(u / n) : Eigen::VectorXd::Unit(dim, 0));
  }
  return dirs;
}

}  // namespace detail

// A countable dictionary with a fixed exhaustion order: atom index j is the
// j-th element, and the truncation D_m is exactly the first m indices.
//
// Kinds:
//  * orthonormal_canonical: indicator atoms on the reference grid 0..M-1.
//  * union_of_bases: canonical grid indicators interleaved with the DCT-II
//    orthonormal basis on the same grid (two complete bases, coherent union).
//  * ridge: x -> act(<v, x> - t) over a deterministic direction sequence and a
//    coarse-to-fine threshold grid; directions and thresholds are exhausted in
//    interleaved square shells so neither grid runs far ahead of the other.
struct Dictionary {
  DictKind kind = DictKind::orthonormal_canonical;
  int grid_size = 0;  // basis kinds: atoms per basis
  Activation activation = Activation::heaviside;
  std::vector<Eigen::VectorXd> directions;      // ridge
  std::vector<double> thresholds;               // ridge offsets, exhaustion order
  std::vector<std::pair<int, int>> ridge_order; // exhaustion -> (direction, threshold)

  static Dictionary canonical(int m) {
    if (m < 1) throw std::invalid_argument("Dictionary: grid size must be positive");
    Dictionary d;
    d.kind = DictKind::orthonormal_canonical;
    d.grid_size = m;
    return d;
  }

  static Dictionary union_of_bases(int m) {
    Dictionary d = canonical(m);
    d.kind = DictKind::union_of_bases;
    return d;
  }

  static Dictionary ridge_explicit(std::vector<Eigen::VectorXd> dirs,
                                   std::vector<double> thresholds,
                                   Activation act) {
    if (dirs.empty() || thresholds.empty())
      throw std::invalid_argument("Dictionary: empty ridge grids");
    Dictionary d;
    d.kind = DictKind::ridge;
    d.activation = act;
    d.directions = std::move(dirs);
    d.thresholds = std::move(thresholds);
    d.build_ridge_order();
    return d;
  }

  // Direction grid from the sphere sequence; thresholds cover [lo, hi] in
  // van der Corput (coarse-to-fine) order.
  static Dictionary ridge(int feature_dim, int n_directions, int n_thresholds,
                          double lo, double hi, Activation act) {
    if (feature_dim < 1 || n_directions < 1 || n_thresholds < 1)
      throw std::invalid_argument("Dictionary: bad ridge grid sizes");
    std::vector<double> ts;
    ts.reserve(n_thresholds);
    for (int i = 1; i <= n_thresholds; ++i)
      ts.push_back(lo + (hi - lo) * detail::van_der_corput(i));
    return ridge_explicit(detail::sphere_directions(feature_dim, n_directions),
                          std::move(ts), act);
  }

  int feature_dim() const {
    return kind == DictKind::ridge ? static_cast<int>(directions.front().size()) : 1;
  }

  int total_atoms() const {
    switch (kind) {
      case DictKind::orthonormal_canonical: return grid_size;
      case DictKind::union_of_bases: return 2 * grid_size;
      case DictKind::ridge: return static_cast<int>(ridge_order.size());
    }
    return 0;
  }

  // Raw (unnormalized) atom values at the given points (rows of `points`).
  // Basis kinds read the nearest grid index off the first coordinate.
  VectorF atom_eval(int index, const Eigen::MatrixXd& points) const {
    if (index < 0 || index >= total_atoms())
      throw std::invalid_argument("Dictionary: atom index out of range");
    const int n = static_cast<int>(points.rows());
    VectorF v(n);
    switch (kind) {
      case DictKind::orthonormal_canonical: {
        for (int i = 0; i < n; ++i)
          v(i) = grid_cell(points(i, 0)) == index ? 1.0 : 0.0;
        break;
      }
      case DictKind::union_of_bases: {
        // Even exhaustion indices are canonical indicators, odd are DCT-II.
        const int b = index % 2, j = index / 2;
        for (int i = 0; i < n; ++i) {
          const int cell = grid_cell(points(i, 0));
          if (b == 0) {
            v(i) = cell == j ? 1.0 : 0.0;
          } else {
            const double s = j == 0 ? std::sqrt(1.0 / grid_size)
                                    : std::sqrt(2.0 / grid_size);
            v(i) = s * std::cos(M_PI * (2.0 * cell + 1.0) * j / (2.0 * grid_size));
          }
        }
        break;
      }
      case DictKind::ridge: {
        const auto [di, ti] = ridge_order[index];
        const Eigen::VectorXd& dir = directions[di];
        if (points.cols() != dir.size())
          throw std::invalid_argument("Dictionary: point dimension mismatch");
        const double t = thresholds[ti];
        for (int i = 0; i < n; ++i) {
          const double z = points.row(i).dot(dir) - t;
          v(i) = activation == Activation::heaviside
                     ? (z > 0.0 ? 1.0 : 0.0)
                     : 1.0 / (1.0 + std::exp(-z));
        }
        break;
      }
    }
    return v;
  }

  // Reference grid for basis kinds: points are the integers 0..M-1.
  static Eigen::MatrixXd grid_points(int m) {
    Eigen::MatrixXd p(m, 1);
    for (int i = 0; i < m; ++i) p(i, 0) = i;
    return p;
  }

 private:
  int grid_cell(double x) const {
    const long j = std::lround(x);
    return static_cast<int>(std::min<long>(std::max<long>(j, 0), grid_size - 1));
  }

  // Square-shell interleaving: shell k first adds threshold k for all earlier
  // directions, then direction k with all earlier thresholds, then (k, k).
  // Thresholds are already coarse-to-fine, so refinement arrives before new
  // directions within each shell.
  void build_ridge_order() {
    const int nd = static_cast<int>(directions.size());
    const int nt = static_cast<int>(thresholds.size());
    ridge_order.clear();
    ridge_order.reserve(static_cast<std::size_t>(nd) * nt);
    for (int k = 0; k < std::max(nd, nt); ++k) {
      if (k < nt)
        for (int d = 0; d < std::min(k, nd); ++d) ridge_order.emplace_back(d, k);
      if (k < nd)
        for (int t = 0; t < std::min(k, nt); ++t) ridge_order.emplace_back(k, t);
      if (k < nd && k < nt) ridge_order.emplace_back(k, k);
    }
  }
};

// Truncation size m(n) = floor(n^a), capped at the dictionary's total atom
// count when one is given.
inline int truncation_size(int n, double a_exp, int total = -1) {
  if (n < 1) throw std::invalid_argument("truncation_size: n must be positive");
  if (a_exp < 0) throw std::invalid_argument("truncation_size: negative exponent");
  const long double raw =
      std::pow(static_cast<long double>(n), static_cast<long double>(a_exp));
  long long m = static_cast<long long>(std::floor(raw + 1e-9L));
  if (total >= 0) m = std::min<long long>(m, total);
  return static_cast<int>(std::max<long long>(m, total == 0 ? 0 : 1));
}

// Normalized atom in the given context, or nullopt when the atom is dead
// (raw norm <= kDeadTol).
inline std::optional<VectorF> normalize(const Dictionary& d, int index,
                                        const SpaceContext& ctx,
                                        const Eigen::MatrixXd& points) {
  VectorF raw = d.atom_eval(index, points);
  const double s = ctx.norm(raw);
  if (s <= kDeadTol) return std::nullopt;
  return VectorF(raw / s);
}

// Dictionary prefix materialized on a fixed point set: column j holds the
// normalized j-th atom (zero column if dead), `scales` the raw norms.  The
// greedy engines work against this, never against the functional form.
struct MaterializedDictionary {
  Eigen::MatrixXd atoms;
  Eigen::VectorXd scales;
  std::vector<char> dead;

  int size() const { return static_cast<int>(atoms.cols()); }
  int live_count(int prefix = -1) const {
    if (prefix < 0) prefix = size();
    int c = 0;
    for (int j = 0; j < prefix; ++j) c += dead[j] ? 0 : 1;
    return c;
  }
};

inline MaterializedDictionary materialize_columns(const SpaceContext& ctx,
                                                  Eigen::MatrixXd raw) {
  if (raw.rows() != ctx.dim())
    throw std::invalid_argument("materialize: atom length != context dimension");
  MaterializedDictionary md;
  md.scales.resize(raw.cols());
  md.dead.assign(raw.cols(), 0);
  for (int j = 0; j < raw.cols(); ++j) {
    const double s = ctx.norm(raw.col(j));
    md.scales(j) = s;
    if (s <= kDeadTol) {
      md.dead[j] = 1;
      raw.col(j).setZero();
    } else {
      raw.col(j) /= s;
    }
  }
  md.atoms = std::move(raw);
  return md;
}

inline MaterializedDictionary materialize(const Dictionary& d,
                                          const SpaceContext& ctx,
                                          const Eigen::MatrixXd& points,
                                          int prefix = -1) {
  const int m = prefix < 0 ? d.total_atoms() : std::min(prefix, d.total_atoms());
  Eigen::MatrixXd raw(points.rows(), m);
  for (int j = 0; j < m; ++j) raw.col(j) = d.atom_eval(j, points);
  return materialize_columns(ctx, std::move(raw));
}

struct Selection {
  int index = -1;
  double correlation = 0.0;  // signed <r, g index>
};

// Argmax of |<r, g>| over the live atoms of the prefix D_m; ties resolve to
// the lowest index.  Throws when the prefix holds no live atom.
inline Selection select_max_correlation(const MaterializedDictionary& md, int m,
                                        const SpaceContext& ctx, const VectorF& r) {
  if (m < 1 || m > md.size())
    throw std::invalid_argument("select_max_correlation: bad prefix size");
  const Eigen::VectorXd corr =
      md.atoms.leftCols(m).transpose() * ctx.weighted(r);
  Selection best;
  double best_abs = -1.0;
  for (int j = 0; j < m; ++j) {
    if (md.dead[j]) continue;
    const double a = std::abs(corr(j));
    if (a > best_abs) {
      best_abs = a;
      best = {j, corr(j)};
    }
  }
  if (best.index < 0)
    throw std::runtime_error("select_max_correlation: all atoms dead");
  return best;
}

inline const char* to_string(DictKind k) {
  switch (k) {
    case DictKind::orthonormal_canonical: return "orthonormal_canonical";
    case DictKind::union_of_bases: return "union_of_bases";
    case DictKind::ridge: return "ridge";
  }
  return "?";
}

inline const char* to_string(Activation a) {
  return a == Activation::heaviside ? "heaviside" : "logistic";
}

}  // namespace pursuit

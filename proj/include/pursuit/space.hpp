#pragma once

#include <Eigen/Core>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace pursuit {

using VectorF = Eigen::VectorXd;

// Finite-dimensional inner-product space with a diagonal measure:
//   <u, v> = sum_i w_i u_i v_i,  w_i >= 0.
// Unit weights give the Euclidean dot product; weights 1/n give the empirical
// norm over an n-point sample.  Zero weights are allowed (coordinates that the
// measure does not see), but at least one weight must be positive.
class SpaceContext {
 public:
  explicit SpaceContext(Eigen::VectorXd weights) : w_(std::move(weights)) {
    if (w_.size() == 0) throw std::invalid_argument("SpaceContext: empty weight vector");
    if ((w_.array() < 0.0).any())
      throw std::invalid_argument("SpaceContext: negative weight");
    if (!(w_.array() > 0.0).any())
      throw std::invalid_argument("SpaceContext: all weights are zero");
  }

  static SpaceContext unit(int dim) {
    return SpaceContext(Eigen::VectorXd::Ones(dim));
  }

  // Empirical measure of an n-point sample: every coordinate weighs 1/n.
  static SpaceContext empirical(int n) {
    return SpaceContext(Eigen::VectorXd::Constant(n, 1.0 / n));
  }

  int dim() const { return static_cast<int>(w_.size()); }
  const Eigen::VectorXd& weights() const { return w_; }

  double inner(const VectorF& u, const VectorF& v) const {
    check_dim(u);
    check_dim(v);
    return (w_.array() * u.array() * v.array()).sum();
  }

  double norm_sq(const VectorF& u) const {
    check_dim(u);
    return (w_.array() * u.array().square()).sum();
  }

  double norm(const VectorF& u) const { return std::sqrt(norm_sq(u)); }

  // w ∘ u, handy for computing many inner products against u at once.
  VectorF weighted(const VectorF& u) const {
    check_dim(u);
    return w_.cwiseProduct(u);
  }

 private:
  void check_dim(const VectorF& u) const {
    if (u.size() != w_.size())
      throw std::invalid_argument("SpaceContext: dimension mismatch");
  }

  Eigen::VectorXd w_;
};

inline double inner(const SpaceContext& ctx, const VectorF& u, const VectorF& v) {
  return ctx.inner(u, v);
}

inline double norm(const SpaceContext& ctx, const VectorF& u) { return ctx.norm(u); }

}  // namespace pursuit

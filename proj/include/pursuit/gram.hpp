#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <vector>

#include "space.hpp"

namespace pursuit {

// Span of a growing list of selected atoms, kept as an orthonormal basis plus
// the triangular change-of-basis factor.  Built by Gram-Schmidt with one
// reorthogonalization pass, which keeps the basis orthogonal to working
// precision without squaring the condition number the way normal equations
// would.
//
// Invariant: atom_j = sum_i R(i, j) * basis_i, with R upper triangular and
// R(j, j) > rank_tol.  Atoms whose orthogonal component falls below rank_tol
// are refused (the state is left unchanged and the caller is told).
class GramState {
 public:
  // rank_tol < 0 selects the default: 1e-10 times the largest atom norm seen.
  explicit GramState(int dim, double rank_tol = -1.0)
      : dim_(dim), rank_tol_(rank_tol) {}

  int dim() const { return dim_; }
  int size() const { return k_; }

  const Eigen::MatrixXd& atoms() const { return atoms_; }
  VectorF atom(int i) const { return atoms_.col(i); }

  double rank_tol_effective() const {
    return rank_tol_ >= 0.0 ? rank_tol_ : 1e-10 * max_atom_norm_;
  }

  // Appends g to the span.  Returns false (state unchanged) when g lies in the
  // current span up to rank_tol.
  bool try_extend(const SpaceContext& ctx, const VectorF& g) {
    if (g.size() != dim_) throw std::invalid_argument("GramState: dimension mismatch");
    const double gnorm = ctx.norm(g);

    VectorF v = g;
    Eigen::VectorXd r = Eigen::VectorXd::Zero(k_ + 1);
    for (int pass = 0; pass < 2; ++pass) {
      if (k_ == 0) break;
      Eigen::VectorXd c = basis_.leftCols(k_).transpose() * ctx.weighted(v);
      v.noalias() -= basis_.leftCols(k_) * c;
      r.head(k_) += c;
    }
    const double vnorm = ctx.norm(v);

    const double tol = rank_tol_ >= 0.0
                           ? rank_tol_
                           : 1e-10 * std::max(max_atom_norm_, gnorm);
    if (!(vnorm > tol)) return false;

    ensure_capacity(k_ + 1);
    atoms_.col(k_) = g;
    basis_.col(k_) = v / vnorm;
    r(k_) = vnorm;
    rfac_.col(k_).head(k_ + 1) = r;
    ++k_;
    if (gnorm > max_atom_norm_) max_atom_norm_ = gnorm;
    return true;
  }

  // Basis-side coefficients <q_i, f> for i < size().
  Eigen::VectorXd basis_coeffs(const SpaceContext& ctx, const VectorF& f) const {
    return basis_.leftCols(k_).transpose() * ctx.weighted(f);
  }

  const Eigen::MatrixXd& basis_storage() const { return basis_; }

  VectorF apply_basis(const Eigen::VectorXd& y) const {
    return basis_.leftCols(k_) * y;
  }

  // Solves R a = y over the leading k atoms (back substitution).
  Eigen::VectorXd atom_coeffs_from_basis(const Eigen::VectorXd& y, int k = -1) const {
    if (k < 0) k = k_;
    Eigen::VectorXd a = Eigen::VectorXd::Zero(k);
    for (int j = k - 1; j >= 0; --j) {
      double s = y(j);
      for (int i = j + 1; i < k; ++i) s -= rfac_(j, i) * a(i);
      a(j) = s / rfac_(j, j);
    }
    return a;
  }

  // Gram matrix of the stored atoms, reconstructed as R^T R.  Only the upper
  // triangle of the factor storage is meaningful.
  Eigen::MatrixXd gram_matrix() const {
    const Eigen::MatrixXd r =
        rfac_.topLeftCorner(k_, k_).triangularView<Eigen::Upper>();
    return r.transpose() * r;
  }

 private:
  void ensure_capacity(int k) {
    if (atoms_.cols() >= k) return;
    const int cap = std::max(8, 2 * k);
    atoms_.conservativeResize(dim_, cap);
    basis_.conservativeResize(dim_, cap);
    rfac_.conservativeResize(cap, cap);
  }

  int dim_;
  double rank_tol_;
  int k_ = 0;
  double max_atom_norm_ = 0.0;
  Eigen::MatrixXd atoms_{dim_, 0};
  Eigen::MatrixXd basis_{dim_, 0};
  Eigen::MatrixXd rfac_{0, 0};
};

// Pure extension: returns the extended state and whether the atom was
// accepted.  A refused atom leaves the returned state equal to the input.
inline std::pair<GramState, bool> gram_extend(const SpaceContext& ctx,
                                              const GramState& state,
                                              const VectorF& g) {
  GramState next = state;
  const bool ok = next.try_extend(ctx, g);
  return {std::move(next), ok};
}

struct GramBuild {
  GramState state;
  std::vector<int> kept;  // indices of the input atoms that entered the span
  bool degenerate = false;
};

// Builds a span from a list of atoms in order, skipping (and flagging) any
// atom already inside the span of its predecessors.
inline GramBuild gram_build(const SpaceContext& ctx,
                            const std::vector<VectorF>& atoms,
                            double rank_tol = -1.0) {
  GramBuild out{GramState(ctx.dim(), rank_tol), {}, false};
  for (int i = 0; i < static_cast<int>(atoms.size()); ++i) {
    if (out.state.try_extend(ctx, atoms[i]))
      out.kept.push_back(i);
    else
      out.degenerate = true;
  }
  return out;
}

struct Projection {
  Eigen::VectorXd coeffs;  // expansion over the state's atoms
  VectorF value;           // the projection itself
};

// Orthogonal projection of f onto the span held by `state`.
inline Projection project_onto_span(const SpaceContext& ctx,
                                    const GramState& state, const VectorF& f) {
  if (state.size() == 0)
    throw std::invalid_argument("project_onto_span: empty span");
  const Eigen::VectorXd y = state.basis_coeffs(ctx, f);
  return {state.atom_coeffs_from_basis(y), state.apply_basis(y)};
}

}  // namespace pursuit

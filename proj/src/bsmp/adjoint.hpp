#pragma once

#include "bsmp/bsde.hpp"
#include "bsmp/model.hpp"

#include <memory>

namespace bsmp {

/// p(t, y, z, v) -> p.b - h.
double hamiltonian(const ProblemSpec& spec, double t, CVecRef y, CMatRef z, CVecRef p, CVecRef v);

struct HamiltonianPartials {
  Vec dy;  ///< n
  Mat dz;  ///< n x d
};

/// H_y = b_y^T p - h_y;  H_z(j, l) = sum_r p_r db_r/dz(j, l) - dh/dz(j, l).
HamiltonianPartials hamiltonian_partials(const ProblemSpec& spec, double t, CVecRef y, CMatRef z, CVecRef p,
                                         CVecRef v);

/// Adjoint process p on every path and node.
class AdjointPath {
 public:
  AdjointPath(std::shared_ptr<const BrownianBundle> bundle, int n);

  const BrownianBundle& bundle() const { return *bundle_; }
  std::shared_ptr<const BrownianBundle> bundle_ptr() const { return bundle_; }
  int n() const { return n_; }
  int paths() const { return bundle_->paths(); }
  int steps() const { return bundle_->grid().steps(); }

  Eigen::Map<Vec> p(int m, int i) { return Eigen::Map<Vec>(p_.data() + offset(m, i), n_); }
  Eigen::Map<const Vec> p(int m, int i) const { return Eigen::Map<const Vec>(p_.data() + offset(m, i), n_); }

 private:
  std::size_t offset(int m, int i) const {
    return (static_cast<std::size_t>(m) * (steps() + 1) + static_cast<std::size_t>(i)) * n_;
  }

  std::shared_ptr<const BrownianBundle> bundle_;
  int n_;
  std::vector<double> p_;
};

/// Forward Euler on the trajectory's increments:
///   p_0 = g_y(y_0),  p_{i+1} = p_i - H_y dt - H_z dW_i,
/// coefficients evaluated at (t_i, y_i, z_i, p_i, u_i).
AdjointPath solve_adjoint(const ProblemSpec& spec, const ControlLaw& control, const Trajectory& traj);

/// First n components of an extended adjoint; the last one must stay at -1
/// (InvariantViolation otherwise).
AdjointPath reduce_adjoint(const AdjointPath& extended, double tolerance = 1e-10);

}  // namespace bsmp

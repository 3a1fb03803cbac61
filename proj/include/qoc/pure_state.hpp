#pragma once

// Rank-one cross-check for the density-matrix machinery. When the initial
// state is pure, conjugating rho = psi psi^dag by the split factor G is the
// same motion as psi -> G psi, so a wavefunction integration under the same
// field samples must reproduce the density trajectory to rounding. The
// functional also collapses: tr(A rho(tF)) becomes <psi|A|psi>, the running
// cost keeps its lambda/2 weight, and the costate pairing turns into
// 2 Re <chi|.> with chi = A_v psi. Comparing both routes step by step is the
// strongest internal consistency test the mixed-state code has.

#include <cmath>
#include <string>
#include <vector>

#include "qoc/core.hpp"
#include "qoc/optimizer.hpp"
#include "qoc/propagator.hpp"

namespace qoc {

constexpr double kUnitNormTol = 1e-12;

class PureState {
 public:
  explicit PureState(Vector psi) : psi_(std::move(psi)) {
    if (psi_.size() < 2) throw ShapeError("PureState: dimension must be >= 2");
    const double defect = std::abs(psi_.norm() - 1.0);
    if (defect > kUnitNormTol)
      throw InvariantError("PureState: norm defect " + std::to_string(defect));
  }

  const Vector& vector() const { return psi_; }
  int dim() const { return static_cast<int>(psi_.size()); }

  Matrix projector() const { return psi_ * psi_.adjoint(); }

 private:
  Vector psi_;
};

// One split step on a wavefunction: psi' = G psi with the same factor the
// density conjugation uses. Unitarity of G keeps the norm exact.
inline Vector schrodinger_step(const PropagatorTables& tables, const Vector& psi,
                               double field, double dt) {
  const Matrix g = strang_factor(field, dt, tables);
  Vector out = g * psi;
  const double defect = std::abs(out.norm() - psi.norm());
  if (defect > 1e-10)
    throw NumericError("schrodinger_step: norm drift " + std::to_string(defect));
  return out;
}

struct PureTrajectory {
  TimeGrid grid;
  std::vector<Vector> states;  // grid.steps + 1 nodes

  void validate() const {
    if (static_cast<int>(states.size()) != grid.steps + 1)
      throw ShapeError("PureTrajectory: node count mismatch");
  }

  const Vector& at_tF() const { return states.back(); }
};

inline PureTrajectory propagate_pure_forward(const PureState& psi0,
                                             const ControlField& field,
                                             const PropagatorTables& tables) {
  field.validate();
  PureTrajectory traj;
  traj.grid = field.grid;
  traj.states.reserve(field.grid.steps + 1);
  traj.states.push_back(psi0.vector());
  for (int j = 0; j < field.grid.steps; ++j)
    traj.states.push_back(
        schrodinger_step(tables, traj.states.back(), field.samples[j], field.grid.dt));
  return traj;
}

// Largest Hilbert-Schmidt distance between the density trajectory and the
// projector onto the wavefunction trajectory, over all grid nodes.
inline double compare_pure_mixed(const Trajectory& mixed, const PureTrajectory& pure) {
  mixed.validate();
  pure.validate();
  if (!(mixed.grid == pure.grid))
    throw ShapeError("compare_pure_mixed: trajectories on different grids");
  double worst = 0.0;
  for (std::size_t j = 0; j < mixed.states.size(); ++j) {
    const Matrix diff = mixed.states[j] - pure.states[j] * pure.states[j].adjoint();
    worst = std::max(worst, hs_norm(diff));
  }
  return worst;
}

// Weight the running field cost carries after restriction to rank-one states.
inline constexpr double pure_penalty_weight(double lambda) { return lambda / 2.0; }

struct WComparison {
  double w1_mixed = 0.0;  // tr(A rho(tF))
  double w1_pure = 0.0;   // <psi(tF)|A|psi(tF)>
  double w2_mixed = 0.0;  // costate-weighted propagation defect, trace pairing
  double w2_pure = 0.0;   // same audit via chi = A_v psi and 2 Re <chi|defect>
  double w3 = 0.0;        // shared field cost

  double delta_w1() const { return std::abs(w1_mixed - w1_pure); }
  double delta_w2() const { return std::abs(w2_mixed - w2_pure); }
};

// Runs both W audits under one field. The mixed route replays the density
// steps against the backward costate; the pure route forms chi on demand from
// the costate and the wavefunction at each node. Both defect sums vanish to
// rounding because the stored trajectories are the stepper's own output.
inline WComparison compare_W_components(const HermitianOperator& a,
                                        const Trajectory& mixed,
                                        const Trajectory& costate,
                                        const PureTrajectory& pure,
                                        const ControlField& field,
                                        const PropagatorTables& tables) {
  mixed.validate();
  costate.validate();
  pure.validate();
  field.validate();
  if (!(mixed.grid == field.grid) || !(costate.grid == field.grid) ||
      !(pure.grid == field.grid))
    throw ShapeError("compare_W_components: grid mismatch");

  WComparison out;
  out.w1_mixed = expectation_matrix(a.matrix(), mixed.at_tF().matrix());
  const Complex w1p = pure.at_tF().adjoint() * a.matrix() * pure.at_tF();
  out.w1_pure = w1p.real();
  out.w3 = field.fluence();

  const double dt = field.grid.dt;
  for (int j = 0; j < field.grid.steps; ++j) {
    const Matrix g = strang_factor(field.samples[j], dt, tables);
    const Matrix& a_next = costate.states[static_cast<std::size_t>(j) + 1].matrix();

    const Matrix defect_mixed =
        mixed.states[static_cast<std::size_t>(j) + 1].matrix() -
        g * mixed.states[static_cast<std::size_t>(j)].matrix() * g.adjoint();
    out.w2_mixed += liouville_inner(a_next, defect_mixed).real();

    const Vector chi = a_next * pure.states[static_cast<std::size_t>(j) + 1];
    const Vector defect_pure = pure.states[static_cast<std::size_t>(j) + 1] -
                               g * pure.states[static_cast<std::size_t>(j)];
    const Complex overlap = chi.adjoint() * defect_pure;
    out.w2_pure += 2.0 * overlap.real();
  }
  return out;
}

}  // namespace qoc

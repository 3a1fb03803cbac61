#pragma once

// Physical model construction: truncated Morse-oscillator level ladder with
// nearest-neighbor dipole couplings, plus the stock initial states (pure
// ground state, Boltzmann thermal ensemble).
//
// All dynamics run in dimensionless units: energies in units of hbar*omega0
// (hbar = 1) and time in units of 1/omega0. Femtoseconds appear only at the
// CLI boundary via time_to_internal.

#include <cmath>
#include <string>

#include "qoc/core.hpp"

namespace qoc {

// N-level ladder: energies E_n (strictly increasing, units hbar*omega0) and
// nearest-neighbor couplings d_n (all nonzero, so the chain n <-> n+1 keeps
// the system completely controllable). omega0 is kept only for unit
// conversion at the I/O boundary.
struct MorseModel {
  int dim = 0;
  RealVector energies;
  RealVector dipoles;
  double omega0 = 0.0;

  void validate() const {
    if (dim < 2) throw InvariantError("MorseModel: dim must be >= 2");
    if (energies.size() != dim)
      throw InvariantError("MorseModel: expected " + std::to_string(dim) +
                           " energies, got " + std::to_string(energies.size()));
    if (dipoles.size() != dim - 1)
      throw InvariantError("MorseModel: expected " + std::to_string(dim - 1) +
                           " dipole couplings, got " + std::to_string(dipoles.size()));
    for (int n = 0; n + 1 < dim; ++n)
      if (!(energies[n] < energies[n + 1]))
        throw InvariantError("MorseModel: energies must be strictly increasing "
                             "(violated between levels " + std::to_string(n + 1) +
                             " and " + std::to_string(n + 2) + ")");
    for (int n = 0; n < dim - 1; ++n)
      if (dipoles[n] == 0.0)
        throw InvariantError("MorseModel: dipole coupling d_" + std::to_string(n + 1) +
                             " is zero; the chain must stay connected");
    if (!(omega0 > 0.0)) throw InvariantError("MorseModel: omega0 must be positive");
  }
};

// Harmonic-ladder coupling defaults d_n = sqrt(n); used when a config does
// not pin its own dipole list.
inline RealVector ladder_dipoles(int dim) {
  RealVector d(dim - 1);
  for (int n = 0; n < dim - 1; ++n) d[n] = std::sqrt(static_cast<double>(n + 1));
  return d;
}

// Stock 4-level HF-like instance: E = (0.4843, 1.4214, 2.3691, 3.2434) in
// units of hbar*omega0 with omega0 = 7.8e14 1/s.
inline MorseModel default_model() {
  MorseModel m;
  m.dim = 4;
  m.energies = RealVector(4);
  m.energies << 0.4843, 1.4214, 2.3691, 3.2434;
  m.dipoles = ladder_dipoles(4);
  m.omega0 = 7.8e14;
  m.validate();
  return m;
}

// H0 = sum_n E_n |n><n|.
inline HermitianOperator build_h0(const MorseModel& model) {
  model.validate();
  Matrix h = Matrix::Zero(model.dim, model.dim);
  for (int n = 0; n < model.dim; ++n) h(n, n) = model.energies[n];
  return HermitianOperator(std::move(h));
}

// V = sum_n d_n (|n><n+1| + |n+1><n|): real symmetric tridiagonal, zero
// diagonal, so level n couples only to n +/- 1.
inline HermitianOperator build_dipole(const MorseModel& model) {
  model.validate();
  Matrix v = Matrix::Zero(model.dim, model.dim);
  for (int n = 0; n < model.dim - 1; ++n) {
    v(n, n + 1) = model.dipoles[n];
    v(n + 1, n) = model.dipoles[n];
  }
  return HermitianOperator(std::move(v));
}

// rho0 = |1><1|, the pure ground state.
inline DensityState ground_state(int dim) {
  if (dim < 2) throw InvariantError("ground_state: dim must be >= 2");
  Matrix rho = Matrix::Zero(dim, dim);
  rho(0, 0) = 1.0;
  return DensityState(std::move(rho));
}

// Boltzmann ensemble w_n = C exp(-E_n / kT) with C normalizing the trace.
// Weights are strictly decreasing when the energies strictly increase.
inline DensityState thermal_state(const RealVector& energies, double kT) {
  if (!(kT > 0.0)) throw InvariantError("thermal_state: kT must be positive");
  const int dim = static_cast<int>(energies.size());
  if (dim < 2) throw InvariantError("thermal_state: need at least 2 levels");
  // Shift by the ground energy before exponentiating to avoid underflow at
  // small kT; the normalization constant absorbs the shift.
  const double e0 = energies.minCoeff();
  RealVector w(dim);
  for (int n = 0; n < dim; ++n) w[n] = std::exp(-(energies[n] - e0) / kT);
  w /= w.sum();
  Matrix rho = Matrix::Zero(dim, dim);
  for (int n = 0; n < dim; ++n) rho(n, n) = w[n];
  return DensityState(std::move(rho));
}

// fs -> dimensionless internal time (units of 1/omega0).
inline double time_to_internal(double t_fs, double omega0) {
  if (!(omega0 > 0.0)) throw InvariantError("time_to_internal: omega0 must be positive");
  return t_fs * 1e-15 * omega0;
}

inline double time_to_fs(double t_internal, double omega0) {
  if (!(omega0 > 0.0)) throw InvariantError("time_to_fs: omega0 must be positive");
  return t_internal / omega0 * 1e15;
}

}  // namespace qoc

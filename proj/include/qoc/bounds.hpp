#pragma once

// Global extrema of tr(A U rho0 U^dag) over all unitaries U. Unitary motion
// can permute how the fixed eigenvalue weights of rho0 are distributed over
// the eigenvectors of A but cannot change either spectrum, so the extrema are
// the extremal rank pairings of the two sorted spectra: the maximum pairs the
// largest weight with the largest eigenvalue of A (population inversion for
// energy-like observables), the minimum pairs it with the smallest.
//
// These bounds certify optimization results: a converged yield close to the
// upper bound is globally optimal regardless of the control path taken.

#include <string>
#include <vector>

#include "qoc/core.hpp"

namespace qoc {

struct BoundsResult {
  double lower = 0.0;
  double upper = 0.0;
  // Pairing that attains the upper bound: the k-th largest weight of rho0
  // sits on the eigenvector whose A-eigenvalue has ascending index
  // attaining_assignment[k]. Ties between equal eigenvalues are broken by
  // index order; the bound values do not depend on the choice.
  std::vector<int> attaining_assignment;
  // Spectra in the pairing's own orders, for reporting.
  RealVector weights_descending;
  RealVector a_values_ascending;
};

inline BoundsResult kinematical_bounds(const DensityState& rho0,
                                       const HermitianOperator& a) {
  require_same_dim(rho0.matrix(), a.matrix(), "kinematical_bounds");
  const int n = rho0.dim();
  const RealVector w_asc = eig_hermitian(HermitianOperator(rho0.matrix())).values;
  const RealVector a_asc = eig_hermitian(a).values;

  BoundsResult out;
  out.a_values_ascending = a_asc;
  out.weights_descending = w_asc.reverse();
  out.attaining_assignment.resize(n);
  for (int k = 0; k < n; ++k) {
    // k-th largest weight is w_asc[n-1-k]; largest-with-largest pairs it
    // with ascending index n-1-k, smallest-with-largest with index k.
    out.upper += w_asc[n - 1 - k] * a_asc[n - 1 - k];
    out.lower += w_asc[n - 1 - k] * a_asc[k];
    out.attaining_assignment[k] = n - 1 - k;
  }
  return out;
}

// Fraction of the kinematical maximum a run achieved; the certificate a yield
// is judged by.
inline double yield_ratio(double final_expectation, const BoundsResult& bounds) {
  if (bounds.upper == 0.0)
    throw InvariantError("yield_ratio: upper bound is zero");
  return final_expectation / bounds.upper;
}

}  // namespace qoc

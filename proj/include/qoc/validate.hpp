#pragma once

// Built-in end-to-end self-check: a small three-level ladder optimized for a
// handful of sweeps, with every structural invariant the library promises
// measured against its tolerance. Meant for `qoc validate` and CI smoke runs;
// the unit suites cover the same ground with independent oracles.

#include <cmath>
#include <string>
#include <vector>

#include "qoc/core.hpp"
#include "qoc/model.hpp"
#include "qoc/optimizer.hpp"
#include "qoc/pure_state.hpp"
#include "qoc/propagator.hpp"

namespace qoc {

struct ValidationCheck {
  std::string name;
  double value = 0.0;  // measured
  double limit = 0.0;  // allowed (value <= limit passes)
  bool passed = false;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  std::string failure;  // nonempty if the run itself aborted

  bool all_passed() const {
    if (!failure.empty()) return false;
    for (const ValidationCheck& c : checks)
      if (!c.passed) return false;
    return !checks.empty();
  }
};

inline MorseModel validation_model() {
  MorseModel m;
  m.dim = 3;
  m.energies = RealVector(3);
  m.energies << 0.4843, 1.4214, 2.3691;
  m.dipoles = ladder_dipoles(3);
  m.omega0 = 7.8e14;
  return m;
}

inline ValidationReport run_validation() {
  ValidationReport report;
  auto add = [&report](const std::string& name, double value, double limit) {
    report.checks.push_back({name, value, limit, value <= limit});
  };

  const MorseModel model = validation_model();
  const HermitianOperator h0 = build_h0(model);
  const HermitianOperator v = build_dipole(model);
  const DensityState rho0 = ground_state(model.dim);
  const HermitianOperator& target = h0;

  TimeGrid grid;
  grid.t0 = 0.0;
  grid.tF = time_to_internal(200.0, model.omega0);
  grid.steps = 512;
  grid.dt = (grid.tF - grid.t0) / grid.steps;

  OptimizerConfig config;
  config.lambda = 4.0;
  config.max_iters = 12;
  config.tol_delta_w = 1e-12;  // run the full budget; this is a fixed-length check
  config.seed = 1;

  Optimizer opt(h0, v, rho0, target, grid, config);
  OptimizerResult result;
  try {
    result = opt.run();
  } catch (const std::exception& e) {
    report.failure = e.what();
    return report;
  }

  // Monotone increase: every sweep must not lose more than rounding slack.
  double min_delta = 0.0;
  double worst_identity_ratio = 0.0;
  double max_abs_w = 0.0;
  for (const IterationRecord& rec : result.records) {
    max_abs_w = std::max(max_abs_w, std::abs(rec.w));
    if (rec.n == 0) continue;
    min_delta = std::min(min_delta, rec.delta_w);
    const double allowed = std::max(1e-6, 1e-3 * std::abs(rec.delta_w));
    worst_identity_ratio = std::max(worst_identity_ratio, identity_residual(rec) / allowed);
  }
  add("monotone-increase", -min_delta, monotonicity_slack(max_abs_w));
  add("increase-identity", worst_identity_ratio, 1.0);
  add("uniform-objective-bound", max_abs_w,
      uniform_w_bound(target, grid, config.lambda, opt.tables()));

  add("state-norm-drift", norm_drift(result.trajectory), 1e-9);
  add("trace-drift", trace_drift(result.trajectory), 1e-10);
  add("purity-drift", purity_drift(result.trajectory), 1e-9);

  // Pure route under the same final field: rho0 is rank one, so a plain
  // wavefunction integration must reproduce the density trajectory.
  Vector psi0 = Vector::Zero(model.dim);
  psi0[0] = 1.0;
  const PureTrajectory pure =
      propagate_pure_forward(PureState(psi0), result.field, opt.tables());
  add("pure-mixed-distance", compare_pure_mixed(result.trajectory, pure), 1e-9);

  const WComparison wc = compare_W_components(target, result.trajectory, result.costate,
                                              pure, result.field, opt.tables());
  const double w_scale = std::max(1.0, std::abs(wc.w1_mixed));
  const double defect_scale = hs_norm(target.matrix()) * hs_norm(rho0.matrix());
  add("terminal-yield-route-agreement", wc.delta_w1(), 1e-8 * w_scale);
  add("costate-defect-audit", std::abs(wc.w2_mixed), 1e-8 * defect_scale);
  add("costate-defect-route-agreement", wc.delta_w2(), 1e-8 * defect_scale);

  return report;
}

}  // namespace qoc

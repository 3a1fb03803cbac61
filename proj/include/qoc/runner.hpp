#pragma once

// Subcommand drivers behind the CLI: run an optimization and persist its
// artifacts, print kinematical bounds, replay a stored field, or run the
// built-in self-check. Each returns the process exit status: 0 success,
// 1 hard error, 2 optimizer hit the iteration budget without converging.

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "qoc/bounds.hpp"
#include "qoc/config.hpp"
#include "qoc/core.hpp"
#include "qoc/io.hpp"
#include "qoc/model.hpp"
#include "qoc/optimizer.hpp"
#include "qoc/validate.hpp"

namespace qoc {

inline nlohmann::ordered_json config_to_json(const RunConfig& cfg) {
  nlohmann::ordered_json j;
  j["model"]["levels"] = cfg.model.dim;
  j["model"]["energies"] =
      std::vector<double>(cfg.model.energies.begin(), cfg.model.energies.end());
  j["model"]["dipoles"] =
      std::vector<double>(cfg.model.dipoles.begin(), cfg.model.dipoles.end());
  j["model"]["omega0"] = cfg.model.omega0;
  j["initial"]["state"] = initial_state_name(cfg.initial);
  if (cfg.initial == InitialStateKind::thermal) j["initial"]["kT"] = cfg.kT;
  if (cfg.initial == InitialStateKind::weights)
    j["initial"]["weights"] = std::vector<double>(cfg.weights.begin(), cfg.weights.end());
  j["observable"]["kind"] = observable_kind_name(cfg.observable);
  if (cfg.observable == ObservableKind::file)
    j["observable"]["file"] = cfg.observable_file;
  j["grid"]["tF_fs"] = cfg.tF_fs;
  j["grid"]["steps"] = cfg.steps;
  j["optimizer"]["lambda"] = cfg.optimizer.lambda;
  j["optimizer"]["seed"] = cfg.optimizer.seed;
  j["optimizer"]["seed_amplitude"] = cfg.optimizer.seed_amplitude;
  j["optimizer"]["tol_delta_w"] = cfg.optimizer.tol_delta_w;
  j["optimizer"]["max_iters"] = cfg.optimizer.max_iters;
  j["optimizer"]["field_rule"] = field_rule_name(cfg.optimizer.field_rule);
  j["output"]["dir"] = cfg.output_dir;
  return j;
}

namespace detail {

inline void write_field_csv(const std::filesystem::path& dir, const ControlField& field,
                            double omega0) {
  std::vector<std::vector<double>> rows;
  rows.reserve(field.grid.steps);
  for (int j = 0; j < field.grid.steps; ++j)
    rows.push_back({time_to_fs(field.grid.midpoint(j), omega0), field.samples[j]});
  atomic_write(dir / "field.csv", csv_table({"t_fs", "f"}, rows));
}

inline void write_trajectory_csvs(const std::filesystem::path& dir,
                                  const Trajectory& traj, const HermitianOperator& a,
                                  double omega0) {
  const int dim = static_cast<int>(traj.states.front().rows());
  std::vector<std::string> pop_header{"t_fs"};
  for (int n = 1; n <= dim; ++n) pop_header.push_back("p" + std::to_string(n));

  std::vector<std::vector<double>> pop_rows, exp_rows;
  pop_rows.reserve(traj.states.size());
  exp_rows.reserve(traj.states.size());
  for (int j = 0; j <= traj.grid.steps; ++j) {
    const Matrix& rho = traj.states[static_cast<std::size_t>(j)];
    const double t_fs = time_to_fs(traj.grid.node(j), omega0);
    std::vector<double> row{t_fs};
    for (int n = 0; n < dim; ++n) row.push_back(rho(n, n).real());
    pop_rows.push_back(std::move(row));
    exp_rows.push_back({t_fs, expectation_matrix(a.matrix(), rho)});
  }
  atomic_write(dir / "populations.csv", csv_table(pop_header, pop_rows));
  atomic_write(dir / "expectation.csv", csv_table({"t_fs", "expectation"}, exp_rows));
}

inline void write_convergence_csv(const std::filesystem::path& dir,
                                  const std::vector<IterationRecord>& records) {
  std::vector<std::vector<double>> rows;
  rows.reserve(records.size());
  for (const IterationRecord& r : records)
    rows.push_back({static_cast<double>(r.n), r.w1, r.w3, r.w, r.delta_w,
                    r.n == 0 ? r.delta_w : identity_residual(r)});
  atomic_write(dir / "convergence.csv",
               csv_table({"n", "W1", "W3", "W", "deltaW", "identity_residual"}, rows));
}

// Brute-force extrema over every pairing of the two spectra. Factorial cost;
// callers gate on small dimension.
inline std::pair<double, double> enumerate_pairings(const RealVector& weights,
                                                    const RealVector& values) {
  const int n = static_cast<int>(weights.size());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  do {
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += weights[k] * values[perm[k]];
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return {lo, hi};
}

}  // namespace detail

inline int run_optimize(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const HermitianOperator h0 = build_h0(cfg.model);
  const HermitianOperator v = build_dipole(cfg.model);
  const DensityState rho0 = cfg.initial_state();
  const HermitianOperator a = cfg.observable_operator(h0);
  const TimeGrid grid = cfg.grid();

  Optimizer opt(h0, v, rho0, a, grid, cfg.optimizer);
  OptimizerResult result;
  try {
    result = opt.run();
  } catch (const MonotonicityError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  const int status = result.converged ? 0 : 2;

  const BoundsResult bounds = kinematical_bounds(rho0, a);
  const IterationRecord& last = result.records.back();

  const std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  detail::write_field_csv(dir, result.field, cfg.model.omega0);
  detail::write_trajectory_csvs(dir, result.trajectory, a, cfg.model.omega0);
  detail::write_convergence_csv(dir, result.records);

  nlohmann::ordered_json summary;
  summary["yield"] = last.w1;
  summary["kinematical_bounds"]["lower"] = bounds.lower;
  summary["kinematical_bounds"]["upper"] = bounds.upper;
  summary["yield_ratio"] = yield_ratio(last.w1, bounds);
  summary["objective"]["W1"] = last.w1;
  summary["objective"]["W3"] = last.w3;
  summary["objective"]["W"] = last.w;
  summary["objective"]["final_deltaW"] = last.delta_w;
  summary["converged"] = result.converged;
  summary["iterations"] = result.iterations;
  summary["exit_status"] = status;
  summary["seed"] = cfg.optimizer.seed;
  summary["config"] = config_to_json(cfg);
  atomic_write(dir / "summary.json", summary.dump(2) + "\n");

  out << "yield " << format_compact(last.w1) << " of upper bound "
      << format_compact(bounds.upper) << " (ratio "
      << format_compact(yield_ratio(last.w1, bounds)) << ")\n"
      << "iterations " << result.iterations << ", final deltaW "
      << format_compact(last.delta_w) << ", "
      << (result.converged ? "converged" : "iteration budget exhausted") << "\n"
      << "artifacts in " << dir.string() << "\n";
  return status;
}

inline int run_bounds(const RunConfig& cfg, std::ostream& out) {
  const HermitianOperator h0 = build_h0(cfg.model);
  const DensityState rho0 = cfg.initial_state();
  const HermitianOperator a = cfg.observable_operator(h0);
  const BoundsResult b = kinematical_bounds(rho0, a);

  out << "lower = " << format_compact(b.lower) << "\n";
  out << "upper = " << format_compact(b.upper) << "\n";
  out << "attaining pairing for the upper bound (state weight -> observable eigenvalue):\n";
  for (int k = 0; k < static_cast<int>(b.weights_descending.size()); ++k)
    out << "  " << format_compact(b.weights_descending[k]) << " -> "
        << format_compact(b.a_values_ascending[b.attaining_assignment[k]]) << "  [index "
        << b.attaining_assignment[k] << "]\n";

  if (rho0.dim() <= 6) {
    const auto [lo, hi] =
        detail::enumerate_pairings(b.weights_descending, b.a_values_ascending);
    if (std::abs(lo - b.lower) > 1e-12 || std::abs(hi - b.upper) > 1e-12)
      throw InvariantError("bounds disagree with full pairing enumeration");
    out << "verified against full enumeration of all " << rho0.dim()
        << "! spectrum pairings\n";
  }

  // A rank-one state puts all weight on one eigenvalue, a case worth spelling
  // out: the minimum is the least observable eigenvalue, not the next one up.
  if (b.weights_descending[0] >= 1.0 - 1e-12 && a.dim() >= 2) {
    out << "note: rank-one initial state: the minimum over unitary evolutions is the "
           "least observable eigenvalue "
        << format_compact(b.a_values_ascending[0]) << "; enumeration rules out the next "
        << "eigenvalue " << format_compact(b.a_values_ascending[1]) << "\n";
  }
  return 0;
}

inline int run_propagate(const RunConfig& cfg, const std::filesystem::path& field_path,
                         std::ostream& out, std::ostream& err) {
  const HermitianOperator h0 = build_h0(cfg.model);
  const HermitianOperator v = build_dipole(cfg.model);
  const DensityState rho0 = cfg.initial_state();
  const HermitianOperator a = cfg.observable_operator(h0);
  const TimeGrid grid = cfg.grid();

  const std::vector<double> samples = read_field_samples(field_path);
  if (static_cast<int>(samples.size()) != grid.steps) {
    err << "error: field file has " << samples.size() << " samples but the grid has "
        << grid.steps << " steps\n";
    return 1;
  }
  ControlField field;
  field.grid = grid;
  field.lambda = cfg.optimizer.lambda;
  field.samples = Eigen::Map<const RealVector>(samples.data(),
                                               static_cast<int>(samples.size()));
  field.validate();

  const PropagatorTables tables = build_tables(h0, v);
  const Trajectory traj = propagate_forward(rho0.matrix(), field, tables);

  const std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  detail::write_trajectory_csvs(dir, traj, a, cfg.model.omega0);

  out << "final expectation " << format_double(expectation_matrix(a.matrix(), traj.at_tF()))
      << "\nartifacts in " << dir.string() << "\n";
  return 0;
}

inline int run_validate(std::ostream& out) {
  const ValidationReport report = run_validation();
  if (!report.failure.empty()) {
    out << "self-check aborted: " << report.failure << "\n";
    return 1;
  }
  for (const ValidationCheck& c : report.checks)
    out << (c.passed ? "ok   " : "FAIL ") << c.name << "  " << format_double(c.value)
        << " <= " << format_double(c.limit) << "\n";
  out << (report.all_passed() ? "all checks passed\n" : "self-check FAILED\n");
  return report.all_passed() ? 0 : 1;
}

}  // namespace qoc

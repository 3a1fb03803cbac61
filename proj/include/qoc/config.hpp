#pragma once

// Run configuration: a flat sectioned key/value text file. Every run is
// fully described by one such file; unknown keys are errors, all referenced
// files are loaded and checked at parse time, and every diagnostic carries
// file:line. Defaults reproduce the stock four-level ladder scenario, so a
// minimal config can be just an [initial] section and an output directory.
//
//   [model]
//   levels = 4
//   energies = 0.4843 1.4214 2.3691 3.2434
//   dipoles = ladder            # or dim-1 explicit couplings
//   omega0 = 7.8e14
//   [initial]
//   state = ground              # ground | thermal | weights
//   kT = 2.7591                 # thermal only
//   weights = 0.4 0.3 0.2 0.1   # weights only
//   [observable]
//   kind = h0                   # h0 | file
//   file = observable.txt       # file only; resolved next to the config
//   [grid]
//   tF_fs = 200
//   steps = 4096
//   [optimizer]
//   lambda = 4
//   seed = 0
//   seed_amplitude = 1e-3
//   tol_delta_w = 1e-8
//   max_iters = 100
//   field_rule = kick_mean      # kick_mean | extrapolated
//   [output]
//   dir = out

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qoc/core.hpp"
#include "qoc/model.hpp"
#include "qoc/optimizer.hpp"
#include "qoc/propagator.hpp"

namespace qoc {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class InitialStateKind { ground, thermal, weights };
enum class ObservableKind { h0, file };

inline std::string field_rule_name(FieldRule rule) {
  return rule == FieldRule::kick_mean ? "kick_mean" : "extrapolated";
}

inline std::string initial_state_name(InitialStateKind k) {
  switch (k) {
    case InitialStateKind::ground: return "ground";
    case InitialStateKind::thermal: return "thermal";
    case InitialStateKind::weights: return "weights";
  }
  throw InvariantError("initial_state_name: bad enum");
}

inline std::string observable_kind_name(ObservableKind k) {
  return k == ObservableKind::h0 ? "h0" : "file";
}

struct RunConfig {
  MorseModel model = default_model();
  InitialStateKind initial = InitialStateKind::ground;
  double kT = 0.0;            // thermal only
  RealVector weights;         // weights only
  ObservableKind observable = ObservableKind::h0;
  std::string observable_file;        // as written in the config
  std::optional<Matrix> observable_matrix;  // loaded at parse time
  double tF_fs = 200.0;
  int steps = 4096;
  OptimizerConfig optimizer;
  std::string output_dir = "out";

  TimeGrid grid() const {
    TimeGrid g;
    g.t0 = 0.0;
    g.tF = time_to_internal(tF_fs, model.omega0);
    g.steps = steps;
    g.dt = (g.tF - g.t0) / steps;
    return g;
  }

  DensityState initial_state() const {
    switch (initial) {
      case InitialStateKind::ground:
        return ground_state(model.dim);
      case InitialStateKind::thermal:
        return thermal_state(model.energies, kT);
      case InitialStateKind::weights: {
        Matrix rho = Matrix::Zero(model.dim, model.dim);
        for (int n = 0; n < model.dim; ++n) rho(n, n) = weights[n];
        return DensityState(rho);
      }
    }
    throw InvariantError("initial_state: bad enum");
  }

  HermitianOperator observable_operator(const HermitianOperator& h0) const {
    if (observable == ObservableKind::h0) return h0;
    if (!observable_matrix) throw InvariantError("observable matrix not loaded");
    return HermitianOperator(*observable_matrix);
  }
};

namespace detail {

struct ConfigEntry {
  std::string value;
  int line = 0;
  bool used = false;
};

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] inline void config_fail(const std::string& file, int line,
                                     const std::string& what) {
  throw ConfigError(file + ":" + std::to_string(line) + ": " + what);
}

inline double parse_number(const std::string& file, int line, const std::string& raw) {
  try {
    std::size_t used = 0;
    const double v = std::stod(raw, &used);
    if (used != raw.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    config_fail(file, line, "cannot parse number '" + raw + "'");
  }
}

inline long parse_integer(const std::string& file, int line, const std::string& raw) {
  try {
    std::size_t used = 0;
    const long v = std::stol(raw, &used);
    if (used != raw.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    config_fail(file, line, "cannot parse integer '" + raw + "'");
  }
}

inline RealVector parse_number_list(const std::string& file, int line,
                                    const std::string& raw) {
  std::istringstream in(raw);
  std::vector<double> values;
  std::string token;
  while (in >> token) values.push_back(parse_number(file, line, token));
  if (values.empty()) config_fail(file, line, "expected a list of numbers");
  RealVector out(static_cast<int>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) out[static_cast<int>(i)] = values[i];
  return out;
}

// Observable matrix file: first token is the dimension N, then N rows of
// N (re, im) pairs. Hermiticity is enforced on load.
inline Matrix read_observable_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open observable file " + path.string());
  int n = 0;
  if (!(in >> n) || n < 2)
    throw ConfigError(path.string() + ": first token must be the dimension (>= 2)");
  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double re = 0.0, im = 0.0;
      if (!(in >> re >> im))
        throw ConfigError(path.string() + ": expected " + std::to_string(2 * n * n) +
                          " numbers after the dimension");
      a(i, j) = Complex(re, im);
    }
  return a;
}

}  // namespace detail

inline RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  const std::string file = path.string();

  // Pass 1: collect section-qualified entries with their line numbers.
  std::map<std::string, detail::ConfigEntry> entries;
  std::map<std::string, int> section_lines;
  std::string section;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        detail::config_fail(file, lineno, "malformed section header '" + line + "'");
      section = detail::trim(line.substr(1, line.size() - 2));
      if (section.empty()) detail::config_fail(file, lineno, "empty section name");
      section_lines.emplace(section, lineno);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      detail::config_fail(file, lineno, "expected 'key = value', got '" + line + "'");
    if (section.empty())
      detail::config_fail(file, lineno, "key before any [section] header");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) detail::config_fail(file, lineno, "empty key");
    if (value.empty()) detail::config_fail(file, lineno, "empty value for '" + key + "'");
    const std::string qualified = section + "." + key;
    if (const auto it = entries.find(qualified); it != entries.end())
      detail::config_fail(file, lineno,
                          "duplicate key '" + qualified + "' (first at line " +
                              std::to_string(it->second.line) + ")");
    entries[qualified] = {value, lineno, false};
  }

  auto take = [&entries](const std::string& qualified) -> detail::ConfigEntry* {
    const auto it = entries.find(qualified);
    if (it == entries.end()) return nullptr;
    it->second.used = true;
    return &it->second;
  };

  RunConfig cfg;

  // [model] — dimension can come from 'levels' or be inferred from 'energies'.
  detail::ConfigEntry* levels = take("model.levels");
  detail::ConfigEntry* energies = take("model.energies");
  detail::ConfigEntry* dipoles = take("model.dipoles");
  detail::ConfigEntry* omega0 = take("model.omega0");
  if (levels) {
    const long n = detail::parse_integer(file, levels->line, levels->value);
    if (n < 2 || n > 64) detail::config_fail(file, levels->line, "levels must be in [2, 64]");
    cfg.model.dim = static_cast<int>(n);
  }
  if (energies) {
    cfg.model.energies = detail::parse_number_list(file, energies->line, energies->value);
    if (!levels) cfg.model.dim = static_cast<int>(cfg.model.energies.size());
    if (static_cast<int>(cfg.model.energies.size()) != cfg.model.dim)
      detail::config_fail(file, energies->line,
                          "expected " + std::to_string(cfg.model.dim) + " energies, got " +
                              std::to_string(cfg.model.energies.size()));
  } else if (cfg.model.dim != 4) {
    detail::config_fail(file, levels ? levels->line : 1,
                        "explicit energies required when levels != 4");
  }
  if (dipoles && dipoles->value != "ladder") {
    cfg.model.dipoles = detail::parse_number_list(file, dipoles->line, dipoles->value);
    if (static_cast<int>(cfg.model.dipoles.size()) != cfg.model.dim - 1)
      detail::config_fail(file, dipoles->line,
                          "expected " + std::to_string(cfg.model.dim - 1) +
                              " dipole couplings");
  } else {
    cfg.model.dipoles = ladder_dipoles(cfg.model.dim);
  }
  if (omega0) {
    cfg.model.omega0 = detail::parse_number(file, omega0->line, omega0->value);
    if (!(cfg.model.omega0 > 0.0))
      detail::config_fail(file, omega0->line, "omega0 must be positive");
  }
  try {
    cfg.model.validate();
  } catch (const std::exception& e) {
    detail::config_fail(file, section_lines.count("model") ? section_lines["model"] : 1,
                        std::string("invalid model: ") + e.what());
  }

  // [initial]
  detail::ConfigEntry* state = take("initial.state");
  detail::ConfigEntry* kT = take("initial.kT");
  detail::ConfigEntry* weights = take("initial.weights");
  if (state) {
    if (state->value == "ground") cfg.initial = InitialStateKind::ground;
    else if (state->value == "thermal") cfg.initial = InitialStateKind::thermal;
    else if (state->value == "weights") cfg.initial = InitialStateKind::weights;
    else
      detail::config_fail(file, state->line,
                          "state must be ground, thermal, or weights; got '" +
                              state->value + "'");
  }
  if (cfg.initial == InitialStateKind::thermal) {
    if (!kT)
      detail::config_fail(file, state ? state->line : 1, "state = thermal requires kT");
    cfg.kT = detail::parse_number(file, kT->line, kT->value);
    if (!(cfg.kT > 0.0)) detail::config_fail(file, kT->line, "kT must be positive");
  } else if (kT) {
    detail::config_fail(file, kT->line, "kT is only meaningful for state = thermal");
  }
  if (cfg.initial == InitialStateKind::weights) {
    if (!weights)
      detail::config_fail(file, state ? state->line : 1,
                          "state = weights requires a weights list");
    cfg.weights = detail::parse_number_list(file, weights->line, weights->value);
    if (static_cast<int>(cfg.weights.size()) != cfg.model.dim)
      detail::config_fail(file, weights->line,
                          "expected " + std::to_string(cfg.model.dim) + " weights");
    if (cfg.weights.minCoeff() < 0.0)
      detail::config_fail(file, weights->line, "weights must be nonnegative");
    const double sum = cfg.weights.sum();
    if (std::abs(sum - 1.0) > 1e-6)
      detail::config_fail(file, weights->line,
                          "weights must sum to 1 (got " + std::to_string(sum) + ")");
    cfg.weights /= sum;  // absorb rounding so the density trace is exact
  } else if (weights) {
    detail::config_fail(file, weights->line,
                        "weights are only meaningful for state = weights");
  }

  // [observable]
  detail::ConfigEntry* kind = take("observable.kind");
  detail::ConfigEntry* obs_file = take("observable.file");
  if (kind) {
    if (kind->value == "h0") cfg.observable = ObservableKind::h0;
    else if (kind->value == "file") cfg.observable = ObservableKind::file;
    else
      detail::config_fail(file, kind->line,
                          "observable kind must be h0 or file; got '" + kind->value + "'");
  }
  if (cfg.observable == ObservableKind::file) {
    if (!obs_file)
      detail::config_fail(file, kind ? kind->line : 1,
                          "observable kind = file requires a file path");
    cfg.observable_file = obs_file->value;
    std::filesystem::path obs_path(obs_file->value);
    if (obs_path.is_relative()) obs_path = path.parent_path() / obs_path;
    Matrix a = detail::read_observable_matrix(obs_path);
    if (static_cast<int>(a.rows()) != cfg.model.dim)
      detail::config_fail(file, obs_file->line,
                          "observable dimension " + std::to_string(a.rows()) +
                              " does not match model levels " +
                              std::to_string(cfg.model.dim));
    try {
      HermitianOperator check(a);  // enforce Hermiticity at load time
    } catch (const std::exception& e) {
      detail::config_fail(file, obs_file->line,
                          std::string("invalid observable: ") + e.what());
    }
    cfg.observable_matrix = std::move(a);
  } else if (obs_file) {
    detail::config_fail(file, obs_file->line,
                        "observable file is only meaningful for kind = file");
  }

  // [grid]
  if (detail::ConfigEntry* e = take("grid.tF_fs")) {
    cfg.tF_fs = detail::parse_number(file, e->line, e->value);
    if (!(cfg.tF_fs > 0.0)) detail::config_fail(file, e->line, "tF_fs must be positive");
  }
  if (detail::ConfigEntry* e = take("grid.steps")) {
    const long n = detail::parse_integer(file, e->line, e->value);
    if (n < 1 || n > (1L << 24))
      detail::config_fail(file, e->line, "steps must be in [1, 2^24]");
    cfg.steps = static_cast<int>(n);
  }

  // [optimizer]
  if (detail::ConfigEntry* e = take("optimizer.lambda")) {
    cfg.optimizer.lambda = detail::parse_number(file, e->line, e->value);
    if (!(cfg.optimizer.lambda > 0.0))
      detail::config_fail(file, e->line, "lambda must be positive");
  }
  if (detail::ConfigEntry* e = take("optimizer.seed"))
    cfg.optimizer.seed =
        static_cast<std::uint64_t>(detail::parse_integer(file, e->line, e->value));
  if (detail::ConfigEntry* e = take("optimizer.seed_amplitude")) {
    cfg.optimizer.seed_amplitude = detail::parse_number(file, e->line, e->value);
    if (cfg.optimizer.seed_amplitude < 0.0)
      detail::config_fail(file, e->line, "seed_amplitude must be nonnegative");
  }
  if (detail::ConfigEntry* e = take("optimizer.tol_delta_w")) {
    cfg.optimizer.tol_delta_w = detail::parse_number(file, e->line, e->value);
    if (!(cfg.optimizer.tol_delta_w > 0.0))
      detail::config_fail(file, e->line, "tol_delta_w must be positive");
  }
  if (detail::ConfigEntry* e = take("optimizer.max_iters")) {
    const long n = detail::parse_integer(file, e->line, e->value);
    if (n < 1 || n > 1000000)
      detail::config_fail(file, e->line, "max_iters must be in [1, 1e6]");
    cfg.optimizer.max_iters = static_cast<int>(n);
  }
  if (detail::ConfigEntry* e = take("optimizer.field_rule")) {
    if (e->value == "kick_mean") cfg.optimizer.field_rule = FieldRule::kick_mean;
    else if (e->value == "extrapolated") cfg.optimizer.field_rule = FieldRule::extrapolated;
    else
      detail::config_fail(file, e->line,
                          "field_rule must be kick_mean or extrapolated; got '" +
                              e->value + "'");
  }

  // [output]
  if (detail::ConfigEntry* e = take("output.dir")) cfg.output_dir = e->value;

  // Reject anything unconsumed: typos must not silently fall back to defaults.
  for (const auto& [qualified, entry] : entries)
    if (!entry.used)
      detail::config_fail(file, entry.line, "unknown key '" + qualified + "'");

  cfg.optimizer.validate();
  return cfg;
}

}  // namespace qoc

#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <catch2/catch_amalgamated.hpp>

#include "qoc/config.hpp"
#include "qoc/io.hpp"
#include "qoc/runner.hpp"

using namespace qoc;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory per test case, cleaned up on destruction.
struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("qoc_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Last row, given column of a CSV artifact.
double last_csv_value(const fs::path& p, int column) {
  std::ifstream in(p);
  std::string line, last;
  std::getline(in, line);  // header
  while (std::getline(in, line))
    if (!line.empty()) last = line;
  std::istringstream row(last);
  std::string cell;
  for (int c = 0; c <= column; ++c) std::getline(row, cell, ',');
  return std::stod(cell);
}

}  // namespace

TEST_CASE("17-digit formatting round-trips doubles exactly") {
  for (const double x : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 156.0, 3.2434,
                         0.30000000000000004}) {
    REQUIRE(std::stod(format_double(x)) == x);
  }
}

TEST_CASE("csv tables have fixed headers and row width checks") {
  const std::string csv = csv_table({"a", "b"}, {{1.0, 2.0}, {3.5, -4.0}});
  REQUIRE(csv.substr(0, 4) == "a,b\n");
  REQUIRE(csv.find("3.5,-4") != std::string::npos);
  REQUIRE_THROWS_AS(csv_table({"a"}, {{1.0, 2.0}}), IoError);
}

TEST_CASE("atomic write replaces the target and leaves no temp file") {
  TempDir tmp;
  const fs::path target = tmp.path / "artifact.txt";
  atomic_write(target, "first");
  atomic_write(target, "second");
  REQUIRE(read_file(target) == "second");
  REQUIRE(!fs::exists(tmp.path / "artifact.txt.tmp"));
}

TEST_CASE("field sample reader accepts csv, bare, and commented forms") {
  TempDir tmp;
  write_file(tmp.path / "a.csv", "t_fs,f\n0.5,0.125\n1.5,-0.25\n");
  const auto a = read_field_samples(tmp.path / "a.csv");
  REQUIRE(a == std::vector<double>{0.125, -0.25});

  write_file(tmp.path / "b.txt", "# pulse\n0.125\n-0.25\n\n");
  REQUIRE(read_field_samples(tmp.path / "b.txt") == std::vector<double>{0.125, -0.25});

  write_file(tmp.path / "c.txt", "0.1\nnot-a-number\n");
  REQUIRE_THROWS_WITH(read_field_samples(tmp.path / "c.txt"), ContainsSubstring(":2:"));
  REQUIRE_THROWS_AS(read_field_samples(tmp.path / "missing.csv"), IoError);
}

TEST_CASE("minimal config yields the stock scenario defaults") {
  TempDir tmp;
  write_file(tmp.path / "min.cfg", "[output]\ndir = " + (tmp.path / "out").string() + "\n");
  const RunConfig cfg = parse_config(tmp.path / "min.cfg");
  REQUIRE(cfg.model.dim == 4);
  REQUIRE(cfg.model.energies[3] == Approx(3.2434));
  REQUIRE(cfg.initial == InitialStateKind::ground);
  REQUIRE(cfg.observable == ObservableKind::h0);
  REQUIRE(cfg.tF_fs == Approx(200.0));
  REQUIRE(cfg.steps == 4096);
  REQUIRE(cfg.optimizer.lambda == Approx(4.0));
  REQUIRE(cfg.optimizer.max_iters == 100);
  REQUIRE(cfg.optimizer.tol_delta_w == Approx(1e-8));
  REQUIRE(cfg.optimizer.field_rule == FieldRule::kick_mean);
  REQUIRE(cfg.grid().tF == Approx(156.0));
}

TEST_CASE("full config parses every section") {
  TempDir tmp;
  write_file(tmp.path / "full.cfg",
             "[model]\n"
             "levels = 3\n"
             "energies = 0.5 1.4 2.3\n"
             "dipoles = 1.0 1.5\n"
             "omega0 = 5e14\n"
             "[initial]\n"
             "state = thermal\n"
             "kT = 1.8\n"
             "[observable]\n"
             "kind = h0\n"
             "[grid]\n"
             "tF_fs = 100\n"
             "steps = 256\n"
             "[optimizer]\n"
             "lambda = 2.5\n"
             "seed = 17\n"
             "seed_amplitude = 1e-2\n"
             "tol_delta_w = 1e-6\n"
             "max_iters = 40\n"
             "field_rule = extrapolated\n"
             "[output]\n"
             "dir = somewhere\n");
  const RunConfig cfg = parse_config(tmp.path / "full.cfg");
  REQUIRE(cfg.model.dim == 3);
  REQUIRE(cfg.model.dipoles[1] == Approx(1.5));
  REQUIRE(cfg.initial == InitialStateKind::thermal);
  REQUIRE(cfg.kT == Approx(1.8));
  REQUIRE(cfg.steps == 256);
  REQUIRE(cfg.optimizer.seed == 17);
  REQUIRE(cfg.optimizer.field_rule == FieldRule::extrapolated);
  REQUIRE(cfg.output_dir == "somewhere");
  REQUIRE(cfg.initial_state().matrix()(0, 0).real() > 0.4);
}

TEST_CASE("config diagnostics carry file and line") {
  TempDir tmp;

  write_file(tmp.path / "unknown.cfg", "[grid]\nsteps = 16\nstep = 17\n");
  REQUIRE_THROWS_WITH(parse_config(tmp.path / "unknown.cfg"),
                      ContainsSubstring(":3: unknown key 'grid.step'"));

  write_file(tmp.path / "dup.cfg", "[grid]\nsteps = 16\nsteps = 32\n");
  REQUIRE_THROWS_WITH(parse_config(tmp.path / "dup.cfg"),
                      ContainsSubstring(":3: duplicate key"));

  write_file(tmp.path / "number.cfg", "[grid]\ntF_fs = fast\n");
  REQUIRE_THROWS_WITH(parse_config(tmp.path / "number.cfg"),
                      ContainsSubstring(":2: cannot parse number 'fast'"));

  write_file(tmp.path / "nokt.cfg", "[initial]\nstate = thermal\n");
  REQUIRE_THROWS_WITH(parse_config(tmp.path / "nokt.cfg"),
                      ContainsSubstring("requires kT"));

  write_file(tmp.path / "sum.cfg", "[initial]\nstate = weights\nweights = 0.5 0.2 0.2 0.2\n");
  REQUIRE_THROWS_WITH(parse_config(tmp.path / "sum.cfg"),
                      ContainsSubstring("must sum to 1"));

  write_file(tmp.path / "section.cfg", "[grid\nsteps = 4\n");
  REQUIRE_THROWS_WITH(parse_config(tmp.path / "section.cfg"),
                      ContainsSubstring("malformed section header"));

  write_file(tmp.path / "orphan.cfg", "steps = 4\n");
  REQUIRE_THROWS_WITH(parse_config(tmp.path / "orphan.cfg"),
                      ContainsSubstring("key before any [section]"));

  write_file(tmp.path / "levels.cfg", "[model]\nlevels = 5\n");
  REQUIRE_THROWS_WITH(parse_config(tmp.path / "levels.cfg"),
                      ContainsSubstring("explicit energies required"));

  write_file(tmp.path / "kt.cfg", "[initial]\nkT = 2.0\n");
  REQUIRE_THROWS_WITH(parse_config(tmp.path / "kt.cfg"),
                      ContainsSubstring("only meaningful for state = thermal"));

  REQUIRE_THROWS_AS(parse_config(tmp.path / "absent.cfg"), ConfigError);
}

TEST_CASE("observable matrix files load and are checked for hermiticity") {
  TempDir tmp;
  // Pauli-x-like 2x2 embedded in a 4x4 energy observable: use plain diagonal.
  write_file(tmp.path / "obs.txt",
             "4\n"
             "0 0  0 0  0 0  0 0\n"
             "0 0  1 0  0 0  0 0\n"
             "0 0  0 0  2 0  0 0\n"
             "0 0  0 0  0 0  9 0\n");
  write_file(tmp.path / "obs.cfg",
             "[observable]\nkind = file\nfile = obs.txt\n");
  const RunConfig cfg = parse_config(tmp.path / "obs.cfg");
  REQUIRE(cfg.observable_matrix.has_value());
  REQUIRE((*cfg.observable_matrix)(3, 3).real() == Approx(9.0));
  const HermitianOperator a = cfg.observable_operator(build_h0(cfg.model));
  REQUIRE(a.matrix()(1, 1).real() == Approx(1.0));

  write_file(tmp.path / "skew.txt",
             "4\n"
             "0 0  1 1  0 0  0 0\n"
             "0 0  0 0  0 0  0 0\n"
             "0 0  0 0  0 0  0 0\n"
             "0 0  0 0  0 0  0 0\n");
  write_file(tmp.path / "skew.cfg", "[observable]\nkind = file\nfile = skew.txt\n");
  REQUIRE_THROWS_WITH(parse_config(tmp.path / "skew.cfg"),
                      ContainsSubstring("invalid observable"));

  write_file(tmp.path / "short.txt", "2\n0 0\n");
  write_file(tmp.path / "short.cfg", "[observable]\nkind = file\nfile = short.txt\n");
  REQUIRE_THROWS_AS(parse_config(tmp.path / "short.cfg"), ConfigError);
}

namespace {

RunConfig small_run_config(const fs::path& dir, const std::string& extra = "") {
  const fs::path cfg_path = dir / "run.cfg";
  write_file(cfg_path,
             "[grid]\nsteps = 128\n"
             "[optimizer]\nmax_iters = 8\ntol_delta_w = 1e-12\n" +
                 extra + "[output]\ndir = " + (dir / "out").string() + "\n");
  return parse_config(cfg_path);
}

}  // namespace

TEST_CASE("optimize writes the full artifact set and is byte-deterministic") {
  TempDir tmp;
  const RunConfig cfg = small_run_config(tmp.path);
  std::ostringstream out, err;
  const int status = run_optimize(cfg, out, err);
  REQUIRE(status == 2);  // budget exhausted at this tolerance
  for (const char* name :
       {"field.csv", "populations.csv", "expectation.csv", "convergence.csv",
        "summary.json"})
    REQUIRE(fs::exists(tmp.path / "out" / name));

  const std::string field1 = read_file(tmp.path / "out" / "field.csv");
  const std::string pops1 = read_file(tmp.path / "out" / "populations.csv");
  const std::string summ1 = read_file(tmp.path / "out" / "summary.json");
  REQUIRE(field1.substr(0, 7) == "t_fs,f\n");
  REQUIRE(summ1.find("\"seed\"") != std::string::npos);
  REQUIRE(summ1.find("\"config\"") != std::string::npos);
  REQUIRE(summ1.find("\"yield_ratio\"") != std::string::npos);

  std::ostringstream out2, err2;
  REQUIRE(run_optimize(cfg, out2, err2) == 2);
  REQUIRE(read_file(tmp.path / "out" / "field.csv") == field1);
  REQUIRE(read_file(tmp.path / "out" / "populations.csv") == pops1);
  REQUIRE(read_file(tmp.path / "out" / "summary.json") == summ1);
}

TEST_CASE("optimize exits zero once the increase tolerance is met") {
  TempDir tmp;
  const RunConfig cfg = small_run_config(tmp.path, "");
  RunConfig loose = cfg;
  loose.optimizer.tol_delta_w = 0.5;
  std::ostringstream out, err;
  REQUIRE(run_optimize(loose, out, err) == 0);
  REQUIRE(out.str().find("converged") != std::string::npos);
}

TEST_CASE("population rows carry unit trace and the correct row count") {
  TempDir tmp;
  const RunConfig cfg = small_run_config(tmp.path);
  std::ostringstream out, err;
  run_optimize(cfg, out, err);
  std::ifstream in(tmp.path / "out" / "populations.csv");
  std::string line;
  std::getline(in, line);
  REQUIRE(line == "t_fs,p1,p2,p3,p4");
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++rows;
    std::istringstream row(line);
    std::string cell;
    std::getline(row, cell, ',');  // time
    double total = 0.0;
    while (std::getline(row, cell, ',')) total += std::stod(cell);
    REQUIRE(total == Approx(1.0).margin(1e-12));
  }
  REQUIRE(rows == 129);
}

TEST_CASE("replaying an optimized field reproduces its trajectory artifacts") {
  TempDir tmp;
  const RunConfig cfg = small_run_config(tmp.path);
  std::ostringstream out, err;
  run_optimize(cfg, out, err);
  const fs::path opt_pops = tmp.path / "out" / "populations.csv";
  const std::string optimized = read_file(opt_pops);

  RunConfig replay = cfg;
  replay.output_dir = (tmp.path / "replay").string();
  std::ostringstream out2, err2;
  REQUIRE(run_propagate(replay, tmp.path / "out" / "field.csv", out2, err2) == 0);
  // Same stepping code, same samples: the artifact must match byte for byte
  // (a stronger statement than the 1e-10 numeric agreement asked of it).
  REQUIRE(read_file(tmp.path / "replay" / "populations.csv") == optimized);
}

TEST_CASE("zero field leaves ground-state populations constant") {
  TempDir tmp;
  const RunConfig cfg = small_run_config(tmp.path);
  write_file(tmp.path / "zero.txt", std::string(""));
  {
    std::ofstream z(tmp.path / "zero.txt");
    for (int j = 0; j < cfg.steps; ++j) z << "0\n";
  }
  RunConfig replay = cfg;
  replay.output_dir = (tmp.path / "zero_out").string();
  std::ostringstream out, err;
  REQUIRE(run_propagate(replay, tmp.path / "zero.txt", out, err) == 0);
  std::ifstream in(tmp.path / "zero_out" / "populations.csv");
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::getline(row, cell, ',');
    std::getline(row, cell, ',');
    REQUIRE(std::stod(cell) == Approx(1.0).margin(1e-13));  // p1 stays 1
  }
}

TEST_CASE("field file with the wrong sample count is a hard error") {
  TempDir tmp;
  const RunConfig cfg = small_run_config(tmp.path);
  write_file(tmp.path / "short.txt", "0.1\n0.2\n");
  std::ostringstream out, err;
  REQUIRE(run_propagate(cfg, tmp.path / "short.txt", out, err) == 1);
  REQUIRE(err.str().find("2 samples") != std::string::npos);
}

TEST_CASE("midpoint-interpolated replay on a doubled grid agrees to 1e-3") {
  TempDir tmp;
  // Smooth pulse on the coarse grid.
  const RunConfig coarse = small_run_config(tmp.path);
  const TimeGrid cg = coarse.grid();
  {
    std::ofstream f(tmp.path / "smooth.txt");
    for (int j = 0; j < cg.steps; ++j)
      f << format_double(0.05 * std::sin(2.0 * M_PI * cg.midpoint(j) / cg.tF)) << "\n";
  }
  RunConfig run1 = coarse;
  run1.output_dir = (tmp.path / "c_out").string();
  std::ostringstream o1, e1;
  REQUIRE(run_propagate(run1, tmp.path / "smooth.txt", o1, e1) == 0);

  // Linear midpoint interpolation onto the doubled grid.
  const auto s = read_field_samples(tmp.path / "smooth.txt");
  {
    std::ofstream f(tmp.path / "fine.txt");
    for (int j = 0; j < cg.steps; ++j) {
      const double prev = j > 0 ? s[j - 1] : s[0];
      const double next = j + 1 < cg.steps ? s[j + 1] : s[cg.steps - 1];
      f << format_double(0.25 * prev + 0.75 * s[j]) << "\n";
      f << format_double(0.75 * s[j] + 0.25 * next) << "\n";
    }
  }
  RunConfig run2 = coarse;
  run2.steps = 2 * coarse.steps;
  run2.output_dir = (tmp.path / "f_out").string();
  std::ostringstream o2, e2;
  REQUIRE(run_propagate(run2, tmp.path / "fine.txt", o2, e2) == 0);

  const double a1 = last_csv_value(tmp.path / "c_out" / "expectation.csv", 1);
  const double a2 = last_csv_value(tmp.path / "f_out" / "expectation.csv", 1);
  REQUIRE(std::abs(a1 - a2) <= 1e-3);
}

TEST_CASE("bounds subcommand prints the pairing and enumeration check") {
  TempDir tmp;
  write_file(tmp.path / "b.cfg", "[initial]\nstate = thermal\nkT = 2.7591\n");
  const RunConfig cfg = parse_config(tmp.path / "b.cfg");
  std::ostringstream out;
  REQUIRE(run_bounds(cfg, out) == 0);
  const std::string text = out.str();
  REQUIRE(text.find("lower = 1.50") != std::string::npos);
  REQUIRE(text.find("upper = 2.25") != std::string::npos);
  REQUIRE(text.find("attaining pairing") != std::string::npos);
  REQUIRE(text.find("full enumeration") != std::string::npos);
  REQUIRE(text.find("note:") == std::string::npos);  // mixed state: no rank-one note

  write_file(tmp.path / "g.cfg", "[initial]\nstate = ground\n");
  std::ostringstream gout;
  REQUIRE(run_bounds(parse_config(tmp.path / "g.cfg"), gout) == 0);
  REQUIRE(gout.str().find("lower = 0.4843") != std::string::npos);
  REQUIRE(gout.str().find("upper = 3.2434") != std::string::npos);
  REQUIRE(gout.str().find("note: rank-one initial state") != std::string::npos);
  REQUIRE(gout.str().find("1.4214") != std::string::npos);
}

TEST_CASE("config echo in json mirrors every field") {
  TempDir tmp;
  const RunConfig cfg = small_run_config(tmp.path);
  const nlohmann::ordered_json j = config_to_json(cfg);
  REQUIRE(j["model"]["levels"] == 4);
  REQUIRE(j["grid"]["steps"] == 128);
  REQUIRE(j["optimizer"]["max_iters"] == 8);
  REQUIRE(j["optimizer"]["field_rule"] == "kick_mean");
  REQUIRE(j["initial"]["state"] == "ground");
  REQUIRE(j["observable"]["kind"] == "h0");
  REQUIRE(j["output"]["dir"] == cfg.output_dir);
}

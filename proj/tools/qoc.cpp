#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "qoc/config.hpp"
#include "qoc/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"monotone quantum control of mixed states with certified bounds"};
  app.require_subcommand(1);

  std::string config_path;
  std::string field_path;

  CLI::App* optimize =
      app.add_subcommand("optimize", "run the double-sweep optimization, write artifacts");
  optimize->add_option("config", config_path, "run configuration file")->required();

  CLI::App* bounds = app.add_subcommand(
      "bounds", "print kinematical bounds for the configured state and observable");
  bounds->add_option("config", config_path, "run configuration file")->required();

  CLI::App* propagate =
      app.add_subcommand("propagate", "replay a stored field without optimizing");
  propagate->add_option("config", config_path, "run configuration file")->required();
  propagate->add_option("field", field_path, "field samples to replay (f or t,f rows)")
      ->required();

  CLI::App* validate = app.add_subcommand("validate", "run the built-in self-check");

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) return qoc::run_validate(std::cout);
    const qoc::RunConfig cfg = qoc::parse_config(config_path);
    if (optimize->parsed()) return qoc::run_optimize(cfg, std::cout, std::cerr);
    if (bounds->parsed()) return qoc::run_bounds(cfg, std::cout);
    if (propagate->parsed())
      return qoc::run_propagate(cfg, field_path, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

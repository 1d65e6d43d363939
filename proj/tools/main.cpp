#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wickpde/commands.hpp"
#include "wickpde/util.hpp"

using namespace wickpde;

int main(int argc, char** argv) {
  CLI::App app{"Chaos-expansion solver for parabolic equations with a Wick-product "
               "lower-order term"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();  // global --seed/--out/--threads may follow the subcommand

  std::optional<std::uint64_t> seed;
  std::string out_dir;
  int threads = 1;
  app.add_option("--seed", seed, "Override the scenario seed");
  app.add_option("--out", out_dir, "Override the scenario output directory");
  app.add_option("--threads", threads, "Worker threads per recursion level")
      ->check(CLI::PositiveNumber);

  std::string scenario_file;
  CLI::App* solve = app.add_subcommand("solve", "Solve a scenario and write its outputs");
  solve->add_option("scenario", scenario_file, "Scenario JSON file")->required();

  std::string check = "all";
  CLI::App* verify = app.add_subcommand(
      "verify", "Run verification checks (lemma1, lemma2, thm1, eq3, summability, oracle, mc)");
  verify->add_option("scenario", scenario_file, "Scenario JSON file")->required();
  verify->add_option("--check", check, "Check name or 'all'");

  std::vector<double> ps{2.0};
  int m_max = 4;
  int n = 20;
  std::string shape = "box";
  std::string series_out = "out/series";
  CLI::App* series =
      app.add_subcommand("series", "Tabulate weighted zeta sums over truncation sizes");
  series->add_option("--p", ps, "Weight exponents p");
  series->add_option("--m", m_max, "Largest variable count m");
  series->add_option("--n", n, "Per-variable degree cap n");
  series->add_option("--shape", shape, "Truncation shape (total_degree or box)");
  series->add_option("--out", series_out, "Output directory for series.csv");

  CLI11_PARSE(app, argc, argv);

  CommandOptions opts;
  opts.seed = seed;
  opts.out_dir = out_dir;
  opts.threads = threads;

  try {
    if (solve->parsed()) return cmd_solve(scenario_file, opts, std::cout);
    if (verify->parsed()) return cmd_verify(scenario_file, check, opts, std::cout);
    return cmd_series(ps, m_max, n, shape_from_name(shape), series_out, std::cout);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

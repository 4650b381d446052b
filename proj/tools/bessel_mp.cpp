// bessel-mp: command-line front end for the solvers and checks.

#include "besselmp/cli_io.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

constexpr int exit_config_error = 2;

struct Invocation {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

int execute(besselmp::RunMode mode, const Invocation& inv) {
  using namespace besselmp;
  std::ifstream in(inv.config_path);
  if (!in) {
    std::cerr << "error: cannot read " << inv.config_path << '\n';
    return exit_config_error;
  }
  std::stringstream text;
  text << in.rdbuf();

  RunConfig cfg;
  try {
    std::vector<std::string> syntax;
    for (const auto& [key, value] : parse_entries(text.str(), syntax))
      if (key == "mode" && value.is_string() && value.get<std::string>() != to_string(mode))
        throw config_error({"config sets mode = " + value.get<std::string>() + " but the subcommand is " +
                            to_string(mode)});
    cfg = parse_config(text.str());
  } catch (const config_error& ex) {
    for (const auto& e : ex.errors()) std::cerr << "config error: " << e << '\n';
    return exit_config_error;
  }
  cfg.mode = mode;
  if (inv.seed) cfg.seed = *inv.seed;
  if (inv.out) cfg.out = *inv.out;

  const RunReport report = run(cfg);
  for (const auto& s : report.stages) {
    std::cout << (s.passed ? "PASSED " : "FAILED ") << s.name << " (" << s.seconds << " s)";
    if (s.result.contains("error")) std::cout << ": " << s.result["error"].get<std::string>();
    std::cout << '\n';
  }
  std::cout << (report.passed() ? "PASSED" : "FAILED") << " -> " << cfg.out << "/report.json\n";
  return exit_code(report);
}

}  // namespace

int main(int argc, char** argv) {
  using besselmp::RunMode;
  CLI::App app{"Critical points of the fractional Bessel energy on a periodic box.\n"
               "Thread count is capped by the BESSELMP_THREADS environment variable."};
  app.require_subcommand(1);

  const std::vector<std::pair<RunMode, std::string>> modes{
      {RunMode::solve, "probe the geometry, then find a mountain-pass critical point"},
      {RunMode::two_solutions, "mountain-pass and ball-minimization solutions for one (lambda, mu) or a sweep"},
      {RunMode::verify, "run the numerical checks listed under 'checks'"},
      {RunMode::probe_geometry, "estimate rho, eta, mu0 and the far endpoint e"},
      {RunMode::kernel_table, "tabulate the Bessel kernel G_alpha"},
  };
  Invocation inv;
  std::optional<RunMode> chosen;
  for (const auto& [mode, help] : modes) {
    CLI::App* sub = app.add_subcommand(besselmp::to_string(mode), help);
    sub->add_option("--config", inv.config_path, "key=value or JSON configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", inv.seed, "override the configured seed");
    sub->add_option("--out", inv.out, "override the output directory");
    sub->callback([&chosen, m = mode] { chosen = m; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_config_error;
  }
  try {
    return execute(*chosen, inv);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
}

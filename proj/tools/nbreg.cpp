#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <map>
#include <string>

#include "nbreg/cli.hpp"
#include "nbreg/parallel.hpp"

namespace {

void apply_thread_env() {
  const char* env = std::getenv("NBREG_THREADS");
  if (env == nullptr || *env == '\0') return;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end != env && *end == '\0' && v >= 1) nbreg::set_num_threads(static_cast<unsigned>(v));
  else std::cerr << "warning: ignoring NBREG_THREADS='" << env << "'\n";
}

const std::map<std::string, nbreg::cli::Format> kFormats{
    {"json", nbreg::cli::Format::JSON}, {"text", nbreg::cli::Format::TEXT}, {"csv", nbreg::cli::Format::CSV}};
const std::map<std::string, nbreg::cli::InfoSelection> kInfo{{"observed", nbreg::cli::InfoSelection::OBSERVED},
                                                             {"expected", nbreg::cli::InfoSelection::EXPECTED},
                                                             {"both", nbreg::cli::InfoSelection::BOTH}};

}  // namespace

int main(int argc, char** argv) {
  using namespace nbreg::cli;
  apply_thread_env();

  CLI::App app{"Negative binomial (NB2) regression: fit, simulate, information matrices, verification"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string grid;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--output", cfg.output_path, "output file (default: stdout)");
    sub->add_option("--format", cfg.format, "json|text|csv")->transform(CLI::CheckedTransformer(kFormats, CLI::ignore_case));
    sub->add_option("--eps-tail", cfg.eps_tail, "tail tolerance for truncated expectations")->check(CLI::PositiveNumber);
  };
  auto add_data = [&](CLI::App* sub) {
    sub->add_option("--input", cfg.input_path, "CSV file with a header row")->required()->check(CLI::ExistingFile);
    sub->add_option("--response", cfg.response_column, "response column name");
    sub->add_flag("--no-intercept", cfg.no_intercept, "do not prepend an intercept column");
  };

  auto* fit = app.add_subcommand("fit", "fit an NB2 regression by maximum likelihood");
  add_common(fit);
  add_data(fit);
  fit->add_option("--info", cfg.info, "observed|expected (standard errors)")
      ->transform(CLI::CheckedTransformer(kInfo, CLI::ignore_case));
  fit->add_option("--max-iter", cfg.max_iter, "Newton iteration cap")->check(CLI::PositiveNumber);

  auto* sim = app.add_subcommand("simulate", "simulate a CSV dataset with standard normal regressors");
  add_common(sim);
  sim->add_option("--beta", cfg.beta, "coefficients, intercept first")->required()->delimiter(',');
  sim->add_option("--theta", cfg.theta, "dispersion (> 0)")->required();
  sim->add_option("--n", cfg.n, "number of rows")->required();
  sim->add_option("--seed", seed, "RNG seed")->required();
  sim->add_option("--response", cfg.response_column, "response column name");
  sim->add_flag("--no-intercept", cfg.no_intercept, "every beta multiplies a generated regressor");

  auto* ver = app.add_subcommand("verify", "run the numerical verification suite");
  add_common(ver);
  ver->add_option("--tol-first", cfg.tol_first, "tolerance for first-derivative identities");
  ver->add_option("--tol-second", cfg.tol_second, "tolerance for second-derivative identities");
  ver->add_option("--tol-sum", cfg.tol_sum, "tolerance for finite-sum identities");
  ver->add_option("--grid", grid, "identity grid override, e.g. 0:1,5:0.5 (y:theta pairs)");
  ver->add_option("--seed", seed, "seed for the random derivative instances");
  ver->add_option("--fd-instances", cfg.fd_instances, "random instances for the derivative check")
      ->check(CLI::PositiveNumber);

  auto* info = app.add_subcommand("info", "observed and/or expected information at given parameters");
  add_common(info);
  add_data(info);
  info->add_option("--beta", cfg.beta, "coefficients, intercept first")->required()->delimiter(',');
  info->add_option("--theta", cfg.theta, "dispersion (> 0)")->required();
  info->add_option("--info", cfg.info, "observed|expected|both")
      ->transform(CLI::CheckedTransformer(kInfo, CLI::ignore_case));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  if (sim->parsed()) cfg.command = Command::SIMULATE;
  else if (ver->parsed()) cfg.command = Command::VERIFY;
  else if (info->parsed()) cfg.command = Command::INFO;
  else cfg.command = Command::FIT;

  if (sim->parsed() || ver->get_option("--seed")->count() > 0) cfg.seed = seed;
  if (!grid.empty()) {
    try {
      cfg.grid = parse_grid(grid);
    } catch (const nbreg::InputError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitInput;
    }
  }
  return run(cfg);
}

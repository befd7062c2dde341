#include <iostream>

#include <CLI11.hpp>

#include "perturbmc/figures.hpp"
#include "perturbmc/parallel.hpp"
#include "perturbmc/version.hpp"

using namespace perturbmc;

int main(int argc, char** argv) {
  apply_thread_cap();

  CLI::App app{"Second-order statistics of input-driven Markov chains"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  RunConfig cfg;
  std::string lags_text, eps_text, eps_grid_text, figure_id, suite;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--model", cfg.model, "builtin 'queue' or a JSON model file");
    sub->add_option("--input", cfg.input, "builtin 'three-state' or a JSON input file");
    sub->add_option("--gamma", cfg.gamma, "input switching parameter");
    sub->add_option("--epsilon", eps_text, "epsilon value (comma list accepted)");
    sub->add_option("--epsilon-grid", eps_grid_text, "comma-separated epsilon grid");
    sub->add_option("--lags", lags_text, "lag range 'lo:hi' or single N for [-N, N]");
    sub->add_option("--grid", cfg.grid, "spectral grid size");
    sub->add_option("--seed", cfg.seed, "PRNG seed");
    sub->add_option("--out", cfg.out, "output directory");
    sub->add_option("--mc-steps", cfg.mc_steps, "Monte Carlo path length");
  };

  CLI::App* validate = app.add_subcommand("validate", "check model/input assumptions");
  add_common(validate);

  CLI::App* figure = app.add_subcommand("figure", "emit figure data as CSV");
  add_common(figure);
  figure->add_option("--figure", figure_id, "mean-queue | pi-q | cross-psd | mi-bound | coupling")
      ->required();
  figure->add_option("--pipeline", cfg.pipeline,
                     "series source for mi-bound: approx (default) or exact");

  CLI::App* verify = app.add_subcommand("verify", "run a verification suite");
  add_common(verify);
  verify->add_option("--suite", suite, "unit | oracle | mc")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (!lags_text.empty()) parse_lag_range(lags_text, cfg.lag_min, cfg.lag_max);
    if (!eps_text.empty()) cfg.epsilon_list = parse_double_list(eps_text);
    if (!eps_grid_text.empty()) cfg.epsilon_list = parse_double_list(eps_grid_text);

    if (validate->parsed()) return run_validate(cfg, std::cout);
    if (figure->parsed()) return run_figure(cfg, figure_id, std::cout);
    if (verify->parsed()) return run_verify(cfg, suite, std::cout);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_category(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sda/cli.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string weighting;
  std::string phi_grid;
  std::string out_dir;
  long seed = -1;
  int threads = -1;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool config_required = true) {
  auto* opt = cmd->add_option("--config", flags.config_path, "key=value config file");
  if (config_required) opt->required();
  cmd->add_option("--seed", flags.seed, "master seed (overrides config)");
  cmd->add_option("--threads", flags.threads, "worker pool size (overrides config)");
  cmd->add_option("--weighting", flags.weighting, "population|uniform (overrides config)")
      ->check(CLI::IsMember({"population", "uniform"}));
  cmd->add_option("--phi-grid", flags.phi_grid, "lo:hi:n (overrides config)");
  cmd->add_option("--out", flags.out_dir, "output directory (overrides config)");
}

sda::RunConfig resolve(const CommonFlags& flags) {
  sda::RunConfig cfg = sda::RunConfig::from_file(flags.config_path);
  if (flags.seed >= 0) cfg.set("seed", std::to_string(flags.seed));
  if (flags.threads >= 0) cfg.set("threads", std::to_string(flags.threads));
  if (!flags.weighting.empty()) cfg.set("weighting", flags.weighting);
  if (!flags.phi_grid.empty()) cfg.set("phi_grid", flags.phi_grid);
  if (!flags.out_dir.empty()) cfg.set("out", flags.out_dir);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatially discrete approximation to log-Gaussian Cox processes"};
  app.require_subcommand(1);

  CommonFlags fit_flags, predict_flags, sim_flags;
  std::string fit_json = "fit.json";
  std::string report_dir;

  CLI::App* fit = app.add_subcommand("fit", "fit model parameters by Monte Carlo ML");
  add_common(fit, fit_flags);

  CLI::App* predict = app.add_subcommand("predict", "predict risk surfaces from a fit");
  add_common(predict, predict_flags);
  predict->add_option("--fit", fit_json, "fit.json produced by the fit command")->required();

  CLI::App* simulate = app.add_subcommand("simulate", "run the simulation study");
  add_common(simulate, sim_flags);

  CLI::App* report = app.add_subcommand("report", "summarize a run directory");
  report->add_option("dir", report_dir, "output directory of a previous run")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed()) return sda::run_fit(resolve(fit_flags), std::cout);
    if (predict->parsed()) return sda::run_predict(resolve(predict_flags), fit_json, std::cout);
    if (simulate->parsed()) return sda::run_simulate(resolve(sim_flags), std::cout);
    if (report->parsed()) return sda::run_report(report_dir, std::cout);
  } catch (const sda::Error& e) {
    std::cerr << "error: [" << e.module() << "] " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

#ifndef SDA_CLI_HPP
#define SDA_CLI_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>

#include "sda/mcml.hpp"
#include "sda/sim.hpp"

namespace sda {

// Batch run configuration: a plain-text key=value file plus flag overrides.
// Unknown keys are rejected so typos fail loudly.
struct RunConfig {
  std::string partition_path;
  std::string counts_path;
  std::string covariates_path;
  std::string raster_path;
  bool raster_per_m2 = false;
  Weighting weighting = Weighting::Population;
  double phi_lo = 50.0, phi_hi = 2000.0;
  int phi_n = 100;
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  int threads = 1;
  std::string cache_file;

  QuadratureConfig quad;
  McmlConfig mcml;

  double predict_spacing = 300.0;
  double predict_threshold = 1.0;

  double sim_sigma = 0.706;
  double sim_phi = 800.0;
  int sim_replicates = 50;

  static RunConfig from_file(const std::string& path);
  void set(const std::string& key, const std::string& value);

  PhiGrid phi_grid() const { return PhiGrid::linspace(phi_lo, phi_hi, phi_n); }
  // Canonical sorted key=value echo; hashed into every output.
  std::string canonical() const;
  std::uint64_t config_hash() const;
};

// Subcommand drivers. Return the process exit code: 0 success, 1 completed
// with warnings, 2 hard error (the caller prints nothing further on 2; the
// error has already been logged).
int run_fit(const RunConfig& config, std::ostream& log);
int run_predict(const RunConfig& config, const std::string& fit_json_path, std::ostream& log);
int run_simulate(const RunConfig& config, std::ostream& log);
int run_report(const std::string& out_dir, std::ostream& log);

}  // namespace sda

#endif  // SDA_CLI_HPP

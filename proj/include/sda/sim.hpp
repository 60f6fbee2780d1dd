#ifndef SDA_SIM_HPP
#define SDA_SIM_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sda/mcml.hpp"
#include "sda/predict.hpp"

namespace sda {

struct SimScenario {
  double sigma = 0.706;  // standard deviation of the latent field
  double phi = 800.0;
  double grid_spacing = 300.0;
  int replicates = 50;
  std::uint64_t master_seed = 1;

  Weighting weighting = Weighting::Population;
  QuadratureConfig quad;
  PhiGrid phi_grid = PhiGrid::default_grid();
  McmlConfig mcml;
  double risk_threshold = 1.0;

  void validate() const;
};

struct MetricReport {
  std::string target;  // "region-incidence" | "continuous-risk"
  double bias = 0.0;
  double rmse = 0.0;
  double wpi = 0.0;
  double cp = 0.0;
};

// Zero-mean stationary Gaussian field with covariance sigma^2 exp(-d/phi) on
// the given cell centers, by dense Cholesky. Capped at 20000 cells.
Eigen::VectorXd simulate_grf(const std::vector<Point>& cells, double sigma, double phi,
                             std::uint64_t seed);

std::vector<Point> raster_cell_centers(const PopulationRaster& raster);

struct CountsResult {
  std::vector<long> counts;       // per region
  long dropped = 0;               // events in cells outside every region
  long total = 0;                 // assigned + dropped
  std::vector<double> true_lambda;  // per region: sum of m(cell) exp{S(cell)}
};

// Per-cell Poisson counts with mean m(cell) exp{S(cell)}, attributed to the
// region containing the cell center. field is in raster storage order.
CountsResult simulate_counts(const Eigen::VectorXd& field, const PopulationRaster& raster,
                             const Partition& partition, std::uint64_t seed);

// The four summary formulas, averaged over all (unit, replicate) entries.
MetricReport metrics(const std::string& target, const std::vector<double>& truths,
                     const std::vector<double>& predictions, const std::vector<double>& lo,
                     const std::vector<double>& hi);

struct ReplicateSummary {
  int replicate = 0;
  std::uint64_t seed = 0;
  long total_count = 0;
  double beta0_hat = 0.0;
  double sigma2_hat = 0.0;
  double phi_hat = 0.0;
  bool converged = false;
};

struct ScenarioResult {
  MetricReport region_metrics;
  MetricReport risk_metrics;
  std::vector<ReplicateSummary> replicates;
  std::vector<std::vector<long>> counts;  // per replicate, per region
};

// Full simulation study: simulate field and counts, fit the model, predict
// region incidence and the continuous risk surface, and score both against
// the simulated truth.
ScenarioResult run_scenario(const SimScenario& scenario, const Partition& partition,
                            const PopulationRaster& raster, int threads = 1);

}  // namespace sda

#endif  // SDA_SIM_HPP

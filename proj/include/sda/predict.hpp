#ifndef SDA_PREDICT_HPP
#define SDA_PREDICT_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sda/covariance.hpp"
#include "sda/latent.hpp"
#include "sda/mcml.hpp"

namespace sda {

// Regular lattice clipped to the study area (cell centers inside at least
// one region). Lattice geometry is kept so surfaces can be written back out
// as rasters with nodata outside the study area.
struct PredictionGrid {
  double x0 = 0.0, y0 = 0.0;  // lower-left corner of the lattice
  double spacing = 300.0;
  int ncols = 0, nrows = 0;
  std::vector<int> cell_of;      // lattice slot -> compact index, -1 outside
  std::vector<Point> centers;    // compact list of in-area cell centers
  // Filled by predict_surface (per compact cell, summaries of exp{S*(x)}):
  std::vector<double> mean, sd, exceed;
  std::vector<double> lo95, hi95;  // equal-tailed interval, when requested
  double threshold = 1.0;          // exceedance level c for P(exp{S*} > c)
};

PredictionGrid make_prediction_grid(const Partition& partition, double spacing,
                                    double threshold = 1.0);

struct RegionPrediction {
  std::vector<std::string> region_id;
  std::vector<double> mean, sd, lo95, hi95;
};

// Cross-covariance c(x) between S*(x) and the region effects: entry i is
// sigma2 times the weighted average of rho(||x - x_k||; phi) over region i's
// quadrature points.
Eigen::VectorXd cross_cov_vector(const Point& x, const std::vector<QuadratureSet>& quads,
                                 const ModelParams& params);

// Two-step continuous prediction: for each retained draw eta_j and each grid
// cell, S*(x) ~ N(c(x)' Sigma^{-1} (eta_j - D beta), sigma2 - c(x)' Sigma^{-1} c(x)),
// with the variance clamped at zero from below. Summaries (mean, sd,
// exceedance) are over exp{S*(x)} across draws. A computed variance below
// -1e-8 * sigma2 raises NumericalError.
void predict_surface(const Eigen::MatrixXd& draws, const ModelParams& params,
                     const CacheEntry& cache_entry, const Eigen::MatrixXd& D,
                     const std::vector<QuadratureSet>& quads, PredictionGrid& grid,
                     std::uint64_t seed, int threads = 1, bool want_quantiles = false);

// Region-level incidence: draws of lambda_i = m_i exp{eta_i}, summarized by
// mean, sd and the equal-tailed 95% interval from empirical quantiles.
RegionPrediction predict_regions(const Eigen::MatrixXd& draws, const DataVector& data,
                                 const std::vector<std::string>& region_ids);

// Equal-tailed empirical quantile (linear interpolation between order
// statistics).
double empirical_quantile(std::vector<double> values, double prob);

// Lattice summaries written as rasters; cells outside the study area are
// nodata.
PopulationRaster surface_to_raster(const PredictionGrid& grid, const std::vector<double>& values);

std::string region_prediction_csv(const RegionPrediction& pred);

}  // namespace sda

#endif  // SDA_PREDICT_HPP

#ifndef SDA_QUADRATURE_HPP
#define SDA_QUADRATURE_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sda/geometry.hpp"
#include "sda/raster.hpp"
#include "sda/rng.hpp"

namespace sda {

enum class Weighting { Population, Uniform };

struct QuadratureConfig {
  double delta = 0.0;   // minimum inhibition distance; <= 0 means auto
  double gamma = 0.55;  // packing density
  enum class Mode { NonAdaptive, Adaptive } mode = Mode::NonAdaptive;
  int batch_size_k = 10;
  double rel_tol_eps = 1e-3;
  int max_attempts_per_point = 2000;
  int max_adaptive_rounds = 25;

  void validate() const;
};

// Quarter of the square root of the median region area; used when
// config.delta is unset.
double default_delta(const Partition& partition);
QuadratureConfig resolve_delta(QuadratureConfig config, const Partition& partition);

struct QuadratureSet {
  std::string region_id;
  std::vector<Point> points;
  std::vector<double> weights;  // w_i(x_k) up to a common constant; > 0
  Weighting weighting = Weighting::Uniform;
  // Diagnostics, not part of the value contract.
  int delta_relaxations = 0;
};

// Point budget L_i = ceil(4 * gamma * |R_i| / (pi * delta^2)), minimum 1.
double point_budget_raw(const QuadratureConfig& config, double region_area);
int point_budget(const QuadratureConfig& config, double region_area);

// Weight function over a region plus an upper bound for rejection sampling.
struct WeightFunction {
  std::function<double(const Point&)> eval;
  double max_value = 1.0;
  Weighting weighting = Weighting::Uniform;
};

WeightFunction uniform_weight();
// w(x) proportional to the raster density at x (0 outside the raster extent).
// max_value is taken over raster cells intersecting the region's bbox, a
// safe upper bound for the rejection step.
WeightFunction population_weight(const PopulationRaster& raster, const Region& region);

// Weighted simple sequential inhibition with rejection sampling. Draws
// exactly L points: proposals are uniform over the region, thinned by
// u <= w(x)/w_max, and each accepted point keeps distance
// delta_eff(x_j) = max(0.1 delta, delta (1 - w(x_j)/w_max)) from every prior
// point x_j under population weighting, or a fixed delta under uniform
// weighting. If a point cannot be placed within max_attempts_per_point
// proposals, delta is relaxed by 0.9 and placement retried.
QuadratureSet sample_inhibition(const Region& region, const WeightFunction& weight,
                                const QuadratureConfig& config, int L, std::uint64_t rng_seed);

// Adds `count` more points to an existing set at inhibition distance
// `delta_round`, enforcing the constraint against all points already in the
// set. sample_inhibition is the count-from-empty special case.
void extend_inhibition(QuadratureSet& set, const Region& region, const WeightFunction& weight,
                       const QuadratureConfig& config, double delta_round, int count, Rng& rng);

struct AdaptiveResult {
  QuadratureSet first;
  QuadratureSet second;
  double value = 0.0;
  bool converged = false;
  int rounds = 0;
};

// Refinement loop for one region pair at a given phi: start with k points per
// region, then keep adding batches of k at packing intensity gamma(k)/r
// (inhibition distance delta/sqrt(r)) until successive evaluations of the
// pair integral agree to rel_tol_eps. Non-convergence within
// max_adaptive_rounds returns the last value with converged = false.
AdaptiveResult adaptive_quadrature(const Region& region_i, const Region& region_j,
                                   const WeightFunction& weight_i, const WeightFunction& weight_j,
                                   double phi, const QuadratureConfig& config,
                                   std::uint64_t rng_seed);

// Per-region quadrature for a whole partition (non-adaptive budget rule).
// Each region gets an independent stream derived from (seed, region id).
std::vector<QuadratureSet> build_quadrature(const Partition& partition,
                                            const PopulationRaster* raster, Weighting weighting,
                                            const QuadratureConfig& config, std::uint64_t seed);

// Joint adaptive refinement for a partition: batches of k are added to every
// region until the full matrix of pair integrals at phi_ref stabilizes to
// rel_tol_eps (or max_adaptive_rounds is reached).
std::vector<QuadratureSet> build_quadrature_adaptive(const Partition& partition,
                                                     const PopulationRaster* raster,
                                                     Weighting weighting,
                                                     const QuadratureConfig& config,
                                                     double phi_ref, std::uint64_t seed,
                                                     bool* converged = nullptr);

// Diagnostic dump: region_id,x,y,weight
std::string quadrature_csv(const std::vector<QuadratureSet>& sets);

}  // namespace sda

#endif  // SDA_QUADRATURE_HPP

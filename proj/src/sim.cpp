#include "sda/sim.hpp"

#include <cmath>
#include <iostream>

#include "sda/parallel.hpp"
#include "sda/rng.hpp"

namespace sda {

void SimScenario::validate() const {
  if (!(sigma >= 0.0)) throw NumericalError("sim", "sigma must be >= 0");
  if (!(phi > 0.0)) throw NumericalError("sim", "phi must be > 0");
  if (replicates < 1) throw NumericalError("sim", "replicate count must be >= 1");
  if (!(grid_spacing > 0.0)) throw NumericalError("sim", "grid spacing must be > 0");
}

Eigen::VectorXd simulate_grf(const std::vector<Point>& cells, double sigma, double phi,
                             std::uint64_t seed) {
  const std::size_t n = cells.size();
  if (n > 20000) {
    throw SizeError("sim", "GRF grid has " + std::to_string(n) +
                               " cells; dense Cholesky is capped at 20000 (use a coarser grid)");
  }
  if (!(phi > 0.0)) throw NumericalError("sim", "phi must be > 0");
  Eigen::VectorXd field = Eigen::VectorXd::Zero(n);
  if (sigma == 0.0 || n == 0) return field;

  Eigen::MatrixXd cov(n, n);
  const double s2 = sigma * sigma;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = s2 * exp_corr(dist(cells[i], cells[j]), phi);
      cov(i, j) = v;
      cov(j, i) = v;
    }
  }
  double jitter = 0.0;
  const Eigen::MatrixXd chol = chol_with_jitter(cov, &jitter, "GRF covariance");
  Rng rng(seed);
  Eigen::VectorXd z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = rng.normal();
  field = chol * z;
  return field;
}

std::vector<Point> raster_cell_centers(const PopulationRaster& raster) {
  std::vector<Point> cells;
  cells.reserve(static_cast<std::size_t>(raster.ncols()) * raster.nrows());
  for (int row = 0; row < raster.nrows(); ++row) {
    for (int col = 0; col < raster.ncols(); ++col) {
      cells.push_back(raster.cell_center(row, col));
    }
  }
  return cells;
}

CountsResult simulate_counts(const Eigen::VectorXd& field, const PopulationRaster& raster,
                             const Partition& partition, std::uint64_t seed) {
  const std::size_t ncells = static_cast<std::size_t>(raster.ncols()) * raster.nrows();
  if (static_cast<std::size_t>(field.size()) != ncells) {
    throw ShapeError("sim", "field length does not match the raster grid");
  }
  CountsResult out;
  out.counts.assign(partition.size(), 0);
  out.true_lambda.assign(partition.size(), 0.0);
  Rng rng(seed);
  std::size_t idx = 0;
  for (int row = 0; row < raster.nrows(); ++row) {
    for (int col = 0; col < raster.ncols(); ++col, ++idx) {
      double m = raster.at_rc(row, col);
      if (m == raster.nodata()) m = 0.0;
      if (raster.values_per_m2()) m *= raster.cell_size() * raster.cell_size();
      const double mean = m * std::exp(field[idx]);
      const long c = mean > 0.0 ? rng.poisson(mean) : 0;
      const int region = partition.find_region(raster.cell_center(row, col));
      if (region >= 0) {
        out.counts[region] += c;
        out.true_lambda[region] += mean;
      } else {
        out.dropped += c;
      }
      out.total += c;
    }
  }
  if (out.dropped > 0) {
    std::cerr << "note: " << out.dropped << " simulated events fell outside the partition\n";
  }
  return out;
}

MetricReport metrics(const std::string& target, const std::vector<double>& truths,
                     const std::vector<double>& predictions, const std::vector<double>& lo,
                     const std::vector<double>& hi) {
  const std::size_t n = truths.size();
  if (predictions.size() != n || lo.size() != n || hi.size() != n || n == 0) {
    throw ShapeError("sim", "metric arrays must be non-empty and of equal length");
  }
  MetricReport r;
  r.target = target;
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double err = predictions[i] - truths[i];
    r.bias += err;
    sq += err * err;
    r.wpi += hi[i] - lo[i];
    if (truths[i] >= lo[i] && truths[i] <= hi[i]) r.cp += 1.0;
  }
  r.bias /= static_cast<double>(n);
  r.rmse = std::sqrt(sq / static_cast<double>(n));
  r.wpi /= static_cast<double>(n);
  r.cp /= static_cast<double>(n);
  return r;
}

ScenarioResult run_scenario(const SimScenario& scenario, const Partition& partition,
                            const PopulationRaster& raster, int threads) {
  scenario.validate();
  const std::size_t nregions = partition.size();
  const std::vector<Point> cells = raster_cell_centers(raster);
  const int B = scenario.replicates;

  // Shared across replicates: quadrature, cache, prediction lattice, offsets.
  const QuadratureConfig quad_cfg = resolve_delta(scenario.quad, partition);
  const std::vector<QuadratureSet> quads =
      build_quadrature(partition, scenario.weighting == Weighting::Population ? &raster : nullptr,
                       scenario.weighting, quad_cfg,
                       derive_seed(scenario.master_seed, "scenario-quadrature"));
  const CovarianceCache cache = build_cache(quads, scenario.phi_grid, threads);

  Eigen::VectorXd offsets(nregions);
  for (std::size_t i = 0; i < nregions; ++i) {
    offsets[i] = raster.region_mass(partition.region(i));
  }
  std::vector<std::string> ids;
  ids.reserve(nregions);
  for (const Region& r : partition.regions()) ids.push_back(r.id());

  PredictionGrid proto_grid =
      make_prediction_grid(partition, scenario.grid_spacing, scenario.risk_threshold);

  struct ReplicateOutput {
    ReplicateSummary summary;
    std::vector<long> counts;
    std::vector<double> region_truth, region_pred, region_lo, region_hi;
    std::vector<double> risk_truth, risk_pred, risk_lo, risk_hi;
  };
  std::vector<ReplicateOutput> reps(B);

  parallel_for(static_cast<std::size_t>(B), threads, [&](std::size_t b) {
    const std::uint64_t rep_seed = derive_seed(scenario.master_seed, "replicate", b);
    ReplicateOutput& rep = reps[b];
    rep.summary.replicate = static_cast<int>(b);
    rep.summary.seed = rep_seed;

    const Eigen::VectorXd field =
        simulate_grf(cells, scenario.sigma, scenario.phi, derive_seed(rep_seed, "grf"));
    const CountsResult sim = simulate_counts(field, raster, partition, derive_seed(rep_seed, "counts"));
    rep.counts = sim.counts;
    rep.summary.total_count = sim.total;

    DataVector data;
    data.y.resize(nregions);
    for (std::size_t i = 0; i < nregions; ++i) data.y[i] = static_cast<double>(sim.counts[i]);
    data.m = offsets;
    data.D = Eigen::MatrixXd::Ones(nregions, 1);

    McmlConfig mcfg = scenario.mcml;
    mcfg.threads = 1;  // replicates already run in parallel
    LatentSample sample;
    const FitResult fit_res =
        fit_with_sample(data, cache, scenario.phi_grid, mcfg, derive_seed(rep_seed, "fit"), &sample);
    rep.summary.beta0_hat = fit_res.estimates.beta[0];
    rep.summary.sigma2_hat = fit_res.estimates.sigma2;
    rep.summary.phi_hat = fit_res.estimates.phi;
    rep.summary.converged = fit_res.converged;

    // Region-level predictive distribution of lambda_i = m_i exp{eta_i}.
    const RegionPrediction region_pred = predict_regions(sample.draws, data, ids);
    rep.region_truth = sim.true_lambda;
    rep.region_pred = region_pred.mean;
    rep.region_lo = region_pred.lo95;
    rep.region_hi = region_pred.hi95;

    // Continuous relative risk exp{S(x)} on the lattice.
    PredictionGrid grid = proto_grid;
    const CacheEntry& entry = cache.at_phi(fit_res.estimates.phi);
    predict_surface(sample.draws, fit_res.estimates, entry, data.D, quads, grid,
                    derive_seed(rep_seed, "surface"), 1, /*want_quantiles=*/true);
    rep.risk_pred = grid.mean;
    rep.risk_lo = grid.lo95;
    rep.risk_hi = grid.hi95;
    rep.risk_truth.reserve(grid.centers.size());
    for (const Point& x : grid.centers) {
      // truth: field value at the raster cell containing x
      const int col = static_cast<int>(std::floor((x.x - raster.origin().x) / raster.cell_size()));
      const int rfb = static_cast<int>(std::floor((x.y - raster.origin().y) / raster.cell_size()));
      const std::size_t idx =
          static_cast<std::size_t>(raster.nrows() - 1 - rfb) * raster.ncols() + col;
      rep.risk_truth.push_back(std::exp(field[static_cast<Eigen::Index>(idx)]));
    }
  });

  // Aggregate in replicate order (deterministic regardless of threads).
  ScenarioResult out;
  std::vector<double> rt, rp, rl, rh, kt, kp, kl, kh;
  for (const ReplicateOutput& rep : reps) {
    out.replicates.push_back(rep.summary);
    out.counts.push_back(rep.counts);
    rt.insert(rt.end(), rep.region_truth.begin(), rep.region_truth.end());
    rp.insert(rp.end(), rep.region_pred.begin(), rep.region_pred.end());
    rl.insert(rl.end(), rep.region_lo.begin(), rep.region_lo.end());
    rh.insert(rh.end(), rep.region_hi.begin(), rep.region_hi.end());
    kt.insert(kt.end(), rep.risk_truth.begin(), rep.risk_truth.end());
    kp.insert(kp.end(), rep.risk_pred.begin(), rep.risk_pred.end());
    kl.insert(kl.end(), rep.risk_lo.begin(), rep.risk_lo.end());
    kh.insert(kh.end(), rep.risk_hi.begin(), rep.risk_hi.end());
  }
  out.region_metrics = metrics("region-incidence", rt, rp, rl, rh);
  out.risk_metrics = metrics("continuous-risk", kt, kp, kl, kh);
  return out;
}

}  // namespace sda

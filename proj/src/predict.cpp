#include "sda/predict.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sda/parallel.hpp"
#include "sda/rng.hpp"

namespace sda {

PredictionGrid make_prediction_grid(const Partition& partition, double spacing,
                                    double threshold) {
  if (!(spacing > 0.0)) throw NumericalError("predict", "grid spacing must be > 0");
  const Bbox& bb = partition.study_area_bbox();
  PredictionGrid g;
  g.spacing = spacing;
  g.x0 = bb.xmin;
  g.y0 = bb.ymin;
  g.ncols = std::max(1, static_cast<int>(std::ceil(bb.width() / spacing)));
  g.nrows = std::max(1, static_cast<int>(std::ceil(bb.height() / spacing)));
  g.threshold = threshold;
  g.cell_of.assign(static_cast<std::size_t>(g.ncols) * g.nrows, -1);
  for (int r = 0; r < g.nrows; ++r) {
    for (int c = 0; c < g.ncols; ++c) {
      const Point center{g.x0 + (c + 0.5) * spacing, g.y0 + (r + 0.5) * spacing};
      if (partition.find_region(center) >= 0) {
        g.cell_of[static_cast<std::size_t>(r) * g.ncols + c] =
            static_cast<int>(g.centers.size());
        g.centers.push_back(center);
      }
    }
  }
  if (g.centers.empty()) {
    throw NumericalError("predict", "prediction grid has no cells inside the study area");
  }
  return g;
}

Eigen::VectorXd cross_cov_vector(const Point& x, const std::vector<QuadratureSet>& quads,
                                 const ModelParams& params) {
  const std::size_t n = quads.size();
  Eigen::VectorXd c(n);
  for (std::size_t i = 0; i < n; ++i) {
    const QuadratureSet& q = quads[i];
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < q.points.size(); ++k) {
      num += q.weights[k] * exp_corr(dist(x, q.points[k]), params.phi);
      den += q.weights[k];
    }
    if (!(den > 0.0)) {
      throw DegenerateWeightError("predict", "zero weights in region '" + q.region_id + "'");
    }
    c[i] = params.sigma2 * num / den;
  }
  return c;
}

void predict_surface(const Eigen::MatrixXd& draws, const ModelParams& params,
                     const CacheEntry& cache_entry, const Eigen::MatrixXd& D,
                     const std::vector<QuadratureSet>& quads, PredictionGrid& grid,
                     std::uint64_t seed, int threads, bool want_quantiles) {
  const int n = static_cast<int>(draws.cols());
  const int N = static_cast<int>(draws.rows());
  if (cache_entry.corr.rows() != n || static_cast<int>(quads.size()) != n) {
    throw ShapeError("predict", "draws, cache and quadrature sizes disagree");
  }
  const double sigma2 = params.sigma2;
  const Eigen::MatrixXd sigma_inv = cache_entry.inverse / sigma2;
  // Centered draws as columns: n x N.
  const Eigen::MatrixXd centered = (draws.rowwise() - (D * params.beta).transpose()).transpose();

  const std::size_t ncells = grid.centers.size();
  grid.mean.assign(ncells, 0.0);
  grid.sd.assign(ncells, 0.0);
  grid.exceed.assign(ncells, 0.0);
  if (want_quantiles) {
    grid.lo95.assign(ncells, 0.0);
    grid.hi95.assign(ncells, 0.0);
  } else {
    grid.lo95.clear();
    grid.hi95.clear();
  }

  parallel_for(ncells, threads, [&](std::size_t cell) {
    const Point& x = grid.centers[cell];
    const Eigen::VectorXd c = cross_cov_vector(x, quads, params);
    const Eigen::VectorXd a = sigma_inv * c;
    double v2 = sigma2 - c.dot(a);
    if (v2 < -1e-8 * sigma2) {
      throw NumericalError("predict", "negative predictive variance at cell " +
                                          std::to_string(cell) +
                                          "; cache and quadrature are inconsistent");
    }
    v2 = std::max(0.0, v2);
    const double v = std::sqrt(v2);
    const Eigen::VectorXd mu = centered.transpose() * a;  // per-draw conditional means

    Rng rng(derive_seed(seed, "surface", cell));
    std::vector<double> risk(N);
    double sum = 0.0, sumsq = 0.0, over = 0.0;
    for (int j = 0; j < N; ++j) {
      const double r = std::exp(mu[j] + v * rng.normal());
      risk[j] = r;
      sum += r;
      sumsq += r * r;
      if (r > grid.threshold) over += 1.0;
    }
    const double mean = sum / N;
    grid.mean[cell] = mean;
    const double var = N > 1 ? std::max(0.0, (sumsq - N * mean * mean) / (N - 1)) : 0.0;
    grid.sd[cell] = std::sqrt(var);
    grid.exceed[cell] = over / N;
    if (want_quantiles) {
      grid.lo95[cell] = empirical_quantile(risk, 0.025);
      grid.hi95[cell] = empirical_quantile(risk, 0.975);
    }
  });
}

double empirical_quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw ShapeError("predict", "quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double h = prob * (static_cast<double>(values.size()) - 1.0);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(values.size() - 1, lo + 1);
  const double w = h - static_cast<double>(lo);
  return (1.0 - w) * values[lo] + w * values[hi];
}

RegionPrediction predict_regions(const Eigen::MatrixXd& draws, const DataVector& data,
                                 const std::vector<std::string>& region_ids) {
  const int n = static_cast<int>(draws.cols());
  const int N = static_cast<int>(draws.rows());
  if (data.n() != n || static_cast<int>(region_ids.size()) != n) {
    throw ShapeError("predict", "draws, data and id sizes disagree");
  }
  RegionPrediction out;
  out.region_id = region_ids;
  out.mean.resize(n);
  out.sd.resize(n);
  out.lo95.resize(n);
  out.hi95.resize(n);
  std::vector<double> lambda(N);
  for (int i = 0; i < n; ++i) {
    double sum = 0.0, sumsq = 0.0;
    for (int j = 0; j < N; ++j) {
      lambda[j] = data.m[i] * std::exp(draws(j, i));
      sum += lambda[j];
      sumsq += lambda[j] * lambda[j];
    }
    const double mean = sum / N;
    out.mean[i] = mean;
    const double var = N > 1 ? std::max(0.0, (sumsq - N * mean * mean) / (N - 1)) : 0.0;
    out.sd[i] = std::sqrt(var);
    out.lo95[i] = empirical_quantile(lambda, 0.025);
    out.hi95[i] = empirical_quantile(lambda, 0.975);
  }
  return out;
}

PopulationRaster surface_to_raster(const PredictionGrid& grid, const std::vector<double>& values) {
  if (values.size() != grid.centers.size()) {
    throw ShapeError("predict", "surface value count does not match grid");
  }
  const double nodata = -9999.0;
  std::vector<double> cells(static_cast<std::size_t>(grid.ncols) * grid.nrows, nodata);
  for (int r = 0; r < grid.nrows; ++r) {
    for (int c = 0; c < grid.ncols; ++c) {
      const int idx = grid.cell_of[static_cast<std::size_t>(r) * grid.ncols + c];
      if (idx >= 0) {
        // raster rows run top-down, lattice rows bottom-up
        cells[static_cast<std::size_t>(grid.nrows - 1 - r) * grid.ncols + c] = values[idx];
      }
    }
  }
  return PopulationRaster({grid.x0, grid.y0}, grid.spacing, grid.ncols, grid.nrows,
                          std::move(cells), nodata);
}

std::string region_prediction_csv(const RegionPrediction& pred) {
  std::ostringstream out;
  out.precision(17);
  out << "region_id,mean,sd,lo95,hi95\n";
  for (std::size_t i = 0; i < pred.region_id.size(); ++i) {
    out << pred.region_id[i] << ',' << pred.mean[i] << ',' << pred.sd[i] << ',' << pred.lo95[i]
        << ',' << pred.hi95[i] << '\n';
  }
  return out.str();
}

}  // namespace sda

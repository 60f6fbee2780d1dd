#ifndef SDA_TESTS_FIXTURES_HPP
#define SDA_TESTS_FIXTURES_HPP

// Shared synthetic-data builders for the unit and acceptance suites.

#include <string>
#include <vector>

#include "sda/covariance.hpp"
#include "sda/latent.hpp"
#include "sda/quadrature.hpp"
#include "sda/rng.hpp"

namespace fixtures {

// k x k partition of axis-aligned squares with side `side`, ids "r<row>_<col>".
inline sda::Partition square_partition(int k, double side, double x0 = 0.0, double y0 = 0.0) {
  std::vector<sda::Region> regions;
  for (int r = 0; r < k; ++r) {
    for (int c = 0; c < k; ++c) {
      const double ax = x0 + c * side, ay = y0 + r * side;
      regions.emplace_back("r" + std::to_string(r) + "_" + std::to_string(c),
                           std::vector<sda::Ring>{{{ax, ay},
                                                   {ax + side, ay},
                                                   {ax + side, ay + side},
                                                   {ax, ay + side}}});
    }
  }
  return sda::Partition(std::move(regions));
}

struct SdaModel {
  sda::Partition partition;
  std::vector<sda::QuadratureSet> quads;
  sda::CovarianceCache cache;
  sda::PhiGrid grid;
};

inline SdaModel square_model(int k, double side, const sda::PhiGrid& grid, std::uint64_t seed,
                             int threads = 1) {
  sda::Partition part = square_partition(k, side);
  sda::QuadratureConfig qcfg;
  auto quads = sda::build_quadrature(part, nullptr, sda::Weighting::Uniform,
                                     sda::resolve_delta(qcfg, part), seed);
  sda::CovarianceCache cache = sda::build_cache(quads, grid, threads);
  return {std::move(part), std::move(quads), std::move(cache), grid};
}

// N x n draws from MVN(mean, chol * chol').
inline Eigen::MatrixXd mvn_draws(int N, const Eigen::VectorXd& mean, const Eigen::MatrixXd& chol,
                                 std::uint64_t seed) {
  sda::Rng rng(seed);
  const int n = static_cast<int>(mean.size());
  Eigen::MatrixXd out(N, n);
  Eigen::VectorXd z(n);
  for (int j = 0; j < N; ++j) {
    for (int i = 0; i < n; ++i) z[i] = rng.normal();
    out.row(j) = (mean + chol * z).transpose();
  }
  return out;
}

// Counts from the fitted model itself: S* ~ MVN(0, sigma2 R(phi)),
// y_i ~ Poisson(m_i exp{d_i' beta + S*_i}).
inline Eigen::VectorXd simulate_sda_counts(const SdaModel& model, const sda::DataVector& shell,
                                           const sda::ModelParams& params, std::uint64_t seed) {
  const sda::CacheEntry& entry = model.cache.at_phi(params.phi);
  const int n = static_cast<int>(model.partition.size());
  sda::Rng rng(seed);
  Eigen::VectorXd z(n);
  for (int i = 0; i < n; ++i) z[i] = rng.normal();
  const Eigen::VectorXd s_star = std::sqrt(params.sigma2) * (entry.chol * z);
  const Eigen::VectorXd eta = shell.D * params.beta + s_star;
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    y[i] = static_cast<double>(rng.poisson(shell.m[i] * std::exp(eta[i])));
  }
  return y;
}

}  // namespace fixtures

#endif  // SDA_TESTS_FIXTURES_HPP

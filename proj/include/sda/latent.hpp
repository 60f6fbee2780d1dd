#ifndef SDA_LATENT_HPP
#define SDA_LATENT_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sda/covariance.hpp"

namespace sda {

struct ModelParams {
  Eigen::VectorXd beta;
  double sigma2 = 1.0;
  double phi = 0.0;
};

// Observed counts, offsets and region-level design matrix (first column is
// the intercept).
struct DataVector {
  Eigen::VectorXd y;
  Eigen::VectorXd m;
  Eigen::MatrixXd D;

  void validate() const;
  int n() const { return static_cast<int>(y.size()); }
  int p() const { return static_cast<int>(D.cols()); }
};

struct LatentChainConfig {
  int n_iter = 110000;
  int burn_in = 10000;
  int thin = 10;
  double step_size = 0.0;  // <= 0 means auto (adapted during burn-in)
  double target_acceptance = 0.574;

  void validate() const;
  int retained() const { return (n_iter - burn_in) / thin; }
};

struct LatentSample {
  Eigen::MatrixXd draws;  // N x n, on the eta scale
  double acceptance_rate = 0.0;
  Eigen::VectorXd eta_hat;
  Eigen::MatrixXd sigma_hat;
  double step_size = 0.0;
  bool acceptance_warning = false;
  std::vector<int> iteration;   // source iteration of each retained draw
  std::vector<char> accepted;   // whether that iteration's proposal was accepted
};

// Log conditional density of eta given y (up to a constant):
//   sum_i (y_i eta_i - m_i e^{eta_i}) - (eta - mu)' Sigma^{-1} (eta - mu) / 2
// with mu = D beta and Sigma^{-1} = corr_inv / sigma2.
double cond_logdensity(const Eigen::VectorXd& eta, const DataVector& data,
                       const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma_inv);
Eigen::VectorXd cond_logdensity_grad(const Eigen::VectorXd& eta, const DataVector& data,
                                     const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma_inv);

struct ConditionalMode {
  Eigen::VectorXd eta_hat;
  Eigen::MatrixXd sigma_hat;  // (Sigma^{-1} + diag(m e^eta))^{-1}
  int iterations = 0;
};

// Newton mode of the conditional density; converged when the gradient
// max-norm drops below 1e-8. Diverging steps are halved; more than 100
// iterations raises ConvergenceError.
ConditionalMode conditional_mode(const DataVector& data, const ModelParams& params,
                                 const CacheEntry& cache_entry);

// MALA on the standardized effects eta~ = Lhat^{-1}(eta - eta_hat), where
// Lhat is the lower Cholesky factor of sigma_hat. The step size is adapted
// toward target_acceptance by Robbins-Monro during burn-in and frozen
// afterwards. Draws are returned on the eta scale.
LatentSample run_mala(const DataVector& data, const ModelParams& params,
                      const CacheEntry& cache_entry, const LatentChainConfig& config,
                      std::uint64_t seed);

// Diagnostic trace: iter,eta_1..eta_n,accepted over the retained draws.
std::string trace_csv(const LatentSample& sample);

}  // namespace sda

#endif  // SDA_LATENT_HPP

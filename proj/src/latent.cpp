#include "sda/latent.hpp"

#include <cmath>
#include <sstream>

#include "sda/rng.hpp"

namespace sda {

void DataVector::validate() const {
  if (y.size() != m.size() || y.size() != D.rows()) {
    throw ShapeError("latent", "y, m and D row counts disagree");
  }
  for (int i = 0; i < y.size(); ++i) {
    if (y[i] < 0.0) throw ShapeError("latent", "negative count");
    if (!(m[i] > 0.0)) throw ShapeError("latent", "offsets must be strictly positive");
  }
}

void LatentChainConfig::validate() const {
  if (burn_in < 0 || burn_in >= n_iter) throw NumericalError("latent", "burn_in must be < n_iter");
  if (thin < 1) throw NumericalError("latent", "thin must be >= 1");
}

double cond_logdensity(const Eigen::VectorXd& eta, const DataVector& data,
                       const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma_inv) {
  const Eigen::VectorXd centered = eta - mu;
  const double poisson = (data.y.array() * eta.array() - data.m.array() * eta.array().exp()).sum();
  return poisson - 0.5 * centered.dot(sigma_inv * centered);
}

Eigen::VectorXd cond_logdensity_grad(const Eigen::VectorXd& eta, const DataVector& data,
                                     const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma_inv) {
  return data.y - (data.m.array() * eta.array().exp()).matrix() - sigma_inv * (eta - mu);
}

ConditionalMode conditional_mode(const DataVector& data, const ModelParams& params,
                                 const CacheEntry& cache_entry) {
  data.validate();
  if (!(params.sigma2 > 0.0)) throw NumericalError("latent", "sigma2 must be > 0");
  const int n = data.n();
  if (cache_entry.corr.rows() != n) {
    throw ShapeError("latent", "cache entry size does not match data");
  }
  const Eigen::VectorXd mu = data.D * params.beta;
  const Eigen::MatrixXd sigma_inv = cache_entry.inverse / params.sigma2;

  Eigen::VectorXd eta = mu;
  double value = cond_logdensity(eta, data, mu, sigma_inv);
  const double tol = 1e-8;
  auto finish = [&](int iters) {
    ConditionalMode mode;
    mode.eta_hat = eta;
    Eigen::MatrixXd prec = sigma_inv;
    prec.diagonal() += (data.m.array() * eta.array().exp()).matrix();
    mode.sigma_hat = prec.llt().solve(Eigen::MatrixXd::Identity(n, n));
    // symmetrize against round-off
    mode.sigma_hat = 0.5 * (mode.sigma_hat + mode.sigma_hat.transpose()).eval();
    mode.iterations = iters;
    return mode;
  };
  for (int iter = 1; iter <= 100; ++iter) {
    const Eigen::VectorXd grad = cond_logdensity_grad(eta, data, mu, sigma_inv);
    if (grad.lpNorm<Eigen::Infinity>() < tol) return finish(iter - 1);
    Eigen::MatrixXd neg_hess = sigma_inv;
    neg_hess.diagonal() += (data.m.array() * eta.array().exp()).matrix();
    Eigen::VectorXd step = neg_hess.llt().solve(grad);
    // numerically stationary: eta cannot move at double precision (extreme
    // Sigma scaling keeps the absolute gradient above tol)
    if (step.lpNorm<Eigen::Infinity>() <= 1e-15 * (1.0 + eta.lpNorm<Eigen::Infinity>())) {
      return finish(iter - 1);
    }
    // halve diverging steps
    double scale = 1.0;
    for (int h = 0; h < 60; ++h) {
      const Eigen::VectorXd cand = eta + scale * step;
      const double cand_value = cond_logdensity(cand, data, mu, sigma_inv);
      if (std::isfinite(cand_value) && cand_value >= value - 1e-14 * std::abs(value)) {
        eta = cand;
        value = cand_value;
        break;
      }
      scale *= 0.5;
      if (h == 59) {
        throw ConvergenceError("latent", "Newton line search failed in conditional_mode");
      }
    }
  }
  throw ConvergenceError("latent", "conditional_mode did not converge in 100 iterations");
}

LatentSample run_mala(const DataVector& data, const ModelParams& params,
                      const CacheEntry& cache_entry, const LatentChainConfig& config,
                      std::uint64_t seed) {
  config.validate();
  const ConditionalMode mode = conditional_mode(data, params, cache_entry);
  const int n = data.n();
  const Eigen::VectorXd mu = data.D * params.beta;
  const Eigen::MatrixXd sigma_inv = cache_entry.inverse / params.sigma2;

  double jitter = 0.0;
  const Eigen::MatrixXd lhat = chol_with_jitter(mode.sigma_hat, &jitter, "sigma_hat");

  // Target on the standardized scale: pi(z) = f(eta_hat + Lhat z | y); the
  // Jacobian is constant. grad_z = Lhat' grad_eta.
  auto eta_of = [&](const Eigen::VectorXd& z) -> Eigen::VectorXd { return mode.eta_hat + lhat * z; };
  auto logpi = [&](const Eigen::VectorXd& eta) { return cond_logdensity(eta, data, mu, sigma_inv); };
  auto grad_z = [&](const Eigen::VectorXd& eta) -> Eigen::VectorXd {
    return lhat.transpose() * cond_logdensity_grad(eta, data, mu, sigma_inv);
  };

  double h = config.step_size > 0.0 ? config.step_size
                                    : 1.65 / std::pow(static_cast<double>(n), 1.0 / 6.0);
  const bool adapt = config.step_size <= 0.0;

  Rng rng(seed);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd eta = eta_of(z);
  double lp = logpi(eta);
  Eigen::VectorXd g = grad_z(eta);

  const int n_retained = config.retained();
  LatentSample out;
  out.draws.resize(n_retained, n);
  out.eta_hat = mode.eta_hat;
  out.sigma_hat = mode.sigma_hat;
  out.iteration.reserve(n_retained);
  out.accepted.reserve(n_retained);

  Eigen::VectorXd noise(n);
  long accept_count = 0;
  long post_burn = 0;
  int stored = 0;

  for (int iter = 1; iter <= config.n_iter; ++iter) {
    const double h2 = h * h;
    for (int i = 0; i < n; ++i) noise[i] = rng.normal();
    const Eigen::VectorXd z_prop = z + 0.5 * h2 * g + h * noise;
    const Eigen::VectorXd eta_prop = eta_of(z_prop);
    const double lp_prop = logpi(eta_prop);
    const Eigen::VectorXd g_prop = grad_z(eta_prop);

    // Asymmetric proposal densities q(b|a) = N(b; a + h^2/2 grad(a), h^2 I).
    const double log_q_fwd = -(z_prop - z - 0.5 * h2 * g).squaredNorm() / (2.0 * h2);
    const double log_q_rev = -(z - z_prop - 0.5 * h2 * g_prop).squaredNorm() / (2.0 * h2);
    const double log_alpha = std::min(0.0, lp_prop - lp + log_q_rev - log_q_fwd);
    const bool accept = std::log(rng.uniform_pos()) < log_alpha;
    if (accept) {
      z = z_prop;
      eta = eta_prop;
      lp = lp_prop;
      g = g_prop;
    }

    if (iter <= config.burn_in) {
      if (adapt) {
        const double gain = 0.6 / std::pow(static_cast<double>(iter), 0.6);
        h = std::exp(std::log(h) + gain * (std::exp(log_alpha) - config.target_acceptance));
      }
    } else {
      ++post_burn;
      if (accept) ++accept_count;
      const int s = iter - config.burn_in;
      if (s % config.thin == 0 && stored < n_retained) {
        out.draws.row(stored) = eta.transpose();
        out.iteration.push_back(iter);
        out.accepted.push_back(accept ? 1 : 0);
        ++stored;
      }
    }
  }

  out.acceptance_rate = post_burn > 0 ? static_cast<double>(accept_count) / post_burn : 0.0;
  out.step_size = h;
  out.acceptance_warning = out.acceptance_rate < 0.1 || out.acceptance_rate > 0.9;
  return out;
}

std::string trace_csv(const LatentSample& sample) {
  std::ostringstream out;
  out.precision(17);
  const int n = static_cast<int>(sample.draws.cols());
  out << "iter";
  for (int i = 1; i <= n; ++i) out << ",eta_" << i;
  out << ",accepted\n";
  for (int r = 0; r < sample.draws.rows(); ++r) {
    out << sample.iteration[r];
    for (int i = 0; i < n; ++i) out << ',' << sample.draws(r, i);
    out << ',' << static_cast<int>(sample.accepted[r]) << '\n';
  }
  return out.str();
}

}  // namespace sda

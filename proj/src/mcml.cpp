#include "sda/mcml.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sda/parallel.hpp"
#include "sda/rng.hpp"
#include "sda/spline.hpp"

namespace sda {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kDevianceCutoff95 = 1.921;  // chi^2_1(0.95) / 2

// phi-specific projections of the draw matrix; everything the (beta, log
// sigma2) optimization needs at O(N p) per evaluation.
struct PhiProjection {
  double logdetR = 0.0;
  Eigen::VectorXd qa;  // eta_j' R^{-1} eta_j
  Eigen::MatrixXd qb;  // D' R^{-1} eta_j, p x N
  Eigen::MatrixXd G;   // D' R^{-1} D
  int n = 0;
  int N = 0;
};

PhiProjection project_draws(const Eigen::MatrixXd& draws, const Eigen::MatrixXd& D,
                            const CacheEntry& entry) {
  PhiProjection pr;
  pr.n = static_cast<int>(draws.cols());
  pr.N = static_cast<int>(draws.rows());
  pr.logdetR = entry.log_det;
  const Eigen::MatrixXd rinv_eta = entry.inverse * draws.transpose();  // n x N
  pr.qa = (draws.transpose().array() * rinv_eta.array()).colwise().sum().transpose();
  pr.qb = D.transpose() * rinv_eta;
  pr.G = D.transpose() * entry.inverse * D;
  return pr;
}

Eigen::VectorXd quad_forms(const PhiProjection& pr, const Eigen::VectorXd& beta) {
  return pr.qa - 2.0 * (pr.qb.transpose() * beta) +
         Eigen::VectorXd::Constant(pr.N, beta.dot(pr.G * beta));
}

Eigen::VectorXd log_densities(const PhiProjection& pr, const Eigen::VectorXd& beta,
                              double log_sigma2) {
  const double sigma2 = std::exp(log_sigma2);
  const double c = -0.5 * (pr.n * kLog2Pi + pr.n * log_sigma2 + pr.logdetR);
  return (quad_forms(pr, beta) * (-0.5 / sigma2)).array() + c;
}

struct RatioStats {
  double value = 0.0;
  Eigen::VectorXd weights;  // self-normalized importance weights
  double ess = 0.0;
};

RatioStats ratio_stats(const Eigen::VectorXd& logf, const Eigen::VectorXd& logf0) {
  const Eigen::VectorXd r = logf - logf0;
  const int N = static_cast<int>(r.size());
  const double mx = r.maxCoeff();
  const Eigen::VectorXd w = (r.array() - mx).exp();
  const double sum = w.sum();
  RatioStats out;
  out.value = mx + std::log(sum) - std::log(static_cast<double>(N));
  out.weights = w / sum;
  out.ess = sum * sum / w.squaredNorm();
  return out;
}

// Gradient and Hessian over theta = (beta, log sigma2) of the MC ratio.
McDerivatives derivatives(const PhiProjection& pr, const Eigen::VectorXd& logf0,
                          const Eigen::VectorXd& beta, double log_sigma2) {
  const int p = static_cast<int>(beta.size());
  const int d = p + 1;
  const double sigma2 = std::exp(log_sigma2);

  const Eigen::VectorXd q = quad_forms(pr, beta);
  const double c = -0.5 * (pr.n * kLog2Pi + pr.n * log_sigma2 + pr.logdetR);
  const Eigen::VectorXd logf = (q * (-0.5 / sigma2)).array() + c;
  const RatioStats rs = ratio_stats(logf, logf0);
  const Eigen::VectorXd& v = rs.weights;

  // Per-draw scores.
  const Eigen::MatrixXd bc = pr.qb.colwise() - pr.G * beta;    // p x N
  const Eigen::MatrixXd s_beta = bc / sigma2;                  // p x N
  const Eigen::VectorXd s_sig = q / (2.0 * sigma2) -
                                Eigen::VectorXd::Constant(pr.N, 0.5 * pr.n);  // N

  Eigen::VectorXd mean_s(d);
  mean_s.head(p) = s_beta * v;
  mean_s[p] = s_sig.dot(v);

  // E[s s'] under the importance weights.
  Eigen::MatrixXd ess_mat(d, d);
  ess_mat.topLeftCorner(p, p) = s_beta * v.asDiagonal() * s_beta.transpose();
  ess_mat.topRightCorner(p, 1) = s_beta * (v.array() * s_sig.array()).matrix();
  ess_mat.bottomLeftCorner(1, p) = ess_mat.topRightCorner(p, 1).transpose();
  ess_mat(p, p) = (v.array() * s_sig.array().square()).sum();

  // E[hess] under the importance weights.
  Eigen::MatrixXd mean_h = Eigen::MatrixXd::Zero(d, d);
  mean_h.topLeftCorner(p, p) = -pr.G / sigma2;
  mean_h.topRightCorner(p, 1) = -mean_s.head(p);
  mean_h.bottomLeftCorner(1, p) = -mean_s.head(p).transpose();
  mean_h(p, p) = -(v.array() * q.array()).sum() / (2.0 * sigma2);

  McDerivatives out;
  out.value = rs.value;
  out.gradient = mean_s;
  out.hessian = mean_h + ess_mat - mean_s * mean_s.transpose();
  out.hessian = 0.5 * (out.hessian + out.hessian.transpose()).eval();
  out.ess = rs.ess;
  out.degeneracy_warning = rs.ess < 0.01 * pr.N;
  return out;
}

struct OptimResult {
  Eigen::VectorXd theta;
  McDerivatives at_opt;
};

// Projected Newton ascent over (beta, log sigma2) with a box on the last
// coordinate; uses the analytic gradient and Hessian. Stationary points
// with remaining positive curvature (saddles of the log-sum-exp surface)
// are escaped along the offending eigenvector.
OptimResult maximize_theta(const PhiProjection& pr, const Eigen::VectorXd& logf0,
                           Eigen::VectorXd theta, double lo, double hi) {
  const int p = static_cast<int>(theta.size()) - 1;
  const int d = p + 1;
  theta[p] = std::clamp(theta[p], lo, hi);

  McDerivatives cur = derivatives(pr, logf0, theta.head(p), theta[p]);
  auto ascend = [&]() {
    for (int iter = 0; iter < 200; ++iter) {
      Eigen::VectorXd g = cur.gradient;
      // At an active bound pushing outward, the coordinate is fixed.
      const bool at_lo = theta[p] <= lo && g[p] < 0.0;
      const bool at_hi = theta[p] >= hi && g[p] > 0.0;
      if (at_lo || at_hi) g[p] = 0.0;
      if (g.lpNorm<Eigen::Infinity>() < 1e-8) break;

      Eigen::MatrixXd neg_h = -cur.hessian;
      if (at_lo || at_hi) {
        neg_h.row(p).setZero();
        neg_h.col(p).setZero();
        neg_h(p, p) = 1.0;
      }
      double tau = 0.0;
      Eigen::VectorXd step(d);
      for (;;) {
        Eigen::MatrixXd work = neg_h;
        if (tau > 0.0) work.diagonal().array() += tau;
        Eigen::LLT<Eigen::MatrixXd> llt(work);
        if (llt.info() == Eigen::Success) {
          step = llt.solve(g);
          if (step.dot(g) > 0.0 && step.allFinite()) break;
        }
        tau = tau == 0.0 ? 1e-8 : tau * 10.0;
        if (tau > 1e8) {
          step = g;  // gradient fallback
          break;
        }
      }

      double alpha = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 50; ++ls) {
        Eigen::VectorXd cand = theta + alpha * step;
        cand[p] = std::clamp(cand[p], lo, hi);
        McDerivatives trial = derivatives(pr, logf0, cand.head(p), cand[p]);
        if (std::isfinite(trial.value) && trial.value > cur.value) {
          theta = cand;
          cur = std::move(trial);
          moved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!moved) break;
    }
  };

  for (int escape = 0; escape < 4; ++escape) {
    ascend();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cur.hessian);
    int worst = 0;
    es.eigenvalues().maxCoeff(&worst);
    if (es.eigenvalues()[worst] <= 1e-8) break;
    const Eigen::VectorXd dir = es.eigenvectors().col(worst);
    bool escaped = false;
    for (double sign : {1.0, -1.0}) {
      for (double scale : {0.5, 0.1, 0.02}) {
        Eigen::VectorXd cand = theta + sign * scale * dir;
        cand[p] = std::clamp(cand[p], lo, hi);
        McDerivatives trial = derivatives(pr, logf0, cand.head(p), cand[p]);
        if (std::isfinite(trial.value) && trial.value > cur.value) {
          theta = cand;
          cur = std::move(trial);
          escaped = true;
          break;
        }
      }
      if (escaped) break;
    }
    if (!escaped) break;
  }
  return {theta, cur};
}

ModelParams make_params(const Eigen::VectorXd& theta, double phi) {
  ModelParams out;
  const int p = static_cast<int>(theta.size()) - 1;
  out.beta = theta.head(p);
  out.sigma2 = std::exp(theta[p]);
  out.phi = phi;
  return out;
}

}  // namespace

void McmlConfig::validate() const {
  if (n_samples < 1000) throw NumericalError("mcml", "n_samples must be >= 1000");
  if (outer_iters < 1) throw NumericalError("mcml", "outer_iters must be >= 1");
  if (!(param_tol > 0.0)) throw NumericalError("mcml", "param_tol must be > 0");
  if (!(log_sigma2_hi > log_sigma2_lo)) throw NumericalError("mcml", "bad log sigma2 bounds");
}

LatentChainConfig McmlConfig::chain() const {
  LatentChainConfig c;
  c.burn_in = burn_in;
  c.thin = thin;
  c.n_iter = burn_in + thin * n_samples;
  c.step_size = step_size;
  return c;
}

McLoglik mc_loglik(const ModelParams& params, const ModelParams& params0,
                   const Eigen::MatrixXd& draws, const CovarianceCache& cache,
                   const Eigen::MatrixXd& D) {
  if (draws.rows() < 1) throw ShapeError("mcml", "no draws");
  if (draws.cols() != D.rows()) throw ShapeError("mcml", "draws and design disagree");
  const PhiProjection pr = project_draws(draws, D, cache.at_phi(params.phi));
  const PhiProjection pr0 = project_draws(draws, D, cache.at_phi(params0.phi));
  const Eigen::VectorXd logf = log_densities(pr, params.beta, std::log(params.sigma2));
  const Eigen::VectorXd logf0 = log_densities(pr0, params0.beta, std::log(params0.sigma2));
  const RatioStats rs = ratio_stats(logf, logf0);
  McLoglik out;
  out.value = rs.value;
  out.ess = rs.ess;
  out.degeneracy_warning = rs.ess < 0.01 * static_cast<double>(draws.rows());
  return out;
}

McDerivatives mc_loglik_grad_hess(const ModelParams& params, const ModelParams& params0,
                                  const Eigen::MatrixXd& draws, const CovarianceCache& cache,
                                  const Eigen::MatrixXd& D) {
  if (draws.rows() < 1) throw ShapeError("mcml", "no draws");
  if (draws.cols() != D.rows()) throw ShapeError("mcml", "draws and design disagree");
  const PhiProjection pr = project_draws(draws, D, cache.at_phi(params.phi));
  const PhiProjection pr0 = project_draws(draws, D, cache.at_phi(params0.phi));
  const Eigen::VectorXd logf0 = log_densities(pr0, params0.beta, std::log(params0.sigma2));
  return derivatives(pr, logf0, params.beta, std::log(params.sigma2));
}

Eigen::VectorXd poisson_glm(const DataVector& data) {
  data.validate();
  const int p = data.p();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  beta[0] = std::log((data.y.sum() + 0.5) / data.m.sum());
  for (int iter = 0; iter < 100; ++iter) {
    const Eigen::VectorXd mu =
        (data.m.array() * (data.D * beta).array().exp()).cwiseMax(1e-10);
    const Eigen::VectorXd z = data.D * beta + ((data.y - mu).array() / mu.array()).matrix();
    const Eigen::MatrixXd dtw = data.D.transpose() * mu.asDiagonal();
    const Eigen::VectorXd next = (dtw * data.D).ldlt().solve(dtw * z);
    const double change = (next - beta).lpNorm<Eigen::Infinity>();
    beta = next;
    if (change < 1e-10) break;
  }
  return beta;
}

FitResult fit(const DataVector& data, const CovarianceCache& cache, const PhiGrid& grid,
              const McmlConfig& config, std::uint64_t seed) {
  return fit_with_sample(data, cache, grid, config, seed, nullptr);
}

FitResult fit_with_sample(const DataVector& data, const CovarianceCache& cache,
                          const PhiGrid& grid, const McmlConfig& config, std::uint64_t seed,
                          LatentSample* final_sample) {
  config.validate();
  grid.validate();
  data.validate();
  const int p = data.p();

  ModelParams psi0;
  psi0.beta = poisson_glm(data);
  psi0.sigma2 = 1.0;
  psi0.phi = grid.median();

  FitResult res;
  res.monte_carlo_N = config.n_samples;

  const std::size_t nphi = grid.values.size();
  std::vector<OptimResult> per_phi(nphi);
  LatentSample sample;

  bool converged = false;
  int outer = 0;
  for (outer = 1; outer <= config.outer_iters; ++outer) {
    const CacheEntry& entry0 = cache.at_phi(psi0.phi);
    sample = run_mala(data, psi0, entry0, config.chain(), derive_seed(seed, "mcml-mala", outer));
    if (sample.acceptance_warning) {
      res.warnings.push_back("MALA acceptance rate " + std::to_string(sample.acceptance_rate) +
                             " outside [0.1, 0.9] at outer iteration " + std::to_string(outer));
    }

    const PhiProjection pr0 = project_draws(sample.draws, data.D, entry0);
    const Eigen::VectorXd logf0 =
        log_densities(pr0, psi0.beta, std::log(psi0.sigma2));

    Eigen::VectorXd warm(p + 1);
    warm.head(p) = psi0.beta;
    warm[p] = std::clamp(std::log(psi0.sigma2), config.log_sigma2_lo, config.log_sigma2_hi);

    parallel_for(nphi, config.threads, [&](std::size_t g) {
      const PhiProjection pr = project_draws(sample.draws, data.D, cache.entry(g));
      per_phi[g] = maximize_theta(pr, logf0, warm, config.log_sigma2_lo, config.log_sigma2_hi);
    });

    std::size_t best = 0;
    for (std::size_t g = 1; g < nphi; ++g) {
      if (per_phi[g].at_opt.value > per_phi[best].at_opt.value) best = g;
    }
    const ModelParams estimate = make_params(per_phi[best].theta, grid.values[best]);

    double rel_change = 0.0;
    for (int k = 0; k < p; ++k) {
      rel_change = std::max(rel_change, std::abs(estimate.beta[k] - psi0.beta[k]) /
                                            std::max(1e-8, std::abs(psi0.beta[k])));
    }
    rel_change = std::max(rel_change, std::abs(estimate.sigma2 - psi0.sigma2) /
                                          std::max(1e-8, psi0.sigma2));
    rel_change = std::max(rel_change, std::abs(estimate.phi - psi0.phi) /
                                          std::max(1e-8, psi0.phi));
    psi0 = estimate;
    if (rel_change < config.param_tol) {
      converged = true;
      ++outer;
      break;
    }
  }
  res.outer_iters_run = std::min(outer - 1, config.outer_iters);

  // Final state: profile from the last draw set, estimates at the argmax.
  std::size_t best = 0;
  res.phi_profile.clear();
  res.phi_profile.reserve(nphi);
  double min_ess = std::numeric_limits<double>::infinity();
  int degenerate = 0;
  for (std::size_t g = 0; g < nphi; ++g) {
    res.phi_profile.push_back({grid.values[g], per_phi[g].at_opt.value});
    if (per_phi[g].at_opt.value > per_phi[best].at_opt.value) best = g;
    min_ess = std::min(min_ess, per_phi[g].at_opt.ess);
    if (per_phi[g].at_opt.degeneracy_warning) ++degenerate;
  }
  res.estimates = psi0;
  res.min_ess = min_ess;
  res.mala_acceptance = sample.acceptance_rate;
  if (degenerate > 0) {
    res.warnings.push_back(std::to_string(degenerate) +
                           " phi grid values had degenerate importance weights (ESS < 1% of N)");
  }

  // Wald covariance over (beta, log sigma2) at the optimum.
  const Eigen::MatrixXd neg_h = -per_phi[best].at_opt.hessian;
  Eigen::LLT<Eigen::MatrixXd> llt(neg_h);
  if (llt.info() == Eigen::Success) {
    res.param_cov = llt.solve(Eigen::MatrixXd::Identity(p + 1, p + 1));
  } else {
    res.param_cov = neg_h.completeOrthogonalDecomposition().pseudoInverse();
    res.warnings.push_back("observed information not positive definite; using pseudo-inverse");
  }
  res.beta_cov = res.param_cov.topLeftCorner(p, p);

  // Profile CI for phi: natural cubic spline through the knots, endpoints
  // where the interpolated deviance 2*(max - l) crosses 1.921.
  const double lmax = per_phi[best].at_opt.value;
  res.phi_ci_lo = grid.values.front();
  res.phi_ci_hi = grid.values.back();
  if (nphi >= 2) {
    std::vector<double> xs(nphi), ys(nphi);
    for (std::size_t g = 0; g < nphi; ++g) {
      xs[g] = grid.values[g];
      ys[g] = res.phi_profile[g].loglik;
    }
    const NaturalCubicSpline spline(xs, ys);
    const double cutoff = lmax - kDevianceCutoff95;
    const double phi_hat = grid.values[best];
    auto above = [&](double t) { return spline(t) >= cutoff; };
    // Scan for the connected component of {phi : profile >= cutoff}
    // containing the estimate, bisecting each sign change.
    const int scan = 4000;
    const double lo = xs.front(), hi = xs.back();
    auto bisect = [&](double a, double b) {
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (a + b);
        if (above(mid) == above(a)) {
          a = mid;
        } else {
          b = mid;
        }
      }
      return 0.5 * (a + b);
    };
    double ci_lo = lo, ci_hi = hi;
    double prev = lo;
    bool prev_above = above(prev);
    for (int s = 1; s <= scan; ++s) {
      const double t = lo + (hi - lo) * static_cast<double>(s) / scan;
      const bool cur_above = above(t);
      if (cur_above != prev_above) {
        const double root = bisect(prev, t);
        if (root <= phi_hat) {
          ci_lo = std::max(ci_lo, root);
        } else {
          ci_hi = std::min(ci_hi, root);
        }
      }
      prev = t;
      prev_above = cur_above;
    }
    res.phi_ci_lo = ci_lo;
    res.phi_ci_hi = ci_hi;
  }

  res.converged = converged;
  if (degenerate == static_cast<int>(nphi)) {
    res.warnings.push_back("importance weights degenerate for every phi; fit not converged");
    res.converged = false;
  }
  if (final_sample != nullptr) *final_sample = std::move(sample);
  return res;
}

}  // namespace sda

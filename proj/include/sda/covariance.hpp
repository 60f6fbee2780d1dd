#ifndef SDA_COVARIANCE_HPP
#define SDA_COVARIANCE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sda/common.hpp"
#include "sda/quadrature.hpp"

namespace sda {

// Matern correlation with scale phi and smoothness kappa; equals
// exp(-u/phi) exactly at kappa = 1/2 (the working kernel throughout).
double matern_corr(double u, double phi, double kappa);
inline double exp_corr(double u, double phi) { return std::exp(-u / phi); }

// Region-pair correlation: the weighted double sum over the two quadrature
// sets, normalized by the weight-product total. Symmetric, in (0, 1].
double region_pair_corr(const QuadratureSet& qi, const QuadratureSet& qj, double phi);

struct PhiGrid {
  std::vector<double> values;

  static PhiGrid linspace(double lo, double hi, int n);
  static PhiGrid default_grid() { return linspace(50.0, 2000.0, 100); }

  void validate() const;
  double median() const;
  std::size_t index_closest(double phi) const;
};

struct CacheEntry {
  double phi = 0.0;
  Eigen::MatrixXd corr;     // R(phi) with jitter already applied to the diagonal
  Eigen::MatrixXd chol;     // lower Cholesky factor of corr
  Eigen::MatrixXd inverse;  // corr^{-1}
  double log_det = 0.0;
  double jitter = 0.0;
};

// Correlation matrices over the discretized phi grid, with Cholesky,
// log-determinant and inverse per entry. Diagonal entries carry the
// self-pair integral (region-size shrinkage); Sigma = sigma2 * corr.
class CovarianceCache {
 public:
  CovarianceCache(std::vector<CacheEntry> entries, std::uint64_t key);

  int n() const { return n_; }
  const std::vector<CacheEntry>& entries() const { return entries_; }
  const CacheEntry& entry(std::size_t i) const { return entries_[i]; }
  // Exact-match lookup (1e-9 relative tolerance); throws if phi is off-grid.
  const CacheEntry& at_phi(double phi) const;
  std::uint64_t key() const { return key_; }

  // Versioned binary file: header + little-endian 64-bit floats. Only the
  // correlation matrices are stored; decompositions are rebuilt on load.
  void save(const std::string& path) const;
  static std::optional<CovarianceCache> try_load(const std::string& path, std::uint64_t key);

 private:
  std::vector<CacheEntry> entries_;
  int n_ = 0;
  std::uint64_t key_ = 0;
};

std::uint64_t cache_key(std::uint64_t partition_hash, std::uint64_t quadrature_seed,
                        const PhiGrid& grid);

// Builds the full n x n matrix of pair integrals for every phi in the grid.
// Inter-point distances are computed once and shared across the grid; the
// per-phi builds run in parallel. Diagonal jitter starts at 1e-10 and
// escalates tenfold up to 1e-6 before failing.
CovarianceCache build_cache(const std::vector<QuadratureSet>& quads, const PhiGrid& grid,
                            int threads = 1, std::uint64_t key = 0);

// Lower Cholesky with the same escalating-jitter policy; jitter_used reports
// the diagonal shift that succeeded. Throws NumericalError on failure.
Eigen::MatrixXd chol_with_jitter(const Eigen::MatrixXd& m, double* jitter_used,
                                 const std::string& context);

}  // namespace sda

#endif  // SDA_COVARIANCE_HPP

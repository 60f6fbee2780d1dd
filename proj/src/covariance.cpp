#include "sda/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "sda/parallel.hpp"

namespace sda {

double matern_corr(double u, double phi, double kappa) {
  if (u < 0.0) throw NumericalError("covariance", "negative distance in matern_corr");
  if (!(phi > 0.0)) throw NumericalError("covariance", "phi must be > 0");
  if (!(kappa > 0.0)) throw NumericalError("covariance", "kappa must be > 0");
  if (u == 0.0) return 1.0;
  if (kappa == 0.5) return std::exp(-u / phi);
  const double s = u / phi;
  const double k = std::cyl_bessel_k(kappa, s);
  if (k == 0.0) return 0.0;  // kernel underflow at large distance
  return std::pow(2.0, 1.0 - kappa) / std::tgamma(kappa) * std::pow(s, kappa) * k;
}

double region_pair_corr(const QuadratureSet& qi, const QuadratureSet& qj, double phi) {
  if (qi.points.empty() || qj.points.empty()) {
    throw DegenerateWeightError("covariance", "empty quadrature set in region_pair_corr");
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t a = 0; a < qi.points.size(); ++a) {
    const double wa = qi.weights[a];
    for (std::size_t b = 0; b < qj.points.size(); ++b) {
      const double wp = wa * qj.weights[b];
      num += wp * exp_corr(dist(qi.points[a], qj.points[b]), phi);
      den += wp;
    }
  }
  if (!(den > 0.0)) {
    throw DegenerateWeightError("covariance", "all-zero weight products between regions '" +
                                                  qi.region_id + "' and '" + qj.region_id + "'");
  }
  return num / den;
}

PhiGrid PhiGrid::linspace(double lo, double hi, int n) {
  if (n < 1) throw NumericalError("covariance", "phi grid needs at least one value");
  if (n > 1 && !(hi > lo)) {
    throw NumericalError("covariance", "phi grid bounds must satisfy hi > lo");
  }
  PhiGrid g;
  g.values.reserve(n);
  if (n == 1) {
    g.values.push_back(lo);
  } else {
    for (int i = 0; i < n; ++i) {
      g.values.push_back(lo + (hi - lo) * static_cast<double>(i) / (n - 1));
    }
  }
  g.validate();
  return g;
}

void PhiGrid::validate() const {
  if (values.empty()) throw NumericalError("covariance", "phi grid is empty");
  double prev = 0.0;
  for (double v : values) {
    if (!(v > 0.0)) throw NumericalError("covariance", "phi grid values must be > 0");
    if (!(v > prev)) throw NumericalError("covariance", "phi grid must be strictly increasing");
    prev = v;
  }
}

double PhiGrid::median() const { return values[values.size() / 2]; }

std::size_t PhiGrid::index_closest(double phi) const {
  std::size_t best = 0;
  double bestd = std::abs(values[0] - phi);
  for (std::size_t i = 1; i < values.size(); ++i) {
    const double d = std::abs(values[i] - phi);
    if (d < bestd) {
      bestd = d;
      best = i;
    }
  }
  return best;
}

CovarianceCache::CovarianceCache(std::vector<CacheEntry> entries, std::uint64_t key)
    : entries_(std::move(entries)), key_(key) {
  if (entries_.empty()) throw NumericalError("covariance", "cache has no entries");
  n_ = static_cast<int>(entries_[0].corr.rows());
}

const CacheEntry& CovarianceCache::at_phi(double phi) const {
  for (const CacheEntry& e : entries_) {
    if (std::abs(e.phi - phi) <= 1e-9 * std::max(1.0, std::abs(phi))) return e;
  }
  throw NumericalError("covariance", "phi " + std::to_string(phi) + " is not on the cached grid");
}

Eigen::MatrixXd chol_with_jitter(const Eigen::MatrixXd& m, double* jitter_used,
                                 const std::string& context) {
  double jitter = 0.0;
  for (;;) {
    Eigen::MatrixXd work = m;
    if (jitter > 0.0) work.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(work);
    if (llt.info() == Eigen::Success) {
      if (jitter_used != nullptr) *jitter_used = jitter;
      return llt.matrixL();
    }
    if (jitter == 0.0) {
      jitter = 1e-10;
    } else if (jitter < 1e-6) {
      jitter *= 10.0;
    } else {
      throw NumericalError("covariance", "Cholesky failed after max jitter (" + context + ")");
    }
  }
}

std::uint64_t cache_key(std::uint64_t partition_hash, std::uint64_t quadrature_seed,
                        const PhiGrid& grid) {
  std::uint64_t h = fnv1a("cache-key");
  h = fnv1a(&partition_hash, sizeof(partition_hash), h);
  h = fnv1a(&quadrature_seed, sizeof(quadrature_seed), h);
  for (double v : grid.values) h = fnv1a(&v, sizeof(v), h);
  return h;
}

CovarianceCache build_cache(const std::vector<QuadratureSet>& quads, const PhiGrid& grid,
                            int threads, std::uint64_t key) {
  grid.validate();
  const std::size_t n = quads.size();
  if (n == 0) throw NumericalError("covariance", "no quadrature sets");
  for (const QuadratureSet& q : quads) {
    if (q.points.empty()) {
      throw DegenerateWeightError("covariance", "empty quadrature set for region '" + q.region_id + "'");
    }
  }

  // Distance table: one flat arena per upper-triangle pair.
  const std::size_t npairs = n * (n + 1) / 2;
  std::vector<std::size_t> offset(npairs + 1, 0);
  {
    std::size_t acc = 0;
    std::size_t p = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j, ++p) {
        offset[p] = acc;
        acc += quads[i].points.size() * quads[j].points.size();
      }
    }
    offset[npairs] = acc;
  }
  std::vector<double> dists(offset[npairs]);
  std::vector<double> wprod(offset[npairs]);
  std::vector<double> wsum(npairs, 0.0);
  {
    std::size_t p = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j, ++p) {
        std::size_t at = offset[p];
        double total = 0.0;
        for (std::size_t a = 0; a < quads[i].points.size(); ++a) {
          for (std::size_t b = 0; b < quads[j].points.size(); ++b, ++at) {
            dists[at] = dist(quads[i].points[a], quads[j].points[b]);
            const double wp = quads[i].weights[a] * quads[j].weights[b];
            wprod[at] = wp;
            total += wp;
          }
        }
        if (!(total > 0.0)) {
          throw DegenerateWeightError("covariance",
                                      "all-zero weight products between regions '" +
                                          quads[i].region_id + "' and '" + quads[j].region_id + "'");
        }
        wsum[p] = total;
      }
    }
  }

  std::vector<CacheEntry> entries(grid.values.size());
  parallel_for(grid.values.size(), threads, [&](std::size_t g) {
    const double phi = grid.values[g];
    Eigen::MatrixXd R(n, n);
    std::size_t p = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j, ++p) {
        double num = 0.0;
        const std::size_t lo = offset[p];
        const std::size_t hi = offset[p + 1];
        for (std::size_t t = lo; t < hi; ++t) {
          num += wprod[t] * std::exp(-dists[t] / phi);
        }
        R(i, j) = R(j, i) = num / wsum[p];
      }
    }
    CacheEntry e;
    e.phi = phi;
    e.chol = chol_with_jitter(R, &e.jitter, "phi = " + std::to_string(phi));
    if (e.jitter > 0.0) R.diagonal().array() += e.jitter;
    e.corr = std::move(R);
    e.log_det = 2.0 * e.chol.diagonal().array().log().sum();
    e.inverse = e.chol.transpose()
                    .triangularView<Eigen::Upper>()
                    .solve(e.chol.triangularView<Eigen::Lower>().solve(
                        Eigen::MatrixXd::Identity(n, n)));
    entries[g] = std::move(e);
  });

  return CovarianceCache(std::move(entries), key);
}

namespace {

constexpr char kCacheMagic[4] = {'S', 'D', 'A', 'C'};
constexpr std::uint32_t kCacheVersion = 1;

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
bool read_raw(std::ifstream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return static_cast<bool>(in);
}

}  // namespace

void CovarianceCache::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("covariance", "cannot write cache file '" + path + "'");
  out.write(kCacheMagic, 4);
  write_raw(out, kCacheVersion);
  write_raw(out, key_);
  write_raw(out, static_cast<std::uint32_t>(n_));
  write_raw(out, static_cast<std::uint32_t>(entries_.size()));
  for (const CacheEntry& e : entries_) write_raw(out, e.phi);
  for (const CacheEntry& e : entries_) {
    write_raw(out, e.jitter);
    out.write(reinterpret_cast<const char*>(e.corr.data()),
              static_cast<std::streamsize>(sizeof(double)) * n_ * n_);
  }
}

std::optional<CovarianceCache> CovarianceCache::try_load(const std::string& path,
                                                         std::uint64_t key) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCacheMagic, 4) != 0) return std::nullopt;
  std::uint32_t version = 0;
  std::uint64_t stored_key = 0;
  std::uint32_t n = 0, nphi = 0;
  if (!read_raw(in, version) || version != kCacheVersion) return std::nullopt;
  if (!read_raw(in, stored_key) || stored_key != key) return std::nullopt;
  if (!read_raw(in, n) || !read_raw(in, nphi) || n == 0 || nphi == 0) return std::nullopt;
  std::vector<double> phis(nphi);
  for (auto& p : phis) {
    if (!read_raw(in, p)) return std::nullopt;
  }
  std::vector<CacheEntry> entries;
  entries.reserve(nphi);
  for (std::uint32_t g = 0; g < nphi; ++g) {
    CacheEntry e;
    e.phi = phis[g];
    if (!read_raw(in, e.jitter)) return std::nullopt;
    e.corr.resize(n, n);
    in.read(reinterpret_cast<char*>(e.corr.data()),
            static_cast<std::streamsize>(sizeof(double)) * n * n);
    if (!in) return std::nullopt;
    Eigen::LLT<Eigen::MatrixXd> llt(e.corr);
    if (llt.info() != Eigen::Success) return std::nullopt;
    e.chol = llt.matrixL();
    e.log_det = 2.0 * e.chol.diagonal().array().log().sum();
    e.inverse = e.chol.transpose()
                    .triangularView<Eigen::Upper>()
                    .solve(e.chol.triangularView<Eigen::Lower>().solve(
                        Eigen::MatrixXd::Identity(n, n)));
    entries.push_back(std::move(e));
  }
  return CovarianceCache(std::move(entries), key);
}

}  // namespace sda

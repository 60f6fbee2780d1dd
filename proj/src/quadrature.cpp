#include "sda/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>
#include <sstream>

#include "sda/covariance.hpp"

namespace sda {

namespace {

constexpr double kMaxPacking = std::numbers::pi / 3.4641016151377544;  // pi / sqrt(12)

}  // namespace

void QuadratureConfig::validate() const {
  if (!(gamma > 0.0) || gamma > kMaxPacking + 1e-12) {
    throw NumericalError("quadrature", "gamma must lie in (0, pi/sqrt(12)]");
  }
  if (!(rel_tol_eps > 0.0)) {
    throw NumericalError("quadrature", "rel_tol_eps must be > 0");
  }
  if (batch_size_k <= 0) {
    throw NumericalError("quadrature", "batch_size_k must be positive");
  }
  if (max_attempts_per_point <= 0) {
    throw NumericalError("quadrature", "max_attempts_per_point must be positive");
  }
}

double default_delta(const Partition& partition) {
  std::vector<double> areas;
  areas.reserve(partition.size());
  for (const Region& r : partition.regions()) areas.push_back(r.area());
  std::sort(areas.begin(), areas.end());
  const std::size_t n = areas.size();
  const double median =
      (n % 2 == 1) ? areas[n / 2] : 0.5 * (areas[n / 2 - 1] + areas[n / 2]);
  return 0.25 * std::sqrt(median);
}

QuadratureConfig resolve_delta(QuadratureConfig config, const Partition& partition) {
  if (config.delta <= 0.0) config.delta = default_delta(partition);
  return config;
}

double point_budget_raw(const QuadratureConfig& config, double region_area) {
  return 4.0 * config.gamma * region_area / (std::numbers::pi * config.delta * config.delta);
}

int point_budget(const QuadratureConfig& config, double region_area) {
  if (!(region_area > 0.0)) throw NumericalError("quadrature", "region area must be > 0");
  if (!(config.delta > 0.0)) throw NumericalError("quadrature", "delta must be > 0");
  const double raw = point_budget_raw(config, region_area);
  return std::max(1, static_cast<int>(std::ceil(raw)));
}

WeightFunction uniform_weight() {
  return {[](const Point&) { return 1.0; }, 1.0, Weighting::Uniform};
}

WeightFunction population_weight(const PopulationRaster& raster, const Region& region) {
  const Bbox ext = raster.extent();
  const Bbox& rb = region.bbox();
  double wmax = 0.0;
  if (ext.overlaps(rb)) {
    const Point o = raster.origin();
    const double cs = raster.cell_size();
    const int c0 = std::max(0, static_cast<int>(std::floor((rb.xmin - o.x) / cs)));
    const int c1 = std::min(raster.ncols() - 1, static_cast<int>(std::floor((rb.xmax - o.x) / cs)));
    const int b0 = std::max(0, static_cast<int>(std::floor((rb.ymin - o.y) / cs)));
    const int b1 = std::min(raster.nrows() - 1, static_cast<int>(std::floor((rb.ymax - o.y) / cs)));
    for (int b = b0; b <= b1; ++b) {
      for (int c = c0; c <= c1; ++c) {
        const double v = raster.at_rc(raster.nrows() - 1 - b, c);
        if (v != raster.nodata() && v > wmax) wmax = v;
      }
    }
  }
  auto eval = [&raster, ext](const Point& p) -> double {
    if (p.x < ext.xmin || p.x >= ext.xmax || p.y < ext.ymin || p.y >= ext.ymax) return 0.0;
    return raster.sample(p);
  };
  return {std::move(eval), wmax, Weighting::Population};
}

void extend_inhibition(QuadratureSet& set, const Region& region, const WeightFunction& weight,
                       const QuadratureConfig& config, double delta_round, int count, Rng& rng) {
  if (!(weight.max_value > 0.0)) {
    throw DegenerateWeightError("quadrature",
                                "weight function is zero everywhere on region '" + region.id() + "'");
  }
  const Bbox& bb = region.bbox();
  double delta_cur = delta_round;
  const double delta_min_frac = 0.1;  // floor for the weight-driven threshold

  const int target = static_cast<int>(set.points.size()) + count;
  int attempts = 0;
  bool saw_positive_weight = false;

  while (static_cast<int>(set.points.size()) < target) {
    if (attempts >= config.max_attempts_per_point) {
      if (!saw_positive_weight) {
        throw DegenerateWeightError(
            "quadrature", "no positive-weight proposals in region '" + region.id() + "'");
      }
      delta_cur *= 0.9;
      ++set.delta_relaxations;
      if (set.delta_relaxations == 1) {
        std::cerr << "warning: relaxing inhibition distance in region '" << region.id() << "'\n";
      }
      if (set.delta_relaxations > 400) {
        throw ConvergenceError("quadrature",
                               "inhibition sampling failed to place points in region '" +
                                   region.id() + "'");
      }
      attempts = 0;
      saw_positive_weight = false;
      continue;
    }
    ++attempts;
    const Point prop{rng.uniform(bb.xmin, bb.xmax), rng.uniform(bb.ymin, bb.ymax)};
    if (!region.contains(prop)) continue;
    const double w = weight.eval(prop);
    if (w <= 0.0) continue;  // zero-probability proposal; keeps weights > 0
    saw_positive_weight = true;
    const double p_acc = std::min(1.0, w / weight.max_value);
    const double u = rng.uniform();
    if (u > p_acc) continue;

    bool ok = true;
    for (std::size_t j = 0; j < set.points.size(); ++j) {
      double thresh = delta_cur;
      if (weight.weighting == Weighting::Population) {
        const double wj_ratio = std::min(1.0, set.weights[j] / weight.max_value);
        thresh = std::max(delta_min_frac * delta_cur, delta_cur * (1.0 - wj_ratio));
      }
      if (dist(prop, set.points[j]) <= thresh) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;

    set.points.push_back(prop);
    set.weights.push_back(w);
    attempts = 0;
    saw_positive_weight = false;
  }
}

QuadratureSet sample_inhibition(const Region& region, const WeightFunction& weight,
                                const QuadratureConfig& config, int L, std::uint64_t rng_seed) {
  config.validate();
  if (L < 1) throw NumericalError("quadrature", "point count must be >= 1");
  if (!(config.delta > 0.0)) throw NumericalError("quadrature", "delta must be > 0");
  QuadratureSet set;
  set.region_id = region.id();
  set.weighting = weight.weighting;
  Rng rng(rng_seed);
  extend_inhibition(set, region, weight, config, config.delta, L, rng);
  return set;
}

AdaptiveResult adaptive_quadrature(const Region& region_i, const Region& region_j,
                                   const WeightFunction& weight_i, const WeightFunction& weight_j,
                                   double phi, const QuadratureConfig& config,
                                   std::uint64_t rng_seed) {
  config.validate();
  if (!(phi > 0.0)) throw NumericalError("quadrature", "phi must be > 0");
  if (!(config.delta > 0.0)) throw NumericalError("quadrature", "delta must be > 0");
  const int k = config.batch_size_k;

  AdaptiveResult res;
  res.first.region_id = region_i.id();
  res.first.weighting = weight_i.weighting;
  res.second.region_id = region_j.id();
  res.second.weighting = weight_j.weighting;

  Rng rng_i(derive_seed(rng_seed, "adaptive", fnv1a(region_i.id())));
  Rng rng_j(derive_seed(rng_seed, "adaptive", fnv1a(region_j.id()) + 1));

  // Round r adds k points per region at packing intensity gamma(k)/r, i.e.
  // inhibition distance delta/sqrt(r); enforcing the new distance against
  // the whole accumulated set keeps total packing density at gamma(k).
  extend_inhibition(res.first, region_i, weight_i, config, config.delta, k, rng_i);
  extend_inhibition(res.second, region_j, weight_j, config, config.delta, k, rng_j);
  double i_old = region_pair_corr(res.first, res.second, phi);
  res.rounds = 1;

  for (int r = 2; r <= config.max_adaptive_rounds; ++r) {
    const double delta_r = config.delta / std::sqrt(static_cast<double>(r));
    extend_inhibition(res.first, region_i, weight_i, config, delta_r, k, rng_i);
    extend_inhibition(res.second, region_j, weight_j, config, delta_r, k, rng_j);
    const double i_new = region_pair_corr(res.first, res.second, phi);
    res.rounds = r;
    if (std::abs(i_old - i_new) < config.rel_tol_eps * std::abs(i_new)) {
      res.value = i_new;
      res.converged = true;
      return res;
    }
    i_old = i_new;
  }
  std::cerr << "warning: adaptive quadrature for regions '" << region_i.id() << "'/'"
            << region_j.id() << "' did not converge in " << config.max_adaptive_rounds
            << " rounds\n";
  res.value = i_old;
  res.converged = false;
  return res;
}

namespace {

WeightFunction make_weight(const Partition& partition, std::size_t idx,
                           const PopulationRaster* raster, Weighting weighting) {
  if (weighting == Weighting::Population) {
    if (raster == nullptr) {
      throw DegenerateWeightError("quadrature", "population weighting requires a raster");
    }
    return population_weight(*raster, partition.region(idx));
  }
  return uniform_weight();
}

}  // namespace

std::vector<QuadratureSet> build_quadrature(const Partition& partition,
                                            const PopulationRaster* raster, Weighting weighting,
                                            const QuadratureConfig& config, std::uint64_t seed) {
  const QuadratureConfig cfg = resolve_delta(config, partition);
  cfg.validate();
  std::vector<QuadratureSet> sets;
  sets.reserve(partition.size());
  for (std::size_t i = 0; i < partition.size(); ++i) {
    const Region& region = partition.region(i);
    const WeightFunction w = make_weight(partition, i, raster, weighting);
    const int L = point_budget(cfg, region.area());
    sets.push_back(sample_inhibition(region, w, cfg, L,
                                     derive_seed(seed, "quadrature", fnv1a(region.id()))));
  }
  return sets;
}

std::vector<QuadratureSet> build_quadrature_adaptive(const Partition& partition,
                                                     const PopulationRaster* raster,
                                                     Weighting weighting,
                                                     const QuadratureConfig& config,
                                                     double phi_ref, std::uint64_t seed,
                                                     bool* converged) {
  const QuadratureConfig cfg = resolve_delta(config, partition);
  cfg.validate();
  const std::size_t n = partition.size();
  const int k = cfg.batch_size_k;

  std::vector<QuadratureSet> sets(n);
  std::vector<WeightFunction> weights;
  std::vector<Rng> rngs;
  weights.reserve(n);
  rngs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    sets[i].region_id = partition.region(i).id();
    sets[i].weighting = weighting;
    weights.push_back(make_weight(partition, i, raster, weighting));
    rngs.emplace_back(derive_seed(seed, "quadrature", fnv1a(partition.region(i).id())));
  }

  auto pair_matrix = [&]() {
    Eigen::MatrixXd m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) {
        m(i, j) = m(j, i) = region_pair_corr(sets[i], sets[j], phi_ref);
      }
    }
    return m;
  };

  for (std::size_t i = 0; i < n; ++i) {
    extend_inhibition(sets[i], partition.region(i), weights[i], cfg, cfg.delta, k, rngs[i]);
  }
  Eigen::MatrixXd m_old = pair_matrix();
  bool done = false;
  for (int r = 2; r <= cfg.max_adaptive_rounds && !done; ++r) {
    const double delta_r = cfg.delta / std::sqrt(static_cast<double>(r));
    for (std::size_t i = 0; i < n; ++i) {
      extend_inhibition(sets[i], partition.region(i), weights[i], cfg, delta_r, k, rngs[i]);
    }
    Eigen::MatrixXd m_new = pair_matrix();
    // relative stability per entry, with an absolute floor: entries near
    // zero (far pairs at small phi) are irrelevant to the covariance and
    // would never stabilize in relative terms
    done = ((m_old - m_new).cwiseAbs().array() <=
            cfg.rel_tol_eps * m_new.cwiseAbs().array() + 1e-8)
               .all();
    m_old = std::move(m_new);
  }
  if (converged != nullptr) *converged = done;
  if (!done) {
    std::cerr << "warning: adaptive quadrature refinement did not converge in "
              << cfg.max_adaptive_rounds << " rounds\n";
  }
  return sets;
}

std::string quadrature_csv(const std::vector<QuadratureSet>& sets) {
  std::ostringstream out;
  out.precision(17);
  out << "region_id,x,y,weight\n";
  for (const QuadratureSet& s : sets) {
    for (std::size_t k = 0; k < s.points.size(); ++k) {
      out << s.region_id << ',' << s.points[k].x << ',' << s.points[k].y << ',' << s.weights[k]
          << '\n';
    }
  }
  return out.str();
}

}  // namespace sda

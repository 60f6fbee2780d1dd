#include <doctest.h>

#include <cmath>
#include <limits>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "sda/sim.hpp"

using namespace sda;

TEST_CASE("zero sigma gives the zero field") {
  std::vector<Point> cells;
  for (int i = 0; i < 25; ++i) cells.push_back({static_cast<double>(i % 5), std::floor(i / 5.0)});
  const Eigen::VectorXd f = simulate_grf(cells, 0.0, 10.0, 1);
  CHECK(f.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("grf moments match the target covariance") {
  std::vector<Point> cells;
  const double h = 2.0;
  for (int i = 0; i < 6; ++i) cells.push_back({i * h, 0.0});
  const double sigma = 1.3, phi = 5.0;

  const int B = 200;
  std::vector<double> at0(B), at1(B);
  for (int b = 0; b < B; ++b) {
    const Eigen::VectorXd f = simulate_grf(cells, sigma, phi, 1000 + b);
    at0[b] = f[0];
    at1[b] = f[1];
  }
  const auto m0 = oracle::moments(at0);
  // variance within 20% of sigma^2
  CHECK(std::abs(m0.sd * m0.sd - sigma * sigma) < 0.2 * sigma * sigma);

  // lag-1 correlation within 0.1 of exp(-h/phi)
  double cov = 0.0;
  const auto m1 = oracle::moments(at1);
  for (int b = 0; b < B; ++b) cov += (at0[b] - m0.mean) * (at1[b] - m1.mean);
  cov /= (B - 1);
  const double corr = cov / (m0.sd * m1.sd);
  CHECK(std::abs(corr - std::exp(-h / phi)) < 0.1);
}

TEST_CASE("grf cell budget is enforced") {
  std::vector<Point> cells(20001, Point{0, 0});
  CHECK_THROWS_AS(simulate_grf(cells, 1.0, 1.0, 1), SizeError);
}

TEST_CASE("counts follow the poisson mean") {
  // flat field, constant raster: region of K cells ~ Poisson(c K)
  const Partition part = fixtures::square_partition(1, 10.0);
  const PopulationRaster raster({0, 0}, 1.0, 10, 10, std::vector<double>(100, 0.7));
  const Eigen::VectorXd field = Eigen::VectorXd::Zero(100);

  const int B = 500;
  double total = 0.0;
  for (int b = 0; b < B; ++b) {
    const CountsResult r = simulate_counts(field, raster, part, 2000 + b);
    total += static_cast<double>(r.counts[0]);
    CHECK(r.dropped == 0);
    CHECK(r.total == r.counts[0]);
  }
  const double mean = total / B;
  const double expect = 70.0;
  const double se = std::sqrt(expect / B);
  CHECK(std::abs(mean - expect) < 3.0 * se);
}

TEST_CASE("zero raster gives zero counts") {
  const Partition part = fixtures::square_partition(1, 4.0);
  const PopulationRaster raster({0, 0}, 1.0, 4, 4, std::vector<double>(16, 0.0));
  const Eigen::VectorXd field = Eigen::VectorXd::Constant(16, 2.0);
  const CountsResult r = simulate_counts(field, raster, part, 5);
  CHECK(r.counts[0] == 0);
  CHECK(r.total == 0);
}

TEST_CASE("dropped cells keep the count conservation") {
  // partition covers only the left half of the raster
  const Partition part = fixtures::square_partition(1, 4.0);
  const PopulationRaster raster({0, 0}, 1.0, 8, 4, std::vector<double>(32, 3.0));
  const Eigen::VectorXd field = Eigen::VectorXd::Zero(32);
  const CountsResult r = simulate_counts(field, raster, part, 12);
  CHECK(r.dropped > 0);
  long assigned = 0;
  for (long c : r.counts) assigned += c;
  CHECK(r.total == assigned + r.dropped);
}

TEST_CASE("counts are reproducible by seed") {
  const Partition part = fixtures::square_partition(2, 3.0);
  const PopulationRaster raster({0, 0}, 1.0, 6, 6, std::vector<double>(36, 1.5));
  const Eigen::VectorXd field = simulate_grf(raster_cell_centers(raster), 0.7, 4.0, 9);
  const CountsResult a = simulate_counts(field, raster, part, 42);
  const CountsResult b = simulate_counts(field, raster, part, 42);
  CHECK(a.counts == b.counts);
  const CountsResult c = simulate_counts(field, raster, part, 43);
  CHECK(a.counts != c.counts);
}

TEST_CASE("metric formulas") {
  // exact agreement, intervals containing the truth
  const MetricReport perfect =
      metrics("region-incidence", {1, 2}, {1, 2}, {1, 2}, {1, 2});
  CHECK(perfect.bias == 0.0);
  CHECK(perfect.rmse == 0.0);
  CHECK(perfect.wpi == 0.0);
  CHECK(perfect.cp == 1.0);

  // infinite intervals always cover
  const double inf = std::numeric_limits<double>::infinity();
  const MetricReport wide = metrics("x", {5, -2}, {0, 0}, {-inf, -inf}, {inf, inf});
  CHECK(wide.cp == 1.0);

  // 2 regions x 2 replicates hand example
  const MetricReport hand =
      metrics("region-incidence", {1, 2, 3, 4}, {2, 2, 2, 2}, {0, 0, 0, 0}, {0, 0, 0, 0});
  CHECK(hand.bias == -0.5);
  CHECK(hand.rmse == doctest::Approx(std::sqrt(1.5)).epsilon(1e-15));

  CHECK_THROWS_AS(metrics("x", {1.0}, {1.0, 2.0}, {0.0}, {0.0}), ShapeError);
  CHECK_THROWS_AS(metrics("x", {}, {}, {}, {}), ShapeError);
}

TEST_CASE("scenario pipeline smoke test with a flat field") {
  // sigma = 0: the pipeline reduces to a Poisson GLM; sigma2 heads to its
  // lower bound and beta0 to the log of overall incidence
  const Partition part = fixtures::square_partition(3, 2.0);
  std::vector<double> cells(36, 30.0);
  const PopulationRaster raster({0, 0}, 1.0, 6, 6, cells);  // m_i = 120 per region

  SimScenario scenario;
  scenario.sigma = 0.0;
  scenario.phi = 3.0;
  scenario.grid_spacing = 1.0;
  scenario.replicates = 1;
  scenario.master_seed = 77;
  scenario.weighting = Weighting::Uniform;
  scenario.phi_grid = PhiGrid::linspace(1.0, 5.0, 3);
  scenario.mcml.n_samples = 1000;
  scenario.mcml.burn_in = 500;
  scenario.mcml.thin = 1;
  scenario.mcml.outer_iters = 4;
  scenario.mcml.param_tol = 1e-4;

  const ScenarioResult result = run_scenario(scenario, part, raster, 2);
  REQUIRE(result.replicates.size() == 1);
  const ReplicateSummary& rep = result.replicates[0];
  // true incidence per region is 120; beta0 near log of overall incidence 0
  CHECK(std::abs(rep.beta0_hat) < 0.3);
  CHECK(rep.sigma2_hat < 0.1);
  CHECK(result.counts[0].size() == 9);
  CHECK(result.region_metrics.target == "region-incidence");
  CHECK(result.risk_metrics.target == "continuous-risk");
  CHECK(result.region_metrics.cp >= 0.0);
  CHECK(result.region_metrics.cp <= 1.0);
}

TEST_CASE("scenario results are reproducible") {
  const Partition part = fixtures::square_partition(2, 2.0);
  const PopulationRaster raster({0, 0}, 1.0, 4, 4, std::vector<double>(16, 3.0));

  SimScenario scenario;
  scenario.sigma = 0.5;
  scenario.phi = 2.0;
  scenario.grid_spacing = 1.0;
  scenario.replicates = 2;
  scenario.master_seed = 123;
  scenario.weighting = Weighting::Uniform;
  scenario.phi_grid = PhiGrid::linspace(1.0, 4.0, 2);
  scenario.mcml.n_samples = 1000;
  scenario.mcml.burn_in = 300;
  scenario.mcml.thin = 1;
  scenario.mcml.outer_iters = 1;

  const ScenarioResult a = run_scenario(scenario, part, raster, 1);
  const ScenarioResult b = run_scenario(scenario, part, raster, 2);
  CHECK(a.counts == b.counts);
  CHECK(a.region_metrics.bias == b.region_metrics.bias);
  CHECK(a.region_metrics.cp == b.region_metrics.cp);
  CHECK(a.risk_metrics.rmse == b.risk_metrics.rmse);
  for (std::size_t i = 0; i < a.replicates.size(); ++i) {
    CHECK(a.replicates[i].phi_hat == b.replicates[i].phi_hat);
    CHECK(a.replicates[i].sigma2_hat == b.replicates[i].sigma2_hat);
  }
}

TEST_CASE("scenario validation") {
  SimScenario s;
  s.sigma = -1.0;
  CHECK_THROWS_AS(s.validate(), NumericalError);
  s = SimScenario{};
  s.replicates = 0;
  CHECK_THROWS_AS(s.validate(), NumericalError);
}

#include <doctest.h>

#include <cmath>

#include "sda/rng.hpp"
#include "sda/spline.hpp"

using namespace sda;

TEST_CASE("interpolates every knot exactly") {
  Rng rng(2718);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<double> x, y;
    double t = 0.0;
    const int n = 3 + static_cast<int>(rng.below(15));
    for (int i = 0; i < n; ++i) {
      t += rng.uniform(0.1, 2.0);
      x.push_back(t);
      y.push_back(rng.uniform(-10, 10));
    }
    const NaturalCubicSpline s(x, y);
    for (int i = 0; i < n; ++i) {
      CHECK(s(x[i]) == doctest::Approx(y[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("linear data reproduces the line everywhere") {
  const NaturalCubicSpline s({0.0, 1.0, 2.5, 4.0}, {1.0, 3.0, 6.0, 9.0});
  for (double t = 0.0; t <= 4.0; t += 0.1) {
    CHECK(s(t) == doctest::Approx(1.0 + 2.0 * t).epsilon(1e-12));
  }
}

TEST_CASE("natural boundary: second derivative vanishes at the ends") {
  std::vector<double> x, y;
  for (int i = 0; i <= 10; ++i) {
    x.push_back(static_cast<double>(i));
    y.push_back(std::sin(0.7 * i));
  }
  const NaturalCubicSpline s(x, y);
  const double h = 1e-4;
  const double d2_left = (s(x.front() + 2 * h) - 2 * s(x.front() + h) + s(x.front())) / (h * h);
  const double d2_right = (s(x.back()) - 2 * s(x.back() - h) + s(x.back() - 2 * h)) / (h * h);
  CHECK(std::abs(d2_left) < 1e-3);
  CHECK(std::abs(d2_right) < 1e-3);
}

TEST_CASE("two knots fall back to the chord") {
  const NaturalCubicSpline s({1.0, 3.0}, {2.0, 8.0});
  CHECK(s(1.0) == doctest::Approx(2.0));
  CHECK(s(2.0) == doctest::Approx(5.0));
  CHECK(s(3.0) == doctest::Approx(8.0));
}

TEST_CASE("bad knots are rejected") {
  CHECK_THROWS_AS(NaturalCubicSpline({1.0}, {2.0}), ShapeError);
  CHECK_THROWS_AS(NaturalCubicSpline({1.0, 1.0}, {2.0, 3.0}), ShapeError);
  CHECK_THROWS_AS(NaturalCubicSpline({1.0, 2.0}, {2.0}), ShapeError);
}

#ifndef SDA_TESTS_ORACLES_HPP
#define SDA_TESTS_ORACLES_HPP

// Independent numerical oracles for the tests and the acceptance suite.
// Nothing here shares code with the library's integration paths.

#include <cmath>
#include <vector>

namespace oracle {

// Midpoint-rule value of the double integral
//   (1/|A||B|) int_A int_B exp(-||x-x'||/phi) dx dx'
// over two axis-aligned squares of side `side`, with M x M midpoints per
// square. Equal-spacing lets the double sum regroup by index differences
// (count (M-|k|) per axis), which is algebraically identical to the full
// M^4 sum but costs (2M-1)^2 kernel evaluations.
inline double dense_pair_corr(double ax, double ay, double bx, double by, double side, int M,
                              double phi) {
  const double h = side / M;
  const double offx = (ax - bx);
  const double offy = (ay - by);
  double total = 0.0;
  for (int kx = -(M - 1); kx <= M - 1; ++kx) {
    const double cx = static_cast<double>(M - std::abs(kx));
    const double dx = offx + kx * h;
    for (int ky = -(M - 1); ky <= M - 1; ++ky) {
      const double cy = static_cast<double>(M - std::abs(ky));
      const double dy = offy + ky * h;
      total += cx * cy * std::exp(-std::hypot(dx, dy) / phi);
    }
  }
  const double pairs = static_cast<double>(M) * M * M * M;
  return total / pairs;
}

// Brute-force version of the same quantity (O(M^4)); used to validate the
// regrouped form at small M.
inline double dense_pair_corr_brute(double ax, double ay, double bx, double by, double side,
                                    int M, double phi) {
  const double h = side / M;
  double total = 0.0;
  for (int i = 0; i < M; ++i) {
    for (int j = 0; j < M; ++j) {
      const double x1 = ax + (i + 0.5) * h;
      const double y1 = ay + (j + 0.5) * h;
      for (int k = 0; k < M; ++k) {
        for (int l = 0; l < M; ++l) {
          const double x2 = bx + (k + 0.5) * h;
          const double y2 = by + (l + 0.5) * h;
          total += std::exp(-std::hypot(x1 - x2, y1 - y2) / phi);
        }
      }
    }
  }
  const double pairs = static_cast<double>(M) * M * M * M;
  return total / pairs;
}

// Root of f on [lo, hi] by bisection; f(lo) and f(hi) must bracket.
template <typename F>
double bisect(F f, double lo, double hi, int iters = 200) {
  double flo = f(lo);
  for (int i = 0; i < iters; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((flo <= 0.0) == (fm <= 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Trapezoid integral of f over [a, b] with n nodes.
template <typename F>
double trapezoid(F f, double a, double b, int n) {
  const double h = (b - a) / (n - 1);
  double total = 0.5 * (f(a) + f(b));
  for (int i = 1; i < n - 1; ++i) total += f(a + i * h);
  return total * h;
}

// Mean and standard deviation of a sample.
struct Moments {
  double mean = 0.0;
  double sd = 0.0;
};

inline Moments moments(const std::vector<double>& xs) {
  Moments m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  double sq = 0.0;
  for (double x : xs) sq += (x - m.mean) * (x - m.mean);
  m.sd = xs.size() > 1 ? std::sqrt(sq / (static_cast<double>(xs.size()) - 1.0)) : 0.0;
  return m;
}

// Monte Carlo standard error of the mean accounting for autocorrelation,
// via non-overlapping batch means.
inline double batch_mcse(const std::vector<double>& xs, int batches = 25) {
  const std::size_t n = xs.size();
  const std::size_t len = n / batches;
  std::vector<double> means;
  for (int b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t i = b * len; i < (b + 1) * len; ++i) s += xs[i];
    means.push_back(s / static_cast<double>(len));
  }
  const Moments m = moments(means);
  return m.sd / std::sqrt(static_cast<double>(batches));
}

}  // namespace oracle

#endif  // SDA_TESTS_ORACLES_HPP

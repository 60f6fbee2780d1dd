#ifndef SDA_SPLINE_HPP
#define SDA_SPLINE_HPP

#include <vector>

#include "sda/common.hpp"

namespace sda {

// Natural cubic spline interpolation: passes through every knot, with zero
// second derivative at both ends. Evaluation outside the knot range
// extrapolates the boundary cubics.
class NaturalCubicSpline {
 public:
  NaturalCubicSpline(std::vector<double> x, std::vector<double> y);

  double operator()(double t) const;

  const std::vector<double>& knots_x() const { return x_; }
  const std::vector<double>& knots_y() const { return y_; }

 private:
  std::vector<double> x_, y_, m_;  // m_: second derivatives at the knots
};

}  // namespace sda

#endif  // SDA_SPLINE_HPP

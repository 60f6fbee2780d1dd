#ifndef SDA_COMMON_HPP
#define SDA_COMMON_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sda {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline double dist(const Point& a, const Point& b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy);
}

struct Bbox {
  double xmin = 0.0, ymin = 0.0, xmax = 0.0, ymax = 0.0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  double area() const { return width() * height(); }
  bool contains(const Point& p) const {
    return p.x >= xmin && p.x <= xmax && p.y >= ymin && p.y <= ymax;
  }
  bool overlaps(const Bbox& o) const {
    return xmin <= o.xmax && o.xmin <= xmax && ymin <= o.ymax && o.ymin <= ymax;
  }
  void expand(const Point& p) {
    if (p.x < xmin) xmin = p.x;
    if (p.x > xmax) xmax = p.x;
    if (p.y < ymin) ymin = p.y;
    if (p.y > ymax) ymax = p.y;
  }
};

// Base error type; `module` names the subsystem that raised it so the CLI
// can report "[module] message" with exit code 2.
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& message)
      : std::runtime_error(message), module_(std::move(module)) {}
  const std::string& module() const { return module_; }

 private:
  std::string module_;
};

class InvalidGeometryError : public Error {
 public:
  explicit InvalidGeometryError(const std::string& msg) : Error("geometry", msg) {}
};

class ParseError : public Error {
 public:
  ParseError(std::string module, const std::string& msg) : Error(std::move(module), msg) {}
};

class OutOfBoundsError : public Error {
 public:
  explicit OutOfBoundsError(const std::string& msg) : Error("raster", msg) {}
};

class DegenerateOffsetError : public Error {
 public:
  explicit DegenerateOffsetError(const std::string& msg) : Error("raster", msg) {}
};

class DegenerateWeightError : public Error {
 public:
  DegenerateWeightError(std::string module, const std::string& msg)
      : Error(std::move(module), msg) {}
};

class NumericalError : public Error {
 public:
  NumericalError(std::string module, const std::string& msg) : Error(std::move(module), msg) {}
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(std::string module, const std::string& msg) : Error(std::move(module), msg) {}
};

class ShapeError : public Error {
 public:
  ShapeError(std::string module, const std::string& msg) : Error(std::move(module), msg) {}
};

class SizeError : public Error {
 public:
  SizeError(std::string module, const std::string& msg) : Error(std::move(module), msg) {}
};

// FNV-1a over raw bytes; used for config hashes and cache keys.
inline std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 1469598103934665603ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ULL) {
  return fnv1a(s.data(), s.size(), h);
}

}  // namespace sda

#endif  // SDA_COMMON_HPP

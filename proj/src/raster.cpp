#include "sda/raster.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace sda {

PopulationRaster::PopulationRaster(Point lower_left, double cell_size, int ncols, int nrows,
                                   std::vector<double> values, double nodata, bool values_per_m2)
    : origin_(lower_left),
      cell_(cell_size),
      ncols_(ncols),
      nrows_(nrows),
      nodata_(nodata),
      per_m2_(values_per_m2),
      values_(std::move(values)) {
  if (!(cell_ > 0.0)) throw ParseError("raster", "cell size must be > 0");
  if (ncols_ <= 0 || nrows_ <= 0) throw ParseError("raster", "grid dimensions must be positive");
  if (values_.size() != static_cast<std::size_t>(ncols_) * nrows_) {
    throw ShapeError("raster", "value count does not match ncols*nrows");
  }
  for (double v : values_) {
    if (v != nodata_ && v < 0.0) {
      throw ParseError("raster", "negative density value " + std::to_string(v));
    }
  }
}

double PopulationRaster::sample(const Point& p) const {
  const int col = static_cast<int>(std::floor((p.x - origin_.x) / cell_));
  const int row_from_bottom = static_cast<int>(std::floor((p.y - origin_.y) / cell_));
  if (col < 0 || col >= ncols_ || row_from_bottom < 0 || row_from_bottom >= nrows_) {
    throw OutOfBoundsError("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                           ") outside raster extent");
  }
  const double v = at_rc(nrows_ - 1 - row_from_bottom, col);
  if (v == nodata_) {
    if (nodata_hits_.fetch_add(1) == 0) {
      std::cerr << "warning: raster nodata sampled, mapping to 0\n";
    }
    return 0.0;
  }
  return v;
}

double PopulationRaster::region_mass(const Region& region) const {
  const Bbox ext = extent();
  const Bbox& rb = region.bbox();
  if (!ext.overlaps(rb)) {
    throw DegenerateOffsetError("region '" + region.id() + "' does not overlap the raster");
  }
  const int c0 = std::max(0, static_cast<int>(std::floor((rb.xmin - origin_.x) / cell_)));
  const int c1 = std::min(ncols_ - 1, static_cast<int>(std::floor((rb.xmax - origin_.x) / cell_)));
  const int b0 = std::max(0, static_cast<int>(std::floor((rb.ymin - origin_.y) / cell_)));
  const int b1 = std::min(nrows_ - 1, static_cast<int>(std::floor((rb.ymax - origin_.y) / cell_)));
  double mass = 0.0;
  const double factor = per_m2_ ? cell_ * cell_ : 1.0;
  for (int b = b0; b <= b1; ++b) {
    for (int c = c0; c <= c1; ++c) {
      const Point center{origin_.x + (c + 0.5) * cell_, origin_.y + (b + 0.5) * cell_};
      if (!region.contains(center)) continue;
      const double v = at_rc(nrows_ - 1 - b, c);
      if (v == nodata_) continue;
      mass += v * factor;
    }
  }
  if (!(mass > 0.0)) {
    throw DegenerateOffsetError("region '" + region.id() + "' has zero population mass");
  }
  return mass;
}

std::uint64_t PopulationRaster::content_hash() const {
  std::uint64_t h = fnv1a("raster");
  h = fnv1a(&origin_.x, sizeof(double), h);
  h = fnv1a(&origin_.y, sizeof(double), h);
  h = fnv1a(&cell_, sizeof(double), h);
  h = fnv1a(values_.data(), values_.size() * sizeof(double), h);
  return h;
}

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

// Integer-valued doubles print as integers; everything else uses the
// shortest round-trip representation.
std::string format_value(double v) {
  if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9.007199254740992e15) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(v));
    return buf;
  }
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

PopulationRaster parse_esri_ascii(const std::string& text, bool values_per_m2) {
  std::istringstream in(text);
  int ncols = -1, nrows = -1;
  double xll = 0, yll = 0, cell = 0, nodata = -9999.0;
  bool have_xll = false, have_yll = false, have_cell = false;

  std::string tok;
  // Header: keyword/value pairs until the first purely numeric token.
  std::streampos before = in.tellg();
  while (in >> tok) {
    const std::string key = lower(tok);
    if (key == "ncols") {
      in >> ncols;
    } else if (key == "nrows") {
      in >> nrows;
    } else if (key == "xllcorner") {
      in >> xll;
      have_xll = true;
    } else if (key == "yllcorner") {
      in >> yll;
      have_yll = true;
    } else if (key == "cellsize") {
      in >> cell;
      have_cell = true;
    } else if (key == "nodata_value") {
      in >> nodata;
    } else {
      // first data token; rewind and stop header parsing
      in.clear();
      in.seekg(before);
      break;
    }
    if (!in) throw ParseError("raster", "malformed header value after '" + tok + "'");
    before = in.tellg();
  }
  if (ncols <= 0 || nrows <= 0 || !have_xll || !have_yll || !have_cell) {
    throw ParseError("raster", "incomplete ESRI ASCII header");
  }
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(ncols) * nrows);
  double v;
  while (in >> v) values.push_back(v);
  if (values.size() != static_cast<std::size_t>(ncols) * nrows) {
    throw ParseError("raster", "expected " + std::to_string(static_cast<long>(ncols) * nrows) +
                                   " values, found " + std::to_string(values.size()));
  }
  return PopulationRaster({xll, yll}, cell, ncols, nrows, std::move(values), nodata, values_per_m2);
}

PopulationRaster read_esri_ascii(const std::string& path, bool values_per_m2) {
  std::ifstream in(path);
  if (!in) throw ParseError("raster", "cannot open raster file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_esri_ascii(ss.str(), values_per_m2);
}

std::string format_esri_ascii(const PopulationRaster& r) {
  std::ostringstream out;
  out << "ncols " << r.ncols() << "\n";
  out << "nrows " << r.nrows() << "\n";
  out << "xllcorner " << format_value(r.origin().x) << "\n";
  out << "yllcorner " << format_value(r.origin().y) << "\n";
  out << "cellsize " << format_value(r.cell_size()) << "\n";
  out << "NODATA_value " << format_value(r.nodata()) << "\n";
  for (int row = 0; row < r.nrows(); ++row) {
    for (int col = 0; col < r.ncols(); ++col) {
      if (col) out << ' ';
      out << format_value(r.at_rc(row, col));
    }
    out << '\n';
  }
  return out.str();
}

void write_esri_ascii(const PopulationRaster& raster, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("raster", "cannot write raster file '" + path + "'");
  out << format_esri_ascii(raster);
}

}  // namespace sda

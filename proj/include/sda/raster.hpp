#ifndef SDA_RASTER_HPP
#define SDA_RASTER_HPP

#include <atomic>
#include <string>
#include <vector>

#include "sda/common.hpp"
#include "sda/geometry.hpp"

namespace sda {

// Gridded population surface m(x). Values are stored in file order
// (row-major, row 0 = northernmost). Cells are half-open: a point on a cell
// edge belongs to the cell up and to the right. Immutable after load apart
// from a nodata-warning counter.
class PopulationRaster {
 public:
  PopulationRaster(Point lower_left, double cell_size, int ncols, int nrows,
                   std::vector<double> values, double nodata = -9999.0,
                   bool values_per_m2 = false);

  // Movable (the warning counter transfers); copies are never needed.
  PopulationRaster(PopulationRaster&& other) noexcept
      : origin_(other.origin_),
        cell_(other.cell_),
        ncols_(other.ncols_),
        nrows_(other.nrows_),
        nodata_(other.nodata_),
        per_m2_(other.per_m2_),
        values_(std::move(other.values_)),
        nodata_hits_(other.nodata_hits_.load()) {}
  PopulationRaster& operator=(PopulationRaster&& other) noexcept {
    origin_ = other.origin_;
    cell_ = other.cell_;
    ncols_ = other.ncols_;
    nrows_ = other.nrows_;
    nodata_ = other.nodata_;
    per_m2_ = other.per_m2_;
    values_ = std::move(other.values_);
    nodata_hits_.store(other.nodata_hits_.load());
    return *this;
  }

  const Point& origin() const { return origin_; }
  double cell_size() const { return cell_; }
  int ncols() const { return ncols_; }
  int nrows() const { return nrows_; }
  double nodata() const { return nodata_; }
  bool values_per_m2() const { return per_m2_; }
  const std::vector<double>& values() const { return values_; }

  // row 0 = top row, matching file layout.
  double at_rc(int row, int col) const { return values_[static_cast<std::size_t>(row) * ncols_ + col]; }

  Bbox extent() const {
    return {origin_.x, origin_.y, origin_.x + cell_ * ncols_, origin_.y + cell_ * nrows_};
  }

  Point cell_center(int row, int col) const {
    return {origin_.x + (col + 0.5) * cell_,
            origin_.y + (nrows_ - 1 - row + 0.5) * cell_};
  }

  // Density at p (value of the containing cell). Nodata cells read as 0 and
  // bump a warning counter (first occurrence goes to stderr). Throws
  // OutOfBoundsError outside the half-open extent.
  double sample(const Point& p) const;

  // Sum of cell values over cells whose center falls in the region, times
  // cell area when values are per-m2 densities. Throws DegenerateOffsetError
  // when the result is not strictly positive.
  double region_mass(const Region& region) const;

  std::uint64_t nodata_warnings() const { return nodata_hits_.load(); }

  std::uint64_t content_hash() const;

 private:
  Point origin_;
  double cell_;
  int ncols_, nrows_;
  double nodata_;
  bool per_m2_;
  std::vector<double> values_;
  mutable std::atomic<std::uint64_t> nodata_hits_{0};
};

// ESRI ASCII grid I/O. Header keys ncols, nrows, xllcorner, yllcorner,
// cellsize and optional NODATA_value (case-insensitive on read), then nrows
// rows of ncols values, top row first. Scientific notation is accepted on
// read; integer values are written without a decimal point so integer grids
// round-trip bit-exactly.
PopulationRaster read_esri_ascii(const std::string& path, bool values_per_m2 = false);
PopulationRaster parse_esri_ascii(const std::string& text, bool values_per_m2 = false);
void write_esri_ascii(const PopulationRaster& raster, const std::string& path);
std::string format_esri_ascii(const PopulationRaster& raster);

}  // namespace sda

#endif  // SDA_RASTER_HPP

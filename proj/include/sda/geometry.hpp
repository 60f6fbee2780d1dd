#ifndef SDA_GEOMETRY_HPP
#define SDA_GEOMETRY_HPP

#include <string>
#include <vector>

#include "sda/common.hpp"

namespace sda {

using Ring = std::vector<Point>;

// A planar region: one simple outer ring plus optional holes, coordinates in
// metres on a projected plane. Immutable after construction; construction
// validates ring closure, simplicity of the outer ring, positive area and
// hole placement.
class Region {
 public:
  Region(std::string id, std::vector<Ring> rings);

  const std::string& id() const { return id_; }
  const std::vector<Ring>& rings() const { return rings_; }
  const Ring& outer() const { return rings_.front(); }
  const Bbox& bbox() const { return bbox_; }
  double area() const { return area_; }

  // Even-odd containment; points on any ring boundary count as inside.
  bool contains(const Point& p) const;

  // Inside the outer ring and strictly interior to no hole, excluding all
  // ring boundaries. Used by the partition overlap check.
  bool strictly_contains(const Point& p) const;

 private:
  std::string id_;
  std::vector<Ring> rings_;
  Bbox bbox_;
  double area_ = 0.0;
};

// Signed shoelace area (positive for counter-clockwise rings).
double ring_area_signed(const Ring& ring);

// Shoelace area of the outer ring minus hole areas; throws on degenerate
// input or non-positive result.
double area(const Region& region);

inline bool contains(const Region& region, const Point& p) { return region.contains(p); }

struct PartitionOptions {
  // Sampled-point interior-overlap check between bbox-overlapping regions.
  bool check_disjoint = true;
  int disjoint_grid = 8;  // probe lattice per overlapping bbox pair
};

class Partition {
 public:
  Partition(std::vector<Region> regions, PartitionOptions opts = {});

  const std::vector<Region>& regions() const { return regions_; }
  const Region& region(std::size_t i) const { return regions_[i]; }
  std::size_t size() const { return regions_.size(); }
  const Bbox& study_area_bbox() const { return bbox_; }

  // Index of the region with the given id; throws if absent.
  std::size_t index_of(const std::string& id) const;

  // First-listed region containing p, or -1. Ties on shared boundaries go to
  // the first region in file order.
  int find_region(const Point& p) const;

  // Bytes-stable hash of ids and coordinates; keys the covariance cache file.
  std::uint64_t content_hash() const;

 private:
  std::vector<Region> regions_;
  Bbox bbox_;
};

// Parses a GeoJSON FeatureCollection (RFC 7946 layout) of Polygon or
// single-part MultiPolygon features. Region ids come from the feature
// property `id`. Coordinates are taken as already projected to metres.
Partition load_partition(const std::string& geojson_text, PartitionOptions opts = {});
Partition load_partition_file(const std::string& path, PartitionOptions opts = {});

}  // namespace sda

#endif  // SDA_GEOMETRY_HPP

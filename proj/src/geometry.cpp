#include "sda/geometry.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace sda {

namespace {

// Drops a repeated closing vertex (GeoJSON rings are explicitly closed) and
// checks the ring still has at least 3 vertices.
Ring normalize_ring(Ring ring, const std::string& where) {
  if (ring.size() >= 2 && ring.front().x == ring.back().x && ring.front().y == ring.back().y) {
    ring.pop_back();
  }
  if (ring.size() < 3) {
    throw InvalidGeometryError("degenerate ring (< 3 vertices) in " + where);
  }
  return ring;
}

int orient(const Point& a, const Point& b, const Point& c) {
  const double v = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
  return v > 0 ? 1 : (v < 0 ? -1 : 0);
}

bool on_segment_collinear(const Point& a, const Point& b, const Point& p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
         std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

bool segments_intersect(const Point& p1, const Point& p2, const Point& q1, const Point& q2) {
  const int o1 = orient(p1, p2, q1);
  const int o2 = orient(p1, p2, q2);
  const int o3 = orient(q1, q2, p1);
  const int o4 = orient(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment_collinear(p1, p2, q1)) return true;
  if (o2 == 0 && on_segment_collinear(p1, p2, q2)) return true;
  if (o3 == 0 && on_segment_collinear(q1, q2, p1)) return true;
  if (o4 == 0 && on_segment_collinear(q1, q2, p2)) return true;
  return false;
}

// O(V^2) simplicity test: no two non-adjacent edges may intersect.
bool ring_is_simple(const Ring& r) {
  const std::size_t n = r.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a1 = r[i];
    const Point& a2 = r[(i + 1) % n];
    for (std::size_t j = i + 1; j < n; ++j) {
      if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
      if (segments_intersect(a1, a2, r[j], r[(j + 1) % n])) return false;
    }
  }
  return true;
}

bool point_on_ring(const Ring& r, const Point& p) {
  const std::size_t n = r.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = r[i];
    const Point& b = r[(i + 1) % n];
    if (orient(a, b, p) == 0 && on_segment_collinear(a, b, p)) return true;
  }
  return false;
}

// Even-odd crossing count with the half-open edge rule; boundary handled
// separately by point_on_ring.
bool point_in_ring_evenodd(const Ring& r, const Point& p) {
  const std::size_t n = r.size();
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point& a = r[i];
    const Point& b = r[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double xcross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
      if (p.x < xcross) inside = !inside;
    }
  }
  return inside;
}

Bbox ring_bbox(const Ring& r) {
  Bbox b{r[0].x, r[0].y, r[0].x, r[0].y};
  for (const Point& p : r) b.expand(p);
  return b;
}

}  // namespace

double ring_area_signed(const Ring& ring) {
  if (ring.size() < 3) {
    throw InvalidGeometryError("degenerate ring (< 3 vertices)");
  }
  double s = 0.0;
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    s += (ring[j].x * ring[i].y - ring[i].x * ring[j].y);
  }
  return 0.5 * s;
}

Region::Region(std::string id, std::vector<Ring> rings) : id_(std::move(id)) {
  if (rings.empty()) {
    throw InvalidGeometryError("region '" + id_ + "' has no rings");
  }
  rings_.reserve(rings.size());
  for (std::size_t k = 0; k < rings.size(); ++k) {
    rings_.push_back(normalize_ring(std::move(rings[k]),
                                    "region '" + id_ + "' ring " + std::to_string(k)));
  }
  if (!ring_is_simple(rings_[0])) {
    throw InvalidGeometryError("region '" + id_ + "' outer ring self-intersects");
  }
  double a = std::abs(ring_area_signed(rings_[0]));
  for (std::size_t k = 1; k < rings_.size(); ++k) {
    for (const Point& p : rings_[k]) {
      if (!point_in_ring_evenodd(rings_[0], p) && !point_on_ring(rings_[0], p)) {
        throw InvalidGeometryError("region '" + id_ + "' hole " + std::to_string(k) +
                                   " lies outside the outer ring");
      }
    }
    a -= std::abs(ring_area_signed(rings_[k]));
  }
  if (!(a > 0.0)) {
    throw InvalidGeometryError("region '" + id_ + "' has non-positive area");
  }
  area_ = a;
  bbox_ = ring_bbox(rings_[0]);
}

bool Region::contains(const Point& p) const {
  if (!bbox_.contains(p)) return false;
  if (point_on_ring(rings_[0], p)) return true;
  if (!point_in_ring_evenodd(rings_[0], p)) return false;
  for (std::size_t k = 1; k < rings_.size(); ++k) {
    if (point_on_ring(rings_[k], p)) return true;  // hole boundary counts as inside
    if (point_in_ring_evenodd(rings_[k], p)) return false;
  }
  return true;
}

bool Region::strictly_contains(const Point& p) const {
  if (!bbox_.contains(p)) return false;
  if (point_on_ring(rings_[0], p)) return false;
  if (!point_in_ring_evenodd(rings_[0], p)) return false;
  for (std::size_t k = 1; k < rings_.size(); ++k) {
    if (point_on_ring(rings_[k], p)) return false;
    if (point_in_ring_evenodd(rings_[k], p)) return false;
  }
  return true;
}

double area(const Region& region) { return region.area(); }

Partition::Partition(std::vector<Region> regions, PartitionOptions opts)
    : regions_(std::move(regions)) {
  if (regions_.empty()) {
    throw InvalidGeometryError("partition has no regions");
  }
  std::unordered_set<std::string> ids;
  for (const Region& r : regions_) {
    if (!ids.insert(r.id()).second) {
      throw InvalidGeometryError("duplicate region id '" + r.id() + "'");
    }
  }
  bbox_ = regions_[0].bbox();
  for (const Region& r : regions_) {
    bbox_.expand({r.bbox().xmin, r.bbox().ymin});
    bbox_.expand({r.bbox().xmax, r.bbox().ymax});
  }
  if (opts.check_disjoint) {
    const int g = std::max(2, opts.disjoint_grid);
    for (std::size_t i = 0; i < regions_.size(); ++i) {
      for (std::size_t j = i + 1; j < regions_.size(); ++j) {
        const Bbox& a = regions_[i].bbox();
        const Bbox& b = regions_[j].bbox();
        if (!a.overlaps(b)) continue;
        Bbox ov{std::max(a.xmin, b.xmin), std::max(a.ymin, b.ymin),
                std::min(a.xmax, b.xmax), std::min(a.ymax, b.ymax)};
        for (int r = 0; r < g; ++r) {
          for (int c = 0; c < g; ++c) {
            Point p{ov.xmin + (c + 0.5) * ov.width() / g,
                    ov.ymin + (r + 0.5) * ov.height() / g};
            if (regions_[i].strictly_contains(p) && regions_[j].strictly_contains(p)) {
              throw InvalidGeometryError("regions '" + regions_[i].id() + "' and '" +
                                         regions_[j].id() + "' share interior points");
            }
          }
        }
      }
    }
  }
}

std::size_t Partition::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < regions_.size(); ++i) {
    if (regions_[i].id() == id) return i;
  }
  throw InvalidGeometryError("no region with id '" + id + "'");
}

int Partition::find_region(const Point& p) const {
  for (std::size_t i = 0; i < regions_.size(); ++i) {
    if (regions_[i].contains(p)) return static_cast<int>(i);
  }
  return -1;
}

std::uint64_t Partition::content_hash() const {
  std::uint64_t h = fnv1a("partition");
  for (const Region& r : regions_) {
    h = fnv1a(r.id(), h);
    for (const Ring& ring : r.rings()) {
      for (const Point& p : ring) {
        h = fnv1a(&p.x, sizeof(double), h);
        h = fnv1a(&p.y, sizeof(double), h);
      }
    }
  }
  return h;
}

namespace {

Ring parse_ring(const nlohmann::json& coords, const std::string& where) {
  if (!coords.is_array() || coords.size() < 2) {
    throw ParseError("geometry", "bad ring in " + where);
  }
  Ring ring;
  ring.reserve(coords.size());
  for (const auto& c : coords) {
    if (!c.is_array() || c.size() < 2) {
      throw ParseError("geometry", "bad coordinate in " + where);
    }
    ring.push_back({c[0].get<double>(), c[1].get<double>()});
  }
  if (ring.front().x != ring.back().x || ring.front().y != ring.back().y) {
    throw ParseError("geometry", "unclosed ring in " + where);
  }
  return ring;
}

std::vector<Ring> parse_polygon_rings(const nlohmann::json& coords, const std::string& where) {
  std::vector<Ring> rings;
  for (const auto& rc : coords) {
    rings.push_back(parse_ring(rc, where));
  }
  if (rings.empty()) throw ParseError("geometry", "empty polygon in " + where);
  return rings;
}

}  // namespace

Partition load_partition(const std::string& geojson_text, PartitionOptions opts) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(geojson_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("geometry", std::string("invalid GeoJSON: ") + e.what());
  }
  if (doc.value("type", "") != "FeatureCollection" || !doc.contains("features")) {
    throw ParseError("geometry", "expected a GeoJSON FeatureCollection");
  }
  std::vector<Region> regions;
  std::size_t fi = 0;
  for (const auto& feat : doc["features"]) {
    const std::string where = "feature " + std::to_string(fi);
    std::string id;
    if (feat.contains("properties") && feat["properties"].contains("id")) {
      const auto& idv = feat["properties"]["id"];
      id = idv.is_string() ? idv.get<std::string>() : idv.dump();
    } else {
      throw ParseError("geometry", where + " is missing the 'id' property");
    }
    if (!feat.contains("geometry") || feat["geometry"].is_null()) {
      throw ParseError("geometry", where + " ('" + id + "') has no geometry");
    }
    const auto& geom = feat["geometry"];
    const std::string gtype = geom.value("type", "");
    std::vector<Ring> rings;
    if (gtype == "Polygon") {
      rings = parse_polygon_rings(geom["coordinates"], where + " ('" + id + "')");
    } else if (gtype == "MultiPolygon") {
      const auto& parts = geom["coordinates"];
      if (parts.size() != 1) {
        throw ParseError("geometry", where + " ('" + id +
                                         "'): multi-part MultiPolygon regions are not supported");
      }
      rings = parse_polygon_rings(parts[0], where + " ('" + id + "')");
    } else {
      throw ParseError("geometry", where + " ('" + id + "') has unsupported geometry type '" +
                                       gtype + "'");
    }
    try {
      regions.emplace_back(id, std::move(rings));
    } catch (const InvalidGeometryError& e) {
      throw ParseError("geometry", where + ": " + e.what());
    }
    ++fi;
  }
  return Partition(std::move(regions), opts);
}

Partition load_partition_file(const std::string& path, PartitionOptions opts) {
  std::ifstream in(path);
  if (!in) throw ParseError("geometry", "cannot open partition file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_partition(ss.str(), opts);
}

}  // namespace sda

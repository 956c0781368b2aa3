#ifndef CATLEP_CONTOURS_HPP
#define CATLEP_CONTOURS_HPP

// Zero-level contour extraction on a rectilinear grid (marching squares) and
// polyline intersection.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "catlep/error.hpp"

namespace catlep {

struct Point2 {
  double x{0.0};
  double y{0.0};
};

struct Polyline {
  std::vector<Point2> points;
  bool closed{false};
};

/// Scalar field sampled on nodes (xs[i], ys[j]); value(i, j) = values[j * nx + i].
struct GridField {
  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<double> values;

  double at(std::size_t i, std::size_t j) const { return values[j * xs.size() + i]; }
};

namespace detail {

// Edge ids: horizontal edge from node (i, j) to (i+1, j) is 2 * (j * nx + i);
// vertical edge from (i, j) to (i, j+1) is 2 * (j * nx + i) + 1.
struct EdgeSegment {
  std::size_t a;
  std::size_t b;
};

inline bool positive(double v) { return v >= 0.0; }

}  // namespace detail

/// Marching squares on the zero level. Saddle cells are disambiguated by the
/// sign of the bilinear value at the cell centre. Polylines are ordered; open
/// ones end on the grid boundary.
inline std::vector<Polyline> marching_squares(const GridField& field) {
  const std::size_t nx = field.xs.size();
  const std::size_t ny = field.ys.size();
  if (nx < 2 || ny < 2 || field.values.size() != nx * ny) {
    throw Error(Errc::invalid_argument, "grid field needs at least 2x2 nodes and matching values");
  }

  auto h_edge = [nx](std::size_t i, std::size_t j) { return 2 * (j * nx + i); };
  auto v_edge = [nx](std::size_t i, std::size_t j) { return 2 * (j * nx + i) + 1; };

  std::unordered_map<std::size_t, Point2> crossing;
  auto crossing_point = [&](std::size_t id) -> Point2 {
    auto it = crossing.find(id);
    if (it != crossing.end()) return it->second;
    const std::size_t node = id / 2;
    const std::size_t i = node % nx;
    const std::size_t j = node / nx;
    const bool horizontal = (id % 2) == 0;
    const double v0 = field.at(i, j);
    const double v1 = horizontal ? field.at(i + 1, j) : field.at(i, j + 1);
    const double t = (v0 == v1) ? 0.5 : v0 / (v0 - v1);
    Point2 p;
    if (horizontal) {
      p.x = field.xs[i] + t * (field.xs[i + 1] - field.xs[i]);
      p.y = field.ys[j];
    } else {
      p.x = field.xs[i];
      p.y = field.ys[j] + t * (field.ys[j + 1] - field.ys[j]);
    }
    crossing.emplace(id, p);
    return p;
  };

  std::vector<detail::EdgeSegment> segments;
  for (std::size_t j = 0; j + 1 < ny; ++j) {
    for (std::size_t i = 0; i + 1 < nx; ++i) {
      const double v00 = field.at(i, j);
      const double v10 = field.at(i + 1, j);
      const double v11 = field.at(i + 1, j + 1);
      const double v01 = field.at(i, j + 1);
      const bool s00 = detail::positive(v00);
      const bool s10 = detail::positive(v10);
      const bool s11 = detail::positive(v11);
      const bool s01 = detail::positive(v01);

      const std::size_t bottom = h_edge(i, j);
      const std::size_t top = h_edge(i, j + 1);
      const std::size_t left = v_edge(i, j);
      const std::size_t right = v_edge(i + 1, j);

      std::vector<std::size_t> crossed;
      if (s00 != s10) crossed.push_back(bottom);
      if (s10 != s11) crossed.push_back(right);
      if (s01 != s11) crossed.push_back(top);
      if (s00 != s01) crossed.push_back(left);

      if (crossed.size() == 2) {
        segments.push_back({crossed[0], crossed[1]});
      } else if (crossed.size() == 4) {
        const bool centre = detail::positive(0.25 * (v00 + v10 + v11 + v01));
        if (centre == s00) {
          segments.push_back({bottom, right});
          segments.push_back({top, left});
        } else {
          segments.push_back({left, bottom});
          segments.push_back({right, top});
        }
      }
    }
  }

  // Chain segments sharing an edge crossing.
  std::unordered_map<std::size_t, std::vector<std::size_t>> incident;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    incident[segments[s].a].push_back(s);
    incident[segments[s].b].push_back(s);
  }
  std::vector<bool> used(segments.size(), false);
  std::vector<Polyline> out;

  auto walk = [&](std::size_t start_edge, std::size_t first_seg) {
    Polyline line;
    std::size_t edge = start_edge;
    std::size_t seg = first_seg;
    line.points.push_back(crossing_point(edge));
    while (true) {
      used[seg] = true;
      const std::size_t next = segments[seg].a == edge ? segments[seg].b : segments[seg].a;
      line.points.push_back(crossing_point(next));
      edge = next;
      std::optional<std::size_t> cont;
      for (std::size_t cand : incident[edge]) {
        if (!used[cand]) {
          cont = cand;
          break;
        }
      }
      if (!cont) break;
      seg = *cont;
    }
    line.closed = line.points.size() > 2 && edge == start_edge;
    if (line.closed) line.points.pop_back();
    out.push_back(std::move(line));
  };

  // Open polylines start at crossings with a single incident segment (grid boundary).
  std::vector<std::size_t> ends;
  for (const auto& [edge, segs] : incident) {
    if (segs.size() == 1) ends.push_back(edge);
  }
  std::sort(ends.begin(), ends.end());
  for (std::size_t edge : ends) {
    const std::size_t seg = incident[edge].front();
    if (!used[seg]) walk(edge, seg);
  }
  for (std::size_t s = 0; s < segments.size(); ++s) {
    if (!used[s]) walk(segments[s].a, s);
  }
  return out;
}

namespace detail {

inline std::optional<Point2> segment_intersection(Point2 p, Point2 p2, Point2 q, Point2 q2) {
  const double rx = p2.x - p.x, ry = p2.y - p.y;
  const double sx = q2.x - q.x, sy = q2.y - q.y;
  const double denom = rx * sy - ry * sx;
  if (denom == 0.0) return std::nullopt;
  const double qpx = q.x - p.x, qpy = q.y - p.y;
  const double t = (qpx * sy - qpy * sx) / denom;
  const double u = (qpx * ry - qpy * rx) / denom;
  if (t < 0.0 || t > 1.0 || u < 0.0 || u > 1.0) return std::nullopt;
  return Point2{p.x + t * rx, p.y + t * ry};
}

inline std::vector<std::pair<Point2, Point2>> segments_of(const Polyline& line) {
  std::vector<std::pair<Point2, Point2>> segs;
  for (std::size_t k = 0; k + 1 < line.points.size(); ++k) {
    segs.emplace_back(line.points[k], line.points[k + 1]);
  }
  if (line.closed && line.points.size() > 2) segs.emplace_back(line.points.back(), line.points.front());
  return segs;
}

}  // namespace detail

/// All crossings between two families of polylines. Crossings closer than
/// merge_distance are reported once.
inline std::vector<Point2> intersections(std::span<const Polyline> a, std::span<const Polyline> b,
                                         double merge_distance = 0.0) {
  std::vector<Point2> found;
  for (const auto& la : a) {
    const auto sa = detail::segments_of(la);
    for (const auto& lb : b) {
      const auto sb = detail::segments_of(lb);
      for (const auto& [p, p2] : sa) {
        const double minx = std::min(p.x, p2.x), maxx = std::max(p.x, p2.x);
        const double miny = std::min(p.y, p2.y), maxy = std::max(p.y, p2.y);
        for (const auto& [q, q2] : sb) {
          if (std::max(q.x, q2.x) < minx || std::min(q.x, q2.x) > maxx ||
              std::max(q.y, q2.y) < miny || std::min(q.y, q2.y) > maxy) {
            continue;
          }
          if (auto hit = detail::segment_intersection(p, p2, q, q2)) {
            const bool duplicate = std::any_of(found.begin(), found.end(), [&](const Point2& f) {
              return std::hypot(f.x - hit->x, f.y - hit->y) <= merge_distance;
            });
            if (!duplicate) found.push_back(*hit);
          }
        }
      }
    }
  }
  return found;
}

}  // namespace catlep

#endif  // CATLEP_CONTOURS_HPP

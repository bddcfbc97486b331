#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "morphforge/geometry.hpp"

namespace morphforge {

/// Triangles index into `vertices`; each is stored counter-clockwise
/// (positive orient2d).
struct Triangulation {
  std::vector<Point2> vertices;
  std::vector<std::array<std::size_t, 3>> triangles;
};

namespace detail {

// > 0 when d is strictly inside the circumcircle of counter-clockwise (a, b, c).
inline double incircle(Point2 a, Point2 b, Point2 c, Point2 d) {
  const double adx = a.x - d.x, ady = a.y - d.y;
  const double bdx = b.x - d.x, bdy = b.y - d.y;
  const double cdx = c.x - d.x, cdy = c.y - d.y;
  const double ad = adx * adx + ady * ady;
  const double bd = bdx * bdx + bdy * bdy;
  const double cd = cdx * cdx + cdy * cdy;
  return adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
}

inline double incircle_scale(Point2 a, Point2 b, Point2 c, Point2 d) {
  const double adx = std::abs(a.x - d.x), ady = std::abs(a.y - d.y);
  const double bdx = std::abs(b.x - d.x), bdy = std::abs(b.y - d.y);
  const double cdx = std::abs(c.x - d.x), cdy = std::abs(c.y - d.y);
  const double ad = adx * adx + ady * ady, bd = bdx * bdx + bdy * bdy, cd = cdx * cdx + cdy * cdy;
  return adx * (bdy * cd + bd * cdy) + ady * (bdx * cd + bd * cdx) + ad * (bdx * cdy + bdy * cdx);
}

inline std::array<std::size_t, 3> ccw(std::span<const Point2> p, std::size_t a, std::size_t b, std::size_t c) {
  if (orient2d(p[a], p[b], p[c]) < 0.0) std::swap(b, c);
  return {a, b, c};
}

}  // namespace detail

/// Delaunay triangulation of a planar point set. The initial triangulation is
/// built by a lexicographic sweep that grows the convex hull, then Lawson edge
/// flips restore the empty-circumcircle property. Exact duplicate points are
/// left unreferenced.
inline Triangulation delaunay(std::span<const Point2> points) {
  if (points.size() < 3) throw std::invalid_argument("delaunay: need at least 3 points");
  for (const auto& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw std::invalid_argument("delaunay: non-finite point");
  }
  Triangulation out;
  out.vertices.assign(points.begin(), points.end());
  const std::span<const Point2> P(out.vertices);

  std::vector<std::size_t> order(P.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return P[i].x < P[j].x || (P[i].x == P[j].x && P[i].y < P[j].y);
  });
  order.erase(std::unique(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return P[i] == P[j]; }),
              order.end());

  // First point off the line through the two smallest.
  std::size_t k = 2;
  while (k < order.size() && orient2d(P[order[0]], P[order[1]], P[order[k]]) == 0.0) ++k;
  if (order.size() < 3 || k == order.size()) throw std::invalid_argument("delaunay: points are collinear");

  auto& tris = out.triangles;
  std::vector<std::size_t> hull;
  {
    const std::size_t q = order[k];
    const bool left = orient2d(P[order[0]], P[order[1]], P[q]) > 0.0;
    for (std::size_t i = 0; i + 1 < k; ++i) tris.push_back(detail::ccw(P, order[i], order[i + 1], q));
    if (left) {
      for (std::size_t i = 0; i < k; ++i) hull.push_back(order[i]);
      hull.push_back(q);
    } else {
      hull.push_back(order[0]);
      hull.push_back(q);
      for (std::size_t i = k - 1; i >= 1; --i) hull.push_back(order[i]);
    }
  }

  for (std::size_t j = k + 1; j < order.size(); ++j) {
    const std::size_t p = order[j];
    const std::size_t h = hull.size();
    std::vector<char> visible(h, 0);
    bool any = false;
    for (std::size_t i = 0; i < h; ++i) {
      if (orient2d(P[hull[i]], P[hull[(i + 1) % h]], P[p]) < 0.0) {
        visible[i] = 1;
        any = true;
        tris.push_back(detail::ccw(P, hull[(i + 1) % h], hull[i], p));
      }
    }
    if (!any) throw std::logic_error("delaunay: sweep point inside hull");
    std::size_t s = 0;
    while (!(visible[s] && !visible[(s + h - 1) % h])) ++s;
    std::size_t e = s;
    while (visible[(e + 1) % h]) e = (e + 1) % h;
    std::vector<std::size_t> next;
    for (std::size_t i = (e + 1) % h;; i = (i + 1) % h) {
      next.push_back(hull[i]);
      if (i == s) break;
    }
    next.push_back(p);
    hull = std::move(next);
  }

  // Lawson flips
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> edge_owner;
  auto link = [&](std::size_t t) {
    const auto& v = tris[t];
    for (int e = 0; e < 3; ++e) edge_owner[{v[e], v[(e + 1) % 3]}] = t;
  };
  auto unlink = [&](std::size_t t) {
    const auto& v = tris[t];
    for (int e = 0; e < 3; ++e) edge_owner.erase({v[e], v[(e + 1) % 3]});
  };
  for (std::size_t t = 0; t < tris.size(); ++t) link(t);

  bool changed = true;
  std::size_t guard = 0;
  const std::size_t max_passes = 4 * P.size() * P.size() + 16;
  while (changed) {
    if (++guard > max_passes) throw std::logic_error("delaunay: flip loop did not converge");
    changed = false;
    for (std::size_t t = 0; t < tris.size(); ++t) {
      for (int e = 0; e < 3; ++e) {
        const std::size_t a = tris[t][static_cast<std::size_t>(e)];
        const std::size_t b = tris[t][static_cast<std::size_t>((e + 1) % 3)];
        const std::size_t c = tris[t][static_cast<std::size_t>((e + 2) % 3)];
        const auto it = edge_owner.find({b, a});
        if (it == edge_owner.end()) continue;
        const std::size_t u = it->second;
        std::size_t d = tris[u][0];
        for (std::size_t x : tris[u]) {
          if (x != a && x != b) d = x;
        }
        const double det = detail::incircle(P[a], P[b], P[c], P[d]);
        if (det <= 1e-12 * detail::incircle_scale(P[a], P[b], P[c], P[d])) continue;
        unlink(t);
        unlink(u);
        tris[t] = detail::ccw(P, c, a, d);
        tris[u] = detail::ccw(P, d, b, c);
        link(t);
        link(u);
        changed = true;
        break;
      }
    }
  }
  return out;
}

}  // namespace morphforge

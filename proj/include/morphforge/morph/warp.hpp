#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "morphforge/morph/delaunay.hpp"
#include "morphforge/raster.hpp"

namespace morphforge {

/// Bilinear sample with edge-clamp addressing.
inline double sample_bilinear(const Raster& img, double x, double y, int c) {
  const double cx = std::clamp(x, 0.0, static_cast<double>(img.width() - 1));
  const double cy = std::clamp(y, 0.0, static_cast<double>(img.height() - 1));
  const int x0 = static_cast<int>(std::floor(cx)), y0 = static_cast<int>(std::floor(cy));
  const int x1 = std::min(x0 + 1, img.width() - 1), y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = cx - x0, fy = cy - y0;
  const double top = (1.0 - fx) * img.at(x0, y0, c) + fx * img.at(x1, y0, c);
  const double bot = (1.0 - fx) * img.at(x0, y1, c) + fx * img.at(x1, y1, c);
  return (1.0 - fy) * top + fy * bot;
}

/// Per-triangle affine warp: every pixel centre inside a destination triangle
/// takes the bilinear sample at the matching barycentric position of its
/// source triangle. Pixels outside all destination triangles keep the source
/// value.
inline Raster piecewise_warp(const Raster& src, std::span<const Point2> src_pts, std::span<const Point2> dst_pts,
                             const Triangulation& tri) {
  if (src_pts.size() != dst_pts.size() || src_pts.size() != tri.vertices.size()) {
    throw std::invalid_argument("piecewise_warp: point lists and triangulation differ in size");
  }
  Raster out = src;
  std::vector<char> owned(static_cast<std::size_t>(src.width()) * src.height(), 0);
  constexpr double kInsideTol = 1e-9;

  for (std::size_t t = 0; t < tri.triangles.size(); ++t) {
    const auto& v = tri.triangles[t];
    const Point2 d0 = dst_pts[v[0]], d1 = dst_pts[v[1]], d2 = dst_pts[v[2]];
    const Point2 s0 = src_pts[v[0]], s1 = src_pts[v[1]], s2 = src_pts[v[2]];
    const double area = orient2d(d0, d1, d2);
    const double scale = std::max({distance(d0, d1), distance(d1, d2), distance(d2, d0), 1e-300});
    if (std::abs(area) <= 1e-12 * scale * scale) {
      throw std::invalid_argument("piecewise_warp: destination triangle " + std::to_string(t) + " is degenerate");
    }
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min({d0.x, d1.x, d2.x}))));
    const int x1 = std::min(src.width() - 1, static_cast<int>(std::ceil(std::max({d0.x, d1.x, d2.x}))));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min({d0.y, d1.y, d2.y}))));
    const int y1 = std::min(src.height() - 1, static_cast<int>(std::ceil(std::max({d0.y, d1.y, d2.y}))));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const std::size_t idx = static_cast<std::size_t>(y) * src.width() + x;
        if (owned[idx]) continue;
        const Point2 p{static_cast<double>(x), static_cast<double>(y)};
        const double l0 = orient2d(d1, d2, p) / area;
        const double l1 = orient2d(d2, d0, p) / area;
        const double l2 = orient2d(d0, d1, p) / area;
        if (l0 < -kInsideTol || l1 < -kInsideTol || l2 < -kInsideTol) continue;
        owned[idx] = 1;
        const double sx = l0 * s0.x + l1 * s1.x + l2 * s2.x;
        const double sy = l0 * s0.y + l1 * s1.y + l2 * s2.y;
        for (int c = 0; c < src.channels(); ++c) out.at(x, y, c) = to_byte(sample_bilinear(src, sx, sy, c));
      }
    }
  }
  return out;
}

}  // namespace morphforge

#pragma once

// Landmark-based morphing, splicing and de-morphing.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "morphforge/embedding.hpp"
#include "morphforge/geometry.hpp"
#include "morphforge/morph/delaunay.hpp"
#include "morphforge/morph/warp.hpp"
#include "morphforge/raster.hpp"

namespace morphforge {

enum class MorphAlgorithm { lma, external };

inline const char* to_string(MorphAlgorithm a) { return a == MorphAlgorithm::lma ? "lma" : "external"; }

inline MorphAlgorithm parse_morph_algorithm(const std::string& s) {
  if (s == "lma") return MorphAlgorithm::lma;
  if (s == "external") return MorphAlgorithm::external;
  throw std::invalid_argument("unknown morph algorithm '" + s + "'");
}

struct MorphRecord {
  std::string subject_a;
  std::string subject_b;
  MorphAlgorithm algorithm{MorphAlgorithm::lma};
  double alpha{0.5};
  std::string output;

  void validate() const {
    if (subject_a == subject_b) throw std::invalid_argument("morph record pairs a subject with itself");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("morph alpha must be in [0, 1]");
  }
};

/// Corners and edge midpoints, appended to landmark sets so the
/// triangulation spans the whole frame.
inline std::array<Point2, 8> border_anchors(int width, int height) {
  const double w = width - 1, h = height - 1;
  return {{{0, 0}, {w, 0}, {0, h}, {w, h}, {w / 2, 0}, {w / 2, h}, {0, h / 2}, {w, h / 2}}};
}

inline std::vector<Point2> with_anchors(const LandmarkSet& l, int width, int height) {
  auto pts = l.to_vector();
  for (const auto& a : border_anchors(width, height)) pts.push_back(a);
  return pts;
}

/// Averaged geometry (1 - alpha) * la + alpha * lb.
inline LandmarkSet morph_geometry(const LandmarkSet& la, const LandmarkSet& lb, double alpha) {
  return lerp(la, lb, alpha);
}

/// Warps both contributors onto the averaged landmark geometry (one shared
/// triangulation) and cross-dissolves them with weight alpha on `b`.
inline Raster morph_pair(const Raster& a, const LandmarkSet& la, const Raster& b, const LandmarkSet& lb,
                         double alpha = 0.5) {
  if (!a.same_shape(b)) throw std::invalid_argument("morph_pair: contributor images differ in shape");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("morph_pair: alpha must be in [0, 1]");
  const int w = a.width(), h = a.height();
  const auto target = with_anchors(morph_geometry(la, lb, alpha), w, h);
  const Triangulation tri = delaunay(target);
  const Raster wa = piecewise_warp(a, with_anchors(la, w, h), target, tri);
  const Raster wb = piecewise_warp(b, with_anchors(lb, w, h), target, tri);
  Raster out(w, h, a.channels());
  for (std::size_t i = 0; i < out.data().size(); ++i) {
    out.data()[i] = to_byte((1.0 - alpha) * wa.data()[i] + alpha * wb.data()[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splicing

/// Convex hull (Andrew's monotone chain), counter-clockwise, no collinear
/// points.
inline std::vector<Point2> convex_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(), [](Point2 a, Point2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && orient2d(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && orient2d(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

inline double polygon_area(const std::vector<Point2>& poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point2 p = poly[i], q = poly[(i + 1) % poly.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * a;
}

namespace detail {

inline double segment_distance(Point2 p, Point2 a, Point2 b) {
  const Point2 ab = b - a, ap = p - a;
  const double len2 = ab.x * ab.x + ab.y * ab.y;
  const double t = len2 > 0.0 ? std::clamp((ap.x * ab.x + ap.y * ab.y) / len2, 0.0, 1.0) : 0.0;
  return distance(p, a + t * ab);
}

}  // namespace detail

/// Face-region weight of a pixel: 1 inside the landmark hull, falling
/// linearly to 0 at `feather_px` outside it.
inline std::vector<double> face_mask(int width, int height, const LandmarkSet& landmarks, int feather_px) {
  std::vector<double> mask(static_cast<std::size_t>(width) * height, 0.0);
  const auto hull = convex_hull(landmarks.to_vector());
  if (hull.size() < 3 || polygon_area(hull) <= 0.0) return mask;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Point2 p{static_cast<double>(x), static_cast<double>(y)};
      bool inside = true;
      for (std::size_t i = 0; i < hull.size() && inside; ++i) {
        inside = orient2d(hull[i], hull[(i + 1) % hull.size()], p) >= 0.0;
      }
      double w = 0.0;
      if (inside) {
        w = 1.0;
      } else if (feather_px > 0) {
        double d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < hull.size(); ++i) {
          d = std::min(d, detail::segment_distance(p, hull[i], hull[(i + 1) % hull.size()]));
        }
        w = std::max(0.0, 1.0 - d / feather_px);
      }
      mask[static_cast<std::size_t>(y) * width + x] = w;
    }
  }
  return mask;
}

/// Pastes the face region of `morph` onto `background` with a feathered
/// convex-hull mask.
inline Raster splice_postprocess(const Raster& morph, const Raster& background, const LandmarkSet& landmarks,
                                 int feather_px = 0) {
  if (!morph.same_shape(background)) throw std::invalid_argument("splice_postprocess: images differ in shape");
  if (feather_px < 0) throw std::invalid_argument("splice_postprocess: feather must be non-negative");
  const auto mask = face_mask(morph.width(), morph.height(), landmarks, feather_px);
  Raster out = background;
  const int ch = morph.channels();
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const double w = mask[i];
    if (w == 0.0) continue;
    for (int c = 0; c < ch; ++c) {
      const std::size_t k = i * static_cast<std::size_t>(ch) + static_cast<std::size_t>(c);
      out.data()[k] = w == 1.0 ? morph.data()[k] : to_byte(w * morph.data()[k] + (1.0 - w) * background.data()[k]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// De-morphing

struct DemorphResult {
  Raster image;
  LandmarkSet landmarks;
};

/// Inverts a landmark morph using a trusted probe of one contributor:
/// geometry (ls - f * lp) / (1 - f), appearance (M' - f * P') / (1 - f) on the
/// warped images, clamped to 8 bits.
inline DemorphResult demorph(const Raster& suspect, const LandmarkSet& ls, const Raster& probe,
                             const LandmarkSet& lp, double factor = 0.5) {
  if (!(factor >= 0.0 && factor < 1.0)) throw std::invalid_argument("demorph: factor must be in [0, 1)");
  if (!suspect.same_shape(probe)) throw std::invalid_argument("demorph: suspect and probe differ in shape");
  const int w = suspect.width(), h = suspect.height();
  LandmarkSet target;
  for (std::size_t i = 0; i < kLandmarkCount; ++i) {
    target[i] = {(ls[i].x - factor * lp[i].x) / (1.0 - factor), (ls[i].y - factor * lp[i].y) / (1.0 - factor)};
  }
  const auto target_pts = with_anchors(target, w, h);
  const Triangulation tri = delaunay(target_pts);
  const Raster ws = piecewise_warp(suspect, with_anchors(ls, w, h), target_pts, tri);
  const Raster wp = piecewise_warp(probe, with_anchors(lp, w, h), target_pts, tri);
  Raster out(w, h, suspect.channels());
  for (std::size_t i = 0; i < out.data().size(); ++i) {
    out.data()[i] = to_byte((ws.data()[i] - factor * wp.data()[i]) / (1.0 - factor));
  }
  return {std::move(out), target};
}

enum class LmfdDecision { bona_fide, morph_attack };

struct LmfdResult {
  LmfdDecision decision{LmfdDecision::bona_fide};
  double distance{0.0};
};

/// Second stage of landmark de-morphing detection: the de-morphed image
/// should match the probe when the document is bona fide.
inline LmfdResult lmfd_verify(const Embedding& demorphed, const Embedding& probe, double threshold) {
  if (!(threshold > 0.0 && threshold < 2.0)) throw std::invalid_argument("lmfd_verify: threshold must be in (0, 2)");
  const double d = cosine_distance(demorphed, probe);
  return {d <= threshold ? LmfdDecision::bona_fide : LmfdDecision::morph_attack, d};
}

}  // namespace morphforge

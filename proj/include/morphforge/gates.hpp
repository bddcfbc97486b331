#pragma once

// Quality and identity gates for candidate base samples and mated samples.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "morphforge/embedding.hpp"
#include "morphforge/geometry.hpp"
#include "morphforge/raster.hpp"

namespace morphforge {

struct PoseEstimate {
  double yaw{0.0};
  double pitch{0.0};
  double roll{0.0};

  void validate() const {
    for (double a : {yaw, pitch, roll}) {
      if (!std::isfinite(a) || a < -180.0 || a > 180.0) {
        throw std::invalid_argument("pose angles must be finite and within [-180, 180]");
      }
    }
  }
};

struct GateConfig {
  double diversity_threshold = 0.45;
  double preservation_threshold = 0.45;
  double pose_limit_deg = 5.0;
  double min_eye_aspect_ratio = 0.2;
  double max_bridge_edge_density = 0.025;
  double canny_sigma = 1.4;
  double canny_low = 0.1;
  double canny_high = 0.2;
};

// ---------------------------------------------------------------------------
// Identity gates

struct DiversityResult {
  bool accepted{true};
  std::optional<std::size_t> nearest;  // index of the closest gallery entry
  double distance{0.0};                // distance to it; 0 when the gallery is empty
};

/// Rejects the candidate when any gallery entry is closer than `threshold`.
/// Thresholds in (0, 2] are accepted; 2 rejects everything but antipodes.
inline DiversityResult diversity_check(const Embedding& candidate, std::span<const Embedding> gallery,
                                       double threshold = 0.45) {
  if (!(threshold > 0.0 && threshold <= 2.0)) {
    throw std::invalid_argument("diversity threshold must be in (0, 2]");
  }
  DiversityResult r;
  for (std::size_t i = 0; i < gallery.size(); ++i) {
    const double d = cosine_distance(candidate, gallery[i]);
    if (!r.nearest || d < r.distance) {
      r.nearest = i;
      r.distance = d;
    }
  }
  r.accepted = !r.nearest || r.distance >= threshold;
  return r;
}

struct PreservationResult {
  bool accepted{false};
  double distance{0.0};
};

/// Accepts a mated sample whose distance to its base is at most `threshold`.
inline PreservationResult preservation_check(const Embedding& base, const Embedding& mated,
                                             double threshold = 0.45) {
  if (!(threshold > 0.0 && threshold < 2.0)) {
    throw std::invalid_argument("preservation threshold must be in (0, 2)");
  }
  const double d = cosine_distance(base, mated);
  return {d <= threshold, d};
}

// ---------------------------------------------------------------------------
// Pose

/// Closed box on yaw and pitch; roll is not checked.
inline bool pose_gate(const PoseEstimate& p, double limit_deg = 5.0) {
  if (!std::isfinite(p.yaw) || !std::isfinite(p.pitch)) {
    throw std::invalid_argument("pose angles must be finite");
  }
  return p.yaw >= -limit_deg && p.yaw <= limit_deg && p.pitch >= -limit_deg && p.pitch <= limit_deg;
}

// ---------------------------------------------------------------------------
// Eyes

enum class Eye { left, right };  // image left = points 37-42, image right = 43-48

/// (|p2-p6| + |p3-p5|) / (2 |p1-p4|) over the six contour points of one eye.
inline double eye_aspect_ratio(const LandmarkSet& l, Eye eye) {
  const std::size_t b = eye == Eye::left ? landmarks::kLeftEyeBegin : landmarks::kRightEyeBegin;
  const Point2 p1 = l[b], p2 = l[b + 1], p3 = l[b + 2], p4 = l[b + 3], p5 = l[b + 4], p6 = l[b + 5];
  const double width = distance(p1, p4);
  if (width == 0.0) throw std::invalid_argument("eye_aspect_ratio: degenerate landmarks");
  return (distance(p2, p6) + distance(p3, p5)) / (2.0 * width);
}

struct EyeCheck {
  bool open{false};
  double left{0.0};
  double right{0.0};
};

/// Both eyes must reach `min_ratio`.
inline EyeCheck closed_eye_check(const LandmarkSet& l, double min_ratio = 0.2) {
  EyeCheck c;
  c.left = eye_aspect_ratio(l, Eye::left);
  c.right = eye_aspect_ratio(l, Eye::right);
  c.open = c.left >= min_ratio && c.right >= min_ratio;
  return c;
}

// ---------------------------------------------------------------------------
// Canny

namespace detail {

inline std::vector<float> gaussian_kernel(double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<float> k(static_cast<std::size_t>(2 * r + 1));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    const double v = std::exp(-0.5 * i * i / (sigma * sigma));
    k[static_cast<std::size_t>(i + r)] = static_cast<float>(v);
    sum += v;
  }
  for (float& v : k) v = static_cast<float>(v / sum);
  return k;
}

inline FloatImage gaussian_blur(const FloatImage& in, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  FloatImage tmp(in.width, in.height), out(in.width, in.height);
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      float s = 0.0f;
      for (int i = -r; i <= r; ++i) s += k[static_cast<std::size_t>(i + r)] * in.at(std::clamp(x + i, 0, in.width - 1), y);
      tmp.at(x, y) = s;
    }
  }
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      float s = 0.0f;
      for (int i = -r; i <= r; ++i) s += k[static_cast<std::size_t>(i + r)] * tmp.at(x, std::clamp(y + i, 0, in.height - 1));
      out.at(x, y) = s;
    }
  }
  return out;
}

}  // namespace detail

/// Binary edge map (values 0/1) from the classic four-stage Canny detector on
/// [0, 1] intensities: Gaussian blur, Sobel gradients, non-maximum
/// suppression, double-threshold hysteresis with 8-connectivity.
inline Raster canny_edges(const Raster& image, double low = 0.1, double high = 0.2, double sigma = 1.4) {
  if (image.empty()) throw std::invalid_argument("canny_edges: empty image");
  if (!(low < high)) throw std::invalid_argument("canny_edges: low threshold must be below high");
  if (!(sigma > 0.0)) throw std::invalid_argument("canny_edges: sigma must be positive");

  const FloatImage g = detail::gaussian_blur(to_intensity(image), sigma);
  const int w = g.width, h = g.height;
  auto px = [&](int x, int y) { return g.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)); };

  FloatImage mag(w, h), gx(w, h), gy(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float dx = (px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1)) -
                       (px(x - 1, y - 1) + 2 * px(x - 1, y) + px(x - 1, y + 1));
      const float dy = (px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1)) -
                       (px(x - 1, y - 1) + 2 * px(x, y - 1) + px(x + 1, y - 1));
      gx.at(x, y) = dx;
      gy.at(x, y) = dy;
      mag.at(x, y) = std::hypot(dx, dy);
    }
  }
  auto m = [&](int x, int y) { return mag.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)); };

  // 0 = suppressed, 1 = weak, 2 = strong
  std::vector<std::uint8_t> cls(static_cast<std::size_t>(w) * h, 0);
  constexpr double kPi = 3.14159265358979323846;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float v = mag.at(x, y);
      if (v < low) continue;
      double angle = std::atan2(gy.at(x, y), gx.at(x, y)) * 180.0 / kPi;
      if (angle < 0) angle += 180.0;
      int dx, dy;
      if (angle < 22.5 || angle >= 157.5) {
        dx = 1; dy = 0;
      } else if (angle < 67.5) {
        dx = 1; dy = 1;
      } else if (angle < 112.5) {
        dx = 0; dy = 1;
      } else {
        dx = -1; dy = 1;
      }
      if (v >= m(x + dx, y + dy) && v >= m(x - dx, y - dy)) {
        cls[static_cast<std::size_t>(y) * w + x] = v >= high ? 2 : 1;
      }
    }
  }

  Raster out(w, h, 1, 0);
  std::deque<std::pair<int, int>> queue;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (cls[static_cast<std::size_t>(y) * w + x] == 2) {
        out.at(x, y) = 1;
        queue.emplace_back(x, y);
      }
    }
  }
  while (!queue.empty()) {
    const auto [x, y] = queue.front();
    queue.pop_front();
    for (int oy = -1; oy <= 1; ++oy) {
      for (int ox = -1; ox <= 1; ++ox) {
        const int nx = x + ox, ny = y + oy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        if (cls[static_cast<std::size_t>(ny) * w + nx] == 1 && out.at(nx, ny) == 0) {
          out.at(nx, ny) = 1;
          queue.emplace_back(nx, ny);
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Glasses

struct PixelBox {
  int x0{0}, y0{0}, x1{0}, y1{0};  // inclusive
  long area() const { return static_cast<long>(x1 - x0 + 1) * (y1 - y0 + 1); }
};

/// Bounding box of the nose-bridge points (28-31), padded by 20% of the
/// inter-ocular distance.
inline PixelBox nose_bridge_region(const LandmarkSet& l) {
  double minx = l[landmarks::kNoseBridgeBegin].x, maxx = minx;
  double miny = l[landmarks::kNoseBridgeBegin].y, maxy = miny;
  for (std::size_t i = landmarks::kNoseBridgeBegin; i < landmarks::kNoseBridgeEnd; ++i) {
    minx = std::min(minx, l[i].x);
    maxx = std::max(maxx, l[i].x);
    miny = std::min(miny, l[i].y);
    maxy = std::max(maxy, l[i].y);
  }
  const double pad = 0.2 * l.inter_ocular_distance();
  return {static_cast<int>(std::floor(minx - pad)), static_cast<int>(std::floor(miny - pad)),
          static_cast<int>(std::ceil(maxx + pad)), static_cast<int>(std::ceil(maxy + pad))};
}

struct GlassesCheck {
  bool flagged{false};
  double density{0.0};
  PixelBox region;
};

inline GlassesCheck glasses_check(const Raster& image, const LandmarkSet& l, double density_threshold = 0.025,
                                  double canny_low = 0.1, double canny_high = 0.2, double canny_sigma = 1.4) {
  GlassesCheck c;
  c.region = nose_bridge_region(l);
  const auto& b = c.region;
  if (b.x0 < 0 || b.y0 < 0 || b.x1 >= image.width() || b.y1 >= image.height()) {
    throw std::out_of_range("glasses_check: nose-bridge region lies outside the image");
  }
  const Raster edges = canny_edges(image, canny_low, canny_high, canny_sigma);
  long count = 0;
  for (int y = b.y0; y <= b.y1; ++y)
    for (int x = b.x0; x <= b.x1; ++x) count += edges.at(x, y);
  c.density = static_cast<double>(count) / static_cast<double>(b.area());
  c.flagged = c.density > density_threshold;
  return c;
}

}  // namespace morphforge

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace morphforge {

struct Point2 {
  double x{0.0};
  double y{0.0};

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }
  friend bool operator==(Point2 a, Point2 b) = default;
};

inline double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

// Twice the signed area of (a, b, c); positive when counter-clockwise in a y-up frame.
inline double orient2d(Point2 a, Point2 b, Point2 c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

inline constexpr std::size_t kLandmarkCount = 68;

// 0-based index ranges into the 68-point annotation.
namespace landmarks {
inline constexpr std::size_t kJawBegin = 0, kJawEnd = 17;
inline constexpr std::size_t kBrowBegin = 17, kBrowEnd = 27;
inline constexpr std::size_t kNoseBridgeBegin = 27, kNoseBridgeEnd = 31;
inline constexpr std::size_t kNoseBaseBegin = 31, kNoseBaseEnd = 36;
inline constexpr std::size_t kLeftEyeBegin = 36, kLeftEyeEnd = 42;
inline constexpr std::size_t kRightEyeBegin = 42, kRightEyeEnd = 48;
inline constexpr std::size_t kMouthBegin = 48, kMouthEnd = 68;
}  // namespace landmarks

/// The 68-point facial landmark layout. Points are pixel coordinates.
class LandmarkSet {
 public:
  LandmarkSet() = default;
  explicit LandmarkSet(const std::array<Point2, kLandmarkCount>& points) : points_(points) { check(); }
  explicit LandmarkSet(std::span<const Point2> points) {
    if (points.size() != kLandmarkCount) {
      throw std::invalid_argument("landmark set needs exactly 68 points, got " +
                                  std::to_string(points.size()));
    }
    std::copy(points.begin(), points.end(), points_.begin());
    check();
  }

  const Point2& operator[](std::size_t i) const { return points_[i]; }
  Point2& operator[](std::size_t i) { return points_[i]; }
  std::span<const Point2, kLandmarkCount> points() const { return points_; }
  std::vector<Point2> to_vector() const { return {points_.begin(), points_.end()}; }

  Point2 centroid(std::size_t begin, std::size_t end) const {
    Point2 c;
    for (std::size_t i = begin; i < end; ++i) c = c + points_[i];
    return (1.0 / static_cast<double>(end - begin)) * c;
  }

  /// Distance between the two eye centroids.
  double inter_ocular_distance() const {
    return distance(centroid(landmarks::kLeftEyeBegin, landmarks::kLeftEyeEnd),
                    centroid(landmarks::kRightEyeBegin, landmarks::kRightEyeEnd));
  }

  /// Clamp every point onto [0, width-1] x [0, height-1].
  LandmarkSet clamped(int width, int height) const {
    LandmarkSet out = *this;
    for (auto& p : out.points_) {
      p.x = std::clamp(p.x, 0.0, static_cast<double>(width - 1));
      p.y = std::clamp(p.y, 0.0, static_cast<double>(height - 1));
    }
    return out;
  }

  friend bool operator==(const LandmarkSet&, const LandmarkSet&) = default;

 private:
  void check() const {
    for (const auto& p : points_) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
        throw std::invalid_argument("landmark coordinates must be finite");
      }
    }
  }

  std::array<Point2, kLandmarkCount> points_{};
};

/// Pointwise (1 - t) * a + t * b.
inline LandmarkSet lerp(const LandmarkSet& a, const LandmarkSet& b, double t) {
  LandmarkSet out;
  for (std::size_t i = 0; i < kLandmarkCount; ++i) {
    out[i] = {(1.0 - t) * a[i].x + t * b[i].x, (1.0 - t) * a[i].y + t * b[i].y};
  }
  return out;
}

}  // namespace morphforge

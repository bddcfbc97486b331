#pragma once

#include <cmath>

#include "morphforge/geometry.hpp"
#include "morphforge/raster.hpp"

namespace morphforge::testing {

// Hexagonal eye contour: p1 outer/inner corner ... p6, as in the 68-point layout.
inline void put_eye(LandmarkSet& l, std::size_t begin, Point2 c, double half_w, double half_h) {
  const double s = std::sqrt(3.0) / 2.0;
  l[begin + 0] = {c.x - half_w, c.y};
  l[begin + 1] = {c.x - 0.5 * half_w, c.y - s * 2.0 * half_h};
  l[begin + 2] = {c.x + 0.5 * half_w, c.y - s * 2.0 * half_h};
  l[begin + 3] = {c.x + half_w, c.y};
  l[begin + 4] = {c.x + 0.5 * half_w, c.y + s * 2.0 * half_h};
  l[begin + 5] = {c.x - 0.5 * half_w, c.y + s * 2.0 * half_h};
}

// A plausible frontal layout: eyes at (cx -/+ iod/2, eye_y), nose bridge
// running down from between the eyes. Remaining points sit on a rough oval.
inline LandmarkSet simple_face(double cx = 128.0, double eye_y = 110.0, double iod = 56.0) {
  LandmarkSet l;
  for (std::size_t i = 0; i < kLandmarkCount; ++i) {
    const double a = 2.0 * 3.14159265358979 * static_cast<double>(i) / kLandmarkCount;
    l[i] = {cx + 0.9 * iod * std::cos(a), eye_y + 0.4 * iod + 1.1 * iod * std::sin(a)};
  }
  put_eye(l, landmarks::kLeftEyeBegin, {cx - iod / 2, eye_y}, 0.2 * iod, 0.06 * iod);
  put_eye(l, landmarks::kRightEyeBegin, {cx + iod / 2, eye_y}, 0.2 * iod, 0.06 * iod);
  for (std::size_t i = 0; i < 4; ++i) {
    l[landmarks::kNoseBridgeBegin + i] = {cx, eye_y + 0.15 * iod * static_cast<double>(i)};
  }
  return l;
}

inline void fill_rect(Raster& r, int x0, int y0, int x1, int y1, std::uint8_t v) {
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      for (int c = 0; c < r.channels(); ++c) r.at(x, y, c) = v;
}

}  // namespace morphforge::testing

namespace morphforge::testing {

// Smooth background gradient with a bright disc at every landmark.
inline Raster render_landmarks(const LandmarkSet& l, int w = 256, int h = 256, int channels = 3,
                               std::uint8_t base = 40) {
  Raster r(w, h, channels);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < channels; ++c)
        r.at(x, y, c) = static_cast<std::uint8_t>((base + x / 4 + y / 8 + 20 * c) % 256);
  for (std::size_t i = 0; i < kLandmarkCount; ++i) {
    const int cx = static_cast<int>(std::lround(l[i].x)), cy = static_cast<int>(std::lround(l[i].y));
    for (int y = cy - 2; y <= cy + 2; ++y)
      for (int x = cx - 2; x <= cx + 2; ++x)
        if (x >= 0 && y >= 0 && x < w && y < h && (x - cx) * (x - cx) + (y - cy) * (y - cy) <= 4)
          for (int c = 0; c < channels; ++c) r.at(x, y, c) = static_cast<std::uint8_t>(220 - 10 * c);
  }
  return r;
}

}  // namespace morphforge::testing

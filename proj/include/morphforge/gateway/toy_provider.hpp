#pragma once

// Deterministic stand-in for the generator and the face models. A latent
// renders to a 256x256 grayscale cartoon face whose geometry is an affine
// function of the first eight components; the latent prefix is stamped into
// row 0 so the analysis calls can answer exactly.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "morphforge/gateway/provider.hpp"

namespace morphforge {

/// Latent components with a fixed meaning in the toy renderer.
namespace toy_axis {
inline constexpr std::size_t kCenterX = 0, kCenterY = 1, kScale = 2, kAspect = 3, kEyeWidth = 4, kEyeOpen = 5,
                             kYaw = 6, kPitch = 7, kIllumination = 8, kExpression = 9, kAge = 10, kGlasses = 11,
                             kGender = 12;
inline constexpr std::size_t kUsed = 13;
}  // namespace toy_axis

struct ToyFaceParams {
  double cx, cy;      // head centre
  double iod;         // inter-ocular distance
  double aspect;      // head height / width
  double eye_half_w;  // fraction of iod
  double ear;         // eye aspect ratio
  double yaw, pitch;  // degrees
  double illumination, expression, age;
  bool glasses;
};

inline ToyFaceParams toy_face_params(const std::vector<double>& w) {
  using namespace toy_axis;
  if (w.size() < kUsed) throw std::invalid_argument("toy latent needs at least 13 components");
  return {128.0 + 6.0 * w[kCenterX],
          128.0 + 6.0 * w[kCenterY],
          60.0 + 4.0 * w[kScale],
          1.25 + 0.05 * w[kAspect],
          0.2 + 0.01 * w[kEyeWidth],
          0.3 + 0.06 * w[kEyeOpen],
          3.0 * w[kYaw],
          3.0 * w[kPitch],
          w[kIllumination],
          w[kExpression],
          w[kAge],
          w[kGlasses] > 1.5};
}

namespace detail {

struct ToyGeometry {
  double rx, ry;
  double dx, dy;  // pose shift of the inner features
  double eye_y;
};

inline ToyGeometry toy_geometry(const ToyFaceParams& p) {
  const double rx = 0.95 * p.iod, ry = rx * p.aspect;
  const double deg = std::numbers::pi / 180.0;
  return {rx, ry, 0.8 * p.iod * std::sin(p.yaw * deg), 0.8 * p.iod * std::sin(p.pitch * deg), p.cy - 0.2 * ry};
}

}  // namespace detail

inline LandmarkSet toy_landmarks(const ToyFaceParams& p) {
  const auto g = detail::toy_geometry(p);
  const double iod = p.iod, fx = p.cx + g.dx, fy = g.eye_y + g.dy;
  LandmarkSet l;
  for (std::size_t i = 0; i < 17; ++i) {
    const double t = std::numbers::pi * (1.0 - static_cast<double>(i) / 16.0);
    l[i] = {p.cx + g.rx * std::cos(t), p.cy + g.ry * std::sin(t)};
  }
  for (std::size_t i = 0; i < 5; ++i) {
    const double u = static_cast<double>(i) / 4.0;
    const double lift = 0.05 * iod * std::sin(std::numbers::pi * u);
    l[17 + i] = {fx - 0.8 * iod + 0.5 * iod * u, fy - 0.35 * iod - lift};
    l[22 + i] = {fx + 0.3 * iod + 0.5 * iod * u, fy - 0.35 * iod - lift};
  }
  for (std::size_t i = 0; i < 4; ++i) l[27 + i] = {fx, fy + 0.15 * iod * static_cast<double>(i)};
  for (std::size_t i = 0; i < 5; ++i) {
    l[31 + i] = {fx + 0.1 * iod * (static_cast<double>(i) - 2.0), fy + 0.8 * iod + (i == 2 ? 0.04 * iod : 0.0)};
  }
  const double hw = p.eye_half_w * iod, v = p.ear * hw;
  for (std::size_t e = 0; e < 2; ++e) {
    const Point2 c{fx + (e == 0 ? -0.5 : 0.5) * iod, fy};
    const std::size_t b = e == 0 ? landmarks::kLeftEyeBegin : landmarks::kRightEyeBegin;
    l[b + 0] = {c.x - hw, c.y};
    l[b + 1] = {c.x - 0.5 * hw, c.y - v};
    l[b + 2] = {c.x + 0.5 * hw, c.y - v};
    l[b + 3] = {c.x + hw, c.y};
    l[b + 4] = {c.x + 0.5 * hw, c.y + v};
    l[b + 5] = {c.x - 0.5 * hw, c.y + v};
  }
  const double smile = std::tanh(p.expression);
  const double mw = iod * (0.35 + 0.05 * smile), mh = iod * (0.07 + 0.03 * smile), my = fy + 1.15 * iod;
  for (std::size_t i = 0; i < 12; ++i) {
    const double t = std::numbers::pi - 2.0 * std::numbers::pi * static_cast<double>(i) / 12.0;
    l[48 + i] = {fx + mw * std::cos(t), my - mh * std::sin(t)};
  }
  for (std::size_t i = 0; i < 8; ++i) {
    const double t = std::numbers::pi - 2.0 * std::numbers::pi * static_cast<double>(i) / 8.0;
    l[60 + i] = {fx + 0.7 * mw * std::cos(t), my - 0.4 * mh * std::sin(t)};
  }
  return l;
}

namespace detail {

inline bool in_polygon(const std::vector<Point2>& poly, double x, double y) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const Point2 a = poly[i], b = poly[j];
    if ((a.y > y) != (b.y > y) && x < (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x) inside = !inside;
  }
  return inside;
}

inline double segment_dist(double x, double y, Point2 a, Point2 b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  const double t = len2 > 0 ? std::clamp(((x - a.x) * vx + (y - a.y) * vy) / len2, 0.0, 1.0) : 0.0;
  return std::hypot(x - a.x - t * vx, y - a.y - t * vy);
}

inline std::vector<Point2> slice(const LandmarkSet& l, std::size_t b, std::size_t e) {
  return {l.points().begin() + static_cast<std::ptrdiff_t>(b), l.points().begin() + static_cast<std::ptrdiff_t>(e)};
}

inline constexpr char kToyMagic[4] = {'T', 'O', 'Y', '1'};
inline constexpr std::size_t kToyTagFloats = 62;

}  // namespace detail

inline constexpr int kToyImageSize = 256;

/// Renders the face and stamps the tag into row 0.
inline Raster render_toy_face(const std::vector<double>& latent) {
  const ToyFaceParams p = toy_face_params(latent);
  const auto g = detail::toy_geometry(p);
  const LandmarkSet l = toy_landmarks(p);
  const int n = kToyImageSize;
  Raster img(n, n, 1, 30);

  const auto left_eye = detail::slice(l, landmarks::kLeftEyeBegin, landmarks::kLeftEyeEnd);
  const auto right_eye = detail::slice(l, landmarks::kRightEyeBegin, landmarks::kRightEyeEnd);
  const auto mouth = detail::slice(l, 48, 60), lips = detail::slice(l, 60, 68);
  const double iod = p.iod;
  const double wrinkle = std::clamp(10.0 * p.age, 0.0, 40.0);

  for (int y = 1; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double px = x, py = y;
      const double ex = (px - p.cx) / g.rx, ey = (py - p.cy) / g.ry;
      if (ex * ex + ey * ey > 1.0) continue;
      double v = 150.0 + 12.0 * p.illumination * ex;
      // forehead lines
      for (int k = 0; k < 3; ++k) {
        const double ly = l[27].y - (0.7 + 0.12 * k) * iod;
        if (std::abs(py - ly) < 0.8 && std::abs(px - l[27].x) < 0.35 * iod) v -= wrinkle;
      }
      for (std::size_t b : {std::size_t{17}, std::size_t{22}}) {
        for (std::size_t i = b; i < b + 4; ++i)
          if (detail::segment_dist(px, py, l[i], l[i + 1]) <= 1.2) v = 70.0;
      }
      for (std::size_t i : {std::size_t{32}, std::size_t{34}})
        if (std::hypot(px - l[i].x, py - l[i].y) <= 0.04 * iod) v = 70.0;
      if (detail::in_polygon(mouth, px, py)) v = 100.0;
      if (detail::in_polygon(lips, px, py)) v = 60.0;
      if (detail::in_polygon(left_eye, px, py) || detail::in_polygon(right_eye, px, py)) v = 45.0;
      if (p.glasses) {
        const double fy = l[27].y;
        if (detail::segment_dist(px, py, {l[39].x + 0.05 * iod, fy}, {l[42].x - 0.05 * iod, fy}) <= 1.5) v = 20.0;
        for (const auto& e : {left_eye, right_eye}) {
          const double cx = (e[0].x + e[3].x) / 2;
          if (std::abs(std::hypot(px - cx, py - fy) - 0.3 * iod) <= 1.0) v = 20.0;
        }
      }
      img.at(x, y) = to_byte(v);
    }
  }

  // tag
  std::memcpy(&img.at(0, 0), detail::kToyMagic, 4);
  const std::size_t count = std::min(latent.size(), detail::kToyTagFloats);
  img.at(4, 0) = static_cast<std::uint8_t>(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(latent[i]));
    for (int b = 0; b < 4; ++b) img.at(5 + static_cast<int>(4 * i) + b, 0) = static_cast<std::uint8_t>(bits >> (8 * b));
  }
  return img;
}

/// Latent prefix recovered from the tag; throws NoFaceError when absent.
inline std::vector<double> read_toy_tag(const Raster& img) {
  if (img.width() != kToyImageSize || img.height() != kToyImageSize || img.channels() != 1 ||
      std::memcmp(img.data().data(), detail::kToyMagic, 4) != 0) {
    throw NoFaceError();
  }
  const std::size_t count = img.at(4, 0);
  if (count < toy_axis::kUsed || count > detail::kToyTagFloats) throw NoFaceError();
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= std::uint32_t(img.at(5 + static_cast<int>(4 * i) + b, 0)) << (8 * b);
    const float f = std::bit_cast<float>(bits);
    if (!std::isfinite(f)) throw NoFaceError();
    out[i] = f;
  }
  return out;
}

struct ToyProviderOptions {
  std::size_t latent_dim = 64;
  std::size_t embedding_dim = 16;
};

class ToyProvider : public InferenceProvider {
 public:
  explicit ToyProvider(ToyProviderOptions opt = {}) : opt_(opt) {
    if (opt_.latent_dim < toy_axis::kUsed) throw std::invalid_argument("toy latent_dim must be at least 13");
    if (opt_.embedding_dim == 0 || opt_.embedding_dim > std::min(opt_.latent_dim, detail::kToyTagFloats)) {
      throw std::invalid_argument("toy embedding_dim must be in [1, min(latent_dim, 62)]");
    }
  }

  std::set<Capability> capabilities() const override { return all_capabilities(); }
  std::size_t latent_dim() const override { return opt_.latent_dim; }
  std::size_t embedding_dim() const override { return opt_.embedding_dim; }

 protected:
  /// Standard normal components via Box-Muller on an explicit 53-bit mapping.
  std::vector<LatentVector> do_sample_latent(std::size_t count, std::uint64_t seed) override {
    std::mt19937_64 rng(seed);
    auto uniform = [&] { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; };
    std::vector<LatentVector> out;
    for (std::size_t i = 0; i < count; ++i) {
      std::vector<double> v(opt_.latent_dim);
      for (std::size_t j = 0; j < v.size(); j += 2) {
        const double r = std::sqrt(-2.0 * std::log(uniform())), t = 2.0 * std::numbers::pi * uniform();
        v[j] = r * std::cos(t);
        if (j + 1 < v.size()) v[j + 1] = r * std::sin(t);
      }
      out.emplace_back(std::move(v));
    }
    return out;
  }

  Raster do_decode_latent(const LatentVector& w) override { return render_toy_face(w.values()); }

  Embedding do_embed_face(const Raster& image) override {
    auto tag = read_toy_tag(image);
    if (tag.size() < opt_.embedding_dim) throw NoFaceError();
    tag.resize(opt_.embedding_dim);
    return Embedding(std::move(tag)).unit();
  }

  PoseEstimate do_estimate_pose(const Raster& image) override {
    const auto p = toy_face_params(read_toy_tag(image));
    return {p.yaw, p.pitch, 0.0};
  }

  LandmarkSet do_detect_landmarks(const Raster& image) override {
    return toy_landmarks(toy_face_params(read_toy_tag(image)));
  }

 private:
  ToyProviderOptions opt_;
};

/// Axis-aligned semantic directions matching the toy renderer's attributes.
inline std::map<std::string, SemanticDirection> toy_directions(std::size_t latent_dim) {
  std::map<std::string, SemanticDirection> d;
  d.emplace("pose", SemanticDirection("pose", LatentVector::axis(latent_dim, toy_axis::kYaw), 1.0, 1.0));
  d.emplace("illumination",
            SemanticDirection("illumination", LatentVector::axis(latent_dim, toy_axis::kIllumination), 1.0, 1.0));
  d.emplace("expression",
            SemanticDirection("expression", LatentVector::axis(latent_dim, toy_axis::kExpression), 1.0, 1.0));
  d.emplace("age", SemanticDirection("age", LatentVector::axis(latent_dim, toy_axis::kAge), 1.0, 1.0));
  return d;
}

/// Pseudo gender label from the sign of the toy gender component.
inline bool toy_is_female(const LatentVector& w) { return w[toy_axis::kGender] < 0.0; }

}  // namespace morphforge

#include <gtest/gtest.h>

#include <cstdlib>

#include "fixtures.hpp"
#include "morphforge/morph/morph.hpp"

using namespace morphforge;
using morphforge::testing::render_landmarks;
using morphforge::testing::simple_face;

namespace {

int max_abs_diff(const Raster& a, const Raster& b) {
  int m = 0;
  for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, std::abs(int(a.data()[i]) - int(b.data()[i])));
  return m;
}

}  // namespace

TEST(Warp, IdentityIsBitExact) {
  const auto l = simple_face();
  const Raster img = render_landmarks(l);
  const auto pts = with_anchors(l, img.width(), img.height());
  const auto tri = delaunay(pts);
  EXPECT_EQ(piecewise_warp(img, pts, pts, tri), img);
}

TEST(Warp, TranslationMatchesShiftedRender) {
  // A ramp shifted by whole pixels inside the face region.
  Raster ramp(128, 128, 1);
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x) ramp.at(x, y) = static_cast<std::uint8_t>(x + y / 2);
  const std::vector<Point2> src{{20, 20}, {80, 20}, {20, 80}, {80, 80}};
  std::vector<Point2> dst;
  for (auto p : src) dst.push_back(p + Point2{10, 0});
  const auto tri = delaunay(dst);
  const Raster out = piecewise_warp(ramp, src, dst, tri);
  for (int y = 20; y <= 80; ++y)
    for (int x = 30; x <= 90; ++x) ASSERT_NEAR(out.at(x, y), ramp.at(x - 10, y), 1) << x << "," << y;
  // Outside the warped region the source is kept.
  EXPECT_EQ(out.at(5, 5), ramp.at(5, 5));
}

TEST(Warp, Errors) {
  Raster img(16, 16, 1);
  const std::vector<Point2> src{{0, 0}, {10, 0}, {0, 10}};
  const std::vector<Point2> flat{{0, 0}, {5, 5}, {10, 10}};
  Triangulation tri{src, {{{0, 1, 2}}}};
  EXPECT_THROW(piecewise_warp(img, src, flat, tri), std::invalid_argument);
  const std::vector<Point2> two{{0, 0}, {1, 1}};
  EXPECT_THROW(piecewise_warp(img, two, src, tri), std::invalid_argument);
}

TEST(Morph, EndpointsReproduceContributors) {
  const auto la = simple_face(128, 110, 56), lb = simple_face(124, 114, 60);
  const Raster a = render_landmarks(la, 256, 256, 3, 40), b = render_landmarks(lb, 256, 256, 3, 90);
  EXPECT_EQ(morph_pair(a, la, b, lb, 0.0), a);
  EXPECT_EQ(morph_pair(a, la, b, lb, 1.0), b);
}

TEST(Morph, SelfMorphIsIdentity) {
  const auto l = simple_face();
  const Raster a = render_landmarks(l);
  EXPECT_EQ(morph_pair(a, l, a, l, 0.5), a);
}

TEST(Morph, HalfwayIsSymmetric) {
  const auto la = simple_face(128, 110, 56), lb = simple_face(126, 112, 60);
  const Raster a = render_landmarks(la, 200, 220, 3, 30), b = render_landmarks(lb, 200, 220, 3, 70);
  const Raster ab = morph_pair(a, la, b, lb, 0.5), ba = morph_pair(b, lb, a, la, 0.5);
  EXPECT_LE(max_abs_diff(ab, ba), 1);
}

TEST(Morph, GeometryIsLinear) {
  const auto la = simple_face(100, 100, 50), lb = simple_face(140, 120, 70);
  const auto m = morph_geometry(la, lb, 0.25);
  for (std::size_t i = 0; i < kLandmarkCount; ++i) {
    EXPECT_NEAR(m[i].x, 0.75 * la[i].x + 0.25 * lb[i].x, 1e-12);
    EXPECT_NEAR(m[i].y, 0.75 * la[i].y + 0.25 * lb[i].y, 1e-12);
  }
}

TEST(Morph, Errors) {
  const auto l = simple_face();
  const Raster a(256, 256, 3), b(128, 128, 3);
  EXPECT_THROW(morph_pair(a, l, b, l, 0.5), std::invalid_argument);
  EXPECT_THROW(morph_pair(a, l, a, l, 1.5), std::invalid_argument);
  EXPECT_THROW(parse_morph_algorithm("cubist"), std::invalid_argument);
  EXPECT_EQ(parse_morph_algorithm("lma"), MorphAlgorithm::lma);
  EXPECT_THROW((MorphRecord{"s1", "s1", MorphAlgorithm::lma, 0.5, ""}.validate()), std::invalid_argument);
}

TEST(Splice, HardMaskCopiesHullOnly) {
  const auto l = simple_face();
  const Raster morph(256, 256, 1, 200), bg(256, 256, 1, 10);
  const Raster out = splice_postprocess(morph, bg, l, 0);
  EXPECT_EQ(out.at(128, 120), 200);  // inside the face
  EXPECT_EQ(out.at(2, 2), 10);
  // Feathered mask blends just outside the hull.
  const Raster soft = splice_postprocess(morph, bg, l, 20);
  const auto hull = convex_hull(l.to_vector());
  double min_x = 1e9;
  for (auto p : hull) min_x = std::min(min_x, p.x);
  const int probe_x = static_cast<int>(std::floor(min_x)) - 5;
  const int v = soft.at(probe_x, 130);
  EXPECT_GT(v, 10);
  EXPECT_LT(v, 200);
  EXPECT_EQ(soft.at(2, 2), 10);
}

TEST(Splice, DegenerateHullReturnsBackground) {
  LandmarkSet l;
  for (std::size_t i = 0; i < kLandmarkCount; ++i) l[i] = {50.0 + i, 50.0 + i};
  const Raster morph(128, 128, 1, 200), bg(128, 128, 1, 10);
  EXPECT_EQ(splice_postprocess(morph, bg, l, 4), bg);
  EXPECT_THROW(splice_postprocess(morph, bg, l, -1), std::invalid_argument);
}

TEST(Demorph, FactorZeroIsIdentity) {
  const auto l = simple_face();
  const Raster s = render_landmarks(l);
  const auto r = demorph(s, l, render_landmarks(simple_face(120, 112, 62)), simple_face(120, 112, 62), 0.0);
  EXPECT_EQ(r.image, s);
  EXPECT_EQ(r.landmarks, l);
}

TEST(Demorph, RecoversContributorGeometry) {
  const auto la = simple_face(128, 110, 64), lb = simple_face(122, 116, 72);
  const Raster a = render_landmarks(la), b = render_landmarks(lb);
  const auto lm = morph_geometry(la, lb, 0.5);
  const Raster m = morph_pair(a, la, b, lb, 0.5);
  const auto r = demorph(m, lm, b, lb, 0.5);
  for (std::size_t i = 0; i < kLandmarkCount; ++i) EXPECT_LE(distance(r.landmarks[i], la[i]), 1.0);
}

TEST(Demorph, Errors) {
  const auto l = simple_face();
  const Raster s(256, 256, 3);
  EXPECT_THROW(demorph(s, l, s, l, 1.0), std::invalid_argument);
  EXPECT_THROW(demorph(s, l, Raster(64, 64, 3), l, 0.5), std::invalid_argument);
}

TEST(Lmfd, Decisions) {
  const Embedding p{{1.0, 0.0}}, near{{0.9, 0.1}}, far{{0.0, 1.0}};
  EXPECT_EQ(lmfd_verify(near, p, 0.3).decision, LmfdDecision::bona_fide);
  EXPECT_EQ(lmfd_verify(far, p, 0.3).decision, LmfdDecision::morph_attack);
  EXPECT_DOUBLE_EQ(lmfd_verify(far, p, 0.3).distance, 1.0);
  EXPECT_THROW(lmfd_verify(p, p, 0.0), std::invalid_argument);
}

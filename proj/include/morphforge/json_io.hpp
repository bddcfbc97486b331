#pragma once

// JSON forms of landmark sets and pose estimates.

#include <json.hpp>

#include <stdexcept>
#include <string>
#include <vector>

#include "morphforge/gates.hpp"
#include "morphforge/geometry.hpp"

namespace morphforge {

using json = nlohmann::json;

/// [[x, y] x 68]
inline json landmarks_to_json(const LandmarkSet& l) {
  json a = json::array();
  for (const auto& p : l.points()) a.push_back({p.x, p.y});
  return a;
}

inline LandmarkSet landmarks_from_json(const json& j) {
  if (!j.is_array() || j.size() != kLandmarkCount) {
    throw std::invalid_argument("landmarks must be an array of " + std::to_string(kLandmarkCount) + " [x, y] pairs");
  }
  std::vector<Point2> pts;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      throw std::invalid_argument("landmark entries must be [x, y] number pairs");
    }
    pts.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  return LandmarkSet(pts);
}

inline json pose_to_json(const PoseEstimate& p) { return {{"yaw", p.yaw}, {"pitch", p.pitch}, {"roll", p.roll}}; }

inline PoseEstimate pose_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("pose must be an object");
  PoseEstimate p;
  for (auto [key, field] : {std::pair{"yaw", &p.yaw}, std::pair{"pitch", &p.pitch}, std::pair{"roll", &p.roll}}) {
    if (!j.contains(key) || !j[key].is_number()) throw std::invalid_argument(std::string("pose lacks numeric '") + key + "'");
    *field = j[key].get<double>();
  }
  p.validate();
  return p;
}

}  // namespace morphforge

#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "pstitch/errors.hpp"

namespace pstitch {

// Pixel coordinates: origin at the top-left corner, x rightward, y downward.
using Vec2 = Eigen::Vector2d;

struct Dims {
  int width = 0;
  int height = 0;

  bool contains(const Vec2& p) const {
    return p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= width && p.y() <= height;
  }
  friend bool operator==(const Dims&, const Dims&) = default;
};

struct PointPair {
  Vec2 p;      // target image
  Vec2 p_ref;  // reference image

  friend bool operator==(const PointPair& a, const PointPair& b) {
    return a.p == b.p && a.p_ref == b.p_ref;
  }
};

struct LinePair {
  Vec2 a, b;          // target image endpoints
  Vec2 a_ref, b_ref;  // reference image endpoints

  Vec2 midpoint() const { return 0.5 * (a + b); }
  Vec2 midpoint_ref() const { return 0.5 * (a_ref + b_ref); }

  friend bool operator==(const LinePair& x, const LinePair& y) {
    return x.a == y.a && x.b == y.b && x.a_ref == y.a_ref && x.b_ref == y.b_ref;
  }
};

struct DualFeatureSet {
  std::vector<PointPair> points;
  std::vector<LinePair> lines;
  Dims target_dims;
  Dims ref_dims;

  std::size_t num_features() const { return points.size() + lines.size(); }
  friend bool operator==(const DualFeatureSet&, const DualFeatureSet&) = default;
};

inline constexpr double kMinLineLength = 2.0;
inline constexpr double kDuplicateTolerance = 0.5;

// Throws ValidationError naming the first offending record.
void validate(const DualFeatureSet& set);

DualFeatureSet from_json(const nlohmann::json& j);
nlohmann::json to_json(const DualFeatureSet& set);

// Parses and validates. ParseError on malformed input, ValidationError on
// invariant violations.
DualFeatureSet load_correspondences(const std::filesystem::path& path);
void save_correspondences(const DualFeatureSet& set, const std::filesystem::path& path);

/// Endpoints and midpoint of the reference-side segment, in that order.
std::array<Vec2, 3> sample_line(const LinePair& l);

/// Same sampling applied to the target-side segment.
std::array<Vec2, 3> sample_line_target(const LinePair& l);

}  // namespace pstitch

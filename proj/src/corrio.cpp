#include "pstitch/corrio.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace pstitch {

namespace {

bool finite(const Vec2& v) { return std::isfinite(v.x()) && std::isfinite(v.y()); }

Vec2 read_vec2(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ParseError(std::string("missing field '") + key + "'");
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ParseError(std::string("field '") + key + "' must be [x, y]");
  return {v[0].get<double>(), v[1].get<double>()};
}

Dims read_dims(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ParseError(std::string("missing field '") + key + "'");
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer())
    throw ParseError(std::string("field '") + key + "' must be [w, h] integers");
  return {v[0].get<int>(), v[1].get<int>()};
}

nlohmann::json vec_json(const Vec2& v) { return nlohmann::json::array({v.x(), v.y()}); }

}  // namespace

void validate(const DualFeatureSet& set) {
  const auto& td = set.target_dims;
  const auto& rd = set.ref_dims;
  if (td.width <= 0 || td.height <= 0 || rd.width <= 0 || rd.height <= 0)
    throw ValidationError(RecordKind::Set, std::nullopt, "image dimensions must be positive");

  for (std::size_t i = 0; i < set.points.size(); ++i) {
    const auto& pp = set.points[i];
    if (!finite(pp.p) || !finite(pp.p_ref))
      throw ValidationError(RecordKind::Point, i, "non-finite coordinate");
    if (!td.contains(pp.p)) throw ValidationError(RecordKind::Point, i, "p outside target image");
    if (!rd.contains(pp.p_ref))
      throw ValidationError(RecordKind::Point, i, "p_ref outside reference image");
  }
  // Duplicate check on the reference side, quadratic but run once at load.
  const double tol2 = kDuplicateTolerance * kDuplicateTolerance;
  for (std::size_t i = 1; i < set.points.size(); ++i)
    for (std::size_t k = 0; k < i; ++k)
      if ((set.points[i].p_ref - set.points[k].p_ref).squaredNorm() < tol2)
        throw ValidationError(RecordKind::Point, i,
                              "duplicate of point " + std::to_string(k) + " in reference image");

  for (std::size_t j = 0; j < set.lines.size(); ++j) {
    const auto& l = set.lines[j];
    if (!finite(l.a) || !finite(l.b) || !finite(l.a_ref) || !finite(l.b_ref))
      throw ValidationError(RecordKind::Line, j, "non-finite coordinate");
    if (!td.contains(l.a) || !td.contains(l.b))
      throw ValidationError(RecordKind::Line, j, "endpoint outside target image");
    if (!rd.contains(l.a_ref) || !rd.contains(l.b_ref))
      throw ValidationError(RecordKind::Line, j, "endpoint outside reference image");
    if ((l.b - l.a).norm() < kMinLineLength || (l.b_ref - l.a_ref).norm() < kMinLineLength)
      throw ValidationError(RecordKind::Line, j, "degenerate segment (shorter than 2 px)");
  }

  if (set.points.size() + 3 * set.lines.size() < 4)
    throw ValidationError(RecordKind::Set, std::nullopt,
                          "not enough correspondences to fit a homography");
}

DualFeatureSet from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("top level must be an object");
  DualFeatureSet set;
  set.target_dims = read_dims(j, "target_dims");
  set.ref_dims = read_dims(j, "ref_dims");

  if (j.contains("points")) {
    const auto& pts = j.at("points");
    if (!pts.is_array()) throw ParseError("'points' must be an array");
    set.points.reserve(pts.size());
    for (const auto& r : pts) {
      if (!r.is_object()) throw ParseError("point record must be an object");
      set.points.push_back({read_vec2(r, "p"), read_vec2(r, "p_ref")});
    }
  }
  if (j.contains("lines")) {
    const auto& lns = j.at("lines");
    if (!lns.is_array()) throw ParseError("'lines' must be an array");
    set.lines.reserve(lns.size());
    for (const auto& r : lns) {
      if (!r.is_object()) throw ParseError("line record must be an object");
      set.lines.push_back(
          {read_vec2(r, "a"), read_vec2(r, "b"), read_vec2(r, "a_ref"), read_vec2(r, "b_ref")});
    }
  }
  return set;
}

nlohmann::json to_json(const DualFeatureSet& set) {
  nlohmann::json j;
  j["target_dims"] = {set.target_dims.width, set.target_dims.height};
  j["ref_dims"] = {set.ref_dims.width, set.ref_dims.height};
  auto pts = nlohmann::json::array();
  for (const auto& pp : set.points) pts.push_back({{"p", vec_json(pp.p)}, {"p_ref", vec_json(pp.p_ref)}});
  auto lns = nlohmann::json::array();
  for (const auto& l : set.lines)
    lns.push_back({{"a", vec_json(l.a)},
                   {"b", vec_json(l.b)},
                   {"a_ref", vec_json(l.a_ref)},
                   {"b_ref", vec_json(l.b_ref)}});
  j["points"] = std::move(pts);
  j["lines"] = std::move(lns);
  return j;
}

DualFeatureSet load_correspondences(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  DualFeatureSet set;
  try {
    set = from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  validate(set);
  return set;
}

void save_correspondences(const DualFeatureSet& set, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << to_json(set).dump(2) << '\n';
}

std::array<Vec2, 3> sample_line(const LinePair& l) {
  return {l.a_ref, l.midpoint_ref(), l.b_ref};
}

std::array<Vec2, 3> sample_line_target(const LinePair& l) { return {l.a, l.midpoint(), l.b}; }

}  // namespace pstitch

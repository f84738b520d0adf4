#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>
#include <opencv2/core.hpp>

#include "pstitch/grouping.hpp"
#include "pstitch/meshwarp.hpp"
#include "pstitch/seam.hpp"

namespace pstitch {

struct StitchConfig {
  GroupingParams grouping;
  int max_iterations = 5;
  double convergence_px = 1.0;
  int target_cells = 1600;
  WarpParams warp;
  AdaptiveParams adaptive;
  PerceptionParams perception;
  int zncc_patch = 15;
  double feather_radius = 0.0;
  std::optional<Direction> direction;  // auto-detected when empty
  bool parallel = true;                // hypotheses on separate threads

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
  nlohmann::json to_json() const;
};

std::string to_string(Direction d);

// Horizontal when the matched centroids are displaced more along x than y.
Direction detect_direction(const DualFeatureSet& set);

struct IterationRecord {
  int iteration = 0;
  double mean_vertex_change = 0.0;
  TermEnergies energies;
  double seam_cost = 0.0;
  int folded_cells = 0;
  Eigen::VectorXd V_hat;
};

struct HypothesisOutcome {
  std::size_t index = 0;
  Hypothesis hypothesis;
  Homography global = Homography::identity();
  MeshGrid mesh;
  Canvas canvas;
  CanvasImage warped;
  CanvasImage reference;
  OverlapRegion region;
  SeamResult seam;
  int iterations_used = 0;
  std::vector<IterationRecord> iterations;
};

struct StageTimings {
  double grouping_ms = 0, alignment_ms = 0, selection_ms = 0, composite_ms = 0;
};

struct StitchOutput {
  cv::Mat composite;
  std::size_t chosen = 0;
  std::vector<HypothesisOutcome> outcomes;
  GroupingResult grouping;
  Direction direction = Direction::Horizontal;
  StitchConfig config;
  StageTimings timings;

  const HypothesisOutcome& chosen_outcome() const { return outcomes[chosen]; }
};

// Saliency raster (any depth, single channel) scaled to [0, 1] per pixel as
// CV_64F. Empty input stays empty.
cv::Mat normalize_saliency(const cv::Mat& raw);

/// Seam-guided alignment of one hypothesis: global DLT pre-warp, then up to
/// max_iterations rounds of weights, solve, warp, seam, stopping once the mean
/// vertex change drops below convergence_px. The ZNCC score is filled in.
/// Failures surface as StageError.
HypothesisOutcome align_hypothesis(const cv::Mat& target, const cv::Mat& reference,
                                   const DualFeatureSet& set, const Hypothesis& hypothesis,
                                   std::size_t index, Direction direction,
                                   const StitchConfig& config, const cv::Mat& saliency = {});

// Minimal zncc_score, then lower total_cost, then lower hypothesis index.
std::size_t select_outcome(std::span<const HypothesisOutcome> outcomes);

/// Grouping, per-hypothesis alignment, selection and compositing. `saliency`
/// is CV_64F over the reference image or empty.
StitchOutput stitch(const cv::Mat& target, const cv::Mat& reference, const DualFeatureSet& set,
                    const StitchConfig& config, const cv::Mat& saliency = {});

/// Report with stable key order. Wall times sit under "timings" only.
nlohmann::json make_report(const StitchOutput& output);

// Writes the JSON report at `path` and a text table next to it (.txt).
void evaluate_report(const StitchOutput& output, const std::filesystem::path& path);

nlohmann::json mesh_dump(const StitchOutput& output);

// Manifest: {"pairs": [{"name", "target", "ref", "corr", optional "saliency"}]}
// with paths relative to the manifest. Writes `<out>.json` and `<out>.txt`.
nlohmann::json evaluate_batch(const std::filesystem::path& manifest, const StitchConfig& config,
                              const std::filesystem::path& out);

}  // namespace pstitch

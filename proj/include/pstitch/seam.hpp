#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <vector>

#include <opencv2/core.hpp>

#include "pstitch/canvas.hpp"
#include "pstitch/grouping.hpp"

namespace pstitch {

enum Label : std::int8_t { kUnlabeled = -1, kTarget = 0, kReference = 1 };

struct OverlapRegion {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> overlap;  // 1 where both images cover the pixel
  std::vector<std::int8_t> anchor;    // Label for anchored overlap pixels, else kUnlabeled

  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
  bool in_overlap(int x, int y) const {
    return x >= 0 && y >= 0 && x < width && y < height && overlap[index(x, y)];
  }
  std::size_t size() const;
  std::size_t anchor_count(Label side) const;
};

/// Overlap of two coverage masks. Overlap pixels 4-adjacent to target-only
/// coverage anchor to the target, those adjacent to reference-only coverage
/// to the reference; pixels touching both take the majority of their 8
/// neighbours (ties to the reference). When a side ends up with no anchors
/// (one image covers the other), the extreme overlap pixel of each row
/// (horizontal) or column (vertical) is anchored to that side, with the
/// target on the side of its coverage centroid.
OverlapRegion make_overlap_region(const cv::Mat& target_mask, const cv::Mat& reference_mask,
                                  Direction direction);

// Edge costs on the 4-connected canvas grid. horizontal(x, y) joins (x, y)
// and (x + 1, y); vertical(x, y) joins (x, y) and (x, y + 1).
struct EdgeCostMap {
  int width = 0;
  int height = 0;
  std::vector<double> horizontal;  // height x (width - 1)
  std::vector<double> vertical;    // (height - 1) x width

  EdgeCostMap() = default;
  EdgeCostMap(int w, int h);
  double& h(int x, int y) { return horizontal[static_cast<std::size_t>(y) * (width - 1) + x]; }
  double& v(int x, int y) { return vertical[static_cast<std::size_t>(y) * width + x]; }
  double h(int x, int y) const { return horizontal[static_cast<std::size_t>(y) * (width - 1) + x]; }
  double v(int x, int y) const { return vertical[static_cast<std::size_t>(y) * width + x]; }
};

struct PerceptionParams {
  double mu = 2.3;        // CIELAB difference at the sigmoid midpoint
  double softness = 1.0;
};

// CIE L*a*b* (D65) of an 8-bit BGR raster as CV_32FC3.
cv::Mat to_lab(const cv::Mat& bgr);

/// Sigmoid of the CIELAB distance per pixel times saliency, averaged over the
/// two endpoints of each overlap edge. `saliency` is CV_64F on the canvas or
/// empty for uniform 1. Throws EmptyOverlap.
EdgeCostMap perception_cost(const cv::Mat& warped_target, const cv::Mat& reference,
                            const OverlapRegion& region, const cv::Mat& saliency = {},
                            const PerceptionParams& params = {});

struct SeamPixel {
  int x, y;
  friend bool operator==(const SeamPixel&, const SeamPixel&) = default;
};

struct SeamResult {
  std::vector<std::int8_t> labels;  // per canvas pixel; kUnlabeled outside the overlap
  std::vector<SeamPixel> seam_pixels;  // row-major order
  double total_cost = 0.0;
  double zncc_score = std::numeric_limits<double>::quiet_NaN();
  int width = 0;
  int height = 0;

  std::int8_t label(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

// Sum of costs over overlap edges whose endpoints carry opposite labels.
double cut_cost(const EdgeCostMap& costs, const OverlapRegion& region,
                const std::vector<std::int8_t>& labels);

/// Exact anchored binary labelling of minimum cut cost (max-flow/min-cut).
/// Throws EmptyOverlap or NoAnchor.
SeamResult find_seam(const EdgeCostMap& costs, const OverlapRegion& region);

/// Mean over seam pixels of (1 - ZNCC) / 2 on BT.601 luma patches restricted
/// to the overlap. 0 is a perfect seam.
double zncc_quality(const SeamResult& seam, const OverlapRegion& region,
                    const cv::Mat& warped_target, const cv::Mat& reference, int patch = 15);

// Same score on precomputed grayscale canvases (row-major, region-sized).
double zncc_quality_gray(const SeamResult& seam, const OverlapRegion& region,
                         const std::vector<double>& gray_target,
                         const std::vector<double>& gray_reference, int patch = 15);

/// Target pixels where labelled (or covered only by) the target, reference
/// pixels elsewhere; black where neither covers. With feather_radius > 0 the
/// overlap is blended linearly across the seam within that distance.
cv::Mat composite(const CanvasImage& target, const CanvasImage& reference, const SeamResult& seam,
                  double feather_radius = 0.0);

// Label mask PNG (0 target, 255 reference, 128 uncovered) plus `<path>.json`
// with the seam pixels.
void dump_seam(const SeamResult& seam, const CanvasImage& target, const CanvasImage& reference,
               const std::filesystem::path& path);

}  // namespace pstitch

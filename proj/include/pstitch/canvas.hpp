#pragma once

#include <opencv2/core.hpp>

#include "pstitch/corrio.hpp"

namespace pstitch {

// Integer pixel window in reference-image coordinates: canvas pixel (c, r)
// sits at reference position (x0 + c, y0 + r).
struct Canvas {
  int x0 = 0;
  int y0 = 0;
  int width = 0;
  int height = 0;

  Vec2 to_canvas(const Vec2& ref) const { return {ref.x() - x0, ref.y() - y0}; }
  Vec2 to_ref(const Vec2& c) const { return {c.x() + x0, c.y() + y0}; }
  friend bool operator==(const Canvas&, const Canvas&) = default;
};

// A CV_8UC3 raster on a canvas with its CV_8U coverage mask (255 = covered).
struct CanvasImage {
  cv::Mat image;
  cv::Mat mask;
};

// Copies the reference image into the canvas.
CanvasImage place_reference(const cv::Mat& reference, const Canvas& canvas);

// Bilinear lookup with edge clamping; `img` is CV_8UC3.
cv::Vec3d sample_bilinear(const cv::Mat& img, double x, double y);

}  // namespace pstitch

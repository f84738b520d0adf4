#include "pstitch/canvas.hpp"

#include <algorithm>
#include <cmath>

namespace pstitch {

CanvasImage place_reference(const cv::Mat& reference, const Canvas& canvas) {
  CanvasImage out{cv::Mat::zeros(canvas.height, canvas.width, CV_8UC3),
                  cv::Mat::zeros(canvas.height, canvas.width, CV_8U)};
  const cv::Rect src_rect(0, 0, reference.cols, reference.rows);
  const cv::Rect dst_rect(-canvas.x0, -canvas.y0, reference.cols, reference.rows);
  const cv::Rect clip = dst_rect & cv::Rect(0, 0, canvas.width, canvas.height);
  if (clip.empty()) return out;
  const cv::Rect from(clip.x + canvas.x0, clip.y + canvas.y0, clip.width, clip.height);
  reference(from & src_rect).copyTo(out.image(clip));
  out.mask(clip).setTo(255);
  return out;
}

cv::Vec3d sample_bilinear(const cv::Mat& img, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(img.cols - 1));
  y = std::clamp(y, 0.0, static_cast<double>(img.rows - 1));
  const int x0 = std::min(static_cast<int>(x), img.cols - 1);
  const int y0 = std::min(static_cast<int>(y), img.rows - 1);
  const int x1 = std::min(x0 + 1, img.cols - 1);
  const int y1 = std::min(y0 + 1, img.rows - 1);
  const double fx = x - x0, fy = y - y0;
  const auto& p00 = img.at<cv::Vec3b>(y0, x0);
  const auto& p10 = img.at<cv::Vec3b>(y0, x1);
  const auto& p01 = img.at<cv::Vec3b>(y1, x0);
  const auto& p11 = img.at<cv::Vec3b>(y1, x1);
  cv::Vec3d out;
  for (int c = 0; c < 3; ++c)
    out[c] = (1 - fy) * ((1 - fx) * p00[c] + fx * p10[c]) + fy * ((1 - fx) * p01[c] + fx * p11[c]);
  return out;
}

}  // namespace pstitch

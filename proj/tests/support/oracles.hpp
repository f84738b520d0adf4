#pragma once

// Reference implementations written independently of the library, used to
// cross-check its results.

#include <cstdint>
#include <vector>

#include <Eigen/Core>
#include <opencv2/core.hpp>

#include "pstitch/corrio.hpp"

namespace oracle {

using pstitch::Vec2;

// Unweighted DLT over points and lines; unit norm, h33 >= 0.
Eigen::Matrix3d dlt(const pstitch::DualFeatureSet& set);

// Unit norm with the sign making the largest-magnitude entry positive.
Eigen::Matrix<double, 9, 1> canonical(const Eigen::Matrix3d& h);

Vec2 project(const Eigen::Matrix3d& h, const Vec2& p);

double point_residual(const Eigen::Matrix3d& h, const pstitch::PointPair& f);
double line_residual(const Eigen::Matrix3d& h, const pstitch::LinePair& f);

struct Edge {
  int u, v;
  double w;
};

// Shortest s-t distance on an undirected graph; +inf when unreachable.
double bellman_ford(int n, const std::vector<Edge>& edges, int s, int t);

// Exhaustive minimum over anchored labellings of a small overlap. `costs`
// horizontal then vertical as in EdgeCostMap, `overlap`/`anchor` row-major.
double min_cut_bruteforce(int w, int h, const std::vector<std::uint8_t>& overlap,
                          const std::vector<std::int8_t>& anchor, const std::vector<double>& hcost,
                          const std::vector<double>& vcost);

// Inverse-mapped bilinear warp of `img` under h onto a canvas with origin
// (x0, y0) in reference pixels. mask marks pixels with a source inside img.
void homography_warp(const cv::Mat& img, const Eigen::Matrix3d& h, int x0, int y0, int w, int hgt,
                     cv::Mat& out, cv::Mat& mask);

// True when no point lies strictly inside any triangle's circumcircle.
bool empty_circumcircles(const std::vector<Vec2>& pts, const std::vector<std::array<int, 3>>& tris);

// Number of points on the convex hull boundary (collinear boundary points included).
int hull_size(const std::vector<Vec2>& pts);

}  // namespace oracle

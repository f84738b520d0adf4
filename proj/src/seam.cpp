#include "pstitch/seam.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <boost/graph/adjacency_list.hpp>
#include <boost/graph/boykov_kolmogorov_max_flow.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace pstitch {

namespace {

// Max-flow on an explicit adjacency list, following the usual BK setup:
// every arc is paired with its reverse.
class MaxFlow {
 public:
  using Traits = boost::adjacency_list_traits<boost::vecS, boost::vecS, boost::directedS>;
  using EdgeDesc = Traits::edge_descriptor;
  struct Arc {
    double capacity{};
    double residual{};
    EdgeDesc reverse;
  };
  using Graph = boost::adjacency_list<boost::vecS, boost::vecS, boost::directedS, boost::no_property,
                                      Arc>;

  explicit MaxFlow(std::size_t nodes)
      : graph_(nodes + 2), source_(nodes), sink_(nodes + 1) {}

  void add_edge(std::size_t a, std::size_t b, double cap_ab, double cap_ba) {
    const EdgeDesc e = boost::add_edge(a, b, graph_).first;
    const EdgeDesc r = boost::add_edge(b, a, graph_).first;
    graph_[e].capacity = cap_ab;
    graph_[e].reverse = r;
    graph_[r].capacity = cap_ba;
    graph_[r].reverse = e;
  }
  void add_source(std::size_t n, double cap) { add_edge(source_, n, cap, 0.0); }
  void add_sink(std::size_t n, double cap) { add_edge(n, sink_, cap, 0.0); }

  double solve() {
    const auto nv = boost::num_vertices(graph_);
    color_.assign(nv, boost::white_color);
    std::vector<EdgeDesc> pred(nv);
    std::vector<std::size_t> dist(nv);
    return boost::boykov_kolmogorov_max_flow(
        graph_, boost::get(&Arc::capacity, graph_), boost::get(&Arc::residual, graph_),
        boost::get(&Arc::reverse, graph_), pred.data(), color_.data(), dist.data(),
        boost::get(boost::vertex_index, graph_), source_, sink_);
  }

  // Source side of the minimum cut: the source search tree.
  bool on_source_side(std::size_t n) const { return color_[n] == boost::black_color; }

 private:
  Graph graph_;
  std::size_t source_, sink_;
  std::vector<boost::default_color_type> color_;
};

std::vector<double> luma(const cv::Mat& bgr) {
  std::vector<double> g(static_cast<std::size_t>(bgr.rows) * bgr.cols);
  for (int y = 0; y < bgr.rows; ++y)
    for (int x = 0; x < bgr.cols; ++x) {
      const auto& p = bgr.at<cv::Vec3b>(y, x);
      g[static_cast<std::size_t>(y) * bgr.cols + x] = 0.299 * p[2] + 0.587 * p[1] + 0.114 * p[0];
    }
  return g;
}

}  // namespace

std::size_t OverlapRegion::size() const {
  return static_cast<std::size_t>(std::count(overlap.begin(), overlap.end(), std::uint8_t(1)));
}

std::size_t OverlapRegion::anchor_count(Label side) const {
  return static_cast<std::size_t>(std::count(anchor.begin(), anchor.end(), std::int8_t(side)));
}

OverlapRegion make_overlap_region(const cv::Mat& target_mask, const cv::Mat& reference_mask,
                                  Direction direction) {
  CV_Assert(target_mask.size() == reference_mask.size());
  OverlapRegion r;
  r.width = target_mask.cols;
  r.height = target_mask.rows;
  const std::size_t n = static_cast<std::size_t>(r.width) * r.height;
  r.overlap.assign(n, 0);
  r.anchor.assign(n, kUnlabeled);

  // 0 none, 1 target only, 2 reference only, 3 both
  std::vector<std::uint8_t> cover(n);
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x) {
      const bool t = target_mask.at<std::uint8_t>(y, x) != 0;
      const bool f = reference_mask.at<std::uint8_t>(y, x) != 0;
      cover[r.index(x, y)] = std::uint8_t((t ? 1 : 0) | (f ? 2 : 0));
      r.overlap[r.index(x, y)] = t && f;
    }
  auto cov = [&](int x, int y) -> int {
    if (x < 0 || y < 0 || x >= r.width || y >= r.height) return 0;
    return cover[r.index(x, y)];
  };

  static constexpr int dx4[4] = {1, -1, 0, 0}, dy4[4] = {0, 0, 1, -1};
  for (int y = 0; y < r.height; ++y)
    for (int x = 0; x < r.width; ++x) {
      if (!r.overlap[r.index(x, y)]) continue;
      int t4 = 0, f4 = 0;
      for (int k = 0; k < 4; ++k) {
        const int c = cov(x + dx4[k], y + dy4[k]);
        t4 += c == 1;
        f4 += c == 2;
      }
      if (t4 == 0 && f4 == 0) continue;
      std::int8_t lab;
      if (f4 == 0) {
        lab = kTarget;
      } else if (t4 == 0) {
        lab = kReference;
      } else {
        int t8 = 0, f8 = 0;
        for (int oy = -1; oy <= 1; ++oy)
          for (int ox = -1; ox <= 1; ++ox) {
            if (!ox && !oy) continue;
            const int c = cov(x + ox, y + oy);
            t8 += c == 1;
            f8 += c == 2;
          }
        lab = t8 > f8 ? kTarget : kReference;
      }
      r.anchor[r.index(x, y)] = lab;
    }

  const bool missing_t = r.anchor_count(kTarget) == 0;
  const bool missing_r = r.anchor_count(kReference) == 0;
  if (missing_t || missing_r) {
    // Coverage centroids along the stitching axis decide which extreme
    // belongs to which image.
    const bool horiz = direction == Direction::Horizontal;
    double ct = 0, cr = 0, nt = 0, nr = 0;
    for (int y = 0; y < r.height; ++y)
      for (int x = 0; x < r.width; ++x) {
        const int c = cover[r.index(x, y)];
        const double coord = horiz ? x : y;
        if (c & 1) ct += coord, nt += 1;
        if (c & 2) cr += coord, nr += 1;
      }
    const bool target_first = nt == 0 || nr == 0 || ct / nt <= cr / nr;
    const std::int8_t first = target_first ? kTarget : kReference;
    const std::int8_t last = target_first ? kReference : kTarget;
    auto assign = [&](int x, int y, std::int8_t lab) {
      const bool needed = (lab == kTarget && missing_t) || (lab == kReference && missing_r);
      auto& a = r.anchor[r.index(x, y)];
      if (needed && a == kUnlabeled) a = lab;
    };
    const int lines = horiz ? r.height : r.width;
    const int span = horiz ? r.width : r.height;
    for (int l = 0; l < lines; ++l) {
      int lo = -1, hi = -1;
      for (int s = 0; s < span; ++s) {
        const int x = horiz ? s : l, y = horiz ? l : s;
        if (r.overlap[r.index(x, y)]) {
          if (lo < 0) lo = s;
          hi = s;
        }
      }
      if (lo < 0 || lo == hi) continue;
      assign(horiz ? lo : l, horiz ? l : lo, first);
      assign(horiz ? hi : l, horiz ? l : hi, last);
    }
  }
  return r;
}

EdgeCostMap::EdgeCostMap(int w, int h_)
    : width(w),
      height(h_),
      horizontal(static_cast<std::size_t>(h_) * std::max(w - 1, 0), 0.0),
      vertical(static_cast<std::size_t>(std::max(h_ - 1, 0)) * w, 0.0) {}

cv::Mat to_lab(const cv::Mat& bgr) {
  cv::Mat f, lab;
  bgr.convertTo(f, CV_32FC3, 1.0 / 255.0);
  cv::cvtColor(f, lab, cv::COLOR_BGR2Lab);
  return lab;
}

EdgeCostMap perception_cost(const cv::Mat& warped_target, const cv::Mat& reference,
                            const OverlapRegion& region, const cv::Mat& saliency,
                            const PerceptionParams& params) {
  if (region.size() == 0) throw EmptyOverlap("overlap region has no pixels");
  CV_Assert(warped_target.size() == reference.size());
  CV_Assert(warped_target.cols == region.width && warped_target.rows == region.height);

  const cv::Mat lt = to_lab(warped_target), lr = to_lab(reference);
  std::vector<double> term(region.overlap.size(), 0.0);
  for (int y = 0; y < region.height; ++y)
    for (int x = 0; x < region.width; ++x) {
      if (!region.in_overlap(x, y)) continue;
      const auto& a = lt.at<cv::Vec3f>(y, x);
      const auto& b = lr.at<cv::Vec3f>(y, x);
      const double d0 = double(a[0]) - b[0], d1 = double(a[1]) - b[1], d2 = double(a[2]) - b[2];
      const double delta = std::sqrt(d0 * d0 + d1 * d1 + d2 * d2);
      const double s = saliency.empty() ? 1.0 : saliency.at<double>(y, x);
      term[region.index(x, y)] = s / (1.0 + std::exp(-(delta - params.mu) / params.softness));
    }

  EdgeCostMap costs(region.width, region.height);
  for (int y = 0; y < region.height; ++y)
    for (int x = 0; x < region.width; ++x) {
      if (!region.in_overlap(x, y)) continue;
      const double tp = term[region.index(x, y)];
      if (region.in_overlap(x + 1, y)) costs.h(x, y) = 0.5 * (tp + term[region.index(x + 1, y)]);
      if (region.in_overlap(x, y + 1)) costs.v(x, y) = 0.5 * (tp + term[region.index(x, y + 1)]);
    }
  return costs;
}

double cut_cost(const EdgeCostMap& costs, const OverlapRegion& region,
                const std::vector<std::int8_t>& labels) {
  double total = 0.0;
  for (int y = 0; y < region.height; ++y)
    for (int x = 0; x + 1 < region.width; ++x)
      if (region.in_overlap(x, y) && region.in_overlap(x + 1, y) &&
          labels[region.index(x, y)] != labels[region.index(x + 1, y)])
        total += costs.h(x, y);
  for (int y = 0; y + 1 < region.height; ++y)
    for (int x = 0; x < region.width; ++x)
      if (region.in_overlap(x, y) && region.in_overlap(x, y + 1) &&
          labels[region.index(x, y)] != labels[region.index(x, y + 1)])
        total += costs.v(x, y);
  return total;
}

SeamResult find_seam(const EdgeCostMap& costs, const OverlapRegion& region) {
  if (region.size() == 0) throw EmptyOverlap("overlap region has no pixels");
  const std::size_t nt = region.anchor_count(kTarget), nr = region.anchor_count(kReference);
  if (nt == 0 || nr == 0)
    throw NoAnchor(std::string("overlap has no ") + (nt == 0 ? "target" : "reference") +
                   "-side anchor pixels (" + std::to_string(nt) + " target, " +
                   std::to_string(nr) + " reference anchors over " +
                   std::to_string(region.size()) + " overlap pixels)");

  std::vector<std::int64_t> node(region.overlap.size(), -1);
  std::size_t count = 0;
  for (std::size_t i = 0; i < region.overlap.size(); ++i)
    if (region.overlap[i]) node[i] = static_cast<std::int64_t>(count++);

  double total = 1.0;
  for (double c : costs.horizontal) total += c;
  for (double c : costs.vertical) total += c;

  MaxFlow flow(count);
  for (int y = 0; y < region.height; ++y)
    for (int x = 0; x < region.width; ++x) {
      if (!region.in_overlap(x, y)) continue;
      const auto n = static_cast<std::size_t>(node[region.index(x, y)]);
      if (region.in_overlap(x + 1, y)) {
        const double c = costs.h(x, y);
        flow.add_edge(n, static_cast<std::size_t>(node[region.index(x + 1, y)]), c, c);
      }
      if (region.in_overlap(x, y + 1)) {
        const double c = costs.v(x, y);
        flow.add_edge(n, static_cast<std::size_t>(node[region.index(x, y + 1)]), c, c);
      }
      const auto a = region.anchor[region.index(x, y)];
      if (a == kTarget) flow.add_source(n, total);
      if (a == kReference) flow.add_sink(n, total);
    }
  flow.solve();

  SeamResult out;
  out.width = region.width;
  out.height = region.height;
  out.labels.assign(region.overlap.size(), kUnlabeled);
  for (std::size_t i = 0; i < region.overlap.size(); ++i)
    if (node[i] >= 0)
      out.labels[i] = flow.on_source_side(static_cast<std::size_t>(node[i])) ? kTarget : kReference;

  static constexpr int dx4[4] = {1, -1, 0, 0}, dy4[4] = {0, 0, 1, -1};
  for (int y = 0; y < region.height; ++y)
    for (int x = 0; x < region.width; ++x) {
      if (!region.in_overlap(x, y)) continue;
      const auto lab = out.labels[region.index(x, y)];
      for (int k = 0; k < 4; ++k) {
        const int nx = x + dx4[k], ny = y + dy4[k];
        if (region.in_overlap(nx, ny) && out.labels[region.index(nx, ny)] != lab) {
          out.seam_pixels.push_back({x, y});
          break;
        }
      }
    }
  out.total_cost = cut_cost(costs, region, out.labels);
  return out;
}

double zncc_quality_gray(const SeamResult& seam, const OverlapRegion& region,
                         const std::vector<double>& ga, const std::vector<double>& gb, int patch) {
  if (patch < 1 || patch % 2 == 0) throw std::invalid_argument("patch size must be odd");
  if (seam.seam_pixels.empty()) throw Error("seam has no pixels");
  const int r = patch / 2;
  double sum = 0.0;
  for (const auto& sp : seam.seam_pixels) {
    double sa = 0, sb = 0, n = 0;
    const int x0 = std::max(sp.x - r, 0), x1 = std::min(sp.x + r, region.width - 1);
    const int y0 = std::max(sp.y - r, 0), y1 = std::min(sp.y + r, region.height - 1);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        if (region.overlap[region.index(x, y)]) {
          sa += ga[region.index(x, y)];
          sb += gb[region.index(x, y)];
          n += 1;
        }
    const double ma = sa / n, mb = sb / n;
    double va = 0, vb = 0, cov = 0;
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        if (region.overlap[region.index(x, y)]) {
          const double a = ga[region.index(x, y)] - ma, b = gb[region.index(x, y)] - mb;
          va += a * a;
          vb += b * b;
          cov += a * b;
        }
    double zncc;
    if (va == 0.0 && vb == 0.0)
      zncc = std::abs(ma - mb) <= 1.0 ? 1.0 : 0.0;
    else if (va == 0.0 || vb == 0.0)
      zncc = 0.0;
    else
      zncc = std::clamp(cov / (va == vb ? va : std::sqrt(va) * std::sqrt(vb)), -1.0, 1.0);
    sum += 0.5 * (1.0 - zncc);
  }
  return sum / static_cast<double>(seam.seam_pixels.size());
}

double zncc_quality(const SeamResult& seam, const OverlapRegion& region,
                    const cv::Mat& warped_target, const cv::Mat& reference, int patch) {
  return zncc_quality_gray(seam, region, luma(warped_target), luma(reference), patch);
}

cv::Mat composite(const CanvasImage& target, const CanvasImage& reference, const SeamResult& seam,
                  double feather_radius) {
  const int w = target.image.cols, h = target.image.rows;
  cv::Mat out = cv::Mat::zeros(h, w, CV_8UC3);
  cv::Mat target_side(h, w, CV_8U, cv::Scalar(0));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const bool t = target.mask.at<std::uint8_t>(y, x) != 0;
      const bool r = reference.mask.at<std::uint8_t>(y, x) != 0;
      const bool use_t = t && (!r || seam.label(x, y) == kTarget);
      if (use_t) {
        out.at<cv::Vec3b>(y, x) = target.image.at<cv::Vec3b>(y, x);
        target_side.at<std::uint8_t>(y, x) = 255;
      } else if (r) {
        out.at<cv::Vec3b>(y, x) = reference.image.at<cv::Vec3b>(y, x);
      }
    }
  if (feather_radius <= 0.0) return out;

  // Distance to the opposite side; blend only where both images exist.
  cv::Mat not_target, dist_to_ref, dist_to_target;
  cv::bitwise_not(target_side, not_target);
  cv::distanceTransform(target_side, dist_to_ref, cv::DIST_L2, cv::DIST_MASK_PRECISE, CV_64F);
  cv::distanceTransform(not_target, dist_to_target, cv::DIST_L2, cv::DIST_MASK_PRECISE, CV_64F);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!target.mask.at<std::uint8_t>(y, x) || !reference.mask.at<std::uint8_t>(y, x)) continue;
      const bool t = target_side.at<std::uint8_t>(y, x) != 0;
      const double s = t ? dist_to_ref.at<double>(y, x) - 0.5 : -(dist_to_target.at<double>(y, x) - 0.5);
      if (std::abs(s) >= feather_radius) continue;
      const double alpha = std::clamp(0.5 + s / (2.0 * feather_radius), 0.0, 1.0);
      const auto& a = target.image.at<cv::Vec3b>(y, x);
      const auto& b = reference.image.at<cv::Vec3b>(y, x);
      auto& o = out.at<cv::Vec3b>(y, x);
      for (int c = 0; c < 3; ++c) o[c] = cv::saturate_cast<std::uint8_t>(alpha * a[c] + (1 - alpha) * b[c]);
    }
  return out;
}

void dump_seam(const SeamResult& seam, const CanvasImage& target, const CanvasImage& reference,
               const std::filesystem::path& path) {
  cv::Mat mask(seam.height, seam.width, CV_8U, cv::Scalar(128));
  for (int y = 0; y < seam.height; ++y)
    for (int x = 0; x < seam.width; ++x) {
      const auto lab = seam.label(x, y);
      if (lab == kTarget)
        mask.at<std::uint8_t>(y, x) = 0;
      else if (lab == kReference)
        mask.at<std::uint8_t>(y, x) = 255;
      else if (target.mask.at<std::uint8_t>(y, x))
        mask.at<std::uint8_t>(y, x) = 0;
      else if (reference.mask.at<std::uint8_t>(y, x))
        mask.at<std::uint8_t>(y, x) = 255;
    }
  if (!cv::imwrite(path.string(), mask)) throw Error("cannot write " + path.string());

  nlohmann::json j;
  j["width"] = seam.width;
  j["height"] = seam.height;
  j["total_cost"] = seam.total_cost;
  auto pts = nlohmann::json::array();
  for (const auto& p : seam.seam_pixels) pts.push_back({p.x, p.y});
  j["seam_pixels"] = std::move(pts);
  std::ofstream out(path.string() + ".json");
  if (!out) throw Error("cannot write " + path.string() + ".json");
  out << j.dump(2) << '\n';
}

}  // namespace pstitch

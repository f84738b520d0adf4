// One PASS/FAIL line per acceptance criterion. Exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <opencv2/imgcodecs.hpp>

#include "oracles.hpp"
#include "pstitch/pipeline.hpp"
#include "scene.hpp"
#include "tempdir.hpp"

using namespace pstitch;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

void report(int n, bool ok, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", n, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  failures += !ok;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Vec9 flat(const Eigen::Matrix3d& m) {
  Vec9 v;
  v << m(0, 0), m(0, 1), m(0, 2), m(1, 0), m(1, 1), m(1, 2), m(2, 0), m(2, 1), m(2, 2);
  return v;
}

double crde_oracle(const CorrespondenceGraph& g, const DualFeatureSet& set, int u, int v) {
  auto res = [&](int h, int f) {
    const Eigen::Matrix3d m = g.local_homography[h]->matrix();
    const auto& vert = g.vertices[f];
    if (vert.kind == VertexKind::Point) return oracle::point_residual(m, set.points[*vert.feature_index]);
    return oracle::line_residual(m, set.lines[*vert.feature_index]);
  };
  return res(u, v) + res(v, u);
}

// Stitches seen so far, for the iteration-cap check.
std::vector<StitchOutput> stitches;

bool caps_hold(std::span<const HypothesisOutcome> outcomes, std::string& why) {
  for (const auto& h : outcomes) {
    if (h.iterations_used < 1 || h.iterations_used > 5) {
      why = "iterations_used " + std::to_string(h.iterations_used);
      return false;
    }
    if (h.iterations_used < 5 && !(h.iterations.back().mean_vertex_change < 1.0)) {
      why = fmt("stopped at change %.3f px", h.iterations.back().mean_vertex_change);
      return false;
    }
  }
  return true;
}

void criterion1() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  double worst = 0;
  for (int i = 0; i < 50; ++i) {
    const auto truth = scene::random_homography(rng, 25.0);
    const auto set = scene::homography_set(rng, truth, 20, 3);
    const auto sys = build_design_system(set);
    const Vec9 h = solve_mdlt(sys, Eigen::VectorXd::Ones(sys.rows())).vector();
    const Vec9 o = flat(oracle::dlt(set));
    worst = std::max(worst, std::min((h - o).cwiseAbs().maxCoeff(), (h + o).cwiseAbs().maxCoeff()));
  }
  const double t = seconds_since(t0);
  report(1, worst < 1e-9 && t < 1.0, fmt("max |dh| %.2e over 50 scenes, %.3f s", worst, t));
}

void criterion2() {
  const auto t0 = Clock::now();
  double single_max = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto sc = scene::single_plane(seed);
    const auto g = build_graph(sc.set, Direction::Horizontal);
    for (const auto& e : g.edges)
      if (!g.is_terminal(e.u) && !g.is_terminal(e.v)) single_max = std::max(single_max, e.raw_weight);
  }

  const auto sc = scene::two_plane(1);
  std::vector<double> disagreement;
  for (const auto& p : sc.set.points)
    disagreement.push_back((apply_homography(sc.planes[0], p.p) - apply_homography(sc.planes[1], p.p)).norm());
  std::nth_element(disagreement.begin(), disagreement.begin() + disagreement.size() / 2, disagreement.end());
  const double median = disagreement[disagreement.size() / 2];

  const auto g = build_graph(sc.set, Direction::Horizontal);
  double within = 0, cross = INFINITY, oracle_gap = 0;
  int cross_edges = 0;
  for (const auto& e : g.edges) {
    if (g.is_terminal(e.u) || g.is_terminal(e.v)) continue;
    oracle_gap = std::max(oracle_gap, std::abs(e.raw_weight - crde_oracle(g, sc.set, e.u, e.v)) /
                                          std::max(1.0, e.raw_weight));
    if (sc.plane_of[e.u] == sc.plane_of[e.v]) {
      within = std::max(within, e.raw_weight);
    } else {
      cross = std::min(cross, e.raw_weight);
      ++cross_edges;
    }
  }
  const double t = seconds_since(t0);
  const bool ok = single_max < 1e-6 && median >= 20 && within < 10 && cross > 10 && cross_edges > 0 &&
                  oracle_gap <= 1e-9 && t < 10;
  report(2, ok,
         fmt("single-plane max %.1e; two-plane within max %.2f, cross min %.2f", single_max, within, cross) +
             fmt(", oracle gap %.1e, median plane disagreement %.1f px, %.2f s", oracle_gap, median, t));
}

void criterion3() {
  int good = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto sc = scene::two_plane(seed);
    const auto r = generate_hypotheses(build_graph(sc.set, Direction::Horizontal), 10, 30);
    bool ok = r.hypotheses.size() == 2;
    std::set<int> planes;
    for (const auto& h : r.hypotheses) {
      if (!ok) break;
      int votes[2] = {0, 0};
      for (int m : h.members) ++votes[sc.plane_of[m]];
      const int p = votes[1] > votes[0];
      planes.insert(p);
      const long truth = std::count(sc.plane_of.begin(), sc.plane_of.end(), p);
      const long misplaced = votes[1 - p] + (truth - votes[p]);
      ok = ok && misplaced <= 2;
    }
    ok = ok && planes.size() == 2;
    good += ok;
    if (!ok) detail += " two-plane seed " + std::to_string(seed) + " gave " + std::to_string(r.hypotheses.size());
  }
  int single = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto sc = scene::single_plane(seed);
    const auto r = generate_hypotheses(build_graph(sc.set, Direction::Horizontal), 10, 30);
    single += r.hypotheses.size() == 1;
  }
  report(3, good == 20 && single == 20,
         std::to_string(good) + "/20 two-plane partitions, " + std::to_string(single) +
             "/20 single-plane scenes with one hypothesis" + detail);
}

void criterion4() {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0;
  int connected = 0;
  bool ok = true;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 3 + static_cast<int>(rng() % 48);  // features plus two terminals <= 50
    const int features = n - 2;
    CorrespondenceGraph g;
    for (int i = 0; i < features; ++i) g.vertices.push_back({VertexKind::Point, static_cast<std::size_t>(i), Vec2(i, 0)});
    g.num_points = static_cast<std::size_t>(features);
    g.source = features;
    g.sink = features + 1;
    g.vertices.push_back({VertexKind::Source, std::nullopt, Vec2(-1, 0)});
    g.vertices.push_back({VertexKind::Sink, std::nullopt, Vec2(features, 0)});
    g.adjacency.resize(n);
    g.local_homography.resize(n);
    std::vector<oracle::Edge> edges;
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b)
        if (u(rng) < 0.15) {
          const double w = u(rng);
          const int e = static_cast<int>(g.edges.size());
          g.edges.push_back({a, b, 0.0, w});
          g.adjacency[a].emplace_back(b, e);
          g.adjacency[b].emplace_back(a, e);
          edges.push_back({a, b, w});
        }
    const double expect = oracle::bellman_ford(n, edges, g.source, g.sink);
    if (std::isinf(expect)) {
      try {
        shortest_path(g);
        ok = false;
      } catch (const Disconnected&) {
      }
      continue;
    }
    ++connected;
    worst = std::max(worst, std::abs(path_cost(g, shortest_path(g)) - expect));
  }
  report(4, ok && worst <= 1e-12 && connected > 100,
         fmt("max |cost - oracle| %.1e over %.0f connected graphs of 200", worst, connected));
}

void criterion5() {
  const auto sc = scene::two_plane(3);
  const auto m = init_mesh(sc.set.target_dims, 150, sc.planes[0]);
  Hypothesis hyp;
  for (std::size_t i = 0; i < sc.plane_of.size(); ++i)
    if (sc.plane_of[i] == 0) hyp.members.push_back(static_cast<int>(i));
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> u(0.2, 3.0);
  std::normal_distribution<double> n(0.0, 8.0);
  FeatureWeights w = FeatureWeights::ones(sc.set);
  for (Eigen::Index i = 0; i < w.w_point.size(); ++i) w.w_point[i] = u(rng);
  for (Eigen::Index i = 0; i < w.w_line.size(); ++i) w.w_line[i] = u(rng);
  std::vector<double> cells(static_cast<std::size_t>(m.cols * m.rows));
  for (auto& c : cells) c = u(rng);
  const auto terms = build_terms(m, hyp, sc.set, w, WarpParams{}, cells);
  const int dim = static_cast<int>(m.V.size());
  const auto sys = assemble(terms, dim);
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd X = m.V_init;
    for (Eigen::Index i = 0; i < X.size(); ++i) X[i] += n(rng);
    const Eigen::VectorXd g = sys.gradient(X);
    Eigen::VectorXd fd(dim);
    for (int i = 0; i < dim; ++i) {
      Eigen::VectorXd a = X, b = X;
      a[i] += 1e-5;
      b[i] -= 1e-5;
      fd[i] = (evaluate(terms, a).total() - evaluate(terms, b).total()) / 2e-5;
    }
    worst = std::max(worst, (g - fd).norm() / std::max(1.0, g.norm()));
  }
  const auto solved = assemble_and_solve(m, hyp, sc.set, w, WarpParams{}, cells);
  const double resid = sys.gradient(solved.mesh.V_hat).norm() / std::max(1.0, sys.b.norm());
  report(5, worst < 1e-5 && resid < 1e-6,
         fmt("max relative gradient error %.1e at 20 points; solver residual %.1e x max(1,|b|)", worst, resid));
}

cv::Mat textured(int w, int h) {
  cv::Mat img(h, w, CV_8UC3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.at<cv::Vec3b>(y, x) = scene::texture(x, y);
  return img;
}

void criterion6() {
  const cv::Mat img = textured(320, 240);
  std::mt19937_64 rng(606);
  const auto set = scene::homography_set(rng, Homography::identity(), 80, 6, 320, 240);
  auto o = stitch(img, img, set, StitchConfig{});
  const auto& c = o.chosen_outcome();
  const bool same = o.composite.size() == img.size() && cv::norm(o.composite, img, cv::NORM_INF) == 0.0;
  report(6, o.outcomes.size() == 1 && c.iterations_used <= 2 && c.seam.zncc_score == 0.0 && same,
         fmt("%.0f hypothesis, %.0f iterations, zncc %.3g", static_cast<double>(o.outcomes.size()),
             c.iterations_used, c.seam.zncc_score) +
             (same ? ", composite identical" : ", composite differs"));
  stitches.push_back(std::move(o));
}

void criterion7() {
  std::mt19937_64 rng(707);
  int tested = 0, equal = 0;
  while (tested < 100) {
    const int w = 2 + static_cast<int>(rng() % 5), h = 2 + static_cast<int>(rng() % 5);
    OverlapRegion reg;
    reg.width = w;
    reg.height = h;
    reg.overlap.resize(static_cast<std::size_t>(w * h));
    reg.anchor.assign(reg.overlap.size(), kUnlabeled);
    for (auto& o : reg.overlap) o = (rng() % 10) < 8;
    if (reg.size() > 25) continue;
    for (std::size_t i = 0; i < reg.overlap.size(); ++i)
      if (reg.overlap[i]) {
        const int r = static_cast<int>(rng() % 6);
        reg.anchor[i] = r == 0 ? kTarget : r == 1 ? kReference : kUnlabeled;
      }
    if (reg.anchor_count(kTarget) == 0 || reg.anchor_count(kReference) == 0) continue;
    EdgeCostMap c(w, h);
    for (auto& v : c.horizontal) v = static_cast<double>(rng() % 20) / 4.0;
    for (auto& v : c.vertical) v = static_cast<double>(rng() % 20) / 4.0;
    const double got = find_seam(c, reg).total_cost;
    equal += got == oracle::min_cut_bruteforce(w, h, reg.overlap, reg.anchor, c.horizontal, c.vertical);
    ++tested;
  }
  report(7, equal == 100, std::to_string(equal) + "/100 overlaps match exhaustive enumeration exactly");
}

void criterion8() {
  StitchConfig cfg;
  cfg.target_cells = 600;
  for (std::uint64_t seed : {1, 4, 7}) {
    const auto sc = scene::two_plane(seed);
    stitches.push_back(stitch(scene::render_target(sc), scene::render_reference(sc), sc.set, cfg));
  }
  const auto sc = scene::single_plane(2);
  stitches.push_back(stitch(scene::render_target(sc), scene::render_reference(sc), sc.set, cfg));
  std::string why;
  // Both planes in one hypothesis: the mesh has to bend, so the loop runs.
  std::vector<HypothesisOutcome> mixed;
  for (std::uint64_t seed : {2, 5}) {
    const auto ms = scene::two_plane(seed);
    Hypothesis all;
    for (std::size_t i = 0; i < ms.set.num_features(); ++i) all.members.push_back(static_cast<int>(i));
    mixed.push_back(align_hypothesis(scene::render_target(ms), scene::render_reference(ms), ms.set, all, 0,
                                     Direction::Horizontal, cfg));
  }
  bool ok = caps_hold(mixed, why);
  int outcomes = 0, max_used = 0;
  for (const auto& h : mixed) ++outcomes, max_used = std::max(max_used, h.iterations_used);
  for (const auto& o : stitches) {
    ok = ok && caps_hold(o.outcomes, why);
    for (const auto& h : o.outcomes) ++outcomes, max_used = std::max(max_used, h.iterations_used);
  }
  report(8, ok,
         fmt("%.0f stitches plus 2 mixed-plane alignments, %.0f outcomes, max iterations_used %.0f",
             static_cast<double>(stitches.size()), outcomes, max_used) +
             (why.empty() ? "" : "; " + why));
}

void criterion9() {
  const int w = 60, h = 40;
  OverlapRegion reg;
  reg.width = w;
  reg.height = h;
  reg.overlap.assign(static_cast<std::size_t>(w * h), 1);
  reg.anchor.assign(reg.overlap.size(), kUnlabeled);
  SeamResult seam;
  seam.width = w;
  seam.height = h;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) seam.labels.push_back(x < 30 ? kTarget : kReference);
  for (int y = 0; y < h; ++y) seam.seam_pixels.push_back({29, y}), seam.seam_pixels.push_back({30, y});

  const cv::Mat a = textured(w, h);
  const double identical = zncc_quality(seam, reg, a, a);
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> u(0.0, 255.0);
  double lo = 1, hi = 0, drift = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> ga(reg.overlap.size()), gb(reg.overlap.size());
    const double mix = trial / 49.0;
    for (std::size_t i = 0; i < ga.size(); ++i) {
      ga[i] = u(rng);
      gb[i] = (trial % 2 ? 1 : -1) * mix * ga[i] + (1 - mix) * u(rng);
    }
    const double s = zncc_quality_gray(seam, reg, ga, gb);
    lo = std::min(lo, s);
    hi = std::max(hi, s);
    for (auto& v : ga) v = 1.5 * v + 10;
    for (auto& v : gb) v = 1.5 * v + 10;
    drift = std::max(drift, std::abs(zncc_quality_gray(seam, reg, ga, gb) - s));
  }
  for (const auto& o : stitches)
    for (const auto& hyp : o.outcomes) {
      lo = std::min(lo, hyp.seam.zncc_score);
      hi = std::max(hi, hyp.seam.zncc_score);
    }
  report(9, identical == 0.0 && lo >= 0.0 && hi <= 1.0 && drift < 1e-9,
         fmt("identical %.3g, range [%.4f, %.4f]", identical, lo, hi) +
             fmt(", max change under gain 1.5 bias 10: %.1e", drift));
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void criterion10() {
  TempDir dir;
  const auto sc = scene::two_plane(1);
  cv::imwrite((dir / "t.png").string(), scene::render_target(sc));
  cv::imwrite((dir / "r.png").string(), scene::render_reference(sc));
  save_correspondences(sc.set, dir / "c.json");
  bool ran = true;
  for (const char* run : {"1", "2"}) {
    const std::string cmd = std::string(STITCH_EXE) + " --target " + (dir / "t.png").string() +
                            " --ref " + (dir / "r.png").string() + " --corr " + (dir / "c.json").string() +
                            " --out " + (dir / (std::string("out") + run + ".png")).string() +
                            " --report " + (dir / (std::string("rep") + run + ".json")).string() +
                            " >/dev/null 2>&1";
    ran = ran && std::system(cmd.c_str()) == 0;
  }
  bool png = false, rep = false;
  if (ran) {
    png = slurp(dir / "out1.png") == slurp(dir / "out2.png") && !slurp(dir / "out1.png").empty();
    auto a = nlohmann::json::parse(slurp(dir / "rep1.json"));
    auto b = nlohmann::json::parse(slurp(dir / "rep2.json"));
    a.erase("timings");
    b.erase("timings");
    rep = a.dump() == b.dump();
  }
  report(10, ran && png && rep,
         std::string(ran ? "two CLI runs" : "CLI run failed") + (png ? ", composites byte-identical" : ", composites differ") +
             (rep ? ", reports identical without timings" : ", reports differ"));
}

}  // namespace

int main() {
  try {
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criterion5();
    criterion6();
    criterion7();
    criterion8();
    criterion9();
    criterion10();
  } catch (const std::exception& e) {
    std::printf("aborted: %s\n", e.what());
    return 2;
  }
  return failures ? 1 : 0;
}

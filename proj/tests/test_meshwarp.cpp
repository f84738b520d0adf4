#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "pstitch/meshwarp.hpp"
#include "scene.hpp"

using namespace pstitch;

namespace {

Hypothesis all_members(const DualFeatureSet& set) {
  Hypothesis h;
  for (std::size_t i = 0; i < set.num_features(); ++i) h.members.push_back(static_cast<int>(i));
  return h;
}

cv::Mat checkerboard(int w, int h, int square) {
  cv::Mat img(h, w, CV_8UC3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const bool on = ((x / square) + (y / square)) % 2 == 0;
      img.at<cv::Vec3b>(y, x) = on ? cv::Vec3b(230, 200, 40) : cv::Vec3b(20, 60, 210);
    }
  return img;
}

cv::Mat smooth_image(int w, int h) {
  cv::Mat img(h, w, CV_8UC3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.at<cv::Vec3b>(y, x) = scene::texture(x, y);
  return img;
}

}  // namespace

TEST_CASE("mesh layout") {
  auto m = init_mesh({400, 400}, 16);
  CHECK(m.cols == 4);
  CHECK(m.rows == 4);
  CHECK(m.num_vertices() == 25);
  CHECK(m.cell_w == 100.0);
  CHECK(m.cell_h == 100.0);

  m = init_mesh({640, 480}, 1600);
  const double ratio = static_cast<double>(m.cols) / m.rows;
  CHECK(std::abs(ratio / (4.0 / 3.0) - 1.0) < 0.1);
  CHECK(std::abs(m.cols * m.rows - 1600) < 80);

  m = init_mesh({333, 127}, 50);
  for (int r = 0; r <= m.rows; ++r) {
    CHECK(MeshGrid::at(m.V, m.vertex(0, r)).x() == 0.0);
    CHECK(MeshGrid::at(m.V, m.vertex(m.cols, r)).x() == 333.0);
  }
  for (int c = 0; c <= m.cols; ++c) {
    CHECK(MeshGrid::at(m.V, m.vertex(c, 0)).y() == 0.0);
    CHECK(MeshGrid::at(m.V, m.vertex(c, m.rows)).y() == 127.0);
  }
  CHECK(m.V_hat == m.V);
  CHECK(init_mesh({10, 10}, 1).num_vertices() == 4);
  CHECK_THROWS_AS(init_mesh({0, 10}, 4), std::invalid_argument);
  CHECK_THROWS_AS(init_mesh({10, 10}, 0), std::invalid_argument);

  const auto h = Homography::translation(7, -3);
  m = init_mesh({100, 80}, 20, h);
  for (int k = 0; k < m.num_vertices(); ++k)
    CHECK((MeshGrid::at(m.V_init, k) - MeshGrid::at(m.V, k) - Vec2(7, -3)).norm() < 1e-12);
  CHECK(m.V_hat == m.V_init);
}

TEST_CASE("bilinear coefficients") {
  const auto m = init_mesh({400, 400}, 16);
  auto bc = bilinear_coeffs(m, {100, 200});
  for (int i = 0; i < 4; ++i) CHECK(bc.weight[i] == (bc.vertex[i] == m.vertex(1, 2) ? 1.0 : 0.0));
  bc = bilinear_coeffs(m, {150, 250});
  for (double w : bc.weight) CHECK(w == 0.25);
  // Bottom-right corner belongs to the last cell.
  bc = bilinear_coeffs(m, {400, 400});
  CHECK(bc.vertex[3] == m.vertex(4, 4));
  CHECK(bc.weight[3] == 1.0);

  CHECK_THROWS_AS(bilinear_coeffs(m, {-0.1, 5}), OutOfMesh);
  CHECK_THROWS_AS(bilinear_coeffs(m, {5, 400.5}), OutOfMesh);
  CHECK_THROWS_AS(bilinear_coeffs(m, {NAN, 5}), OutOfMesh);

  const auto g = init_mesh({317, 211}, 60);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ux(0, 317), uy(0, 211);
  for (int i = 0; i < 1000; ++i) {
    const Vec2 q(ux(rng), uy(rng));
    const auto c = bilinear_coeffs(g, q);
    double sum = 0;
    for (double w : c.weight) {
      CHECK(w >= 0);
      sum += w;
    }
    CHECK(std::abs(sum - 1) < 1e-12);
    CHECK((map_point(g, g.V, q) - q).norm() < 1e-12);
  }
}

TEST_CASE("adaptive weights") {
  DualFeatureSet set;
  set.target_dims = set.ref_dims = {1000, 600};
  set.points = {{{100, 100}, {100, 100}}, {{500, 100}, {500, 100}}, {{300, 400}, {300, 400}}};
  auto m = init_mesh({1000, 600}, 60);
  CHECK(m.cell_size() == 100.0);
  for (int k = 0; k < m.num_vertices(); ++k) m.V_hat[2 * k] += 3.0;
  const Hypothesis h = all_members(set);
  const Canvas canvas{0, 0, 1003, 600};

  CHECK(adaptive_weights(set, h, m, nullptr, canvas).w_point == Eigen::VectorXd::Ones(3));
  SeamResult empty;
  CHECK(adaptive_weights(set, h, m, &empty, canvas).w_point == Eigen::VectorXd::Ones(3));

  SeamResult seam;
  seam.seam_pixels = {{103, 100}};
  const auto w = adaptive_weights(set, h, m, &seam, canvas);
  CHECK(w.w_point[0] == doctest::Approx(1.0).epsilon(1e-12));
  // 400 px = 2 sigma_d away from the only seam pixel.
  CHECK(w.w_point[1] == doctest::Approx(std::exp(-4.0)).epsilon(1e-12));
  CHECK(w.w_point[1] == doctest::Approx(0.0183).epsilon(0.01));
  for (int i = 0; i < 3; ++i) {
    CHECK(w.w_point[i] >= 0);
    CHECK(w.w_point[i] <= AdaptiveParams{}.kappa);
  }
}

TEST_CASE("no alignment features keeps the initialization") {
  const auto h = Homography::translation(4, 2);
  const auto m = init_mesh({120, 90}, 30, h);
  DualFeatureSet set;
  set.target_dims = set.ref_dims = {120, 90};
  const auto r = assemble_and_solve(m, Hypothesis{}, set, FeatureWeights::ones(set), WarpParams{});
  CHECK((r.mesh.V_hat - m.V_init).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(r.energies.total() < 1e-12);
}

TEST_CASE("single-cell translation") {
  DualFeatureSet set;
  set.target_dims = set.ref_dims = {100, 100};
  for (const Vec2 p : {Vec2(10, 20), Vec2(80, 15), Vec2(50, 50), Vec2(25, 90), Vec2(95, 70)})
    set.points.push_back({p, p + Vec2(10, 0)});
  const auto m = init_mesh({100, 100}, 1);
  WarpParams params;
  params.lambda_p = 100.0;
  const auto r = assemble_and_solve(m, all_members(set), set, FeatureWeights::ones(set), params);
  for (int k = 0; k < 4; ++k)
    CHECK((MeshGrid::at(r.mesh.V_hat, k) - MeshGrid::at(m.V, k) - Vec2(10, 0)).norm() < 1e-6);
}

TEST_CASE("energy system properties") {
  const auto sc = scene::two_plane(2);
  const auto m = init_mesh(sc.set.target_dims, 120, sc.planes[0]);
  Hypothesis hyp;
  for (std::size_t i = 0; i < sc.plane_of.size(); ++i)
    if (sc.plane_of[i] == 0) hyp.members.push_back(static_cast<int>(i));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.2, 2.0);
  FeatureWeights w = FeatureWeights::ones(sc.set);
  for (Eigen::Index i = 0; i < w.w_point.size(); ++i) w.w_point[i] = u(rng);
  for (Eigen::Index i = 0; i < w.w_line.size(); ++i) w.w_line[i] = u(rng);
  std::vector<double> cells(static_cast<std::size_t>(m.cols * m.rows));
  for (auto& c : cells) c = u(rng);
  const WarpParams params;
  const auto terms = build_terms(m, hyp, sc.set, w, params, cells);
  const int dim = static_cast<int>(m.V.size());
  const auto sys = assemble(terms, dim);

  SUBCASE("symmetric and consistent with direct evaluation") {
    const Eigen::MatrixXd Q(sys.Q);
    CHECK((Q - Q.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    for (int trial = 0; trial < 5; ++trial) {
      const Eigen::VectorXd X = m.V_init + 3.0 * Eigen::VectorXd::Random(dim);
      const double direct = evaluate(terms, X).total();
      CHECK(std::abs(sys.energy(X) - direct) <= 1e-9 * std::max(1.0, direct));
    }
  }

  SUBCASE("gradient matches central differences") {
    std::mt19937_64 g(11);
    std::normal_distribution<double> n(0.0, 5.0);
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd X = m.V_init;
      for (Eigen::Index i = 0; i < X.size(); ++i) X[i] += n(g);
      const Eigen::VectorXd grad = sys.gradient(X);
      Eigen::VectorXd fd(dim);
      const double step = 1e-5;
      for (int i = 0; i < dim; ++i) {
        Eigen::VectorXd a = X, b = X;
        a[i] += step;
        b[i] -= step;
        fd[i] = (evaluate(terms, a).total() - evaluate(terms, b).total()) / (2 * step);
      }
      CHECK((grad - fd).norm() / std::max(1.0, grad.norm()) < 1e-5);
    }
  }

  SUBCASE("assembly is linear in the terms") {
    std::vector<LinearTerm> all;
    EnergySystem sum;
    sum.Q.resize(dim, dim);
    sum.b = Eigen::VectorXd::Zero(dim);
    for (const auto* group : {&terms.point, &terms.line, &terms.distortion, &terms.saliency, &terms.regularization}) {
      const auto part = assemble(*group, dim);
      sum.Q += part.Q;
      sum.b += part.b;
      sum.constant += part.constant;
      all.insert(all.end(), group->begin(), group->end());
    }
    const auto whole = assemble(all, dim);
    CHECK(Eigen::MatrixXd(whole.Q - sum.Q).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((whole.b - sum.b).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(std::abs(whole.constant - sum.constant) < 1e-9 * std::max(1.0, sum.constant));
  }

  SUBCASE("minimizer, residual and monotonicity") {
    const Eigen::VectorXd X = solve_energy(sys);
    CHECK(sys.gradient(X).norm() <= 1e-6 * std::max(1.0, sys.b.norm()));
    const double e = sys.energy(X);
    CHECK(e <= sys.energy(m.V_init) + 1e-9);
    CHECK(e <= sys.energy(m.V) + 1e-9);
    std::mt19937_64 g(12);
    std::normal_distribution<double> n(0.0, 0.5);
    for (int trial = 0; trial < 10; ++trial) {
      Eigen::VectorXd Y = X;
      for (Eigen::Index i = 0; i < Y.size(); ++i) Y[i] += n(g);
      CHECK(sys.energy(Y) >= e - 1e-9);
    }

    // Reweighted next round still ends no higher than the previous iterate.
    FeatureWeights w2 = w;
    w2.w_point *= 0.5;
    const auto sys2 = assemble(build_terms(m, hyp, sc.set, w2, params, cells), dim);
    CHECK(sys2.energy(solve_energy(sys2)) <= sys2.energy(X) + 1e-9);
  }

  SUBCASE("uniform scaling leaves the minimizer unchanged") {
    WarpParams doubled = params;
    doubled.lambda_p *= 2;
    doubled.lambda_l *= 2;
    doubled.lambda_s *= 2;
    doubled.distortion *= 2;
    doubled.regularization *= 2;
    const Eigen::VectorXd a = solve_energy(sys);
    const Eigen::VectorXd b = solve_energy(assemble(build_terms(m, hyp, sc.set, w, doubled, cells), dim));
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-6);
  }

  SUBCASE("only hypothesis members constrain the mesh") {
    Hypothesis other;
    for (std::size_t i = 0; i < sc.plane_of.size(); ++i)
      if (sc.plane_of[i] == 1) other.members.push_back(static_cast<int>(i));
    const auto t = build_terms(m, hyp, sc.set, w, params, cells);
    const auto o = build_terms(m, other, sc.set, w, params, cells);
    CHECK(t.point.size() == 2 * hyp.point_indices(sc.set.points.size()).size());
    CHECK(t.line.size() == 3 * hyp.line_indices(sc.set.points.size()).size());
    CHECK(o.point.size() == 2 * other.point_indices(sc.set.points.size()).size());
  }

  CHECK_THROWS_AS(build_terms(m, hyp, sc.set, w, params, std::vector<double>(3, 1.0)), std::invalid_argument);
}

TEST_CASE("solver refuses an unconstrained system") {
  DualFeatureSet set;
  set.target_dims = set.ref_dims = {50, 50};
  const auto m = init_mesh({50, 50}, 4);
  WarpParams p;
  p.lambda_s = 0;
  p.distortion = 0;
  p.regularization = 0;
  CHECK_THROWS_AS(assemble_and_solve(m, Hypothesis{}, set, FeatureWeights::ones(set), p), SingularSystem);
}

TEST_CASE("cell saliency") {
  const auto m = init_mesh({40, 20}, 2);
  CHECK(cell_saliency(m, {}) == std::vector<double>{1.0, 1.0});
  cv::Mat s(20, 40, CV_64F, cv::Scalar(0.0));
  s(cv::Rect(20, 0, 20, 20)) = 0.5;
  CHECK(cell_saliency(m, s) == std::vector<double>{0.0, 0.5});
  // Outside the map counts as 1.
  const auto shifted = init_mesh({40, 20}, 2, Homography::translation(100, 0));
  CHECK(cell_saliency(shifted, s) == std::vector<double>{1.0, 1.0});
}

TEST_CASE("canvas bounds") {
  auto m = init_mesh({100, 80}, 20, Homography::translation(-10.5, 4));
  auto c = compute_canvas(m, {100, 80});
  CHECK(c == Canvas{-11, 0, 111, 84});
  m = init_mesh({100, 80}, 20);
  CHECK(compute_canvas(m, {60, 90}) == Canvas{0, 0, 100, 90});
}

TEST_CASE("warp fixed points") {
  const cv::Mat img = smooth_image(90, 70);
  SUBCASE("identity") {
    const auto m = init_mesh({90, 70}, 30);
    const auto c = compute_canvas(m, {90, 70});
    const auto w = warp_image(img, m, c);
    CHECK(w.folded_cells == 0);
    int covered = 0;
    for (int y = 0; y < c.height; ++y)
      for (int x = 0; x < c.width; ++x)
        if (w.canvas_image.mask.at<std::uint8_t>(y, x)) {
          ++covered;
          CHECK(w.canvas_image.image.at<cv::Vec3b>(y, x) == img.at<cv::Vec3b>(y, x));
        }
    CHECK(covered == 90 * 70);
  }
  SUBCASE("translation") {
    const auto m = init_mesh({90, 70}, 30, Homography::translation(13, 6));
    const auto c = compute_canvas(m, {90, 70});
    const auto w = warp_image(img, m, c);
    int covered = 0;
    for (int y = 0; y < c.height; ++y)
      for (int x = 0; x < c.width; ++x) {
        const int sx = x + c.x0 - 13, sy = y + c.y0 - 6;
        const bool inside = sx >= 0 && sy >= 0 && sx < 90 && sy < 70;
        CHECK((w.canvas_image.mask.at<std::uint8_t>(y, x) != 0) == inside);
        if (inside) {
          ++covered;
          CHECK(w.canvas_image.image.at<cv::Vec3b>(y, x) == img.at<cv::Vec3b>(sy, sx));
        }
      }
    CHECK(covered == 90 * 70);
  }
}

TEST_CASE("mesh warp approximates a homography warp") {
  std::mt19937_64 rng(21);
  const cv::Mat img = checkerboard(320, 240, 16);
  const auto h = scene::random_homography(rng, -20);
  const auto m = init_mesh({320, 240}, 1600, h);
  const auto c = compute_canvas(m, {320, 240});
  const auto w = warp_image(img, m, c);
  cv::Mat expect, emask;
  oracle::homography_warp(img, h.matrix(), c.x0, c.y0, c.width, c.height, expect, emask);
  int both = 0, close = 0;
  for (int y = 0; y < c.height; ++y)
    for (int x = 0; x < c.width; ++x) {
      if (!w.canvas_image.mask.at<std::uint8_t>(y, x) || !emask.at<std::uint8_t>(y, x)) continue;
      ++both;
      const auto a = w.canvas_image.image.at<cv::Vec3b>(y, x), b = expect.at<cv::Vec3b>(y, x);
      int diff = 0;
      for (int ch = 0; ch < 3; ++ch) diff = std::max(diff, std::abs(a[ch] - b[ch]));
      close += diff < 2;
    }
  CHECK(both > 300 * 220);
  CHECK(close >= 0.99 * both);
}

TEST_CASE("folded cells are still rendered") {
  const cv::Mat img = smooth_image(40, 40);
  auto m = init_mesh({40, 40}, 4);
  // Pull the centre vertex past the top-left corner of its cells.
  const int k = m.vertex(1, 1);
  m.V_hat[2 * k] = -5;
  m.V_hat[2 * k + 1] = -5;
  const auto c = compute_canvas(m, {40, 40});
  const auto w = warp_image(img, m, c);
  CHECK(w.folded_cells >= 1);
  CHECK(cv::countNonZero(w.canvas_image.mask) > 0);
}

TEST_CASE("mesh dump") {
  const auto m = init_mesh({30, 20}, 6);
  const auto j = mesh_to_json(m);
  CHECK(j["cols"] == m.cols);
  CHECK(j["V"].size() == m.V.size());
  TermEnergies e{1, 2, 3, 4, 5};
  CHECK(e.total() == 15);
  CHECK(to_json(e)["line"] == 2);
}

#include "pstitch/meshwarp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SparseCholesky>

namespace pstitch {

namespace {

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Unit normal n and offset c of the infinite reference line: n . x = c.
std::pair<Vec2, double> reference_line(const LinePair& l) {
  const Vec2 d = l.b_ref - l.a_ref;
  const Vec2 n = Vec2(-d.y(), d.x()).normalized();
  return {n, n.dot(l.a_ref)};
}

// (s, t) in the unit square with q = bilinear(a, b, c, d; s, t), where a, b,
// c, d are the top-left, top-right, bottom-right, bottom-left corners.
std::optional<Vec2> inverse_bilinear(const Vec2& q, const Vec2& a, const Vec2& b, const Vec2& c,
                                     const Vec2& d) {
  const Vec2 e = b - a, f = d - a, g = a - b + c - d, h = q - a;
  const double k2 = cross(g, f);
  const double k1 = cross(e, f) + cross(h, g);
  const double k0 = cross(h, e);
  constexpr double tol = 1e-9;
  auto u_of = [&](double v) -> std::optional<double> {
    const Vec2 den = e + g * v;
    const double n2 = den.squaredNorm();
    if (n2 == 0.0) return std::nullopt;
    return (h - f * v).dot(den) / n2;
  };
  auto inside = [&](double u, double v) {
    return u >= -tol && u <= 1 + tol && v >= -tol && v <= 1 + tol;
  };
  const double scale = std::max({std::abs(k1), std::abs(k0), 1e-300});
  if (std::abs(k2) <= 1e-12 * scale) {
    if (k1 == 0.0) return std::nullopt;
    const double v = -k0 / k1;
    const auto u = u_of(v);
    if (u && inside(*u, v)) return Vec2(std::clamp(*u, 0.0, 1.0), std::clamp(v, 0.0, 1.0));
    return std::nullopt;
  }
  const double disc = k1 * k1 - 4 * k0 * k2;
  if (disc < 0) return std::nullopt;
  const double w = std::sqrt(disc);
  // Numerically stable pair of roots.
  const double qq = -0.5 * (k1 + std::copysign(w, k1));
  const double roots[2] = {qq / k2, qq != 0.0 ? k0 / qq : qq / k2};
  for (double v : roots) {
    const auto u = u_of(v);
    if (u && inside(*u, v)) return Vec2(std::clamp(*u, 0.0, 1.0), std::clamp(v, 0.0, 1.0));
  }
  return std::nullopt;
}

std::optional<Vec2> barycentric(const Vec2& q, const Vec2& a, const Vec2& b, const Vec2& c) {
  const double den = cross(b - a, c - a);
  if (den == 0.0) return std::nullopt;
  const double l1 = cross(q - a, c - a) / den;
  const double l2 = cross(b - a, q - a) / den;
  constexpr double tol = 1e-9;
  if (l1 < -tol || l2 < -tol || l1 + l2 > 1 + tol) return std::nullopt;
  return Vec2(l1, l2);
}

void add_similarity_terms(std::vector<LinearTerm>& out, const MeshGrid& mesh, int v1, int v2,
                          int v3, double weight) {
  const Vec2 p1 = MeshGrid::at(mesh.V_init, v1);
  const Vec2 p2 = MeshGrid::at(mesh.V_init, v2);
  const Vec2 p3 = MeshGrid::at(mesh.V_init, v3);
  const Vec2 d = p1 - p2, e = p3 - p2;
  const Vec2 re(e.y(), -e.x());
  const double n2 = e.squaredNorm();
  const double u = d.dot(e) / n2, v = d.dot(re) / n2;
  // x: v1x - v2x - u (v3x - v2x) - v (v3y - v2y)
  LinearTerm tx;
  tx.coeffs = {{2 * v1, 1.0}, {2 * v2, u - 1.0}, {2 * v3, -u}, {2 * v2 + 1, v}, {2 * v3 + 1, -v}};
  tx.weight = weight;
  // y: v1y - v2y - u (v3y - v2y) + v (v3x - v2x)
  LinearTerm ty;
  ty.coeffs = {{2 * v1 + 1, 1.0}, {2 * v2 + 1, u - 1.0}, {2 * v3 + 1, -u}, {2 * v3, v}, {2 * v2, -v}};
  ty.weight = weight;
  out.push_back(std::move(tx));
  out.push_back(std::move(ty));
}

void add_triangles(std::vector<LinearTerm>& out, const MeshGrid& mesh, int c, int r, double weight) {
  const int tl = mesh.vertex(c, r), tr = mesh.vertex(c + 1, r);
  const int bl = mesh.vertex(c, r + 1), br = mesh.vertex(c + 1, r + 1);
  add_similarity_terms(out, mesh, tl, tr, bl, weight);
  add_similarity_terms(out, mesh, br, bl, tr, weight);
}

}  // namespace

MeshGrid init_mesh(const Dims& dims, int target_cells, const std::optional<Homography>& prewarp) {
  if (dims.width <= 0 || dims.height <= 0) throw std::invalid_argument("mesh dims must be positive");
  if (target_cells < 1) throw std::invalid_argument("target_cells must be at least 1");
  MeshGrid m;
  m.dims = dims;
  const double aspect = static_cast<double>(dims.width) / dims.height;
  m.cols = std::max(1, static_cast<int>(std::lround(std::sqrt(target_cells * aspect))));
  m.rows = std::max(1, static_cast<int>(std::lround(static_cast<double>(target_cells) / m.cols)));
  m.cell_w = static_cast<double>(dims.width) / m.cols;
  m.cell_h = static_cast<double>(dims.height) / m.rows;
  const int n = m.num_vertices();
  m.V.resize(2 * n);
  for (int r = 0; r <= m.rows; ++r)
    for (int c = 0; c <= m.cols; ++c) {
      const int k = m.vertex(c, r);
      // Exact borders regardless of rounding in the cell size.
      m.V[2 * k] = c == m.cols ? dims.width : c * m.cell_w;
      m.V[2 * k + 1] = r == m.rows ? dims.height : r * m.cell_h;
    }
  m.V_init = m.V;
  if (prewarp) {
    for (int k = 0; k < n; ++k) {
      const Vec2 p = apply_homography(*prewarp, MeshGrid::at(m.V, k));
      m.V_init[2 * k] = p.x();
      m.V_init[2 * k + 1] = p.y();
    }
  }
  m.V_hat = m.V_init;
  return m;
}

BilinearCoeffs bilinear_coeffs(const MeshGrid& mesh, const Vec2& q) {
  if (!std::isfinite(q.x()) || !std::isfinite(q.y()) || !mesh.dims.contains(q))
    throw OutOfMesh("point (" + std::to_string(q.x()) + ", " + std::to_string(q.y()) +
                    ") outside the mesh");
  const int c = std::min(static_cast<int>(std::floor(q.x() / mesh.cell_w)), mesh.cols - 1);
  const int r = std::min(static_cast<int>(std::floor(q.y() / mesh.cell_h)), mesh.rows - 1);
  const Vec2 tl = MeshGrid::at(mesh.V, mesh.vertex(c, r));
  const Vec2 br = MeshGrid::at(mesh.V, mesh.vertex(c + 1, r + 1));
  const double s = std::clamp((q.x() - tl.x()) / (br.x() - tl.x()), 0.0, 1.0);
  const double t = std::clamp((q.y() - tl.y()) / (br.y() - tl.y()), 0.0, 1.0);
  return {{mesh.vertex(c, r), mesh.vertex(c + 1, r), mesh.vertex(c, r + 1), mesh.vertex(c + 1, r + 1)},
          {(1 - s) * (1 - t), s * (1 - t), (1 - s) * t, s * t}};
}

Vec2 map_point(const MeshGrid& mesh, const Eigen::VectorXd& X, const Vec2& q) {
  const auto bc = bilinear_coeffs(mesh, q);
  Vec2 out = Vec2::Zero();
  for (int i = 0; i < 4; ++i) out += bc.weight[i] * MeshGrid::at(X, bc.vertex[i]);
  return out;
}

FeatureWeights FeatureWeights::ones(const DualFeatureSet& set) {
  return {Eigen::VectorXd::Ones(static_cast<Eigen::Index>(set.points.size())),
          Eigen::VectorXd::Ones(static_cast<Eigen::Index>(set.lines.size()))};
}

FeatureWeights adaptive_weights(const DualFeatureSet& set, const Hypothesis& hypothesis,
                                const MeshGrid& mesh, const SeamResult* seam,
                                const Canvas& canvas, const AdaptiveParams& params) {
  FeatureWeights w = FeatureWeights::ones(set);
  if (!seam || seam->seam_pixels.empty()) return w;

  const std::size_t np = set.points.size(), nl = set.lines.size();
  std::vector<Vec2> warped(np + nl);
  std::vector<double> resid(np + nl);
  for (std::size_t i = 0; i < np; ++i) {
    warped[i] = map_point(mesh, mesh.V_hat, set.points[i].p);
    resid[i] = (warped[i] - set.points[i].p_ref).norm();
  }
  for (std::size_t j = 0; j < nl; ++j) {
    const auto& l = set.lines[j];
    warped[np + j] = map_point(mesh, mesh.V_hat, l.midpoint());
    const auto [n, c] = reference_line(l);
    resid[np + j] = std::abs(n.dot(warped[np + j]) - c);
  }

  double mean = 0.0;
  for (int id : hypothesis.members) mean += resid[static_cast<std::size_t>(id)];
  if (!hypothesis.members.empty()) mean /= static_cast<double>(hypothesis.members.size());

  const double sigma = params.sigma_cells * mesh.cell_size();
  for (std::size_t i = 0; i < np + nl; ++i) {
    const Vec2 p = canvas.to_canvas(warped[i]);
    double d2 = std::numeric_limits<double>::infinity();
    for (const auto& s : seam->seam_pixels)
      d2 = std::min(d2, (p - Vec2(s.x, s.y)).squaredNorm());
    const double ratio = mean > 0.0 ? std::min(resid[i] / mean, params.kappa) : 1.0;
    const double value = std::exp(-d2 / (sigma * sigma)) * ratio;
    if (i < np)
      w.w_point[static_cast<Eigen::Index>(i)] = value;
    else
      w.w_line[static_cast<Eigen::Index>(i - np)] = value;
  }
  return w;
}

double LinearTerm::residual(const Eigen::VectorXd& X) const {
  double s = -target;
  for (const auto& [i, a] : coeffs) s += a * X[i];
  return s;
}

std::vector<double> cell_saliency(const MeshGrid& mesh, const cv::Mat& saliency) {
  std::vector<double> out(static_cast<std::size_t>(mesh.cols) * mesh.rows, 1.0);
  if (saliency.empty()) return out;
  CV_Assert(saliency.type() == CV_64F);
  constexpr int k = 4;
  for (int r = 0; r < mesh.rows; ++r)
    for (int c = 0; c < mesh.cols; ++c) {
      const Vec2 a = MeshGrid::at(mesh.V_init, mesh.vertex(c, r));
      const Vec2 b = MeshGrid::at(mesh.V_init, mesh.vertex(c + 1, r));
      const Vec2 cc = MeshGrid::at(mesh.V_init, mesh.vertex(c + 1, r + 1));
      const Vec2 d = MeshGrid::at(mesh.V_init, mesh.vertex(c, r + 1));
      double sum = 0.0;
      for (int j = 0; j < k; ++j)
        for (int i = 0; i < k; ++i) {
          const double s = (i + 0.5) / k, t = (j + 0.5) / k;
          const Vec2 p = (1 - s) * (1 - t) * a + s * (1 - t) * b + s * t * cc + (1 - s) * t * d;
          const int x = static_cast<int>(std::lround(p.x())), y = static_cast<int>(std::lround(p.y()));
          sum += (x >= 0 && y >= 0 && x < saliency.cols && y < saliency.rows)
                     ? saliency.at<double>(y, x)
                     : 1.0;
        }
      out[static_cast<std::size_t>(r) * mesh.cols + c] = sum / (k * k);
    }
  return out;
}

EnergyTerms build_terms(const MeshGrid& mesh, const Hypothesis& hypothesis,
                        const DualFeatureSet& set, const FeatureWeights& weights,
                        const WarpParams& params, std::span<const double> cell_weights) {
  EnergyTerms t;
  const std::size_t np = set.points.size();
  for (std::size_t i : hypothesis.point_indices(np)) {
    const auto& f = set.points[i];
    const auto bc = bilinear_coeffs(mesh, f.p);
    const double w = params.lambda_p * weights.w_point[static_cast<Eigen::Index>(i)];
    for (int axis = 0; axis < 2; ++axis) {
      LinearTerm term;
      for (int k = 0; k < 4; ++k) term.coeffs.emplace_back(2 * bc.vertex[k] + axis, bc.weight[k]);
      term.target = f.p_ref[axis];
      term.weight = w;
      t.point.push_back(std::move(term));
    }
  }
  for (std::size_t j : hypothesis.line_indices(np)) {
    const auto& l = set.lines[j];
    const auto [n, c] = reference_line(l);
    const double w = params.lambda_l * weights.w_line[static_cast<Eigen::Index>(j)];
    for (const Vec2& s : sample_line_target(l)) {
      const auto bc = bilinear_coeffs(mesh, s);
      LinearTerm term;
      for (int k = 0; k < 4; ++k) {
        term.coeffs.emplace_back(2 * bc.vertex[k], bc.weight[k] * n.x());
        term.coeffs.emplace_back(2 * bc.vertex[k] + 1, bc.weight[k] * n.y());
      }
      term.target = c;
      term.weight = w;
      t.line.push_back(std::move(term));
    }
  }
  if (!cell_weights.empty() &&
      cell_weights.size() != static_cast<std::size_t>(mesh.cols) * mesh.rows)
    throw std::invalid_argument("cell weight count does not match the mesh");
  for (int r = 0; r < mesh.rows; ++r)
    for (int c = 0; c < mesh.cols; ++c) {
      if (params.distortion > 0) add_triangles(t.distortion, mesh, c, r, params.distortion);
      const double s = cell_weights.empty() ? 1.0
                                            : cell_weights[static_cast<std::size_t>(r) * mesh.cols + c];
      if (params.lambda_s * s > 0) add_triangles(t.saliency, mesh, c, r, params.lambda_s * s);
    }
  if (params.regularization > 0)
    for (Eigen::Index i = 0; i < mesh.V_init.size(); ++i)
      t.regularization.push_back({{{static_cast<int>(i), 1.0}}, mesh.V_init[i], params.regularization});
  return t;
}

double EnergySystem::energy(const Eigen::VectorXd& X) const {
  return X.dot(Q * X) - 2.0 * b.dot(X) + constant;
}

Eigen::VectorXd EnergySystem::gradient(const Eigen::VectorXd& X) const {
  return 2.0 * (Q * X) - 2.0 * b;
}

namespace {

void accumulate(std::vector<Eigen::Triplet<double>>& trip, Eigen::VectorXd& b, double& c,
                std::span<const LinearTerm> terms) {
  for (const auto& term : terms) {
    for (const auto& [i, ai] : term.coeffs) {
      for (const auto& [j, aj] : term.coeffs) trip.emplace_back(i, j, term.weight * ai * aj);
      b[i] += term.weight * term.target * ai;
    }
    c += term.weight * term.target * term.target;
  }
}

EnergySystem finish(std::vector<Eigen::Triplet<double>>& trip, Eigen::VectorXd b, double c, int n) {
  EnergySystem s;
  s.Q.resize(n, n);
  s.Q.setFromTriplets(trip.begin(), trip.end());
  s.Q.makeCompressed();
  s.b = std::move(b);
  s.constant = c;
  return s;
}

}  // namespace

EnergySystem assemble(std::span<const LinearTerm> terms, int dimension) {
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(dimension);
  double c = 0.0;
  accumulate(trip, b, c, terms);
  return finish(trip, std::move(b), c, dimension);
}

EnergySystem assemble(const EnergyTerms& terms, int dimension) {
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(dimension);
  double c = 0.0;
  for (const auto* group :
       {&terms.point, &terms.line, &terms.distortion, &terms.saliency, &terms.regularization})
    accumulate(trip, b, c, *group);
  return finish(trip, std::move(b), c, dimension);
}

double evaluate(std::span<const LinearTerm> terms, const Eigen::VectorXd& X) {
  double e = 0.0;
  for (const auto& t : terms) {
    const double r = t.residual(X);
    e += t.weight * r * r;
  }
  return e;
}

TermEnergies evaluate(const EnergyTerms& terms, const Eigen::VectorXd& X) {
  return {evaluate(terms.point, X), evaluate(terms.line, X), evaluate(terms.distortion, X),
          evaluate(terms.saliency, X), evaluate(terms.regularization, X)};
}

nlohmann::json to_json(const TermEnergies& e) {
  return {{"point", e.point},           {"line", e.line},
          {"distortion", e.distortion}, {"saliency", e.saliency},
          {"regularization", e.regularization}, {"total", e.total()}};
}

namespace {

// Half the negative gradient, summed term by term so that residuals near zero
// stay accurate instead of cancelling b against Q X.
void add_descent(std::span<const LinearTerm> terms, const Eigen::VectorXd& X, Eigen::VectorXd& out) {
  for (const auto& t : terms) {
    const double r = t.residual(X);
    for (const auto& [i, a] : t.coeffs) out[i] -= t.weight * r * a;
  }
}

Eigen::VectorXd descent(const EnergyTerms& terms, const Eigen::VectorXd& X) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(X.size());
  for (const auto* group :
       {&terms.point, &terms.line, &terms.distortion, &terms.saliency, &terms.regularization})
    add_descent(*group, X, out);
  return out;
}

using Factor = Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>;

void factorize(Factor& ldlt, const EnergySystem& system) {
  ldlt.compute(system.Q);
  if (ldlt.info() != Eigen::Success) throw SingularSystem("energy factorization failed");
}

Eigen::VectorXd checked(const EnergySystem& system, Eigen::VectorXd X) {
  if (!X.allFinite()) throw SingularSystem("energy solve failed");
  if (system.gradient(X).norm() > 1e-6 * std::max(1.0, system.b.norm()))
    throw SingularSystem("energy solve residual too large");
  return X;
}

}  // namespace

Eigen::VectorXd solve_energy(const EnergySystem& system) {
  Factor ldlt;
  factorize(ldlt, system);
  Eigen::VectorXd X = ldlt.solve(system.b);
  // A couple of refinement sweeps absorb round-off on badly scaled systems.
  for (int sweep = 0; sweep < 3 && X.allFinite(); ++sweep) X -= ldlt.solve(system.Q * X - system.b);
  return checked(system, std::move(X));
}

Eigen::VectorXd solve_energy(const EnergySystem& system, const EnergyTerms& terms,
                             const Eigen::VectorXd& start) {
  Factor ldlt;
  factorize(ldlt, system);
  Eigen::VectorXd X = start;
  for (int sweep = 0; sweep < 3 && X.allFinite(); ++sweep) X += ldlt.solve(descent(terms, X));
  return checked(system, std::move(X));
}

SolveResult assemble_and_solve(const MeshGrid& mesh, const Hypothesis& hypothesis,
                               const DualFeatureSet& set, const FeatureWeights& weights,
                               const WarpParams& params, std::span<const double> cell_weights) {
  const EnergyTerms terms = build_terms(mesh, hypothesis, set, weights, params, cell_weights);
  const EnergySystem system = assemble(terms, static_cast<int>(mesh.V_init.size()));
  SolveResult out{mesh, {}};
  out.mesh.V_hat = solve_energy(system, terms, mesh.V_init);
  out.energies = evaluate(terms, out.mesh.V_hat);
  return out;
}

Canvas compute_canvas(const MeshGrid& mesh, const Dims& ref_dims) {
  double x0 = 0.0, y0 = 0.0, x1 = ref_dims.width, y1 = ref_dims.height;
  for (int k = 0; k < mesh.num_vertices(); ++k) {
    const Vec2 p = MeshGrid::at(mesh.V_hat, k);
    if (!p.allFinite()) throw AtInfinity("deformed mesh vertex is not finite");
    x0 = std::min(x0, p.x());
    y0 = std::min(y0, p.y());
    x1 = std::max(x1, p.x());
    y1 = std::max(y1, p.y());
  }
  constexpr double snap = 1e-6;
  Canvas c;
  c.x0 = static_cast<int>(std::floor(x0 + snap));
  c.y0 = static_cast<int>(std::floor(y0 + snap));
  c.width = static_cast<int>(std::ceil(x1 - snap)) - c.x0;
  c.height = static_cast<int>(std::ceil(y1 - snap)) - c.y0;
  return c;
}

WarpedImage warp_image(const cv::Mat& image, const MeshGrid& mesh, const Canvas& canvas) {
  CV_Assert(image.type() == CV_8UC3);
  WarpedImage out{{cv::Mat::zeros(canvas.height, canvas.width, CV_8UC3),
                   cv::Mat::zeros(canvas.height, canvas.width, CV_8U)},
                  0};
  cv::Mat& dst = out.canvas_image.image;
  cv::Mat& mask = out.canvas_image.mask;
  const double max_x = image.cols - 1, max_y = image.rows - 1;
  constexpr double tol = 1e-9;

  auto write = [&](int x, int y, const Vec2& src) {
    if (src.x() < -tol || src.y() < -tol || src.x() > max_x + tol || src.y() > max_y + tol) return;
    const cv::Vec3d v = sample_bilinear(image, src.x(), src.y());
    auto& px = dst.at<cv::Vec3b>(y, x);
    for (int ch = 0; ch < 3; ++ch) px[ch] = cv::saturate_cast<std::uint8_t>(std::round(v[ch]));
    mask.at<std::uint8_t>(y, x) = 255;
  };

  for (int r = 0; r < mesh.rows; ++r)
    for (int c = 0; c < mesh.cols; ++c) {
      const int ids[4] = {mesh.vertex(c, r), mesh.vertex(c + 1, r), mesh.vertex(c + 1, r + 1),
                          mesh.vertex(c, r + 1)};
      Vec2 q[4], s[4];
      for (int i = 0; i < 4; ++i) {
        q[i] = canvas.to_canvas(MeshGrid::at(mesh.V_hat, ids[i]));
        s[i] = MeshGrid::at(mesh.V, ids[i]);
      }
      bool convex = true;
      for (int i = 0; i < 4; ++i)
        convex = convex && cross(q[(i + 1) % 4] - q[i], q[(i + 2) % 4] - q[(i + 1) % 4]) > 0;
      if (!convex) ++out.folded_cells;

      double lo_x = q[0].x(), hi_x = lo_x, lo_y = q[0].y(), hi_y = lo_y;
      for (int i = 1; i < 4; ++i) {
        lo_x = std::min(lo_x, q[i].x());
        hi_x = std::max(hi_x, q[i].x());
        lo_y = std::min(lo_y, q[i].y());
        hi_y = std::max(hi_y, q[i].y());
      }
      const int xa = std::max(0, static_cast<int>(std::ceil(lo_x - tol)));
      const int xb = std::min(canvas.width - 1, static_cast<int>(std::floor(hi_x + tol)));
      const int ya = std::max(0, static_cast<int>(std::ceil(lo_y - tol)));
      const int yb = std::min(canvas.height - 1, static_cast<int>(std::floor(hi_y + tol)));
      for (int y = ya; y <= yb; ++y)
        for (int x = xa; x <= xb; ++x) {
          if (mask.at<std::uint8_t>(y, x)) continue;
          const Vec2 p(x, y);
          if (convex) {
            if (const auto st = inverse_bilinear(p, q[0], q[1], q[2], q[3])) {
              const double u = st->x(), v = st->y();
              write(x, y, (1 - u) * (1 - v) * s[0] + u * (1 - v) * s[1] + u * v * s[2] + (1 - u) * v * s[3]);
            }
            continue;
          }
          // Triangles (tl, tr, bl) and (br, bl, tr).
          if (const auto l = barycentric(p, q[0], q[1], q[3])) {
            write(x, y, s[0] + l->x() * (s[1] - s[0]) + l->y() * (s[3] - s[0]));
          } else if (const auto m = barycentric(p, q[2], q[3], q[1])) {
            write(x, y, s[2] + m->x() * (s[3] - s[2]) + m->y() * (s[1] - s[2]));
          }
        }
    }
  return out;
}

nlohmann::json mesh_to_json(const MeshGrid& mesh) {
  auto vec = [](const Eigen::VectorXd& X) { return std::vector<double>(X.data(), X.data() + X.size()); };
  return {{"cols", mesh.cols},      {"rows", mesh.rows},
          {"cell_w", mesh.cell_w},  {"cell_h", mesh.cell_h},
          {"width", mesh.dims.width}, {"height", mesh.dims.height},
          {"V", vec(mesh.V)},       {"V_init", vec(mesh.V_init)},
          {"V_hat", vec(mesh.V_hat)}};
}

}  // namespace pstitch

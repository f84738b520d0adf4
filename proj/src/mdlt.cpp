#include "pstitch/mdlt.hpp"

#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

namespace pstitch {

namespace {

constexpr double kDetEps = 1e-12;
constexpr double kRankRatio = 1e-10;

Eigen::Vector3d hom(const Vec2& p) { return {p.x(), p.y(), 1.0}; }

Vec2 conditioned(const Eigen::Matrix3d& T, const Vec2& p) {
  const Eigen::Vector3d q = T * hom(p);
  return q.head<2>() / q.z();
}

void point_rows(const Vec2& x, const Vec2& u, RowMat9& M, Eigen::Index r) {
  M.row(r) << 0, 0, 0, -x.x(), -x.y(), -1, u.y() * x.x(), u.y() * x.y(), u.y();
  M.row(r + 1) << x.x(), x.y(), 1, 0, 0, 0, -u.x() * x.x(), -u.x() * x.y(), -u.x();
}

// l^T H a = 0 for a target endpoint a and reference line l.
void incidence_row(const Eigen::Vector3d& l, const Vec2& a, RowMat9& M, Eigen::Index r) {
  const Eigen::Vector3d ah = hom(a);
  M.row(r) << l.x() * ah.transpose(), l.y() * ah.transpose(), l.z() * ah.transpose();
}

DesignSystem build(const DualFeatureSet& set, std::span<const std::size_t> points,
                   std::span<const std::size_t> lines) {
  std::vector<Vec2> tgt, ref;
  tgt.reserve(points.size() + 2 * lines.size());
  ref.reserve(points.size() + 2 * lines.size());
  for (auto i : points) {
    tgt.push_back(set.points[i].p);
    ref.push_back(set.points[i].p_ref);
  }
  for (auto j : lines) {
    tgt.push_back(set.lines[j].a);
    tgt.push_back(set.lines[j].b);
    ref.push_back(set.lines[j].a_ref);
    ref.push_back(set.lines[j].b_ref);
  }

  DesignSystem sys;
  sys.T_target = hartley_conditioning(tgt);
  sys.T_ref = hartley_conditioning(ref);

  sys.A.resize(2 * static_cast<Eigen::Index>(points.size()), 9);
  Eigen::Index r = 0;
  for (auto i : points) {
    point_rows(conditioned(sys.T_target, set.points[i].p),
               conditioned(sys.T_ref, set.points[i].p_ref), sys.A, r);
    r += 2;
  }

  sys.B.resize(2 * static_cast<Eigen::Index>(lines.size()), 9);
  r = 0;
  for (auto j : lines) {
    const auto& ln = set.lines[j];
    Eigen::Vector3d l = hom(conditioned(sys.T_ref, ln.a_ref)).cross(hom(conditioned(sys.T_ref, ln.b_ref)));
    l /= l.head<2>().norm();
    incidence_row(l, conditioned(sys.T_target, ln.a), sys.B, r);
    incidence_row(l, conditioned(sys.T_target, ln.b), sys.B, r + 1);
    r += 2;
  }
  return sys;
}

}  // namespace

Homography Homography::from_matrix(const Eigen::Matrix3d& m) {
  const double n = m.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw RankDeficient("zero or non-finite homography");
  Eigen::Matrix3d h = m / n;
  if (std::abs(h.determinant()) <= kDetEps) throw RankDeficient("singular homography");
  // Canonical sign: positive h33 when it is meaningful, else positive
  // largest-magnitude entry.
  double pivot = h(2, 2);
  if (std::abs(pivot) <= 1e-8) {
    Eigen::Index r, c;
    h.cwiseAbs().maxCoeff(&r, &c);
    pivot = h(r, c);
  }
  if (pivot < 0) h = -h;
  return Homography(h);
}

Homography Homography::from_vector(const Vec9& v) {
  Eigen::Matrix3d m;
  m << v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), v(8);
  return from_matrix(m);
}

Homography Homography::identity() { return from_matrix(Eigen::Matrix3d::Identity()); }

Homography Homography::translation(double tx, double ty) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  m(0, 2) = tx;
  m(1, 2) = ty;
  return from_matrix(m);
}

Vec9 Homography::vector() const {
  Vec9 v;
  v << m_(0, 0), m_(0, 1), m_(0, 2), m_(1, 0), m_(1, 1), m_(1, 2), m_(2, 0), m_(2, 1), m_(2, 2);
  return v;
}

Homography Homography::inverse() const { return from_matrix(m_.inverse()); }

std::optional<Vec2> try_apply(const Homography& h, const Vec2& p) {
  const Eigen::Vector3d q = h.matrix() * hom(p);
  if (std::abs(q.z()) <= kAtInfinityEps) return std::nullopt;
  return Vec2(q.x() / q.z(), q.y() / q.z());
}

Vec2 apply_homography(const Homography& h, const Vec2& p) {
  auto q = try_apply(h, p);
  if (!q) throw AtInfinity("point maps to the line at infinity");
  return *q;
}

Segment apply_homography(const Homography& h, const Segment& s) {
  return {apply_homography(h, s.a), apply_homography(h, s.b)};
}

Eigen::Matrix3d hartley_conditioning(std::span<const Vec2> pts) {
  if (pts.empty()) throw RankDeficient("no points to condition");
  Vec2 c = Vec2::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  double mean = 0.0;
  for (const auto& p : pts) mean += (p - c).norm();
  mean /= static_cast<double>(pts.size());
  if (!(mean > 0.0)) throw RankDeficient("coincident points cannot be conditioned");
  const double s = std::sqrt(2.0) / mean;
  Eigen::Matrix3d T;
  T << s, 0, -s * c.x(), 0, s, -s * c.y(), 0, 0, 1;
  return T;
}

RowMat9 DesignSystem::stacked() const {
  RowMat9 M(rows(), 9);
  M << A, B;
  return M;
}

Vec9 DesignSystem::condition(const Homography& h) const {
  const Eigen::Matrix3d c = T_ref * h.matrix() * T_target.inverse();
  Vec9 v;
  v << c(0, 0), c(0, 1), c(0, 2), c(1, 0), c(1, 1), c(1, 2), c(2, 0), c(2, 1), c(2, 2);
  return v.normalized();
}

Homography DesignSystem::decondition(const Vec9& v) const {
  Eigen::Matrix3d c;
  c << v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), v(8);
  return Homography::from_matrix(T_ref.inverse() * c * T_target);
}

DesignSystem build_design_system(const DualFeatureSet& set) {
  std::vector<std::size_t> pi(set.points.size()), li(set.lines.size());
  for (std::size_t i = 0; i < pi.size(); ++i) pi[i] = i;
  for (std::size_t j = 0; j < li.size(); ++j) li[j] = j;
  return build(set, pi, li);
}

DesignSystem build_design_system(const DualFeatureSet& set, std::span<const std::size_t> points,
                                 std::span<const std::size_t> lines) {
  return build(set, points, lines);
}

Eigen::VectorXd gaussian_weights(const Vec2& anchor, const DualFeatureSet& set,
                                 const MdltParams& params) {
  const auto n = static_cast<Eigen::Index>(set.points.size());
  const auto m = static_cast<Eigen::Index>(set.lines.size());
  Eigen::VectorXd w(2 * n + 2 * m);
  const double s2 = params.sigma * params.sigma;
  auto weight = [&](const Vec2& loc) {
    return std::max(std::exp(-(anchor - loc).squaredNorm() / s2), params.gamma);
  };
  for (Eigen::Index i = 0; i < n; ++i)
    w(2 * i) = w(2 * i + 1) = weight(set.points[static_cast<std::size_t>(i)].p_ref);
  for (Eigen::Index j = 0; j < m; ++j)
    w(2 * n + 2 * j) = w(2 * n + 2 * j + 1) =
        weight(set.lines[static_cast<std::size_t>(j)].midpoint_ref());
  return w;
}

Homography solve_mdlt(const DesignSystem& system, const Eigen::VectorXd& weights) {
  if (weights.size() != system.rows())
    throw std::invalid_argument("weight vector length does not match the design system");
  if ((weights.array() < 0.0).any()) throw std::invalid_argument("negative MDLT weight");
  if ((weights.array() > 0.0).count() < 8)
    throw RankDeficient("fewer than 8 weighted constraint rows");

  RowMat9 M = weights.asDiagonal() * system.stacked();
  Vec9 h;
  if (M.rows() > kNormalMatrixRowThreshold) {
    const Eigen::Matrix<double, 9, 9> N = M.transpose() * M;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 9, 9>> eig(N);
    const auto& ev = eig.eigenvalues();
    if (ev(1) <= kRankRatio * kRankRatio * ev(8))
      throw RankDeficient("degenerate configuration: null space has dimension > 1");
    h = eig.eigenvectors().col(0);
  } else {
    if (M.rows() < 9) {
      const auto r = M.rows();
      M.conservativeResize(9, Eigen::NoChange);
      M.bottomRows(9 - r).setZero();
    }
    Eigen::JacobiSVD<RowMat9> svd(M, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv(7) <= kRankRatio * sv(0))
      throw RankDeficient("degenerate configuration: null space has dimension > 1");
    h = svd.matrixV().col(8);
  }
  return system.decondition(h);
}

Homography fit_homography(const DesignSystem& system) {
  return solve_mdlt(system, Eigen::VectorXd::Ones(system.rows()));
}

}  // namespace pstitch

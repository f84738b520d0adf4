#pragma once

#include <optional>
#include <span>

#include <Eigen/Core>

#include "pstitch/corrio.hpp"

namespace pstitch {

using Vec9 = Eigen::Matrix<double, 9, 1>;
using RowMat9 = Eigen::Matrix<double, Eigen::Dynamic, 9, Eigen::RowMajor>;

// Unit-Frobenius-norm, nonsingular 3x3 projective map from target pixels to
// reference pixels.
class Homography {
 public:
  // Normalizes to unit norm with a canonical sign. Throws RankDeficient when
  // the normalized determinant is below 1e-12 in magnitude.
  static Homography from_matrix(const Eigen::Matrix3d& m);
  static Homography from_vector(const Vec9& h);
  static Homography identity();
  static Homography translation(double tx, double ty);

  const Eigen::Matrix3d& matrix() const { return m_; }
  Vec9 vector() const;  // row-major
  Homography inverse() const;

 private:
  explicit Homography(const Eigen::Matrix3d& m) : m_(m) {}
  Eigen::Matrix3d m_;
};

inline constexpr double kAtInfinityEps = 1e-9;

struct Segment {
  Vec2 a, b;
};

// nullopt when the projected w-component is within kAtInfinityEps of zero.
std::optional<Vec2> try_apply(const Homography& h, const Vec2& p);

// Throws AtInfinity.
Vec2 apply_homography(const Homography& h, const Vec2& p);
Segment apply_homography(const Homography& h, const Segment& s);

// Similarity that moves the centroid to the origin and the mean distance to
// sqrt(2). Throws RankDeficient for coincident points.
Eigen::Matrix3d hartley_conditioning(std::span<const Vec2> pts);

// Stacked DLT constraints in conditioned coordinates. Rows of A come in pairs
// per point correspondence; rows of B come in pairs per line correspondence,
// one incidence row per target endpoint against the reference line.
struct DesignSystem {
  RowMat9 A;
  RowMat9 B;
  Eigen::Matrix3d T_target = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d T_ref = Eigen::Matrix3d::Identity();

  Eigen::Index rows() const { return A.rows() + B.rows(); }
  RowMat9 stacked() const;

  // Unit vector of h expressed in the conditioned frames of this system.
  Vec9 condition(const Homography& h) const;
  Homography decondition(const Vec9& conditioned) const;
};

DesignSystem build_design_system(const DualFeatureSet& set);
DesignSystem build_design_system(const DualFeatureSet& set, std::span<const std::size_t> points,
                                 std::span<const std::size_t> lines);

struct MdltParams {
  double sigma = 50.0;   // pixels
  double gamma = 0.025;  // weight floor
};

/// Per-row weights for the full system of `set`: one Gaussian weight per
/// feature (point position or line midpoint, reference side), repeated on
/// both of its rows and clamped below at gamma.
Eigen::VectorXd gaussian_weights(const Vec2& anchor, const DualFeatureSet& set,
                                 const MdltParams& params);

// Rows beyond this count are solved through the 9x9 normal matrix.
inline constexpr Eigen::Index kNormalMatrixRowThreshold = 4000;

/// Weighted DLT: the smallest right singular vector of diag(weights)*[A;B],
/// de-conditioned. Throws RankDeficient when fewer than 8 rows carry weight or
/// the null space is not one-dimensional.
Homography solve_mdlt(const DesignSystem& system, const Eigen::VectorXd& weights);

/// Plain DLT over every row of the system.
Homography fit_homography(const DesignSystem& system);

}  // namespace pstitch

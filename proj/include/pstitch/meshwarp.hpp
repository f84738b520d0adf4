#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <json.hpp>
#include <opencv2/core.hpp>

#include "pstitch/canvas.hpp"
#include "pstitch/grouping.hpp"
#include "pstitch/mdlt.hpp"
#include "pstitch/seam.hpp"

namespace pstitch {

// Regular grid over the target image. Vertex k = r * (cols + 1) + c sits at
// entries (2k, 2k + 1) of the position vectors. V is the regular grid in
// target pixels, V_init its homography pre-warp into reference pixels, and
// V_hat the current deformation (reference pixels).
struct MeshGrid {
  int cols = 0;
  int rows = 0;
  double cell_w = 0.0;
  double cell_h = 0.0;
  Dims dims;
  Eigen::VectorXd V;
  Eigen::VectorXd V_init;
  Eigen::VectorXd V_hat;

  int num_vertices() const { return (cols + 1) * (rows + 1); }
  int vertex(int c, int r) const { return r * (cols + 1) + c; }
  double cell_size() const { return 0.5 * (cell_w + cell_h); }
  static Vec2 at(const Eigen::VectorXd& X, int k) { return {X[2 * k], X[2 * k + 1]}; }
};

/// Near-square cells with cols * rows close to target_cells. V_init and V_hat
/// are the pre-warp of V (identity when none). Throws AtInfinity if the
/// pre-warp sends a vertex to infinity.
MeshGrid init_mesh(const Dims& dims, int target_cells,
                   const std::optional<Homography>& prewarp = std::nullopt);

struct BilinearCoeffs {
  std::array<int, 4> vertex;    // top-left, top-right, bottom-left, bottom-right
  std::array<double, 4> weight;
};

// Bilinear weights of q in the regular grid V. Points on a cell border go to
// the lower-index cell. Throws OutOfMesh.
BilinearCoeffs bilinear_coeffs(const MeshGrid& mesh, const Vec2& q);

// Position of q under the deformation X.
Vec2 map_point(const MeshGrid& mesh, const Eigen::VectorXd& X, const Vec2& q);

struct FeatureWeights {
  Eigen::VectorXd w_point;  // one per point of the set
  Eigen::VectorXd w_line;   // one per line of the set

  static FeatureWeights ones(const DualFeatureSet& set);
};

struct AdaptiveParams {
  double sigma_cells = 2.0;  // seam distance scale in cell sizes
  double kappa = 5.0;        // clamp of the relative residual
};

/// Seam-guided feature weights. Without a seam (or with an empty one) all
/// weights are 1. Otherwise w = exp(-D^2 / sigma_d^2) * min(E / mean_E, kappa)
/// where D is the canvas distance from the warped feature to the nearest seam
/// pixel and E its residual under V_hat; mean_E runs over the hypothesis
/// members. Lines use their midpoint sample.
FeatureWeights adaptive_weights(const DualFeatureSet& set, const Hypothesis& hypothesis,
                                const MeshGrid& mesh, const SeamResult* seam,
                                const Canvas& canvas, const AdaptiveParams& params = {});

// weight * (coeffs . X - target)^2
struct LinearTerm {
  std::vector<std::pair<int, double>> coeffs;
  double target = 0.0;
  double weight = 1.0;

  double residual(const Eigen::VectorXd& X) const;
};

struct WarpParams {
  double lambda_p = 1.0;
  double lambda_l = 5.0;
  double lambda_s = 0.5;
  double distortion = 1.0;       // scale of the distortion term
  double regularization = 1e-8;  // pull towards V_init
};

struct EnergyTerms {
  std::vector<LinearTerm> point;
  std::vector<LinearTerm> line;
  std::vector<LinearTerm> distortion;
  std::vector<LinearTerm> saliency;
  std::vector<LinearTerm> regularization;
};

// Mean saliency per cell (row-major) under V_init. `saliency` is CV_64F in
// reference pixels; positions outside it count as 1. Empty means uniform 1.
std::vector<double> cell_saliency(const MeshGrid& mesh, const cv::Mat& saliency);

/// Residual terms of the warp energy built from the hypothesis members only.
/// `cell_weights` holds one saliency value per cell, or is empty for 1.
EnergyTerms build_terms(const MeshGrid& mesh, const Hypothesis& hypothesis,
                        const DualFeatureSet& set, const FeatureWeights& weights,
                        const WarpParams& params, std::span<const double> cell_weights = {});

// E(X) = X^T Q X - 2 b^T X + c
struct EnergySystem {
  Eigen::SparseMatrix<double> Q;
  Eigen::VectorXd b;
  double constant = 0.0;

  double energy(const Eigen::VectorXd& X) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& X) const;
};

EnergySystem assemble(std::span<const LinearTerm> terms, int dimension);
EnergySystem assemble(const EnergyTerms& terms, int dimension);

// Direct sum of weighted squared residuals.
double evaluate(std::span<const LinearTerm> terms, const Eigen::VectorXd& X);

struct TermEnergies {
  double point = 0, line = 0, distortion = 0, saliency = 0, regularization = 0;
  double total() const { return point + line + distortion + saliency + regularization; }
};
TermEnergies evaluate(const EnergyTerms& terms, const Eigen::VectorXd& X);
nlohmann::json to_json(const TermEnergies& e);

/// Exact minimizer of the assembled energy. Throws SingularSystem when the
/// factorization fails or the residual check does not hold.
Eigen::VectorXd solve_energy(const EnergySystem& system);

// Same minimizer reached by Newton steps from `start` with right-hand sides
// summed from the term residuals. Accurate to round-off near `start`.
Eigen::VectorXd solve_energy(const EnergySystem& system, const EnergyTerms& terms,
                             const Eigen::VectorXd& start);

struct SolveResult {
  MeshGrid mesh;  // V_hat replaced by the minimizer
  TermEnergies energies;
};

SolveResult assemble_and_solve(const MeshGrid& mesh, const Hypothesis& hypothesis,
                               const DualFeatureSet& set, const FeatureWeights& weights,
                               const WarpParams& params, std::span<const double> cell_weights = {});

/// Union of the reference frame and the deformed mesh, on integer pixels.
Canvas compute_canvas(const MeshGrid& mesh, const Dims& ref_dims);

struct WarpedImage {
  CanvasImage canvas_image;
  int folded_cells = 0;
};

/// Inverse bilinear warp of each deformed cell onto the canvas with bilinear
/// pixel sampling. Folded cells are drawn as two triangles.
WarpedImage warp_image(const cv::Mat& image, const MeshGrid& mesh, const Canvas& canvas);

nlohmann::json mesh_to_json(const MeshGrid& mesh);

}  // namespace pstitch

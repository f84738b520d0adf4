#pragma once

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "pstitch/corrio.hpp"
#include "pstitch/mdlt.hpp"

namespace pstitch {

enum class Direction { Horizontal, Vertical };

enum class VertexKind { Point, Line, Source, Sink };

struct GraphVertex {
  VertexKind kind;
  std::optional<std::size_t> feature_index;  // into points or lines by kind
  Vec2 anchor;                               // reference image pixels
};

struct GraphEdge {
  int u, v;
  double raw_weight;   // CRDE, pixels
  double path_weight;  // sigmoid-transformed, in (0, 1]
};

// Vertex layout: points [0, N), lines [N, N + M), then source, then sink.
// Feature ids used by Hypothesis follow the same numbering.
struct CorrespondenceGraph {
  std::vector<GraphVertex> vertices;
  std::vector<GraphEdge> edges;
  std::vector<std::vector<std::pair<int, int>>> adjacency;  // (neighbor, edge index)
  std::vector<std::optional<Homography>> local_homography;  // empty for source/sink
  int source = -1;
  int sink = -1;
  std::size_t num_points = 0;
  std::size_t num_lines = 0;

  std::size_t num_features() const { return num_points + num_lines; }
  bool is_terminal(int v) const { return v == source || v == sink; }
  std::optional<int> edge_between(int u, int v) const;
};

struct Terminal {};
using Feature = std::variant<Terminal, PointPair, LinePair>;

Feature feature_of(const DualFeatureSet& set, const CorrespondenceGraph& g, int vertex);

/// Misfit of a correspondence under h: Euclidean for points; for lines the
/// root sum of squared distances from the three mapped target samples to
/// the infinite reference line. +inf when a sample maps to infinity.
double residual(const Homography& h, const PointPair& f);
double residual(const Homography& h, const LinePair& f);

/// Cross residual distance error: residual(h_i, f_j) + residual(h_j, f_i),
/// zero whenever either side is a source or sink.
double crde_weight(const Feature& fi, const Feature& fj, const Homography& hi,
                   const Homography& hj);

double sigmoid_transform(double w, double tau, double softness);

struct GroupingParams {
  double tau = 10.0;
  double softness = 2.5;  // tau / 4
  std::size_t min_remaining = 30;
  MdltParams mdlt;
};

/// Delaunay graph over feature anchors plus source and sink on opposite
/// borders of the reference image. Local homographies come from MDLT at each
/// anchor, falling back to the global DLT when the local system is
/// degenerate. Throws DegenerateGeometry.
CorrespondenceGraph build_graph(const DualFeatureSet& set, Direction direction,
                                const GroupingParams& params = {});

// Recomputes every path_weight from raw_weight.
void apply_sigmoid(CorrespondenceGraph& g, double tau, double softness);

/// Minimum path_weight path from source to sink. Ties go to fewer edges, then
/// to the lexicographically smaller vertex sequence. Throws Disconnected.
std::vector<int> shortest_path(const CorrespondenceGraph& g);
double path_cost(const CorrespondenceGraph& g, const std::vector<int>& path);

struct Hypothesis {
  std::vector<int> members;  // feature ids in insertion order
  std::vector<int> seed_path;
  int generation_round = 0;

  std::vector<int> sorted_members() const;
  std::vector<std::size_t> point_indices(std::size_t num_points) const;
  std::vector<std::size_t> line_indices(std::size_t num_points) const;
};

Hypothesis grow_hypothesis(const CorrespondenceGraph& g, const std::vector<int>& seed_path,
                           double tau);

enum class StopReason { RemainingBelowMinimum, PathAboveThreshold, SeedReuse, Disconnected, RoundLimit };
std::string to_string(StopReason r);

struct GroupingRound {
  std::vector<int> seed_path;
  double max_raw_weight = 0.0;
  std::optional<std::size_t> hypothesis;  // index into hypotheses; empty if duplicate
};

struct GroupingResult {
  std::vector<Hypothesis> hypotheses;
  std::vector<GroupingRound> rounds;
  StopReason stop = StopReason::RemainingBelowMinimum;
  CorrespondenceGraph graph;  // with saturated path weights
};

/// Iterated shortest-path seeding and growth. Seed path edges are saturated
/// to 1 after each round. A round whose shortest path reuses a saturated
/// edge ends the loop, as does a feature-to-feature edge above tau on the
/// path, fewer than min_remaining ungrouped features, or a disconnected
/// graph. The first hypothesis is always produced for a connected graph.
GroupingResult generate_hypotheses(CorrespondenceGraph graph, double tau,
                                   std::size_t min_remaining);

nlohmann::json graph_to_json(const CorrespondenceGraph& g, const GroupingResult* result = nullptr);

}  // namespace pstitch

#include "pstitch/grouping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "pstitch/delaunay.hpp"

namespace pstitch {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double point_line_distance(const Vec2& q, const Vec2& a, const Vec2& b) {
  const Vec2 d = b - a;
  return std::abs(d.x() * (q.y() - a.y()) - d.y() * (q.x() - a.x())) / d.norm();
}

double residual_of(const Homography& h, const Feature& f) {
  if (auto* p = std::get_if<PointPair>(&f)) return residual(h, *p);
  if (auto* l = std::get_if<LinePair>(&f)) return residual(h, *l);
  return 0.0;
}

}  // namespace

std::optional<int> CorrespondenceGraph::edge_between(int u, int v) const {
  for (const auto& [w, e] : adjacency[u])
    if (w == v) return e;
  return std::nullopt;
}

Feature feature_of(const DualFeatureSet& set, const CorrespondenceGraph& g, int vertex) {
  const auto& vx = g.vertices[vertex];
  switch (vx.kind) {
    case VertexKind::Point: return set.points[*vx.feature_index];
    case VertexKind::Line: return set.lines[*vx.feature_index];
    default: return Terminal{};
  }
}

double residual(const Homography& h, const PointPair& f) {
  auto q = try_apply(h, f.p);
  if (!q) return kInf;
  return (*q - f.p_ref).norm();
}

double residual(const Homography& h, const LinePair& f) {
  double sum = 0.0;
  for (const auto& s : sample_line_target(f)) {
    auto q = try_apply(h, s);
    if (!q) return kInf;
    const double d = point_line_distance(*q, f.a_ref, f.b_ref);
    sum += d * d;
  }
  return std::sqrt(sum);
}

double crde_weight(const Feature& fi, const Feature& fj, const Homography& hi,
                   const Homography& hj) {
  if (std::holds_alternative<Terminal>(fi) || std::holds_alternative<Terminal>(fj)) return 0.0;
  return residual_of(hi, fj) + residual_of(hj, fi);
}

double sigmoid_transform(double w, double tau, double softness) {
  if (std::isinf(w)) return w > 0 ? 1.0 : 0.0;
  return 1.0 / (1.0 + std::exp(-(w - tau) / softness));
}

CorrespondenceGraph build_graph(const DualFeatureSet& set, Direction direction,
                                const GroupingParams& params) {
  CorrespondenceGraph g;
  g.num_points = set.points.size();
  g.num_lines = set.lines.size();
  for (std::size_t i = 0; i < set.points.size(); ++i)
    g.vertices.push_back({VertexKind::Point, i, set.points[i].p_ref});
  for (std::size_t j = 0; j < set.lines.size(); ++j)
    g.vertices.push_back({VertexKind::Line, j, sample_line(set.lines[j])[1]});

  const double w = set.ref_dims.width, h = set.ref_dims.height;
  g.source = static_cast<int>(g.vertices.size());
  g.sink = g.source + 1;
  if (direction == Direction::Horizontal) {
    g.vertices.push_back({VertexKind::Source, std::nullopt, {0.5 * w, 0.0}});
    g.vertices.push_back({VertexKind::Sink, std::nullopt, {0.5 * w, h}});
  } else {
    g.vertices.push_back({VertexKind::Source, std::nullopt, {0.0, 0.5 * h}});
    g.vertices.push_back({VertexKind::Sink, std::nullopt, {w, 0.5 * h}});
  }

  std::vector<Vec2> anchors;
  anchors.reserve(g.vertices.size());
  for (const auto& v : g.vertices) anchors.push_back(v.anchor);
  const Triangulation tri = delaunay(anchors);

  const DesignSystem system = build_design_system(set);
  // Global fallback, computed on first need. Stays empty when even the full
  // set cannot determine a homography; such features get infinite weights.
  std::optional<std::optional<Homography>> global;
  g.local_homography.resize(g.vertices.size());
  for (std::size_t v = 0; v < set.num_features(); ++v) {
    try {
      g.local_homography[v] = solve_mdlt(system, gaussian_weights(anchors[v], set, params.mdlt));
    } catch (const RankDeficient&) {
      if (!global) {
        try {
          global = fit_homography(system);
        } catch (const RankDeficient&) {
          global = std::optional<Homography>();
        }
      }
      g.local_homography[v] = *global;
    }
  }

  g.adjacency.resize(g.vertices.size());
  for (const auto& [u, v] : tri.edges) {
    // A direct source-sink edge would seed an empty hypothesis.
    if ((u == g.source && v == g.sink) || (u == g.sink && v == g.source)) continue;
    double raw = 0.0;
    if (!g.is_terminal(u) && !g.is_terminal(v) &&
        (!g.local_homography[u] || !g.local_homography[v]))
      raw = kInf;
    else if (!g.is_terminal(u) && !g.is_terminal(v))
      raw = crde_weight(feature_of(set, g, u), feature_of(set, g, v), *g.local_homography[u],
                        *g.local_homography[v]);
    const int e = static_cast<int>(g.edges.size());
    g.edges.push_back({u, v, raw, sigmoid_transform(raw, params.tau, params.softness)});
    g.adjacency[u].emplace_back(v, e);
    g.adjacency[v].emplace_back(u, e);
  }
  return g;
}

void apply_sigmoid(CorrespondenceGraph& g, double tau, double softness) {
  for (auto& e : g.edges) e.path_weight = sigmoid_transform(e.raw_weight, tau, softness);
}

std::vector<int> shortest_path(const CorrespondenceGraph& g) {
  const int n = static_cast<int>(g.vertices.size());
  std::vector<double> dist(n, kInf);
  std::vector<int> hops(n, std::numeric_limits<int>::max());
  std::vector<int> pred(n, -1);
  std::vector<char> settled(n, 0);

  auto path_to = [&](int v) {
    std::vector<int> p;
    for (; v >= 0; v = pred[v]) p.push_back(v);
    std::reverse(p.begin(), p.end());
    return p;
  };

  dist[g.source] = 0.0;
  hops[g.source] = 0;
  for (;;) {
    int u = -1;
    for (int v = 0; v < n; ++v) {
      if (settled[v] || std::isinf(dist[v])) continue;
      if (u < 0 || dist[v] < dist[u] || (dist[v] == dist[u] && hops[v] < hops[u])) u = v;
    }
    if (u < 0) break;
    settled[u] = 1;
    if (u == g.sink) break;
    for (const auto& [v, e] : g.adjacency[u]) {
      if (settled[v]) continue;
      const double d = dist[u] + g.edges[e].path_weight;
      const int h = hops[u] + 1;
      bool better = d < dist[v] || (d == dist[v] && h < hops[v]);
      if (!better && d == dist[v] && h == hops[v] && pred[v] >= 0)
        better = path_to(u) < path_to(pred[v]);
      if (better) {
        dist[v] = d;
        hops[v] = h;
        pred[v] = u;
      }
    }
  }
  if (!settled[g.sink]) throw Disconnected("no path between source and sink");
  return path_to(g.sink);
}

double path_cost(const CorrespondenceGraph& g, const std::vector<int>& path) {
  double c = 0.0;
  for (std::size_t k = 1; k < path.size(); ++k)
    c += g.edges[*g.edge_between(path[k - 1], path[k])].path_weight;
  return c;
}

std::vector<int> Hypothesis::sorted_members() const {
  std::vector<int> s = members;
  std::sort(s.begin(), s.end());
  return s;
}

std::vector<std::size_t> Hypothesis::point_indices(std::size_t num_points) const {
  std::vector<std::size_t> out;
  for (int f : sorted_members())
    if (static_cast<std::size_t>(f) < num_points) out.push_back(static_cast<std::size_t>(f));
  return out;
}

std::vector<std::size_t> Hypothesis::line_indices(std::size_t num_points) const {
  std::vector<std::size_t> out;
  for (int f : sorted_members())
    if (static_cast<std::size_t>(f) >= num_points) out.push_back(static_cast<std::size_t>(f) - num_points);
  return out;
}

Hypothesis grow_hypothesis(const CorrespondenceGraph& g, const std::vector<int>& seed_path,
                           double tau) {
  Hypothesis hyp;
  hyp.seed_path = seed_path;
  std::vector<char> member(g.vertices.size(), 0);
  for (int v : seed_path)
    if (!g.is_terminal(v) && !member[v]) {
      member[v] = 1;
      hyp.members.push_back(v);
    }

  for (;;) {
    // Best connecting edge weight for each candidate outside the hypothesis.
    std::vector<std::pair<double, int>> candidates;
    std::vector<double> best(g.vertices.size(), kInf);
    for (int u : hyp.members)
      for (const auto& [v, e] : g.adjacency[u]) {
        if (member[v] || g.is_terminal(v)) continue;
        const double w = g.edges[e].raw_weight;
        if (w < tau) best[v] = std::min(best[v], w);
      }
    for (std::size_t v = 0; v < best.size(); ++v)
      if (std::isfinite(best[v])) candidates.emplace_back(best[v], static_cast<int>(v));
    if (candidates.empty()) break;
    std::sort(candidates.begin(), candidates.end());
    for (const auto& [w, v] : candidates) {
      member[v] = 1;
      hyp.members.push_back(v);
    }
  }
  return hyp;
}

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::RemainingBelowMinimum: return "remaining-below-minimum";
    case StopReason::PathAboveThreshold: return "path-above-threshold";
    case StopReason::SeedReuse: return "seed-reuse";
    case StopReason::Disconnected: return "disconnected";
    case StopReason::RoundLimit: return "round-limit";
  }
  return "unknown";
}

GroupingResult generate_hypotheses(CorrespondenceGraph graph, double tau,
                                   std::size_t min_remaining) {
  GroupingResult result;
  std::vector<char> grouped(graph.num_features(), 0);
  std::vector<char> saturated(graph.edges.size(), 0);
  std::set<std::vector<int>> seen;

  const std::size_t max_rounds = graph.vertices.size();
  result.stop = StopReason::RoundLimit;
  for (std::size_t round = 1; round <= max_rounds; ++round) {
    std::vector<int> path;
    try {
      path = shortest_path(graph);
    } catch (const Disconnected&) {
      if (round == 1) throw;
      result.stop = StopReason::Disconnected;
      break;
    }

    std::vector<int> path_edges;
    double max_raw = 0.0;
    bool reuses = false;
    for (std::size_t k = 1; k < path.size(); ++k) {
      const int e = *graph.edge_between(path[k - 1], path[k]);
      path_edges.push_back(e);
      reuses = reuses || saturated[e];
      if (!graph.is_terminal(path[k - 1]) && !graph.is_terminal(path[k]))
        max_raw = std::max(max_raw, graph.edges[e].raw_weight);
    }
    if (round > 1 && reuses) {
      result.stop = StopReason::SeedReuse;
      break;
    }
    if (round > 1 && max_raw > tau) {
      result.stop = StopReason::PathAboveThreshold;
      break;
    }

    Hypothesis hyp = grow_hypothesis(graph, path, tau);
    hyp.generation_round = static_cast<int>(round);
    GroupingRound rec{path, max_raw, std::nullopt};
    if (seen.insert(hyp.sorted_members()).second) {
      for (int f : hyp.members) grouped[f] = 1;
      rec.hypothesis = result.hypotheses.size();
      result.hypotheses.push_back(std::move(hyp));
    }
    result.rounds.push_back(std::move(rec));

    for (int e : path_edges) {
      graph.edges[e].path_weight = 1.0;
      saturated[e] = 1;
    }

    const auto remaining =
        static_cast<std::size_t>(std::count(grouped.begin(), grouped.end(), char(0)));
    if (remaining < min_remaining) {
      result.stop = StopReason::RemainingBelowMinimum;
      break;
    }
  }
  result.graph = std::move(graph);
  return result;
}

nlohmann::json graph_to_json(const CorrespondenceGraph& g, const GroupingResult* result) {
  auto weight = [](double w) -> nlohmann::json {
    if (std::isfinite(w)) return w;
    return nullptr;
  };
  nlohmann::json j;
  auto verts = nlohmann::json::array();
  for (std::size_t v = 0; v < g.vertices.size(); ++v) {
    const auto& vx = g.vertices[v];
    const char* kind = vx.kind == VertexKind::Point  ? "point"
                       : vx.kind == VertexKind::Line ? "line"
                       : vx.kind == VertexKind::Source ? "source"
                                                       : "sink";
    nlohmann::json o{{"id", v}, {"kind", kind}, {"anchor", {vx.anchor.x(), vx.anchor.y()}}};
    if (vx.feature_index) o["feature_index"] = *vx.feature_index;
    verts.push_back(std::move(o));
  }
  auto edges = nlohmann::json::array();
  for (const auto& e : g.edges)
    edges.push_back({{"u", e.u}, {"v", e.v}, {"raw", weight(e.raw_weight)}, {"path", e.path_weight}});
  j["vertices"] = std::move(verts);
  j["edges"] = std::move(edges);
  if (result) {
    auto rounds = nlohmann::json::array();
    for (const auto& r : result->rounds) {
      nlohmann::json o{{"seed_path", r.seed_path}, {"max_raw_weight", weight(r.max_raw_weight)}};
      if (r.hypothesis)
        o["hypothesis"] = *r.hypothesis;
      else
        o["hypothesis"] = nullptr;
      rounds.push_back(std::move(o));
    }
    auto hyps = nlohmann::json::array();
    for (const auto& h : result->hypotheses)
      hyps.push_back({{"round", h.generation_round}, {"members", h.members}, {"seed_path", h.seed_path}});
    j["rounds"] = std::move(rounds);
    j["hypotheses"] = std::move(hyps);
    j["stop"] = to_string(result->stop);
  }
  return j;
}

}  // namespace pstitch

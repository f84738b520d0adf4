#include "pstitch/delaunay.hpp"

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <unordered_map>

namespace pstitch {

double orient2d(const Vec2& a, const Vec2& b, const Vec2& c) {
  const long double abx = (long double)b.x() - a.x(), aby = (long double)b.y() - a.y();
  const long double acx = (long double)c.x() - a.x(), acy = (long double)c.y() - a.y();
  return static_cast<double>(abx * acy - aby * acx);
}

double incircle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  const long double adx = (long double)a.x() - d.x(), ady = (long double)a.y() - d.y();
  const long double bdx = (long double)b.x() - d.x(), bdy = (long double)b.y() - d.y();
  const long double cdx = (long double)c.x() - d.x(), cdy = (long double)c.y() - d.y();
  const long double ad = adx * adx + ady * ady;
  const long double bd = bdx * bdx + bdy * bdy;
  const long double cd = cdx * cdx + cdy * cdy;
  return static_cast<double>(ad * (bdx * cdy - cdx * bdy) + bd * (cdx * ady - adx * cdy) +
                             cd * (adx * bdy - bdx * ady));
}

namespace {

class Builder {
 public:
  explicit Builder(std::span<const Vec2> pts) : pts_(pts) {}

  Triangulation run() {
    const int n = static_cast<int>(pts_.size());
    if (n < 3) throw DegenerateGeometry("triangulation needs at least three points");

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int i, int j) {
      const auto &a = pts_[i], &b = pts_[j];
      if (a.x() != b.x()) return a.x() < b.x();
      if (a.y() != b.y()) return a.y() < b.y();
      return i < j;
    });
    for (int k = 1; k < n; ++k)
      if (pts_[order[k]] == pts_[order[k - 1]])
        throw DegenerateGeometry("coincident points " + std::to_string(order[k - 1]) + " and " +
                                 std::to_string(order[k]));

    int k = 2;
    while (k < n && orient2d(P(order[0]), P(order[1]), P(order[k])) == 0.0) ++k;
    if (k == n) throw DegenerateGeometry("all points are collinear");

    seed_fan(order, k);
    for (int i = k + 1; i < n; ++i) insert(order[i]);

    Triangulation out;
    for (const auto& t : tris_)
      if (t[0] >= 0) out.triangles.push_back(t);
    for (const auto& t : out.triangles)
      for (int e = 0; e < 3; ++e) {
        int u = t[e], v = t[(e + 1) % 3];
        if (u > v) std::swap(u, v);
        out.edges.emplace_back(u, v);
      }
    std::sort(out.edges.begin(), out.edges.end());
    out.edges.erase(std::unique(out.edges.begin(), out.edges.end()), out.edges.end());
    return out;
  }

 private:
  const Vec2& P(int i) const { return pts_[i]; }

  static std::int64_t key(int u, int v) { return (std::int64_t(u) << 32) | std::uint32_t(v); }

  int add_triangle(int a, int b, int c) {
    const int id = static_cast<int>(tris_.size());
    tris_.push_back({a, b, c});
    link(id);
    return id;
  }

  void link(int id) {
    const auto& t = tris_[id];
    for (int e = 0; e < 3; ++e) edge_tri_[key(t[e], t[(e + 1) % 3])] = id;
  }

  void unlink(int id) {
    const auto& t = tris_[id];
    for (int e = 0; e < 3; ++e) edge_tri_.erase(key(t[e], t[(e + 1) % 3]));
  }

  // Triangles on the first k (collinear) points in sorted order plus the
  // first point off their line.
  void seed_fan(const std::vector<int>& order, int k) {
    const int p = order[k];
    const bool left = orient2d(P(order[0]), P(order[1]), P(p)) > 0.0;
    for (int i = 0; i + 1 < k; ++i) {
      const int a = order[i], b = order[i + 1];
      if (left)
        add_triangle(a, b, p);
      else
        add_triangle(b, a, p);
    }
    if (left) {
      for (int i = 0; i < k; ++i) hull_.push_back(order[i]);
      hull_.push_back(p);
    } else {
      hull_.push_back(order[0]);
      hull_.push_back(p);
      for (int i = k - 1; i >= 1; --i) hull_.push_back(order[i]);
    }
  }

  void insert(int p) {
    const int h = static_cast<int>(hull_.size());
    std::vector<char> visible(h);
    bool any = false;
    for (int i = 0; i < h; ++i) {
      visible[i] = orient2d(P(hull_[i]), P(hull_[(i + 1) % h]), P(p)) < 0.0;
      any = any || visible[i];
    }
    if (!any) throw DegenerateGeometry("point " + std::to_string(p) + " not outside the hull");

    // First visible edge whose predecessor is not visible.
    int first = 0;
    while (!(visible[first] && !visible[(first + h - 1) % h])) ++first;
    int count = 0;
    while (visible[(first + count) % h]) ++count;

    std::vector<std::pair<int, int>> stack;
    for (int c = 0; c < count; ++c) {
      const int u = hull_[(first + c) % h], v = hull_[(first + c + 1) % h];
      add_triangle(v, u, p);
      stack.emplace_back(u, v);
    }

    // Replace the visible chain u0 -> ... -> u_count by u0 -> p -> u_count.
    std::vector<int> hull;
    hull.reserve(h + 1);
    const int last = (first + count) % h;
    hull.push_back(hull_[first]);
    hull.push_back(p);
    for (int i = last; i != first; i = (i + 1) % h) hull.push_back(hull_[i]);
    hull_ = std::move(hull);

    legalize(p, stack);
  }

  // Each stacked (u, v) is an edge of a triangle (v, u, p); flip while p lies
  // inside the circumcircle of the triangle across it.
  void legalize(int p, std::vector<std::pair<int, int>>& stack) {
    std::size_t guard = 0;
    while (!stack.empty()) {
      if (++guard > 64 * pts_.size() * pts_.size() + 1024)
        throw DegenerateGeometry("edge flipping did not terminate");
      const auto [u, v] = stack.back();
      stack.pop_back();
      auto it = edge_tri_.find(key(u, v));
      if (it == edge_tri_.end()) continue;  // hull edge
      const int t2 = it->second;
      auto jt = edge_tri_.find(key(v, u));
      if (jt == edge_tri_.end()) continue;
      const int t1 = jt->second;
      const auto& tri2 = tris_[t2];
      int w = -1;
      for (int e = 0; e < 3; ++e)
        if (tri2[e] != u && tri2[e] != v) w = tri2[e];
      if (incircle(P(u), P(v), P(w), P(p)) <= 0.0) continue;

      unlink(t1);
      unlink(t2);
      tris_[t1] = {p, v, w};
      tris_[t2] = {p, w, u};
      link(t1);
      link(t2);
      stack.emplace_back(w, v);
      stack.emplace_back(u, w);
    }
  }

  std::span<const Vec2> pts_;
  std::vector<std::array<int, 3>> tris_;
  std::unordered_map<std::int64_t, int> edge_tri_;
  std::vector<int> hull_;  // positively oriented
};

}  // namespace

Triangulation delaunay(std::span<const Vec2> pts) { return Builder(pts).run(); }

}  // namespace pstitch

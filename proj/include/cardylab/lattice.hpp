#pragma once

// Triangular-lattice geometry: delta-approximation of Jordan domains,
// hexagonal dual cells, boundary arcs and quads.
//
// Lattice convention: point (i,j) sits at delta*(i + j/2, j*sqrt(3)/2);
// (0,0) and (1,0) are lattice points, no random offset. Neighbor
// directions in counterclockwise order:
//   (1,0) (0,1) (-1,1) (-1,0) (0,-1) (1,-1).

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

#include "cardylab/common.hpp"
#include "cardylab/planar_map.hpp"

namespace cardylab {

struct Vec2 {
  double x = 0, y = 0;
};
inline double dist2(Vec2 a, Vec2 b) {
  double dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

inline constexpr std::array<std::pair<int, int>, 6> kLatticeDirs = {{
    {1, 0}, {0, 1}, {-1, 1}, {-1, 0}, {0, -1}, {1, -1}}};

constexpr double kSqrt3 = 1.7320508075688772;
constexpr double kPi = 3.141592653589793;
constexpr double kGeomEps = 1e-9;  // point-in-domain tolerance

// A Jordan domain given by a strict-containment predicate plus a bounding box.
struct DomainSpec {
  std::function<bool(double, double)> contains_strict;
  double xmin = 0, xmax = 0, ymin = 0, ymax = 0;

  static DomainSpec disk(double cx, double cy, double r) {
    DomainSpec d;
    d.contains_strict = [=](double x, double y) {
      double dx = x - cx, dy = y - cy;
      return std::sqrt(dx * dx + dy * dy) < r - kGeomEps;
    };
    d.xmin = cx - r; d.xmax = cx + r; d.ymin = cy - r; d.ymax = cy + r;
    return d;
  }

  // Simple polygon, vertices in order (either orientation).
  static DomainSpec polygon(std::vector<Vec2> verts) {
    DomainSpec d;
    d.xmin = d.xmax = verts[0].x;
    d.ymin = d.ymax = verts[0].y;
    for (auto& v : verts) {
      d.xmin = std::min(d.xmin, v.x); d.xmax = std::max(d.xmax, v.x);
      d.ymin = std::min(d.ymin, v.y); d.ymax = std::max(d.ymax, v.y);
    }
    d.contains_strict = [verts = std::move(verts)](double x, double y) {
      int n = (int)verts.size();
      // distance to each edge must exceed the tolerance
      for (int i = 0; i < n; ++i) {
        Vec2 a = verts[i], b = verts[(i + 1) % n];
        double vx = b.x - a.x, vy = b.y - a.y;
        double wx = x - a.x, wy = y - a.y;
        double len2 = vx * vx + vy * vy;
        double t = len2 > 0 ? std::max(0.0, std::min(1.0, (wx * vx + wy * vy) / len2)) : 0;
        double dx = wx - t * vx, dy = wy - t * vy;
        if (dx * dx + dy * dy < kGeomEps * kGeomEps) return false;
      }
      // crossing parity
      bool in = false;
      for (int i = 0; i < n; ++i) {
        Vec2 a = verts[i], b = verts[(i + 1) % n];
        if ((a.y > y) != (b.y > y)) {
          double xi = a.x + (y - a.y) / (b.y - a.y) * (b.x - a.x);
          if (x < xi) in = !in;
        }
      }
      return in;
    };
    return d;
  }

  static DomainSpec equilateral_triangle() {
    return polygon({{0, 0}, {1, 0}, {0.5, kSqrt3 / 2}});
  }
};

class LatticeDomain {
 public:
  Rational delta_rat{1, 1};
  double delta = 1.0;
  Triangulation tri;
  std::vector<std::pair<int, int>> coord;  // per vertex id: (i, j)
  std::vector<char> inner_mask;            // per vertex id
  std::vector<int> inner;                  // inner vertex ids
  std::vector<int> boundary_cycle;         // vertex ids, counterclockwise

  double hexagon_area() const { return delta * delta * kSqrt3 / 2.0; }

  Vec2 position(int v) const {
    auto [i, j] = coord[v];
    return {delta * (i + 0.5 * j), delta * (j * kSqrt3 / 2.0)};
  }

  int vertex_at(int i, int j) const {
    auto it = index_.find(key_(i, j));
    return it == index_.end() ? -1 : it->second;
  }

  // Voronoi hexagon of v: corners are the centroids of the 6 incident
  // lattice triangles, at distance delta/sqrt(3) from the center.
  std::vector<Vec2> hexagon_cell(int v) const {
    if (v < 0 || v >= (int)coord.size()) throw UnknownVertex();
    Vec2 c = position(v);
    std::vector<Vec2> out;
    double R = delta / kSqrt3;
    for (int k = 0; k < 6; ++k) {
      double ang = M_PI / 6.0 + k * M_PI / 3.0;
      out.push_back({c.x + R * std::cos(ang), c.y + R * std::sin(ang)});
    }
    return out;
  }

  // Counterclockwise boundary arc from position p to q, inclusive.
  std::vector<int> boundary_arc(int p, int q) const {
    int L = (int)boundary_cycle.size();
    if (p == q) throw SamePosition();
    if (p < 0 || p >= L || q < 0 || q >= L) throw InvalidInput("bad arc position");
    std::vector<int> out;
    for (int k = p;; k = (k + 1) % L) {
      out.push_back(boundary_cycle[k]);
      if (k == q) break;
    }
    return out;
  }

  int num_vertices() const { return (int)coord.size(); }

  friend LatticeDomain build_lattice_domain(const DomainSpec&, Rational);

 private:
  std::unordered_map<std::int64_t, int> index_;
  static std::int64_t key_(int i, int j) {
    return (std::int64_t(i) << 32) ^ (std::int64_t(j) & 0xffffffffll);
  }
};

struct Quad {
  int p1, p2, p3, p4;  // positions on the boundary cycle, ccw order
};

// The delta-approximation D^delta: among connected components of the
// strictly-inside lattice points, take the largest (ties: the component
// containing the lexicographically smallest (i,j)), then form the polygon
// from all lattice triangles incident to it.
inline LatticeDomain build_lattice_domain(const DomainSpec& dom, Rational delta) {
  LatticeDomain L;
  L.delta_rat = delta;
  L.delta = delta.value();
  double d = L.delta;

  int jmin = (int)std::floor(dom.ymin / (d * kSqrt3 / 2.0)) - 2;
  int jmax = (int)std::ceil(dom.ymax / (d * kSqrt3 / 2.0)) + 2;

  struct PH {  // point hash helpers local to construction
    static std::int64_t key(int i, int j) {
      return (std::int64_t(i) << 32) ^ (std::int64_t(j) & 0xffffffffll);
    }
  };

  std::unordered_map<std::int64_t, int> comp;  // inside points -> component id
  std::vector<std::pair<int, int>> pts;
  for (int j = jmin; j <= jmax; ++j) {
    double y = d * j * kSqrt3 / 2.0;
    int imin = (int)std::floor((dom.xmin - 0.5 * d * j) / d) - 2;
    int imax = (int)std::ceil((dom.xmax - 0.5 * d * j) / d) + 2;
    for (int i = imin; i <= imax; ++i) {
      double x = d * (i + 0.5 * j);
      if (dom.contains_strict(x, y)) {
        comp[PH::key(i, j)] = -1;
        pts.push_back({i, j});
      }
    }
  }
  if (pts.empty()) throw EmptyApproximation("no strictly interior lattice vertex");

  // label components (BFS) and find the largest / tie-broken one
  int ncomp = 0;
  std::vector<int> comp_size;
  std::vector<std::pair<int, int>> comp_min;
  for (auto& p : pts) {
    auto it = comp.find(PH::key(p.first, p.second));
    if (it->second != -1) continue;
    int c = ncomp++;
    comp_size.push_back(0);
    comp_min.push_back(p);
    std::vector<std::pair<int, int>> stack = {p};
    it->second = c;
    while (!stack.empty()) {
      auto [i, j] = stack.back();
      stack.pop_back();
      comp_size[c]++;
      comp_min[c] = std::min(comp_min[c], std::make_pair(i, j));
      for (auto [di, dj] : kLatticeDirs) {
        auto nit = comp.find(PH::key(i + di, j + dj));
        if (nit != comp.end() && nit->second == -1) {
          nit->second = c;
          stack.push_back({i + di, j + dj});
        }
      }
    }
  }
  int best = 0;
  for (int c = 1; c < ncomp; ++c) {
    if (comp_size[c] > comp_size[best] ||
        (comp_size[c] == comp_size[best] && comp_min[c] < comp_min[best]))
      best = c;
  }

  auto in_S = [&](int i, int j) {
    auto it = comp.find(PH::key(i, j));
    return it != comp.end() && it->second == best;
  };

  // All lattice triangles with at least one vertex in S.
  // Up triangle at (i,j): (i,j) (i+1,j) (i,j+1); down: (i+1,j) (i+1,j+1) (i,j+1).
  struct Tri { std::array<std::pair<int, int>, 3> v; };
  std::vector<Tri> faces;
  std::unordered_map<std::int64_t, char> face_seen;
  auto fkey = [](int i, int j, bool up) {
    return (std::int64_t(i) << 33) ^ (std::int64_t(j) << 1 & 0x1fffffffell) ^ (up ? 1 : 0);
  };
  auto add_face = [&](int i, int j, bool up) {
    auto k = fkey(i, j, up);
    if (face_seen.count(k)) return;
    face_seen[k] = 1;
    if (up)
      faces.push_back({{{{i, j}, {i + 1, j}, {i, j + 1}}}});
    else
      faces.push_back({{{{i + 1, j}, {i + 1, j + 1}, {i, j + 1}}}});
  };
  for (auto& p : pts) {
    if (!in_S(p.first, p.second)) continue;
    int i = p.first, j = p.second;
    // the six triangles around (i,j)
    add_face(i, j, true);
    add_face(i, j, false);
    add_face(i - 1, j, true);
    add_face(i - 1, j, false);
    add_face(i, j - 1, true);
    add_face(i, j - 1, false);
    add_face(i - 1, j - 1, false);
  }
  // The stencil above over-approximates; keep exactly the triangles with a
  // vertex in S.
  {
    std::vector<Tri> kept;
    for (auto& f : faces) {
      bool hit = false;
      for (auto& [i, j] : f.v) hit = hit || in_S(i, j);
      if (hit) kept.push_back(f);
    }
    faces = std::move(kept);
  }

  // vertex ids
  auto vid = [&](int i, int j) {
    auto k = PH::key(i, j);
    auto it = L.index_.find(k);
    if (it != L.index_.end()) return it->second;
    int id = (int)L.coord.size();
    L.index_[k] = id;
    L.coord.push_back({i, j});
    return id;
  };

  // build half-edge structure via the shared MapBuilder
  detail::MapBuilder b;
  std::unordered_map<std::int64_t, int> edge_id;  // key on ordered vertex pair
  auto ekey = [](int u, int v) {
    return u < v ? (std::int64_t(u) << 32 | unsigned(v))
                 : (std::int64_t(v) << 32 | unsigned(u));
  };
  struct Usage { int cnt = 0; bool fwd = false; };  // direction of last use
  std::unordered_map<std::int64_t, Usage> usage;

  for (auto& f : faces) {
    std::array<int, 3> ids;
    for (int k = 0; k < 3; ++k) ids[k] = vid(f.v[k].first, f.v[k].second);
    std::vector<std::pair<int, bool>> cyc;
    for (int k = 0; k < 3; ++k) {
      int u = ids[k], v = ids[(k + 1) % 3];
      auto key = ekey(u, v);
      auto it = edge_id.find(key);
      int e;
      if (it == edge_id.end()) {
        e = b.new_edge(u, v);
        edge_id[key] = e;
      } else {
        e = it->second;
      }
      bool fwd = (b.edges[e].u == u);
      cyc.push_back({e, fwd});
      auto& us = usage[key];
      us.cnt++;
      us.fwd = fwd;
    }
    b.faces.push_back(cyc);
  }
  b.nv = (int)L.coord.size();

  // outer face: boundary directed sides are the unused directions of
  // once-used edges; chain them into a single simple cycle
  std::unordered_map<int, std::pair<int, bool>> next_out;  // from-vertex -> (edge, fwd)
  int nboundary = 0;
  for (auto& [key, us] : usage) {
    if (us.cnt != 1) continue;
    ++nboundary;
    int e = edge_id[key];
    // the outer face uses the direction the triangle did not
    bool fwd = !us.fwd;
    int from = fwd ? b.edges[e].u : b.edges[e].v;
    if (next_out.count(from)) throw NonSimpleBoundary("boundary pinches at a vertex");
    next_out[from] = {e, fwd};
  }
  if (nboundary == 0) throw EmptyApproximation("degenerate approximation");

  std::vector<std::pair<int, bool>> outer;
  {
    int start = next_out.begin()->first;
    int cur = start;
    do {
      auto it = next_out.find(cur);
      if (it == next_out.end()) throw NonSimpleBoundary("boundary not a closed cycle");
      auto [e, fwd] = it->second;
      outer.push_back({e, fwd});
      cur = fwd ? b.edges[e].v : b.edges[e].u;
    } while (cur != start);
    if ((int)outer.size() != nboundary)
      throw NonSimpleBoundary("approximation has holes or several boundary cycles");
  }
  b.faces.push_back(outer);

  // canonical root: the outer-cycle edge leaving the lexicographically
  // smallest boundary coordinate
  int root_pos = 0;
  {
    auto coord_of = [&](int k) {
      auto [e, fwd] = outer[k];
      int v = fwd ? b.edges[e].u : b.edges[e].v;
      return L.coord[v];
    };
    for (int k = 1; k < (int)outer.size(); ++k)
      if (coord_of(k) < coord_of(root_pos)) root_pos = k;
  }
  int root_he = 2 * outer[root_pos].first + (outer[root_pos].second ? 0 : 1);

  L.tri = b.build((int)outer.size(), root_he);
  L.tri.validate();

  // boundary cycle in ccw order (reverse of the outer nxt-cycle), inner list
  auto bmask = L.tri.boundary_vertex_mask();
  for (int h : L.tri.boundary_ccw()) L.boundary_cycle.push_back(L.tri.org[h]);
  L.inner_mask.assign(L.num_vertices(), 0);
  for (int v = 0; v < L.num_vertices(); ++v)
    if (!bmask[v]) {
      L.inner_mask[v] = 1;
      L.inner.push_back(v);
    }
  // sanity: inner vertices must be exactly the selected component
  for (int v : L.inner)
    if (!in_S(L.coord[v].first, L.coord[v].second))
      throw NonSimpleBoundary("enclosed vertex outside the target domain");

  // orientation check: the ccw boundary cycle should have positive signed area
  {
    double area2 = 0;
    int n = (int)L.boundary_cycle.size();
    for (int k = 0; k < n; ++k) {
      Vec2 a = L.position(L.boundary_cycle[k]);
      Vec2 c = L.position(L.boundary_cycle[(k + 1) % n]);
      area2 += a.x * c.y - c.x * a.y;
    }
    if (area2 <= 0) throw InvalidInput("boundary orientation inconsistent");
  }
  return L;
}

// Re-root the domain's triangulation at the boundary edges nearest the three
// given points (in counterclockwise order), producing marks (a,b,c).
inline MarkedTriangulation mark_nearest(const LatticeDomain& dom,
                                        const std::array<Vec2, 3>& marks) {
  auto bcc = dom.tri.boundary_ccw();
  int Lb = (int)bcc.size();
  auto edge_mid = [&](int k) {
    Vec2 a = dom.position(dom.tri.org[bcc[k]]);
    Vec2 b = dom.position(dom.tri.head(bcc[k]));
    return Vec2{(a.x + b.x) / 2, (a.y + b.y) / 2};
  };
  std::array<int, 3> idx{};
  for (int m = 0; m < 3; ++m) {
    int best = 0;
    double bd = dist2(edge_mid(0), marks[m]);
    for (int k = 1; k < Lb; ++k) {
      double dd = dist2(edge_mid(k), marks[m]);
      if (dd < bd) { bd = dd; best = k; }
    }
    idx[m] = best;
  }
  if (idx[0] == idx[1] || idx[1] == idx[2] || idx[0] == idx[2])
    throw InvalidInput("marked points map to coinciding boundary edges");

  MarkedTriangulation mt;
  mt.map = dom.tri;
  mt.map.face_of_.clear();  // lazy caches rebuilt after re-rooting
  mt.map.faces_.clear();
  mt.map.root_face_ = -1;
  mt.map.root = bcc[idx[0]];
  mt.ia = 0;
  mt.ib = (idx[1] - idx[0] + Lb) % Lb;
  mt.ic = (idx[2] - idx[0] + Lb) % Lb;
  if (!(0 < mt.ib && mt.ib < mt.ic))
    throw InvalidInput("marks not in counterclockwise order");
  return mt;
}

}  // namespace cardylab

#pragma once

// Bernoulli-1/2 site percolation on triangulations: clusters, loop
// ensembles, interfaces, the crossing events behind the Cardy embedding,
// quad crossings and exact brute-force probabilities.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "cardylab/common.hpp"
#include "cardylab/lattice.hpp"
#include "cardylab/planar_map.hpp"

namespace cardylab {

enum Color : std::uint8_t { Blue = 0, Red = 1 };

enum class BoundaryCondition { MonochromaticBlue, MonochromaticRed, ArcPair, Explicit };

struct Coloring {
  std::vector<std::uint8_t> color;  // per vertex
  BoundaryCondition bc = BoundaryCondition::Explicit;
  int arc_e = -1, arc_ep = -1;      // boundary-edge indices for ArcPair
};

// Impose the (e,e')-boundary condition: vertices on the counterclockwise
// arc (e,e') blue, on (e',e) red. Arc (e,e') consists of the ccw-ends of
// boundary edges e, e+1, ..., e'-1.
inline void apply_arc_bc(const Triangulation& t, Coloring& c, int ie, int iep) {
  auto bcc = t.boundary_ccw();
  int L = (int)bcc.size();
  if (ie == iep) throw InvalidInput("arc boundary condition needs distinct edges");
  for (int k = 0; k < L; ++k) {
    bool blue = ((k - ie + L) % L) < ((iep - ie + L) % L);
    c.color[t.org[bcc[k]]] = blue ? Blue : Red;
  }
  c.bc = BoundaryCondition::ArcPair;
  c.arc_e = ie;
  c.arc_ep = iep;
}

inline Coloring sample_percolation(const Triangulation& t, BoundaryCondition bc,
                                   Rng& rng, int ie = -1, int iep = -1) {
  Coloring c;
  c.color.resize(t.num_vertices);
  for (auto& x : c.color) x = rng.coin() ? Red : Blue;
  c.bc = bc;
  switch (bc) {
    case BoundaryCondition::MonochromaticBlue:
      for (int h : t.boundary_ccw()) c.color[t.org[h]] = Blue;
      break;
    case BoundaryCondition::MonochromaticRed:
      for (int h : t.boundary_ccw()) c.color[t.org[h]] = Red;
      break;
    case BoundaryCondition::ArcPair:
      apply_arc_bc(t, c, ie, iep);
      break;
    case BoundaryCondition::Explicit:
      break;  // every vertex i.i.d.
  }
  return c;
}

// Union-find cluster labels over monochromatic edges.
struct UnionFind {
  std::vector<int> p;
  explicit UnionFind(int n) : p(n) {
    for (int i = 0; i < n; ++i) p[i] = i;
  }
  int find(int x) {
    while (p[x] != x) x = p[x] = p[p[x]];
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) p[b] = a;
  }
};

inline std::vector<int> cluster_labels(const Triangulation& t, const Coloring& c) {
  UnionFind uf(t.num_vertices);
  for (int e = 0; e < t.num_edges(); ++e) {
    int u = t.org[2 * e], v = t.org[2 * e + 1];
    if (c.color[u] == c.color[v]) uf.unite(u, v);
  }
  std::vector<int> lab(t.num_vertices);
  for (int v = 0; v < t.num_vertices; ++v) lab[v] = uf.find(v);
  return lab;
}

// ---------------------------------------------------------------------------
// Dual exploration. Crossing "through" half-edge h means stepping from
// face(h) into face(twin(h)); with counterclockwise inner faces the vertex
// head(h) lies to the LEFT of that motion, so red-left paths consist of
// crossings whose half-edge has a red head. Each inner triangle has 0 or 2
// bichromatic sides, which pairs up crossings deterministically.
// ---------------------------------------------------------------------------

namespace detail_perc {

// The other bichromatic side of inner face f, entered through side "in_he".
inline int other_bichromatic_side(const Triangulation& t, const Coloring& c,
                                  int in_he) {
  int h1 = t.nxt[in_he], h2 = t.nxt[h1];
  bool b1 = c.color[t.org[h1]] != c.color[t.head(h1)];
  bool b2 = c.color[t.org[h2]] != c.color[t.head(h2)];
  if (b1 == b2) throw InvalidInput("triangle without a unique exit side");
  return b1 ? h1 : h2;
}

}  // namespace detail_perc

struct InterfacePath {
  int ie = -1, iep = -1;
  std::vector<int> crossed;  // half-edges with red head, in traversal order
};

// The unique red-left/blue-right edge path from boundary edge e to e',
// under the (e,e')-boundary condition (imposed on a copy of the coloring).
inline InterfacePath interface(const Triangulation& t, int ie, int iep,
                               const Coloring& coloring) {
  Coloring c = coloring;
  apply_arc_bc(t, c, ie, iep);
  auto bcc = t.boundary_ccw();
  InterfacePath path;
  path.ie = ie;
  path.iep = iep;
  int h = bcc[ie];
  path.crossed.push_back(h);
  int root_face = t.root_face();
  while (true) {
    int in_he = t.twin[h];
    if (t.face_of(in_he) == root_face) break;
    h = detail_perc::other_bichromatic_side(t, c, in_he);
    path.crossed.push_back(h);
  }
  if (t.edge_of(path.crossed.back()) != t.edge_of(bcc[iep]))
    throw InvalidInput("interface exited at an unexpected boundary edge");
  return path;
}

// ---------------------------------------------------------------------------
// Crossing events. E_a(v) holds iff v lies on the same side as the arc
// containing a of the interface on (M, c, b); E_b and E_c by cyclic
// permutation of the marks.
// ---------------------------------------------------------------------------

struct CrossingFlags {
  // flags[0] = E_a, flags[1] = E_b, flags[2] = E_c; each per vertex
  std::array<std::vector<char>, 3> flags;
};

// Precomputes the per-map structures so repeated evaluations (Monte Carlo
// over colorings) stay cheap.
class CrossingEvaluator {
 public:
  explicit CrossingEvaluator(const Triangulation& t)
      : t_(t), adj_(t.vertex_adjacency()), bcc_(t.boundary_ccw()) {}

  CrossingFlags eval(int ia, int ib, int ic, const Coloring& coloring) const {
    CrossingFlags out;
    out.flags[0] = side_event(ic, ib, ia, coloring);  // interface on (M,c,b)
    out.flags[1] = side_event(ia, ic, ib, coloring);  // (M,a,c)
    out.flags[2] = side_event(ib, ia, ic, coloring);  // (M,b,a)
    return out;
  }

 private:
  // The full interface from e to e' wiggles back to the boundary arcs and
  // cuts off pockets that are graph-connected to the mark but on the wrong
  // side of the curve. Only its middle segment separates the mark's side:
  // the piece between the last visit to the arc (e, mark) and the first
  // visit to the arc (mark, e'), where a visit is a crossed edge with an
  // endpoint on the arc. Those endpoint vertices anchor the segment to the
  // boundary, so they are blocked along with the segment's crossed edges;
  // everything the mark still reaches is on its side.
  std::vector<char> side_event(int ie, int iep, int imark,
                               const Coloring& coloring) const {
    Coloring c = coloring;
    apply_arc_bc(t_, c, ie, iep);
    InterfacePath pi = interface(t_, ie, iep, c);

    std::vector<char> removed(t_.num_edges(), 0);
    std::vector<char> touched(t_.num_vertices, 0);
    for (int h : pi.crossed) {
      removed[t_.edge_of(h)] = 1;
      touched[t_.org[h]] = 1;
      touched[t_.head(h)] = 1;
    }

    // The mark's side is the connected component of the marked edge in the
    // polygon minus the whole interface. Sides live on faces, not vertices:
    // the curve pinches at vertices and dips back to the boundary arcs,
    // carving pockets that stay graph-connected to the mark through the
    // pinch vertex or along the boundary, so a vertex-BFS would leak into
    // them. Flood inner faces from the face on the marked edge; crossing an
    // interface edge or the root face is forbidden.
    int rf = t_.root_face();
    std::vector<char> fside(t_.num_faces(), 0);
    int h0 = bcc_[imark];
    if (t_.face_of(h0) == rf) h0 = t_.twin[h0];
    std::vector<int> stack{h0};
    fside[t_.face_of(h0)] = 1;
    while (!stack.empty()) {
      int h = stack.back();
      stack.pop_back();
      int cur = h;
      do {
        int o = t_.twin[cur];
        int f = t_.face_of(o);
        if (f != rf && !fside[f] && !removed[t_.edge_of(cur)]) {
          fside[f] = 1;
          stack.push_back(o);
        }
        cur = t_.nxt[cur];
      } while (cur != h);
    }

    // A vertex off the curve lies strictly on one side: any incident inner
    // face decides. A vertex on the curve counts when it belongs to the
    // crossing path itself, i.e. it is blue under the (e,e') condition (the
    // curve keeps blue on the arc-with-mark side) and borders the region.
    std::vector<char> vis(t_.num_vertices, 0);
    for (int h = 0; h < t_.num_half_edges(); ++h) {
      int f = t_.face_of(h);
      if (f == rf || !fside[f]) continue;
      int v = t_.org[h];
      if (!touched[v] || c.color[v] == Blue) vis[v] = 1;
    }
    return vis;
  }

  const Triangulation& t_;
  std::vector<std::vector<std::pair<int, int>>> adj_;
  std::vector<int> bcc_;
};

inline CrossingFlags crossing_flags(const MarkedTriangulation& mt,
                                    const Coloring& coloring) {
  return CrossingEvaluator(mt.map).eval(mt.ia, mt.ib, mt.ic, coloring);
}

// ---------------------------------------------------------------------------
// Loop ensemble: one oriented dual loop per non-boundary cluster.
// ---------------------------------------------------------------------------

struct Loop {
  std::vector<int> crossed;  // half-edges with red head, traversal order
  std::vector<int> region;   // enclosed vertex set (the cluster's filling)
  int cluster = -1;          // union-find label of the surrounded cluster
  double area = 0;           // under the measure supplied to loop_ensemble

  // canonical cyclic form, for set comparison of ensembles
  std::vector<int> key() const {
    if (crossed.empty()) return {};
    int n = (int)crossed.size();
    int best = 0;
    for (int i = 1; i < n; ++i)
      if (crossed[i] < crossed[best]) best = i;
    std::vector<int> k(n);
    for (int i = 0; i < n; ++i) k[i] = crossed[(best + i) % n];
    return k;
  }
};

struct LoopEnsemble {
  std::vector<Loop> loops;
};

// area_of: vertex -> mass; defaults to counting measure (mass 1).
//
// Near-linear construction: trace one dual cycle per bichromatic edge class,
// then organize clusters into their nesting tree (rooted at the unique
// boundary cluster; each loop is a tree edge) so that areas are subtree
// masses. Region vertex lists are only materialized when asked for, since
// they can be quadratic in aggregate.
inline LoopEnsemble loop_ensemble(
    const Triangulation& t, const Coloring& c,
    const std::function<double(int)>& area_of = nullptr,
    bool with_regions = true) {
  if (c.bc != BoundaryCondition::MonochromaticBlue &&
      c.bc != BoundaryCondition::MonochromaticRed)
    throw BoundaryConditionMismatch("loop ensemble needs a monochromatic boundary");

  auto bmask = t.boundary_vertex_mask();
  for (int v = 0; v < t.num_vertices; ++v)
    if (bmask[v]) {
      std::uint8_t want =
          c.bc == BoundaryCondition::MonochromaticBlue ? Blue : Red;
      if (c.color[v] != want)
        throw BoundaryConditionMismatch("coloring does not match its boundary tag");
    }

  int E = t.num_edges();
  int V = t.num_vertices;
  auto labels = cluster_labels(t, c);

  LoopEnsemble ens;
  std::vector<char> done(E, 0);
  for (int e = 0; e < E; ++e) {
    if (done[e]) continue;
    int u = t.org[2 * e], v = t.org[2 * e + 1];
    if (c.color[u] == c.color[v]) continue;
    // start at the red-head side; the walk keeps red heads throughout
    int h0 = (c.color[t.head(2 * e)] == Red) ? 2 * e : 2 * e + 1;
    Loop loop;
    int h = h0;
    do {
      loop.crossed.push_back(h);
      done[t.edge_of(h)] = 1;
      h = detail_perc::other_bichromatic_side(t, c, t.twin[h]);
    } while (h != h0);
    loop.crossed = loop.key();  // canonical starting point for determinism
    ens.loops.push_back(std::move(loop));
  }

  // cluster nesting tree: nodes are cluster labels, edges are loops
  int root = -1;
  for (int v = 0; v < V; ++v)
    if (bmask[v]) {
      if (root >= 0 && labels[v] != root)
        throw InconsistentLoops("boundary splits into several clusters");
      root = labels[v];
    }
  std::vector<std::vector<std::pair<int, int>>> tree(V);  // label -> (label, loop)
  for (int i = 0; i < (int)ens.loops.size(); ++i) {
    int h = ens.loops[i].crossed[0];
    tree[labels[t.org[h]]].push_back({labels[t.head(h)], i});
    tree[labels[t.head(h)]].push_back({labels[t.org[h]], i});
  }
  std::vector<int> depth(V, -1), order;
  depth[root] = 0;
  order.push_back(root);
  for (std::size_t qi = 0; qi < order.size(); ++qi) {
    int x = order[qi];
    for (auto [y, li] : tree[x])
      if (depth[y] < 0) {
        depth[y] = depth[x] + 1;
        order.push_back(y);
        ens.loops[li].cluster = y;  // the surrounded (deeper) cluster
      }
  }
  std::vector<double> mass(V, 0);
  for (int v = 0; v < V; ++v) {
    if (depth[labels[v]] < 0)
      throw InconsistentLoops("cluster not attached to the nesting tree");
    mass[labels[v]] += area_of ? area_of(v) : 1.0;
  }
  // subtree masses, children before parents
  for (int qi = (int)order.size() - 1; qi > 0; --qi) {
    int x = order[qi];
    for (auto [y, li] : tree[x])
      if (depth[y] == depth[x] - 1) mass[y] += mass[x];
  }
  int assigned = 0;
  for (auto& l : ens.loops)
    if (l.cluster >= 0) {
      l.area = mass[l.cluster];
      assigned++;
    }
  if (assigned != (int)ens.loops.size())
    throw InconsistentLoops("loop without a surrounded cluster");

  if (with_regions) {
    // region of a loop = vertices of all clusters in its subtree
    std::vector<std::vector<int>> members(V);
    for (int v = 0; v < V; ++v) members[labels[v]].push_back(v);
    std::vector<std::vector<int>> reg(V);
    for (int qi = (int)order.size() - 1; qi > 0; --qi) {
      int x = order[qi];
      reg[x].insert(reg[x].end(), members[x].begin(), members[x].end());
      std::sort(reg[x].begin(), reg[x].end());
      for (auto [y, li] : tree[x])
        if (depth[y] == depth[x] - 1 && y != root) {
          reg[y].insert(reg[y].end(), reg[x].begin(), reg[x].end());
        }
    }
    for (auto& l : ens.loops) l.region = reg[l.cluster];
  }

  std::sort(ens.loops.begin(), ens.loops.end(),
            [](const Loop& a, const Loop& b) { return a.crossed < b.crossed; });
  return ens;
}

// Exact inverse of loop_ensemble: colors alternate with nesting depth.
inline Coloring coloring_from_loops(const Triangulation& t,
                                    const LoopEnsemble& ens,
                                    std::uint8_t boundary_color) {
  Coloring c;
  c.color.assign(t.num_vertices, boundary_color);
  std::vector<int> depth(t.num_vertices, 0);
  for (const auto& loop : ens.loops)
    for (int v : loop.region) {
      if (v < 0 || v >= t.num_vertices) throw InconsistentLoops("region vertex out of range");
      depth[v]++;
    }
  for (int v = 0; v < t.num_vertices; ++v)
    if (depth[v] % 2) c.color[v] = boundary_color == Blue ? Red : Blue;
  c.bc = boundary_color == Blue ? BoundaryCondition::MonochromaticBlue
                                : BoundaryCondition::MonochromaticRed;
  return c;
}

// ---------------------------------------------------------------------------
// Quad crossings on lattice domains.
// ---------------------------------------------------------------------------

inline bool quad_crossing(const LatticeDomain& dom, const Coloring& c,
                          const Quad& q) {
  const Triangulation& t = dom.tri;
  UnionFind uf(t.num_vertices);
  for (int e = 0; e < t.num_edges(); ++e) {
    int u = t.org[2 * e], v = t.org[2 * e + 1];
    if (c.color[u] == Red && c.color[v] == Red) uf.unite(u, v);
  }
  auto arc1 = dom.boundary_arc(q.p1, q.p2);
  auto arc3 = dom.boundary_arc(q.p3, q.p4);
  std::vector<char> mark(t.num_vertices, 0);
  for (int v : arc1)
    if (c.color[v] == Red) mark[uf.find(v)] = 1;
  for (int v : arc3)
    if (c.color[v] == Red && mark[uf.find(v)]) return true;
  return false;
}

// ---------------------------------------------------------------------------
// Exact probabilities by exhaustive enumeration of inner colorings.
// ---------------------------------------------------------------------------

struct ExactProbability {
  std::uint64_t numerator = 0;
  int k = 0;  // denominator is 2^k
  double value() const { return std::ldexp((double)numerator, -k); }
};

// The predicate sees a full Coloring whose boundary is whatever base_bc
// prescribes (events that ignore the boundary can use any).
inline ExactProbability brute_force_probability(
    const Triangulation& t, const std::function<bool(const Coloring&)>& event,
    BoundaryCondition base_bc = BoundaryCondition::MonochromaticBlue) {
  auto bmask = t.boundary_vertex_mask();
  std::vector<int> inner;
  for (int v = 0; v < t.num_vertices; ++v)
    if (!bmask[v]) inner.push_back(v);
  int k = (int)inner.size();
  if (k > 24) throw TooManyVertices("brute force capped at 24 inner vertices");

  Coloring c;
  c.color.assign(t.num_vertices, Blue);
  c.bc = base_bc;
  if (base_bc == BoundaryCondition::MonochromaticRed)
    for (int v = 0; v < t.num_vertices; ++v)
      if (bmask[v]) c.color[v] = Red;

  ExactProbability out;
  out.k = k;
  for (std::uint64_t mask = 0; mask < (std::uint64_t(1) << k); ++mask) {
    for (int i = 0; i < k; ++i) c.color[inner[i]] = (mask >> i) & 1 ? Red : Blue;
    if (event(c)) out.numerator++;
  }
  return out;
}

}  // namespace cardylab

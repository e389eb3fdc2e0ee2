#pragma once

// Rooted type-II triangulations of an l-gon: half-edge structure, exact
// counting/enumeration by root-triangle decomposition, exact Boltzmann
// sampling at weight (2/27)^n, marked boundary edges, graph metric.
//
// Half-edge conventions used throughout:
//   - twin(h) = h ^ 1; the two half-edges of edge e are 2e and 2e+1.
//   - nxt(h) walks around the face lying to the LEFT of h, so inner faces
//     are counterclockwise cycles and the root (outer) face cycle runs
//     clockwise along the boundary.
//   - root is a half-edge on the root face; the boundary traversed
//     counterclockwise (interior on the left) visits the root-face
//     half-edges in reverse cycle order.

#include <algorithm>
#include <cstdint>
#include <map>
#include <mutex>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "cardylab/common.hpp"

namespace cardylab {

using BigInt = boost::multiprecision::cpp_int;

struct Triangulation {
  std::vector<int> twin, nxt, org;
  int root = 0;      // half-edge on the root face
  int ell = 0;       // boundary length
  int n_inner = 0;
  int num_vertices = 0;

  int num_half_edges() const { return (int)twin.size(); }
  int num_edges() const { return (int)twin.size() / 2; }
  int head(int h) const { return org[nxt[h]]; }
  int edge_of(int h) const { return h >> 1; }

  // Face structure, computed lazily.
  mutable std::vector<int> face_of_;
  mutable std::vector<std::vector<int>> faces_;
  mutable int root_face_ = -1;

  void build_faces() const {
    if (!face_of_.empty()) return;
    int H = num_half_edges();
    face_of_.assign(H, -1);
    for (int h = 0; h < H; ++h) {
      if (face_of_[h] != -1) continue;
      int f = (int)faces_.size();
      faces_.emplace_back();
      int cur = h;
      do {
        face_of_[cur] = f;
        faces_[f].push_back(cur);
        cur = nxt[cur];
      } while (cur != h);
    }
    root_face_ = face_of_[root];
  }
  int face_of(int h) const { build_faces(); return face_of_[h]; }
  int root_face() const { build_faces(); return root_face_; }
  int num_faces() const { build_faces(); return (int)faces_.size(); }

  // Root-face half-edges in counterclockwise boundary order, starting at root.
  // (The root-face nxt-cycle runs clockwise, so ccw order is the reverse.)
  std::vector<int> boundary_ccw() const {
    build_faces();
    const auto& cyc = faces_[root_face_];
    int k0 = 0;
    while (cyc[k0] != root) ++k0;
    std::vector<int> out;
    out.reserve(cyc.size());
    int L = (int)cyc.size();
    for (int i = 0; i < L; ++i) out.push_back(cyc[(k0 - i + L) % L]);
    return out;
  }

  // Counterclockwise traversal of boundary edge h (a root-face half-edge)
  // runs from head(h) to org(h).
  int ccw_start(int h) const { return head(h); }
  int ccw_end(int h) const { return org[h]; }

  bool on_root_face(int h) const { return face_of(h) == root_face(); }
  bool is_boundary_edge(int e) const {
    return on_root_face(2 * e) || on_root_face(2 * e + 1);
  }
  bool is_boundary_vertex(int v) const {
    for (int h : boundary_ccw())
      if (org[h] == v) return true;
    return false;
  }

  std::vector<char> boundary_vertex_mask() const {
    std::vector<char> m(num_vertices, 0);
    for (int h : boundary_ccw()) m[org[h]] = 1;
    return m;
  }

  // Adjacency as (neighbor, via-edge) pairs; multi-edges kept.
  std::vector<std::vector<std::pair<int, int>>> vertex_adjacency() const {
    std::vector<std::vector<std::pair<int, int>>> adj(num_vertices);
    for (int h = 0; h < num_half_edges(); ++h)
      adj[org[h]].push_back({org[twin[h]], h >> 1});
    return adj;
  }

  // Complete invariant for rooted maps: breadth-first relabeling of
  // half-edges generated by (nxt, twin) starting from the root.
  std::vector<int> canonical_code() const {
    int H = num_half_edges();
    std::vector<int> label(H, -1), order;
    order.reserve(H);
    label[root] = 0;
    order.push_back(root);
    for (std::size_t i = 0; i < order.size(); ++i) {
      int h = order[i];
      for (int g : {nxt[h], twin[h]}) {
        if (label[g] == -1) {
          label[g] = (int)order.size();
          order.push_back(g);
        }
      }
    }
    std::vector<int> code;
    code.reserve(2 * H);
    for (int h : order) {
      code.push_back(label[nxt[h]]);
      code.push_back(label[twin[h]]);
    }
    return code;
  }

  void validate() const {
    int H = num_half_edges();
    if (H == 0 || H % 2) throw InvalidInput("bad half-edge count");
    std::vector<char> seen(H, 0);
    for (int h = 0; h < H; ++h) {
      if (twin[twin[h]] != h || twin[h] == h) throw InvalidInput("twin not an involution");
      if (org[h] == org[twin[h]]) throw InvalidInput("self-loop");
      if (org[h] < 0 || org[h] >= num_vertices) throw InvalidInput("bad origin");
      seen[h] = 1;
    }
    // nxt is a permutation
    std::vector<char> hit(H, 0);
    for (int h = 0; h < H; ++h) {
      if (nxt[h] < 0 || nxt[h] >= H || hit[nxt[h]]) throw InvalidInput("nxt not a permutation");
      hit[nxt[h]] = 1;
    }
    // half-edges around a face: org of nxt must be head of current
    for (int h = 0; h < H; ++h)
      if (org[nxt[h]] != org[twin[h]]) throw InvalidInput("face cycle broken");
    build_faces();
    int F = num_faces();
    int V = num_vertices, E = H / 2;
    if (V - E + F != 2) throw InvalidInput("Euler characteristic != 2");
    for (int f = 0; f < F; ++f) {
      int deg = (int)faces_[f].size();
      if (f == root_face_) {
        if (deg != ell) throw InvalidInput("root face degree != ell");
      } else if (deg != 3) {
        throw InvalidInput("inner face not a triangle");
      }
    }
    // simple boundary: ell distinct vertices
    std::vector<int> bv;
    for (int h : boundary_ccw()) bv.push_back(org[h]);
    std::sort(bv.begin(), bv.end());
    if (std::adjacent_find(bv.begin(), bv.end()) != bv.end())
      throw NonSimpleBoundary("root face visits a vertex twice");
    if (n_inner != V - ell) throw InvalidInput("inner vertex count mismatch");
    // connectivity (via half-edge orbit = whole map for connected maps)
    if ((int)canonical_code().size() != 2 * H) throw InvalidInput("map not connected");
  }
};

struct MarkedTriangulation {
  Triangulation map;
  // Indices into map.boundary_ccw(); a is always 0 (the root edge) and
  // 0 <= ia < ib < ic < ell gives counterclockwise order.
  int ia = 0, ib = 1, ic = 2;
};

// ---------------------------------------------------------------------------
// Construction by root-triangle decomposition.
//
// A hole is a not-yet-triangulated face, stored as its boundary cycle with
// the hole on the left. Filling rule for the hole's first edge (u -> w):
//   A. apex is a fresh inner vertex t: two new edges, perimeter grows by 1;
//   B. apex is the hole vertex at position p in {2..m-1}: the hole splits in
//      two; each of the triangle's two new sides either is a genuinely new
//      edge (leaving a sub-hole, which for perimeter 2 must receive at least
//      one inner vertex) or, when the apex is adjacent along the hole,
//      coincides with the existing hole edge (the "glued 2-gon" case).
// Every triangulation decomposes uniquely this way, which makes the same
// recursion serve counting, exhaustive enumeration, and uniform sampling.
// ---------------------------------------------------------------------------

namespace detail {

struct MapBuilder {
  struct EdgeRec { int u, v; };
  int nv = 0;
  std::vector<EdgeRec> edges;
  // faces as cycles of (edge, forward?) where forward means traversed u->v
  std::vector<std::vector<std::pair<int, bool>>> faces;

  int new_vertex() { return nv++; }
  int new_edge(int u, int v) {
    edges.push_back({u, v});
    return (int)edges.size() - 1;
  }

  struct Mark { int nv, ne, nf; };
  Mark mark() const { return {nv, (int)edges.size(), (int)faces.size()}; }
  void rollback(const Mark& m) {
    nv = m.nv;
    edges.resize(m.ne);
    faces.resize(m.nf);
  }

  Triangulation build(int ell, int root_he = 0) const {
    Triangulation t;
    int E = (int)edges.size();
    t.twin.resize(2 * E);
    t.nxt.assign(2 * E, -1);
    t.org.resize(2 * E);
    for (int e = 0; e < E; ++e) {
      t.twin[2 * e] = 2 * e + 1;
      t.twin[2 * e + 1] = 2 * e;
      t.org[2 * e] = edges[e].u;
      t.org[2 * e + 1] = edges[e].v;
    }
    for (const auto& f : faces) {
      int k = (int)f.size();
      for (int i = 0; i < k; ++i) {
        int h = 2 * f[i].first + (f[i].second ? 0 : 1);
        int g = 2 * f[(i + 1) % k].first + (f[(i + 1) % k].second ? 0 : 1);
        if (t.nxt[h] != -1) throw InvalidInput("edge side used twice");
        t.nxt[h] = g;
      }
    }
    t.root = root_he;  // default: side (e0, forward), on the outer face
    t.ell = ell;
    t.num_vertices = nv;
    t.n_inner = nv - ell;
    return t;
  }
};

struct HoleEdge {
  int edge;
  int from, to;
  bool forward;  // from->to matches the edge's creation orientation
};
using Hole = std::vector<HoleEdge>;

// Initial state: boundary cycle v0..v_{l-1}; outer face uses edges forward
// (clockwise in a planar drawing), the interior hole uses them backward,
// starting at the root edge.
inline Hole init_polygon(MapBuilder& b, int ell) {
  std::vector<int> vs(ell), es(ell);
  for (int i = 0; i < ell; ++i) vs[i] = b.new_vertex();
  for (int i = 0; i < ell; ++i) es[i] = b.new_edge(vs[i], vs[(i + 1) % ell]);
  std::vector<std::pair<int, bool>> outer;
  for (int i = 0; i < ell; ++i) outer.push_back({es[i], true});
  b.faces.push_back(outer);
  Hole hole;
  hole.push_back({es[0], vs[1], vs[0], false});
  for (int i = ell - 1; i >= 1; --i)
    hole.push_back({es[i], vs[(i + 1) % ell], vs[i], false});
  return hole;
}

// Exact counts, memoized. count(2,0)=1 encodes the glued 2-gon.
class CountTable {
 public:
  const BigInt& count(int m, int n) {
    if (m < 2 || n < 0) return zero_;
    std::lock_guard<std::mutex> lock(mu_);
    return count_nolock(m, n);
  }

 private:
  const BigInt& count_nolock(int m, int n) {
    auto key = std::make_pair(m, n);
    auto it = memo_.find(key);
    if (it != memo_.end()) return it->second;
    BigInt r = 0;
    if (m == 2) {
      r = (n == 0) ? BigInt(1) : count_nolock(3, n - 1);
    } else {
      if (n >= 1) r += count_nolock(m + 1, n - 1);
      for (int p = 2; p <= m - 1; ++p)
        for (int j = 0; j <= n; ++j) {
          const BigInt a = count_nolock(p, j);
          if (a == 0) continue;
          r += a * count_nolock(m - p + 1, n - j);
        }
    }
    return memo_.emplace(key, std::move(r)).first->second;
  }
  std::map<std::pair<int, int>, BigInt> memo_;
  BigInt zero_ = 0;
  std::mutex mu_;
};

inline CountTable& count_table() {
  static CountTable t;
  return t;
}

template <typename OnMap>
void enumerate_rec(MapBuilder& b, std::vector<std::pair<Hole, int>>& todo,
                   int ell, OnMap&& on_map) {
  if (todo.empty()) {
    on_map(b.build(ell));
    return;
  }
  auto [hole, n] = todo.back();
  todo.pop_back();
  const int m = (int)hole.size();
  const HoleEdge he0 = hole[0];
  const int u = he0.from, w = he0.to;
  auto mk = b.mark();

  auto push_triangle = [&](int e1, bool d1, int e2, bool d2) {
    b.faces.push_back({{he0.edge, he0.forward}, {e1, d1}, {e2, d2}});
  };

  // Case A: fresh apex.
  if (n >= 1) {
    int t = b.new_vertex();
    int f1 = b.new_edge(w, t);
    int f2 = b.new_edge(t, u);
    push_triangle(f1, true, f2, true);
    Hole grown;
    grown.push_back({f2, u, t, false});
    grown.push_back({f1, t, w, false});
    for (int i = 1; i < m; ++i) grown.push_back(hole[i]);
    todo.push_back({std::move(grown), n - 1});
    enumerate_rec(b, todo, ell, on_map);
    todo.pop_back();
    b.rollback(mk);
  }

  // Case B: apex on the hole (only possible for m >= 3).
  if (m >= 3) {
    for (int p = 2; p <= m - 1; ++p) {
      int xp = hole[p % m].from;  // p in 2..m-1 so just hole[p].from
      xp = hole[p].from;
      int mA = p;           // perimeter of the w..xp side
      int mB = m - p + 1;   // perimeter of the xp..u side
      for (int nA = 0; nA <= n; ++nA) {
        int nB = n - nA;
        if (mA == 2 && nA == 0) {
          // glue: triangle reuses hole[1] directly
          if (mB == 2 && nB == 0) {
            // both sides glued: triangle closes the 3-gon hole
            auto mk2 = b.mark();
            b.faces.push_back({{he0.edge, he0.forward},
                               {hole[1].edge, hole[1].forward},
                               {hole[2].edge, hole[2].forward}});
            enumerate_rec(b, todo, ell, on_map);
            b.rollback(mk2);
            continue;
          }
          if (mB == 2 && nB >= 1) {
            auto mk2 = b.mark();
            int g2 = b.new_edge(xp, u);
            b.faces.push_back({{he0.edge, he0.forward},
                               {hole[1].edge, hole[1].forward},
                               {g2, true}});
            Hole hb;
            hb.push_back({g2, u, xp, false});
            for (int i = p; i < m; ++i) hb.push_back(hole[i]);
            todo.push_back({std::move(hb), nB});
            enumerate_rec(b, todo, ell, on_map);
            todo.pop_back();
            b.rollback(mk2);
            continue;
          }
          // mB >= 3
          auto mk2 = b.mark();
          int g2 = b.new_edge(xp, u);
          b.faces.push_back({{he0.edge, he0.forward},
                             {hole[1].edge, hole[1].forward},
                             {g2, true}});
          Hole hb;
          hb.push_back({g2, u, xp, false});
          for (int i = p; i < m; ++i) hb.push_back(hole[i]);
          todo.push_back({std::move(hb), nB});
          enumerate_rec(b, todo, ell, on_map);
          todo.pop_back();
          b.rollback(mk2);
          continue;
        }
        if (mA == 2 && nA >= 1) {
          // new parallel edge, 2-gon sub-hole with nA inner vertices
          if (mB == 2 && nB == 0) {
            auto mk2 = b.mark();
            int g1 = b.new_edge(w, xp);
            b.faces.push_back({{he0.edge, he0.forward},
                               {g1, true},
                               {hole[p].edge, hole[p].forward}});
            Hole ha;
            ha.push_back({g1, xp, w, false});
            ha.push_back(hole[1]);
            todo.push_back({std::move(ha), nA});
            enumerate_rec(b, todo, ell, on_map);
            todo.pop_back();
            b.rollback(mk2);
            continue;
          }
          auto mk2 = b.mark();
          int g1 = b.new_edge(w, xp);
          bool glueB = (mB == 2 && nB == 0);
          (void)glueB;
          int g2 = -1;
          if (mB == 2 && nB == 0) {
            b.faces.push_back({{he0.edge, he0.forward},
                               {g1, true},
                               {hole[p].edge, hole[p].forward}});
          } else {
            g2 = b.new_edge(xp, u);
            b.faces.push_back({{he0.edge, he0.forward}, {g1, true}, {g2, true}});
          }
          Hole ha;
          ha.push_back({g1, xp, w, false});
          ha.push_back(hole[1]);
          todo.push_back({std::move(ha), nA});
          if (g2 != -1) {
            Hole hb;
            hb.push_back({g2, u, xp, false});
            for (int i = p; i < m; ++i) hb.push_back(hole[i]);
            todo.push_back({std::move(hb), nB});
            enumerate_rec(b, todo, ell, on_map);
            todo.pop_back();
          } else {
            enumerate_rec(b, todo, ell, on_map);
          }
          todo.pop_back();
          b.rollback(mk2);
          continue;
        }
        // mA >= 3: side A always gets a new edge g1
        if (mB == 2 && nB == 0) {
          auto mk2 = b.mark();
          int g1 = b.new_edge(w, xp);
          b.faces.push_back({{he0.edge, he0.forward},
                             {g1, true},
                             {hole[p].edge, hole[p].forward}});
          Hole ha;
          ha.push_back({g1, xp, w, false});
          for (int i = 1; i < p; ++i) ha.push_back(hole[i]);
          todo.push_back({std::move(ha), nA});
          enumerate_rec(b, todo, ell, on_map);
          todo.pop_back();
          b.rollback(mk2);
        } else if (!(mB == 2 && nB == 0)) {
          auto mk2 = b.mark();
          int g1 = b.new_edge(w, xp);
          int g2 = b.new_edge(xp, u);
          b.faces.push_back({{he0.edge, he0.forward}, {g1, true}, {g2, true}});
          Hole ha;
          ha.push_back({g1, xp, w, false});
          for (int i = 1; i < p; ++i) ha.push_back(hole[i]);
          Hole hb;
          hb.push_back({g2, u, xp, false});
          for (int i = p; i < m; ++i) hb.push_back(hole[i]);
          todo.push_back({std::move(ha), nA});
          todo.push_back({std::move(hb), nB});
          enumerate_rec(b, todo, ell, on_map);
          todo.pop_back();
          todo.pop_back();
          b.rollback(mk2);
        }
      }
    }
  }
  todo.push_back({std::move(hole), n});
}

}  // namespace detail

inline BigInt count_triangulations(int ell, int n) {
  if (ell < 3) throw InvalidInput("boundary length must be >= 3");
  return detail::count_table().count(ell, n);
}

inline std::vector<Triangulation> enumerate_triangulations(
    int ell, int n, int n_cap = 8, std::uint64_t list_cap = 300000) {
  if (ell < 3) throw InvalidInput("boundary length must be >= 3");
  if (n < 0) throw InvalidInput("n must be >= 0");
  if (n > n_cap) throw CapExceeded("n exceeds the enumeration cap");
  if (count_triangulations(ell, n) > BigInt(list_cap))
    throw CapExceeded("enumeration list would exceed the size cap");
  detail::MapBuilder b;
  std::vector<std::pair<detail::Hole, int>> todo;
  todo.push_back({detail::init_polygon(b, ell), n});
  std::vector<Triangulation> out;
  detail::enumerate_rec(b, todo, ell,
                        [&](Triangulation t) { out.push_back(std::move(t)); });
  return out;
}

// Uniform sample among triangulations with exactly (ell, n): the same case
// analysis, choosing each branch with probability proportional to its count.
inline Triangulation sample_uniform_triangulation(int ell, int n, Rng& rng) {
  if (ell < 3) throw InvalidInput("boundary length must be >= 3");
  auto& tab = detail::count_table();
  if (tab.count(ell, n) == 0) throw InvalidInput("no such triangulation");

  auto draw_below = [&](const BigInt& bound) {
    // uniform BigInt in [0, bound) by bit-rejection
    unsigned bits = (unsigned)boost::multiprecision::msb(bound) + 1;
    while (true) {
      BigInt x = 0;
      unsigned got = 0;
      while (got < bits) {
        unsigned take = std::min(64u, bits - got);
        std::uint64_t word = rng.u64();
        if (take < 64) word &= ((std::uint64_t(1) << take) - 1);
        x <<= take;
        x += word;
        got += take;
      }
      if (x < bound) return x;
    }
  };

  detail::MapBuilder b;
  std::vector<std::pair<detail::Hole, int>> todo;
  todo.push_back({detail::init_polygon(b, ell), n});

  while (!todo.empty()) {
    auto [hole, nh] = std::move(todo.back());
    todo.pop_back();
    const int m = (int)hole.size();
    const detail::HoleEdge he0 = hole[0];
    const int u = he0.from, w = he0.to;
    BigInt total = (m == 2 && nh >= 1) ? tab.count(3, nh - 1) : tab.count(m, nh);
    if (m == 2 && nh == 0) continue;  // glued; nothing to build (handled by parent)
    BigInt U = draw_below(total);

    // Case A
    if (nh >= 1) {
      BigInt wA = tab.count(m + 1, nh - 1);
      if (U < wA) {
        int t = b.new_vertex();
        int f1 = b.new_edge(w, t);
        int f2 = b.new_edge(t, u);
        b.faces.push_back({{he0.edge, he0.forward}, {f1, true}, {f2, true}});
        detail::Hole grown;
        grown.push_back({f2, u, t, false});
        grown.push_back({f1, t, w, false});
        for (int i = 1; i < m; ++i) grown.push_back(hole[i]);
        todo.push_back({std::move(grown), nh - 1});
        continue;
      }
      U -= wA;
    }
    // Case B
    bool placed = false;
    for (int p = 2; p <= m - 1 && !placed; ++p) {
      int xp = hole[p].from;
      int mA = p, mB = m - p + 1;
      for (int nA = 0; nA <= nh && !placed; ++nA) {
        int nB = nh - nA;
        BigInt wgt = tab.count(mA, nA) * tab.count(mB, nB);
        if (wgt == 0) continue;
        if (U >= wgt) { U -= wgt; continue; }
        placed = true;
        bool glueA = (mA == 2 && nA == 0);
        bool glueB = (mB == 2 && nB == 0);
        int g1 = -1, g2 = -1;
        std::pair<int, bool> sideA =
            glueA ? std::make_pair(hole[1].edge, hole[1].forward)
                  : std::make_pair(g1 = b.new_edge(w, xp), true);
        std::pair<int, bool> sideB =
            glueB ? std::make_pair(hole[p].edge, hole[p].forward)
                  : std::make_pair(g2 = b.new_edge(xp, u), true);
        b.faces.push_back({{he0.edge, he0.forward}, sideA, sideB});
        if (!glueA) {
          detail::Hole ha;
          ha.push_back({g1, xp, w, false});
          for (int i = 1; i < p; ++i) ha.push_back(hole[i]);
          todo.push_back({std::move(ha), nA});
        }
        if (!glueB) {
          detail::Hole hb;
          hb.push_back({g2, u, xp, false});
          for (int i = p; i < m; ++i) hb.push_back(hole[i]);
          todo.push_back({std::move(hb), nB});
        }
      }
    }
    if (!placed && !(m == 2)) throw InvalidInput("sampler fell off the case analysis");
    if (m == 2 && !placed) {
      // 2-gon with nh >= 1: apex must be fresh
      int t = b.new_vertex();
      int f1 = b.new_edge(w, t);
      int f2 = b.new_edge(t, u);
      b.faces.push_back({{he0.edge, he0.forward}, {f1, true}, {f2, true}});
      detail::Hole grown;
      grown.push_back({f2, u, t, false});
      grown.push_back({f1, t, w, false});
      grown.push_back(hole[1]);
      todo.push_back({std::move(grown), nh - 1});
    }
  }
  return b.build(ell);
}

// ---------------------------------------------------------------------------
// Boltzmann sampling: P[M] proportional to (2/27)^{n(M)} at fixed ell.
// The size marginal P[n=k] ~ count(ell,k)(2/27)^k has a polynomial
// (~k^{-5/2}) tail at this critical weight, so the truncation residual is
// estimated from a tail fit and reported, not assumed geometric.
// ---------------------------------------------------------------------------

struct BoltzmannMeta {
  int n_max = 0;
  int n_drawn = 0;
  double z_truncated = 0.0;        // sum_{k<=n_max} count(l,k)(2/27)^k
  double residual_estimate = 0.0;  // estimated P[n > n_max]
};

namespace detail {

inline double log_big(const BigInt& x) {
  // log of a positive cpp_int via mantissa extraction
  unsigned bits = (unsigned)boost::multiprecision::msb(x);
  if (bits <= 52) return std::log((double)x.convert_to<std::uint64_t>());
  BigInt mant = x >> (bits - 52);
  return std::log((double)mant.convert_to<std::uint64_t>()) +
         (double)(bits - 52) * std::log(2.0);
}

}  // namespace detail

inline std::vector<double> boltzmann_weights(int ell, int n_max) {
  auto& tab = detail::count_table();
  std::vector<double> w(n_max + 1);
  const double logq = std::log(2.0 / 27.0);
  for (int k = 0; k <= n_max; ++k)
    w[k] = std::exp(detail::log_big(tab.count(ell, k)) + k * logq);
  return w;
}

inline double boltzmann_tail_estimate(const std::vector<double>& w) {
  // Fit w_k ~ c k^{-5/2} on the last entries, sum the tail analytically:
  // sum_{k>N} c k^{-5/2} ~ c * (2/3) N^{-3/2}.
  int N = (int)w.size() - 1;
  if (N < 8) return w.back();  // crude for tiny tables
  double c = 0;
  int cnt = 0;
  for (int k = N - 4; k <= N; ++k) {
    c += w[k] * std::pow((double)k, 2.5);
    ++cnt;
  }
  c /= cnt;
  return c * (2.0 / 3.0) * std::pow((double)N, -1.5);
}

inline Triangulation sample_boltzmann(int ell, Rng& rng,
                                      BoltzmannMeta* meta = nullptr,
                                      int n_max = 96) {
  if (ell < 3) throw InvalidInput("boundary length must be >= 3");
  auto w = boltzmann_weights(ell, n_max);
  double Z = 0;
  for (double x : w) Z += x;
  double tail = boltzmann_tail_estimate(w);
  double U = rng.u01() * Z;
  int k = 0;
  for (; k < n_max; ++k) {
    if (U < w[k]) break;
    U -= w[k];
  }
  if (meta) {
    meta->n_max = n_max;
    meta->n_drawn = k;
    meta->z_truncated = Z;
    meta->residual_estimate = tail / (Z + tail);
  }
  return sample_uniform_triangulation(ell, k, rng);
}

inline MarkedTriangulation sample_marked_edges(Triangulation map, Rng& rng) {
  int L = map.ell;
  if (L < 3) throw InvalidInput("need at least 3 boundary edges");
  // (b,c): uniform pair with 0 < ib < ic < L
  long long npairs = (long long)(L - 1) * (L - 2) / 2;
  long long pick = (long long)rng.below((std::uint64_t)npairs);
  int ib = 1, ic = 2;
  for (int i = 1; i < L; ++i) {
    long long here = L - 1 - i;
    if (pick < here) {
      ib = i;
      ic = i + 1 + (int)pick;
      break;
    }
    pick -= here;
  }
  MarkedTriangulation mt;
  mt.map = std::move(map);
  mt.ia = 0;
  mt.ib = ib;
  mt.ic = ic;
  return mt;
}

// ---------------------------------------------------------------------------
// Graph metric and counting measures with the paper-scalings.
// ---------------------------------------------------------------------------

struct MetricMeasureData {
  double scale = 1.0;       // (3n/4)^{-1/4}, or 1 for raw distances
  double mu_atom = 0.0;     // (2n)^{-1} per vertex
  double xi_atom = 0.0;     // 1/ell per boundary vertex
  std::vector<std::vector<int>> raw;  // all-pairs BFS distances

  double d(int u, int v) const { return scale * raw[u][v]; }
  double mu_total(int V) const { return mu_atom * V; }
};

inline std::vector<int> bfs_distances(const Triangulation& t, int src) {
  auto adj = t.vertex_adjacency();
  std::vector<int> dist(t.num_vertices, -1);
  std::queue<int> q;
  dist[src] = 0;
  q.push(src);
  while (!q.empty()) {
    int v = q.front();
    q.pop();
    for (auto [u, e] : adj[v])
      if (dist[u] == -1) {
        dist[u] = dist[v] + 1;
        q.push(u);
      }
  }
  return dist;
}

inline MetricMeasureData metric_measure_data(const Triangulation& t,
                                             bool rescaled = true) {
  MetricMeasureData m;
  if (rescaled) {
    if (t.n_inner == 0) throw ZeroInnerVertices("rescaling undefined at n = 0");
    m.scale = std::pow(3.0 * t.n_inner / 4.0, -0.25);
    m.mu_atom = 1.0 / (2.0 * t.n_inner);
  } else {
    m.scale = 1.0;
    m.mu_atom = 0.0;
  }
  m.xi_atom = 1.0 / t.ell;
  m.raw.reserve(t.num_vertices);
  for (int v = 0; v < t.num_vertices; ++v) m.raw.push_back(bfs_distances(t, v));
  return m;
}

}  // namespace cardylab

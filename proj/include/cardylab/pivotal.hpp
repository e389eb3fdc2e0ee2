#pragma once

// Pivotal machinery: loop symmetric differences under single-site flips,
// eps-pivotality, A-/rho-importance, four-arm statistics, pivotal measures,
// and the occupation-measure estimator.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cardylab/common.hpp"
#include "cardylab/lattice.hpp"
#include "cardylab/percolation.hpp"

namespace cardylab {

struct SymmetricDifference {
  int v = -1;
  std::vector<Loop> removed;  // in the ensemble of omega, not of omega_v
  std::vector<Loop> added;
};

// Flip one inner vertex and diff the two loop ensembles (matched by their
// canonical crossed-edge cycles). Fast path: when v's whole neighborhood is
// one color, the link of v keeps the surrounding cluster connected, so the
// difference is exactly the singleton loop around v.
inline SymmetricDifference loop_symmetric_difference(
    const Triangulation& t, const Coloring& c, int v,
    const std::function<double(int)>& area_of = nullptr,
    bool with_regions = true, const LoopEnsemble* base = nullptr) {
  if (t.boundary_vertex_mask()[v]) throw BoundaryVertex();

  Coloring flipped = c;
  flipped.color[v] = c.color[v] == Red ? Blue : Red;

  // callers sweeping many vertices of one coloring pass the base ensemble in
  LoopEnsemble ens_a_local;
  if (!base) ens_a_local = loop_ensemble(t, c, area_of, with_regions);
  const LoopEnsemble& ens_a = base ? *base : ens_a_local;
  auto ens_b = loop_ensemble(t, flipped, area_of, with_regions);

  SymmetricDifference out;
  out.v = v;
  std::map<std::vector<int>, const Loop*> in_b;
  for (const auto& l : ens_b.loops) in_b[l.crossed] = &l;
  std::map<std::vector<int>, const Loop*> in_a;
  for (const auto& l : ens_a.loops) in_a[l.crossed] = &l;
  for (const auto& l : ens_a.loops)
    if (!in_b.count(l.crossed)) out.removed.push_back(l);
  for (const auto& l : ens_b.loops)
    if (!in_a.count(l.crossed)) out.added.push_back(l);
  return out;
}

inline bool neighborhood_monochromatic(const Triangulation& t, const Coloring& c,
                                       int v) {
  int first = -1;
  for (int h = 0; h < t.num_half_edges(); ++h)
    if (t.org[h] == v) {
      int u = t.head(h);
      if (first < 0) first = c.color[u];
      if (c.color[u] != first) return false;
    }
  return true;
}

// Color changes around the link cycle of an inner vertex, in rotation order.
inline int link_color_changes(const Triangulation& t, const Coloring& c, int v) {
  int h0 = -1;
  for (int h = 0; h < t.num_half_edges(); ++h)
    if (t.org[h] == v) {
      h0 = h;
      break;
    }
  std::vector<int> word;
  int h = h0;
  do {
    word.push_back(c.color[t.head(h)]);
    h = t.nxt[t.twin[h]];  // rotate to the next outgoing half-edge
  } while (h != h0);
  int ch = 0;
  for (std::size_t i = 0; i < word.size(); ++i)
    if (word[i] != word[(i + 1) % word.size()]) ch++;
  return ch;
}

inline bool is_eps_pivotal(const Triangulation& t, const Coloring& c, int v,
                           double eps,
                           const std::function<double(int)>& area_of = nullptr,
                           const LoopEnsemble* base = nullptr) {
  if (t.boundary_vertex_mask()[v]) throw BoundaryVertex();
  // With < 4 color changes around the link, the two monochromatic arcs are
  // each connected, so flipping v moves it between two fixed clusters without
  // splitting or merging anything; the only loop that can change is the one
  // separating those two clusters. |sym-diff| <= 2 < 3, so never pivotal.
  if (link_color_changes(t, c, v) < 4) return false;
  auto sd = loop_symmetric_difference(t, c, v, area_of, /*with_regions=*/false,
                                      base);
  int big = 0;
  for (const auto& l : sd.removed)
    if (l.area >= eps) big++;
  for (const auto& l : sd.added)
    if (l.area >= eps) big++;
  return big >= 3;
}

// ---------------------------------------------------------------------------
// A-important and rho-important points on lattice domains.
// ---------------------------------------------------------------------------

struct AnnulusSpec {
  Vec2 center;     // center of the inner square B
  double rho = 0;  // side of B; the enlarged square has side 3 rho

  bool in_B(Vec2 p) const {
    return std::fabs(p.x - center.x) <= rho / 2 && std::fabs(p.y - center.y) <= rho / 2;
  }
  bool in_Btilde_open(Vec2 p) const {
    return std::fabs(p.x - center.x) < 1.5 * rho && std::fabs(p.y - center.y) < 1.5 * rho;
  }
};

namespace detail_piv {

// Does the cyclic color word of boundary-reaching neighbors contain an
// alternating R,B,R,B subsequence? Equivalent to >= 4 cyclic color blocks.
inline bool has_alternating_pattern(const std::vector<int>& colors) {
  int n = (int)colors.size();
  if (n < 4) return false;
  int changes = 0;
  for (int i = 0; i < n; ++i)
    if (colors[i] != colors[(i + 1) % n]) changes++;
  return changes >= 4;
}

}  // namespace detail_piv

inline bool is_A_important(const LatticeDomain& dom, const Coloring& c, int v,
                           const AnnulusSpec& ann) {
  if (!ann.in_B(dom.position(v))) throw VertexOutsideBox();

  // components of the coloring restricted to (open Btilde) minus v
  std::vector<int> cell;  // domain vertices inside
  std::unordered_map<int, int> idx;
  for (int u = 0; u < dom.tri.num_vertices; ++u)
    if (u != v && ann.in_Btilde_open(dom.position(u))) {
      idx[u] = (int)cell.size();
      cell.push_back(u);
    }
  UnionFind uf((int)cell.size());
  std::vector<char> contact(cell.size(), 0);
  for (int k = 0; k < (int)cell.size(); ++k) {
    int u = cell[k];
    auto [i, j] = dom.coord[u];
    for (auto [di, dj] : kLatticeDirs) {
      int w = dom.vertex_at(i + di, j + dj);
      Vec2 np{dom.delta * (i + di + 0.5 * (j + dj)),
              dom.delta * ((j + dj) * kSqrt3 / 2.0)};
      if (!ann.in_Btilde_open(np)) contact[k] = 1;
      if (w >= 0 && w != v && c.color[w] == c.color[u]) {
        auto it = idx.find(w);
        if (it != idx.end()) uf.unite(k, it->second);
      }
    }
  }
  std::vector<char> reach(cell.size(), 0);
  for (int k = 0; k < (int)cell.size(); ++k)
    if (contact[k]) reach[uf.find(k)] = 1;

  // cyclic scan of v's lattice neighbors
  std::vector<int> word;
  auto [vi, vj] = dom.coord[v];
  for (auto [di, dj] : kLatticeDirs) {
    int u = dom.vertex_at(vi + di, vj + dj);
    if (u < 0) continue;
    Vec2 up = dom.position(u);
    if (!ann.in_Btilde_open(up)) {
      // the arm leaves the enlarged square in one step
      word.push_back(c.color[u]);
      continue;
    }
    auto it = idx.find(u);
    if (it != idx.end() && reach[uf.find(it->second)]) word.push_back(c.color[u]);
  }
  return detail_piv::has_alternating_pattern(word);
}

// Union over all rho-grid squares meeting the domain of the A_B-important
// vertices, as sorted vertex ids.
inline std::vector<int> rho_important_set(const LatticeDomain& dom,
                                          const Coloring& c, double rho) {
  if (rho <= 0) throw InvalidInput("rho must be positive");
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (int v = 0; v < dom.tri.num_vertices; ++v) {
    Vec2 p = dom.position(v);
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  int i0 = (int)std::floor(xmin / rho) - 1, i1 = (int)std::floor(xmax / rho) + 1;
  int j0 = (int)std::floor(ymin / rho) - 1, j1 = (int)std::floor(ymax / rho) + 1;

  // bucket vertices by grid square for the membership scans
  std::unordered_map<std::int64_t, std::vector<int>> bucket;
  auto key = [](int i, int j) {
    return (std::int64_t(i) << 32) ^ (std::int64_t(j) & 0xffffffffll);
  };
  for (int v = 0; v < dom.tri.num_vertices; ++v) {
    Vec2 p = dom.position(v);
    bucket[key((int)std::floor(p.x / rho), (int)std::floor(p.y / rho))].push_back(v);
  }

  std::unordered_set<int> out;
  for (int i = i0; i <= i1; ++i)
    for (int j = j0; j <= j1; ++j) {
      AnnulusSpec ann{{(i + 0.5) * rho, (j + 0.5) * rho}, rho};
      // v in the closed square B: it may sit in one of the 4 adjacent cells
      for (int bi = i - 1; bi <= i + 1; ++bi)
        for (int bj = j - 1; bj <= j + 1; ++bj) {
          auto it = bucket.find(key(bi, bj));
          if (it == bucket.end()) continue;
          for (int v : it->second) {
            if (!ann.in_B(dom.position(v)) || out.count(v)) continue;
            if (is_A_important(dom, c, v, ann)) out.insert(v);
          }
        }
    }
  std::vector<int> res(out.begin(), out.end());
  std::sort(res.begin(), res.end());
  return res;
}

// ---------------------------------------------------------------------------
// Four-arm probability on the full lattice.
// ---------------------------------------------------------------------------

struct FourArmEstimate {
  double p = 0, se = 0;
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
  double delta = 0, r = 0;
};

namespace detail_piv {

// One lattice box [-r, r]^2 at mesh delta, origin at vertex (0,0).
struct ArmBox {
  double delta, r;
  std::vector<std::pair<int, int>> cells;  // lattice coords strictly inside
  std::unordered_map<std::int64_t, int> idx;
  std::vector<char> contact;  // touches the box boundary in one lattice step
  std::vector<std::array<int, 6>> nbr;  // neighbor cell index or -1
  int origin = -1;
  std::array<int, 6> origin_nbr{};

  static std::int64_t key(int i, int j) {
    return (std::int64_t(i) << 32) ^ (std::int64_t(j) & 0xffffffffll);
  }
  Vec2 pos(int i, int j) const {
    return {delta * (i + 0.5 * j), delta * (j * kSqrt3 / 2.0)};
  }
  bool inside(Vec2 p) const { return std::fabs(p.x) < r && std::fabs(p.y) < r; }

  ArmBox(double d, double rr) : delta(d), r(rr) {
    int jmax = (int)std::ceil(r / (d * kSqrt3 / 2.0)) + 1;
    for (int j = -jmax; j <= jmax; ++j) {
      int imax = (int)std::ceil((r + d * std::abs(j)) / d) + 1;
      for (int i = -imax; i <= imax; ++i)
        if (inside(pos(i, j))) {
          idx[key(i, j)] = (int)cells.size();
          cells.push_back({i, j});
        }
    }
    origin = idx.at(key(0, 0));
    contact.assign(cells.size(), 0);
    nbr.assign(cells.size(), {});
    for (int k = 0; k < (int)cells.size(); ++k) {
      auto [i, j] = cells[k];
      for (int d6 = 0; d6 < 6; ++d6) {
        auto [di, dj] = kLatticeDirs[d6];
        if (!inside(pos(i + di, j + dj))) {
          contact[k] = 1;
          nbr[k][d6] = -1;
        } else {
          nbr[k][d6] = idx.at(key(i + di, j + dj));
        }
      }
    }
    for (int d6 = 0; d6 < 6; ++d6) origin_nbr[d6] = nbr[origin][d6];
  }
};

// Four-arm indicator on one box. col(k) gives the color of cell k; uf and
// reach are scratch, at least cells.size() long.
template <class ColorAt>
inline bool four_arms(const ArmBox& box, ColorAt col, UnionFind& uf,
                      std::vector<char>& reach) {
  int M = (int)box.cells.size();
  for (int k = 0; k < M; ++k) uf.p[k] = k;
  for (int k = 0; k < M; ++k) {
    if (k == box.origin) continue;
    for (int d6 = 0; d6 < 3; ++d6) {  // each edge once: 3 directions
      int w = box.nbr[k][d6];
      if (w >= 0 && w != box.origin && col(w) == col(k)) uf.unite(k, w);
    }
  }
  std::fill(reach.begin(), reach.begin() + M, 0);
  for (int k = 0; k < M; ++k)
    if (box.contact[k] && k != box.origin) reach[uf.find(k)] = 1;
  std::vector<int> word;
  for (int d6 = 0; d6 < 6; ++d6) {
    int u = box.origin_nbr[d6];
    if (u >= 0 && reach[uf.find(u)]) word.push_back(col(u));
  }
  return has_alternating_pattern(word);
}

}  // namespace detail_piv

inline FourArmEstimate four_arm_probability(double delta, double r,
                                            std::uint64_t N, std::uint64_t seed,
                                            int threads = 1) {
  if (!(delta < r)) throw InvalidInput("mesh must be finer than the box");
  detail_piv::ArmBox box(delta, r);
  int M = (int)box.cells.size();

  // Screening box: arms to the full boundary restrict to arms to any smaller
  // concentric boundary, so a cheap sub-box test rejects most samples before
  // the O(M) union-find pass.
  std::unique_ptr<detail_piv::ArmBox> sub;
  std::vector<int> sub_map;  // sub cell -> full cell
  if (r / 8.0 >= 4.0 * delta) {
    sub = std::make_unique<detail_piv::ArmBox>(delta, r / 8.0);
    for (auto [i, j] : sub->cells)
      sub_map.push_back(box.idx.at(detail_piv::ArmBox::key(i, j)));
  }

  const std::uint64_t batch_size = 64;
  std::uint64_t n_batches = (N + batch_size - 1) / batch_size;
  if (threads < 1) threads = 1;
  threads = (int)std::min<std::uint64_t>(threads, n_batches);
  std::atomic<std::uint64_t> next{0};
  std::vector<std::uint64_t> hits(threads, 0);

  auto worker = [&](int tid) {
    std::vector<std::uint8_t> col(M);
    UnionFind uf(M);
    std::vector<char> reach(M);
    for (;;) {
      std::uint64_t b = next.fetch_add(1);
      if (b >= n_batches) break;
      auto rng = make_rng(seed, "four-arm/" + std::to_string(b));
      std::uint64_t lo = b * batch_size, hi = std::min(N, lo + batch_size);
      for (std::uint64_t s = lo; s < hi; ++s) {
        for (int k = 0; k < M; ++k) col[k] = rng.coin() ? Red : Blue;
        // necessary condition: the colors of all in-box neighbors of the
        // origin already show >= 4 cyclic blocks (subwords can't gain blocks)
        std::vector<int> word;
        for (int d6 = 0; d6 < 6; ++d6)
          if (box.origin_nbr[d6] >= 0) word.push_back(col[box.origin_nbr[d6]]);
        if (!detail_piv::has_alternating_pattern(word)) continue;
        if (sub && !detail_piv::four_arms(
                       *sub, [&](int k) { return col[sub_map[k]]; }, uf, reach))
          continue;
        if (detail_piv::four_arms(
                box, [&](int k) { return col[k]; }, uf, reach))
          hits[tid]++;
      }
    }
  };
  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker, i);
    for (auto& th : pool) th.join();
  }
  std::uint64_t h = 0;
  for (auto x : hits) h += x;

  FourArmEstimate est;
  est.samples = N;
  est.seed = seed;
  est.delta = delta;
  est.r = r;
  est.p = (double)h / (double)N;
  est.se = std::sqrt(est.p * (1 - est.p) / (double)N);
  return est;
}

// ---------------------------------------------------------------------------
// Pivotal measures and the occupation estimator.
// ---------------------------------------------------------------------------

struct AtomicMeasure {
  struct Atom {
    int vertex = -1;  // -1 for plane atoms
    Vec2 pos{};
    double mass = 0;
  };
  std::vector<Atom> atoms;
  // normalization provenance when a four-arm estimate is baked in
  bool has_alpha4 = false;
  FourArmEstimate alpha4;

  double total() const {
    double s = 0;
    for (const auto& a : atoms) s += a.mass;
    return s;
  }
};

// Map mode: n^{-1/4} counting measure on eps-pivotal inner vertices, with
// loop areas under the vertex-counting measure mu^n.
inline AtomicMeasure pivotal_measure(const Triangulation& t, const Coloring& c,
                                     double eps) {
  if (eps < 0) throw InvalidInput("eps must be nonnegative");
  if (t.n_inner == 0) throw ZeroInnerVertices();
  double mu = 1.0 / (2.0 * t.n_inner);
  double mass = std::pow((double)t.n_inner, -0.25);
  auto bm = t.boundary_vertex_mask();
  AtomicMeasure out;
  for (int v = 0; v < t.num_vertices; ++v) {
    if (bm[v]) continue;
    if (is_eps_pivotal(t, c, v, eps, [&](int) { return mu; }))
      out.atoms.push_back({v, {}, mass});
  }
  return out;
}

// Lattice mode: alpha4(delta,1)^{-1} times hexagon-Lebesgue counting on
// eps-pivotal vertices, with loop areas under the hexagon measure.
inline AtomicMeasure pivotal_measure(const LatticeDomain& dom, const Coloring& c,
                                     double eps, const FourArmEstimate& alpha4) {
  if (eps < 0) throw InvalidInput("eps must be nonnegative");
  if (alpha4.p <= 0) throw InvalidInput("four-arm normalization must be positive");
  double hex = dom.hexagon_area();
  double mass = hex / alpha4.p;
  AtomicMeasure out;
  out.has_alpha4 = true;
  out.alpha4 = alpha4;
  auto bm = dom.tri.boundary_vertex_mask();
  for (int v = 0; v < dom.tri.num_vertices; ++v) {
    if (bm[v]) continue;
    if (is_eps_pivotal(dom.tri, c, v, eps, [&](int) { return hex; }))
      out.atoms.push_back({v, dom.position(v), mass});
  }
  return out;
}

// r^{d-2} Lebesgue on the r-neighborhood of a point set, grid-discretized.
inline AtomicMeasure occupation_estimate(const std::vector<Vec2>& points, double d,
                                         double r, double grid = 0) {
  if (!(d > 0 && d <= 2)) throw InvalidInput("dimension must be in (0, 2]");
  if (!(r > 0)) throw InvalidInput("radius must be positive");
  AtomicMeasure out;
  if (points.empty()) return out;
  if (grid <= 0) grid = r / 100.0;

  // hash points into r-sized buckets so each grid cell checks 9 buckets
  std::unordered_map<std::int64_t, std::vector<Vec2>> bucket;
  auto key = [](int i, int j) {
    return (std::int64_t(i) << 32) ^ (std::int64_t(j) & 0xffffffffll);
  };
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (Vec2 p : points) {
    bucket[key((int)std::floor(p.x / r), (int)std::floor(p.y / r))].push_back(p);
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  double mass = std::pow(r, d - 2.0) * grid * grid;
  double r2 = r * r;
  int i0 = (int)std::floor((xmin - r) / grid), i1 = (int)std::ceil((xmax + r) / grid);
  int j0 = (int)std::floor((ymin - r) / grid), j1 = (int)std::ceil((ymax + r) / grid);
  for (int j = j0; j <= j1; ++j)
    for (int i = i0; i <= i1; ++i) {
      Vec2 cpt{(i + 0.5) * grid, (j + 0.5) * grid};
      int bi = (int)std::floor(cpt.x / r), bj = (int)std::floor(cpt.y / r);
      bool covered = false;
      for (int di = -1; di <= 1 && !covered; ++di)
        for (int dj = -1; dj <= 1 && !covered; ++dj) {
          auto it = bucket.find(key(bi + di, bj + dj));
          if (it == bucket.end()) continue;
          for (Vec2 p : it->second)
            if (dist2(p, cpt) <= r2) {
              covered = true;
              break;
            }
        }
      if (covered) out.atoms.push_back({-1, cpt, mass});
    }
  return out;
}

}  // namespace cardylab

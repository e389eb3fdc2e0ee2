#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "cardylab/pivotal.hpp"

using namespace cardylab;

static std::set<std::vector<int>> loop_keys(const std::vector<Loop>& ls) {
  std::set<std::vector<int>> out;
  for (const auto& l : ls) out.insert(l.key());
  return out;
}

TEST_CASE("symmetric difference under single flips") {
  auto dom = build_lattice_domain(DomainSpec::equilateral_triangle(),
                                  Rational{1, 4});
  const auto& t = dom.tri;
  Coloring c;
  c.color.assign(t.num_vertices, Blue);
  c.bc = BoundaryCondition::MonochromaticBlue;
  int v = dom.inner[0];

  CHECK_THROWS_AS(loop_symmetric_difference(t, c, dom.boundary_cycle[0]),
                  BoundaryVertex);

  // flipping inside a monochromatic neighborhood adds one singleton loop
  auto sd = loop_symmetric_difference(t, c, v);
  CHECK(sd.v == v);
  CHECK(sd.removed.empty());
  REQUIRE(sd.added.size() == 1);
  CHECK(sd.added[0].region == std::vector<int>{v});
  CHECK(sd.added[0].area == doctest::Approx(1.0));

  // and removing it is the reverse
  Coloring cr = c;
  cr.color[v] = Red;
  auto sd2 = loop_symmetric_difference(t, cr, v);
  CHECK(sd2.added.empty());
  REQUIRE(sd2.removed.size() == 1);
  CHECK(sd2.removed[0].region == std::vector<int>{v});
}

TEST_CASE("flipping twice swaps removed and added") {
  auto rng = make_rng(21, "flip-twice");
  for (int trial = 0; trial < 60; ++trial) {
    auto t = sample_uniform_triangulation(3 + (int)rng.below(4),
                                          1 + (int)rng.below(10), rng);
    auto c = sample_percolation(t, BoundaryCondition::MonochromaticBlue, rng);
    auto bm = t.boundary_vertex_mask();
    std::vector<int> inner;
    for (int v = 0; v < t.num_vertices; ++v)
      if (!bm[v]) inner.push_back(v);
    int v = inner[rng.below(inner.size())];

    auto sd1 = loop_symmetric_difference(t, c, v);
    Coloring c2 = c;
    c2.color[v] = c.color[v] == Red ? Blue : Red;
    auto sd2 = loop_symmetric_difference(t, c2, v);
    CHECK(loop_keys(sd2.removed) == loop_keys(sd1.added));
    CHECK(loop_keys(sd2.added) == loop_keys(sd1.removed));
  }
}

TEST_CASE("link color changes") {
  auto dom = build_lattice_domain(DomainSpec::equilateral_triangle(),
                                  Rational{1, 4});
  const auto& t = dom.tri;
  int v = dom.inner[0];
  Coloring c;
  c.color.assign(t.num_vertices, Blue);
  CHECK(link_color_changes(t, c, v) == 0);
  CHECK(neighborhood_monochromatic(t, c, v));

  auto [i, j] = dom.coord[v];
  c.color[dom.vertex_at(i + 1, j)] = Red;  // one red neighbor
  CHECK(link_color_changes(t, c, v) == 2);
  CHECK(!neighborhood_monochromatic(t, c, v));

  // the cyclic word always has an even number of changes
  auto rng = make_rng(3, "link");
  for (int trial = 0; trial < 50; ++trial) {
    for (auto& x : c.color) x = rng.coin() ? Red : Blue;
    for (int u : dom.inner) CHECK(link_color_changes(t, c, u) % 2 == 0);
  }
}

TEST_CASE("eps-pivotality equals the three-big-loops predicate") {
  auto rng = make_rng(29, "pivotal");
  int fast_path_cases = 0, pivotal_cases = 0;
  for (int trial = 0; trial < 60; ++trial) {
    auto t = sample_uniform_triangulation(3 + (int)rng.below(4),
                                          2 + (int)rng.below(10), rng);
    auto c = sample_percolation(t, BoundaryCondition::MonochromaticBlue, rng);
    auto bm = t.boundary_vertex_mask();
    double eps = rng.coin() ? 0.0 : 2.0;
    for (int v = 0; v < t.num_vertices; ++v) {
      if (bm[v]) continue;
      auto sd = loop_symmetric_difference(t, c, v);
      int big = 0;
      for (const auto& l : sd.removed)
        if (l.area >= eps) big++;
      for (const auto& l : sd.added)
        if (l.area >= eps) big++;
      bool expected = big >= 3;
      CHECK(is_eps_pivotal(t, c, v, eps) == expected);
      if (link_color_changes(t, c, v) < 4) {
        fast_path_cases++;
        CHECK(!expected);  // the shortcut must be sound
      }
      if (expected) pivotal_cases++;
    }
  }
  CHECK(fast_path_cases > 0);
  CHECK(pivotal_cases > 0);  // the sweep actually exercised pivotal sites
  auto t0 = enumerate_triangulations(4, 1)[0];
  Coloring c0;
  c0.color.assign(t0.num_vertices, Blue);
  c0.bc = BoundaryCondition::MonochromaticBlue;
  CHECK_THROWS_AS(is_eps_pivotal(t0, c0, t0.org[t0.root], 0.0), BoundaryVertex);
}

// Re-derivation of A-importance by plain per-neighbor BFS, mirroring the
// definition: each lattice neighbor of v contributes its color when its
// monochromatic cluster inside the open enlarged box (minus v) can leave the
// box in one lattice step; four arms <=> >= 4 cyclic color changes.
static bool a_important_oracle(const LatticeDomain& dom, const Coloring& c,
                               int v, const AnnulusSpec& ann) {
  auto [vi, vj] = dom.coord[v];
  std::vector<int> word;
  for (auto [di, dj] : kLatticeDirs) {
    int u = dom.vertex_at(vi + di, vj + dj);
    if (u < 0) continue;
    if (!ann.in_Btilde_open(dom.position(u))) {
      word.push_back(c.color[u]);
      continue;
    }
    // BFS on same-colored vertices inside the open box, avoiding v
    std::set<int> seen{u};
    std::vector<int> stack{u};
    bool reaches = false;
    while (!stack.empty() && !reaches) {
      int x = stack.back();
      stack.pop_back();
      auto [xi, xj] = dom.coord[x];
      for (auto [ei, ej] : kLatticeDirs) {
        Vec2 np{dom.delta * (xi + ei + 0.5 * (xj + ej)),
                dom.delta * ((xj + ej) * kSqrt3 / 2.0)};
        if (!ann.in_Btilde_open(np)) {
          reaches = true;  // contact is positional, vertex or not
          break;
        }
        int w = dom.vertex_at(xi + ei, xj + ej);
        if (w >= 0 && w != v && c.color[w] == c.color[u] && !seen.count(w)) {
          seen.insert(w);
          stack.push_back(w);
        }
      }
    }
    if (reaches) word.push_back(c.color[u]);
  }
  int n = (int)word.size(), ch = 0;
  for (int i = 0; i < n; ++i)
    if (word[i] != word[(i + 1) % n]) ch++;
  return n >= 4 && ch >= 4;
}

TEST_CASE("A-importance matches a per-neighbor BFS oracle") {
  auto dom = build_lattice_domain(DomainSpec::disk(0, 0, 1.0), Rational{1, 4});
  auto rng = make_rng(37, "a-important");
  Coloring c;
  c.color.resize(dom.tri.num_vertices);
  c.bc = BoundaryCondition::Explicit;
  int agree_true = 0;
  for (int trial = 0; trial < 300; ++trial) {
    for (auto& x : c.color) x = rng.coin() ? Red : Blue;
    int v = (int)rng.below(dom.tri.num_vertices);
    Vec2 p = dom.position(v);
    double rho = 1.3 * dom.delta;
    // jitter the box center, keeping v inside the closed inner square
    Vec2 center{p.x + (rng.u01() - 0.5) * rho * 0.9,
                p.y + (rng.u01() - 0.5) * rho * 0.9};
    AnnulusSpec ann{center, rho};
    REQUIRE(ann.in_B(p));
    bool got = is_A_important(dom, c, v, ann);
    CHECK(got == a_important_oracle(dom, c, v, ann));
    if (got) agree_true++;
  }
  CHECK(agree_true > 0);  // both outcomes exercised

  AnnulusSpec far{{50.0, 50.0}, 0.1};
  CHECK_THROWS_AS(is_A_important(dom, c, 0, far), VertexOutsideBox);
}

TEST_CASE("rho-important set at sub-mesh rho reduces to the neighbor word") {
  auto dom = build_lattice_domain(DomainSpec::disk(0, 0, 1.0), Rational{1, 3});
  auto rng = make_rng(41, "rho-small");
  Coloring c;
  c.color.resize(dom.tri.num_vertices);
  c.bc = BoundaryCondition::Explicit;
  CHECK_THROWS_AS(rho_important_set(dom, c, 0.0), InvalidInput);
  CHECK_THROWS_AS(rho_important_set(dom, c, -1.0), InvalidInput);
  for (int trial = 0; trial < 5; ++trial) {
    for (auto& x : c.color) x = rng.coin() ? Red : Blue;
    // boxes this small hold one vertex, so every arm leaves in one step;
    // the sqrt(2) keeps vertices off exact grid lines, where closed-square
    // membership is at the mercy of roundoff
    auto got = rho_important_set(dom, c, dom.delta * 0.01 * std::sqrt(2.0));
    std::vector<int> want;
    for (int v = 0; v < dom.tri.num_vertices; ++v) {
      auto [i, j] = dom.coord[v];
      std::vector<int> word;
      for (auto [di, dj] : kLatticeDirs) {
        int u = dom.vertex_at(i + di, j + dj);
        if (u >= 0) word.push_back(c.color[u]);
      }
      int n = (int)word.size(), ch = 0;
      for (int k = 0; k < n; ++k)
        if (word[k] != word[(k + 1) % n]) ch++;
      if (n >= 4 && ch >= 4) want.push_back(v);
    }
    CHECK(got == want);
  }
}

TEST_CASE("four-arm probability at one step is exactly one half") {
  // box of radius 1.2 at mesh 1: the origin plus its six neighbors, all of
  // which touch the boundary; four arms <=> the 6-letter cyclic word has
  // >= 4 changes, which holds for 32 of the 64 words
  CHECK(detail_piv::ArmBox(1.0, 1.2).cells.size() == 7);
  const std::uint64_t N = 20000;
  auto est = four_arm_probability(1.0, 1.2, N, 123);
  CHECK(est.samples == N);
  CHECK(est.seed == 123);
  CHECK(est.delta == 1.0);
  CHECK(est.r == 1.2);
  double se0 = 0.5 / std::sqrt((double)N);
  CHECK(std::abs(est.p - 0.5) < 4 * se0);
  CHECK(est.se == doctest::Approx(std::sqrt(est.p * (1 - est.p) / N)));

  auto again = four_arm_probability(1.0, 1.2, N, 123);
  CHECK(again.p == est.p);
  auto threaded = four_arm_probability(1.0, 1.2, N, 123, 3);
  CHECK(threaded.p == est.p);

  CHECK_THROWS_AS(four_arm_probability(1.0, 1.0, 10, 1), InvalidInput);
  CHECK_THROWS_AS(four_arm_probability(2.0, 1.0, 10, 1), InvalidInput);
}

TEST_CASE("four-arm probability decreases with the box radius") {
  const std::uint64_t N = 20000;
  auto near = four_arm_probability(1.0, 1.2, N, 7);
  auto far = four_arm_probability(1.0, 2.5, N, 7);
  CHECK(far.p < near.p + 4 * (near.se + far.se));
  CHECK(far.p > 0);
}

TEST_CASE("pivotal measure on a map") {
  auto rng = make_rng(53, "piv-measure");
  auto t = sample_uniform_triangulation(4, 8, rng);
  auto c = sample_percolation(t, BoundaryCondition::MonochromaticBlue, rng);

  CHECK_THROWS_AS(pivotal_measure(t, c, -0.5), InvalidInput);
  auto t0 = enumerate_triangulations(4, 0)[0];
  Coloring c0;
  c0.color.assign(t0.num_vertices, Blue);
  c0.bc = BoundaryCondition::MonochromaticBlue;
  CHECK_THROWS_AS(pivotal_measure(t0, c0, 0.0), ZeroInnerVertices);

  double mu = 1.0 / (2.0 * t.n_inner);
  for (double eps : {0.0, 2.0 * mu}) {
    auto m = pivotal_measure(t, c, eps);
    CHECK(!m.has_alpha4);
    std::set<int> got;
    for (const auto& a : m.atoms) {
      CHECK(a.mass == doctest::Approx(std::pow((double)t.n_inner, -0.25)));
      got.insert(a.vertex);
    }
    std::set<int> want;
    auto bm = t.boundary_vertex_mask();
    for (int v = 0; v < t.num_vertices; ++v)
      if (!bm[v] && is_eps_pivotal(t, c, v, eps, [&](int) { return mu; }))
        want.insert(v);
    CHECK(got == want);
    CHECK(m.total() ==
          doctest::Approx(want.size() * std::pow((double)t.n_inner, -0.25)));
  }
  // an impossible area threshold empties the measure
  CHECK(pivotal_measure(t, c, 1e9).atoms.empty());
}

TEST_CASE("pivotal measure on a lattice domain") {
  auto dom = build_lattice_domain(DomainSpec::equilateral_triangle(),
                                  Rational{1, 6});
  auto rng = make_rng(59, "piv-lattice");
  auto c = sample_percolation(dom.tri, BoundaryCondition::MonochromaticBlue, rng);
  FourArmEstimate a4;
  a4.p = 0.5;
  a4.samples = 1000;

  FourArmEstimate zero;
  CHECK_THROWS_AS(pivotal_measure(dom, c, 0.0, zero), InvalidInput);
  CHECK_THROWS_AS(pivotal_measure(dom, c, -1.0, a4), InvalidInput);

  auto m = pivotal_measure(dom, c, 0.0, a4);
  CHECK(m.has_alpha4);
  CHECK(m.alpha4.p == 0.5);
  double hex = dom.hexagon_area();
  std::set<int> got;
  for (const auto& a : m.atoms) {
    CHECK(a.mass == doctest::Approx(hex / 0.5));
    CHECK(a.pos.x == doctest::Approx(dom.position(a.vertex).x));
    CHECK(a.pos.y == doctest::Approx(dom.position(a.vertex).y));
    got.insert(a.vertex);
  }
  std::set<int> want;
  auto bm = dom.tri.boundary_vertex_mask();
  for (int v = 0; v < dom.tri.num_vertices; ++v)
    if (!bm[v] &&
        is_eps_pivotal(dom.tri, c, v, 0.0, [&](int) { return hex; }))
      want.insert(v);
  CHECK(got == want);
}

TEST_CASE("occupation estimate") {
  CHECK_THROWS_AS(occupation_estimate({{0, 0}}, 0.0, 0.2), InvalidInput);
  CHECK_THROWS_AS(occupation_estimate({{0, 0}}, 2.5, 0.2), InvalidInput);
  CHECK_THROWS_AS(occupation_estimate({{0, 0}}, 2.0, 0.0), InvalidInput);
  CHECK(occupation_estimate({}, 2.0, 0.2).atoms.empty());

  // one point: the estimate is r^{d-2} times the disk area, pi r^2
  double r = 0.2;
  auto d2 = occupation_estimate({{0, 0}}, 2.0, r);
  CHECK(d2.total() == doctest::Approx(kPi * r * r).epsilon(0.03));
  auto d1 = occupation_estimate({{0, 0}}, 1.0, r);
  CHECK(d1.total() == doctest::Approx(kPi * r).epsilon(0.03));
  for (const auto& a : d2.atoms) {
    CHECK(a.vertex == -1);
    CHECK(dist2(a.pos, {0, 0}) <= r * r);
  }

  // two far-apart points double the mass; two coincident ones do not
  auto two = occupation_estimate({{0, 0}, {10, 0}}, 2.0, r);
  CHECK(two.total() == doctest::Approx(2 * kPi * r * r).epsilon(0.03));
  auto dup = occupation_estimate({{0, 0}, {0, 0}}, 2.0, r);
  CHECK(dup.total() == doctest::Approx(kPi * r * r).epsilon(0.03));
}

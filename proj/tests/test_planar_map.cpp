#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <set>

#include "cardylab/planar_map.hpp"
#include "test_util.hpp"

using namespace cardylab;

// Exact counts, frozen from an independent transfer-style recursion.
static const std::vector<std::vector<long long>> kCounts = {
    {1, 4, 24, 176, 1456, 13056},     // ell = 3
    {2, 15, 120, 1040, 9600, 93024},  // ell = 4
    {5, 56, 560, 5600, 57120}         // ell = 5
};

TEST_CASE("exact counts") {
  for (int ell = 3; ell <= 5; ++ell)
    for (int n = 0; n < (int)kCounts[ell - 3].size(); ++n)
      CHECK(count_triangulations(ell, n) == BigInt(kCounts[ell - 3][n]));
  // n = 0 counts are the Catalan numbers (fan-free polygon triangulations)
  long long catalan[] = {1, 2, 5, 14, 42};
  for (int ell = 3; ell <= 7; ++ell)
    CHECK(count_triangulations(ell, 0) == BigInt(catalan[ell - 3]));
  CHECK_THROWS_AS(count_triangulations(2, 0), InvalidInput);
}

TEST_CASE("enumeration matches counts and yields distinct valid maps") {
  for (int ell = 3; ell <= 5; ++ell) {
    for (int n = 0; n <= 2; ++n) {
      auto maps = enumerate_triangulations(ell, n);
      CHECK(BigInt(maps.size()) == count_triangulations(ell, n));
      std::set<std::vector<int>> codes;
      for (const auto& t : maps) {
        t.validate();
        CHECK(t.ell == ell);
        CHECK(t.n_inner == n);
        codes.insert(t.canonical_code());
      }
      CHECK(codes.size() == maps.size());  // rooted maps pairwise distinct
    }
  }
}

TEST_CASE("enumeration caps") {
  CHECK_THROWS_AS(enumerate_triangulations(3, 9), CapExceeded);   // n cap
  CHECK_THROWS_AS(enumerate_triangulations(3, 8), CapExceeded);   // list cap
  CHECK_THROWS_AS(enumerate_triangulations(2, 1), InvalidInput);
  CHECK_THROWS_AS(enumerate_triangulations(3, -1), InvalidInput);
}

TEST_CASE("validate rejects corrupted maps") {
  auto t = enumerate_triangulations(4, 1)[0];
  auto bad = t;
  std::swap(bad.nxt[0], bad.nxt[2]);
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
  bad = t;
  bad.n_inner = 5;
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
}

TEST_CASE("boundary traversal conventions") {
  auto t = enumerate_triangulations(5, 2)[7];
  auto bcc = t.boundary_ccw();
  CHECK((int)bcc.size() == t.ell);
  CHECK(bcc[0] == t.root);
  for (int k = 0; k < t.ell; ++k) {
    int h = bcc[k], g = bcc[(k + 1) % t.ell];
    CHECK(t.on_root_face(h));
    // counterclockwise: the ccw-end of edge k is the ccw-start of edge k+1
    CHECK(t.ccw_end(h) == t.ccw_start(g));
    CHECK(t.ccw_start(h) == t.head(h));
  }
  auto bm = t.boundary_vertex_mask();
  int nb = 0;
  for (char m : bm) nb += m;
  CHECK(nb == t.ell);
}

TEST_CASE("uniform sampler hits every class at the right rate") {
  const int ell = 3, n = 2;
  auto maps = enumerate_triangulations(ell, n);
  std::map<std::vector<int>, int> index;
  for (std::size_t k = 0; k < maps.size(); ++k)
    index[maps[k].canonical_code()] = (int)k;

  auto rng = make_rng(11, "uniform-sampler");
  const long long N = 24000;
  std::vector<long long> obs(maps.size(), 0);
  for (long long s = 0; s < N; ++s) {
    auto t = sample_uniform_triangulation(ell, n, rng);
    CHECK(t.ell == ell);
    CHECK(t.n_inner == n);
    auto it = index.find(t.canonical_code());
    REQUIRE(it != index.end());
    obs[it->second]++;
  }
  std::vector<double> prob(maps.size(), 1.0 / maps.size());
  CHECK(goodness_of_fit_pvalue(obs, prob, N) > 1e-3);
}

TEST_CASE("boltzmann sampler metadata") {
  auto w = boltzmann_weights(3, 40);
  CHECK(w[0] == doctest::Approx(1.0));          // one map, weight (2/27)^0
  CHECK(w[1] == doctest::Approx(4.0 * 2 / 27));
  double Z = 0;
  for (double x : w) Z += x;
  auto rng = make_rng(5, "boltzmann");
  BoltzmannMeta meta;
  auto t = sample_boltzmann(3, rng, &meta, 40);
  t.validate();
  CHECK(meta.n_max == 40);
  CHECK(meta.n_drawn == t.n_inner);
  CHECK(meta.z_truncated == doctest::Approx(Z));
  CHECK(meta.residual_estimate > 0);
  CHECK(meta.residual_estimate < 0.05);
  CHECK_THROWS_AS(sample_boltzmann(2, rng), InvalidInput);
}

TEST_CASE("marked edges are uniform over admissible pairs") {
  auto t = enumerate_triangulations(5, 0)[0];
  auto rng = make_rng(2, "marks");
  std::map<std::pair<int, int>, long long> freq;
  const long long N = 6000;
  for (long long s = 0; s < N; ++s) {
    auto mt = sample_marked_edges(t, rng);
    CHECK(mt.ia == 0);
    CHECK(0 < mt.ib);
    CHECK(mt.ib < mt.ic);
    CHECK(mt.ic < t.ell);
    freq[{mt.ib, mt.ic}]++;
  }
  CHECK(freq.size() == 6);  // C(4,2) pairs for ell = 5
  std::vector<long long> obs;
  for (auto& [k, v] : freq) obs.push_back(v);
  std::vector<double> prob(6, 1.0 / 6.0);
  CHECK(goodness_of_fit_pvalue(obs, prob, N) > 1e-3);
}

TEST_CASE("graph metric") {
  auto rng = make_rng(9, "metric");
  auto t = sample_uniform_triangulation(4, 5, rng);
  auto m = metric_measure_data(t);
  CHECK(m.scale == doctest::Approx(std::pow(3.0 * 5 / 4.0, -0.25)));
  CHECK(m.mu_atom == doctest::Approx(0.1));
  CHECK(m.xi_atom == doctest::Approx(0.25));
  CHECK(m.mu_total(t.num_vertices) ==
        doctest::Approx(t.num_vertices / 10.0));
  for (int u = 0; u < t.num_vertices; ++u) {
    CHECK(m.raw[u][u] == 0);
    for (int v = 0; v < t.num_vertices; ++v) {
      CHECK(m.raw[u][v] == m.raw[v][u]);
      CHECK(m.raw[u][v] >= (u == v ? 0 : 1));
      for (int w = 0; w < t.num_vertices; ++w)
        CHECK(m.raw[u][w] <= m.raw[u][v] + m.raw[v][w]);
    }
  }
  // adjacent vertices at distance one
  for (int h = 0; h < t.num_half_edges(); ++h)
    CHECK(m.raw[t.org[h]][t.head(h)] == 1);

  auto raw = metric_measure_data(t, false);
  CHECK(raw.scale == 1.0);
  CHECK(raw.mu_atom == 0.0);

  auto t0 = enumerate_triangulations(4, 0)[0];
  CHECK_THROWS_AS(metric_measure_data(t0), ZeroInnerVertices);
  CHECK_NOTHROW(metric_measure_data(t0, false));
}

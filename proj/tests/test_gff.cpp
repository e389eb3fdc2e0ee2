#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "cardylab/gff.hpp"

using namespace cardylab;

TEST_CASE("field samples vanish on the boundary and are reproducible") {
  auto dom = build_lattice_domain(DomainSpec::disk(0, 0, 1.0), Rational{1, 4});
  GffSampler sampler(dom);

  auto rng1 = make_rng(77, "gff");
  auto f1 = sampler.sample(rng1);
  auto rng2 = make_rng(77, "gff");
  auto f2 = sampler.sample(rng2);
  CHECK(f1.values == f2.values);
  CHECK(f1.c_T == kGffNormalization);
  CHECK(kGffNormalization == doctest::Approx(2.0 * kSqrt3 * kPi));

  for (int v : dom.boundary_cycle) CHECK(f1.values[v] == 0.0);
  bool any_nonzero = false;
  for (int v : dom.inner)
    if (f1.values[v] != 0.0) any_nonzero = true;
  CHECK(any_nonzero);

  auto rng3 = make_rng(77, "gff");
  auto g = sample_gff(dom, rng3);
  CHECK(g.values == f1.values);
}

TEST_CASE("exact covariance: symmetry, grounding, Monte Carlo agreement") {
  auto dom = build_lattice_domain(DomainSpec::disk(0, 0, 1.0), Rational{1, 3});
  GffSampler sampler(dom);
  int a = dom.inner[0], b = dom.inner[dom.inner.size() / 2];
  int bd = dom.boundary_cycle[0];

  CHECK(sampler.covariance(a, b) == doctest::Approx(sampler.covariance(b, a)));
  CHECK(sampler.covariance(a, bd) == 0.0);
  CHECK(sampler.covariance(bd, bd) == 0.0);
  CHECK(sampler.covariance(a, a) > 0.0);

  const int N = 4000;
  auto rng = make_rng(101, "gff-mc");
  double saa = 0, sbb = 0, sab = 0;
  for (int s = 0; s < N; ++s) {
    auto f = sampler.sample(rng);
    saa += f.values[a] * f.values[a];
    sbb += f.values[b] * f.values[b];
    sab += f.values[a] * f.values[b];
  }
  saa /= N;
  sbb /= N;
  sab /= N;
  double gaa = sampler.covariance(a, a);
  double gbb = sampler.covariance(b, b);
  double gab = sampler.covariance(a, b);
  // Wick: Var of a product estimate
  CHECK(std::abs(saa - gaa) < 4 * std::sqrt(2.0 * gaa * gaa / N));
  CHECK(std::abs(sbb - gbb) < 4 * std::sqrt(2.0 * gbb * gbb / N));
  CHECK(std::abs(sab - gab) < 4 * std::sqrt((gaa * gbb + gab * gab) / N));
}

TEST_CASE("circle-average variance grows like log(1/r)") {
  auto dom = build_lattice_domain(DomainSpec::disk(0, 0, 1.0), Rational{1, 32});
  GffSampler sampler(dom);

  // exact Var[h_r(0)] as a quadratic form in the covariance; covariance
  // columns are cached since each call does a full solve
  std::map<int, std::map<int, double>> cov_cache;
  auto cov = [&](int u, int v) {
    if (u > v) std::swap(u, v);
    auto& row = cov_cache[u];
    auto it = row.find(v);
    if (it != row.end()) return it->second;
    double g = sampler.covariance(u, v);
    row[v] = g;
    return g;
  };
  auto exact_var = [&](double r) {
    auto w = detail_gff::circle_weights(dom, {0, 0}, r);
    REQUIRE(!w.empty());
    double s = 0;
    for (auto [u, wu] : w)
      for (auto [v, wv] : w) s += wu * wv * cov(u, v);
    return s;
  };

  double v8 = exact_var(1.0 / 8.0);
  double v4 = exact_var(1.0 / 4.0);
  CHECK(v8 > v4);  // smaller circles see more of the log singularity
  double slope = (v8 - v4) / std::log(2.0);
  CHECK(slope == doctest::Approx(1.0).epsilon(0.2));
}

TEST_CASE("circle averages of explicit fields") {
  auto dom = build_lattice_domain(DomainSpec::disk(0, 0, 1.0), Rational{1, 8});
  FieldSample f;
  f.dom = &dom;
  f.values.assign(dom.num_vertices(), 1.0);

  CHECK_THROWS_AS(circle_average(f, {0, 0}, 0.0), InvalidInput);
  CHECK_THROWS_AS(circle_average(f, {0, 0}, -0.3), InvalidInput);

  // interpolation weights sum to one inside the domain
  CHECK(circle_average(f, {0, 0}, 0.3) == doctest::Approx(1.0));
  CHECK(circle_average(f, {0.2, -0.1}, 0.25) == doctest::Approx(1.0));
  // zero by convention once the circle leaves the region
  CHECK(circle_average(f, {0, 0}, 5.0) == 0.0);
  CHECK(circle_average(f, {30.0, 0}, 0.3) == 0.0);

  // linearity in the field
  auto rng = make_rng(5, "avg");
  FieldSample g = f;
  for (auto& x : g.values) x = rng.normal();
  double base = circle_average(g, {0.1, 0.1}, 0.2);
  FieldSample g3 = g;
  for (auto& x : g3.values) x *= 3.0;
  CHECK(circle_average(g3, {0.1, 0.1}, 0.2) == doctest::Approx(3.0 * base));
}

TEST_CASE("chaos measure shift identity is exact") {
  auto dom = build_lattice_domain(DomainSpec::disk(0, 0, 1.0), Rational{1, 8});
  auto rng = make_rng(8, "gmc");
  GffSampler sampler(dom);
  auto f = sampler.sample(rng);

  CHECK_THROWS_AS(gmc_measure(f, 0.0, 0.5), InvalidInput);
  CHECK_THROWS_AS(gmc_measure(f, 2.0, 0.5), InvalidInput);
  CHECK_THROWS_AS(gmc_measure(f, -1.0, 0.5), InvalidInput);
  CHECK_THROWS_AS(gmc_measure(f, 1.0, 1.9 * dom.delta), RegularizationTooFine);

  double a = std::sqrt(8.0 / 3.0);
  double r = default_regularization(dom);
  CHECK(r == doctest::Approx(4.0 * dom.delta));
  auto mu = gmc_measure(f, a, r);
  CHECK(mu.exponent == a);
  CHECK(mu.r == r);
  CHECK(mu.delta == dom.delta);
  REQUIRE(mu.atoms.size() == dom.inner.size());
  for (std::size_t k = 0; k < mu.atoms.size(); ++k) {
    CHECK(mu.atoms[k].vertex == dom.inner[k]);
    CHECK(mu.atoms[k].mass > 0);
  }

  // shifting the field by a constant multiplies every mass by e^{a c}:
  // the clipped average has total weight one, so the shift passes through
  for (double c : {-1.0, 0.3, 2.0}) {
    FieldSample shifted = f;
    for (auto& x : shifted.values) x += c;
    auto nu = gmc_measure(shifted, a, r);
    double factor = std::exp(a * c);
    for (std::size_t k = 0; k < mu.atoms.size(); ++k)
      CHECK(nu.atoms[k].mass ==
            doctest::Approx(mu.atoms[k].mass * factor).epsilon(1e-12));
  }
}

TEST_CASE("boundary measure") {
  auto dom = build_lattice_domain(DomainSpec::disk(0, 0, 1.0), Rational{1, 8});
  auto rng = make_rng(9, "bdy");
  auto f = sample_gff(dom, rng);

  CHECK_THROWS_AS(boundary_measure(f, 0.0), InvalidInput);
  CHECK_THROWS_AS(boundary_measure(f, 2.0), InvalidInput);

  double g = std::sqrt(8.0 / 3.0);
  auto xi = boundary_measure(f, g);
  CHECK(xi.r == doctest::Approx(default_regularization(dom)));
  REQUIRE(xi.atoms.size() == dom.boundary_cycle.size());
  for (std::size_t k = 0; k < xi.atoms.size(); ++k) {
    CHECK(xi.atoms[k].vertex == dom.boundary_cycle[k]);
    CHECK(xi.atoms[k].mass > 0);
  }

  for (double c : {-0.7, 1.5}) {
    FieldSample shifted = f;
    for (auto& x : shifted.values) x += c;
    auto xi2 = boundary_measure(shifted, g);
    double factor = std::exp(g * c / 2.0);
    for (std::size_t k = 0; k < xi.atoms.size(); ++k)
      CHECK(xi2.atoms[k].mass ==
            doctest::Approx(xi.atoms[k].mass * factor).epsilon(1e-12));
  }
}

TEST_CASE("clock rates") {
  CHECK(kClockExponent == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-15));
  auto dom = build_lattice_domain(DomainSpec::disk(0, 0, 1.0), Rational{1, 8});
  auto rng = make_rng(10, "clock");
  auto f = sample_gff(dom, rng);
  FourArmEstimate a4;
  a4.p = 0.25;

  FourArmEstimate bad;
  CHECK_THROWS_AS(clock_rates(f, dom, bad), InvalidInput);

  auto rates = clock_rates(f, dom, a4);
  CHECK(rates.has_alpha4);
  CHECK(rates.alpha4.p == 0.25);
  auto mu = gmc_measure(f, kClockExponent, default_regularization(dom));
  REQUIRE(rates.atoms.size() == mu.atoms.size());
  for (std::size_t k = 0; k < mu.atoms.size(); ++k) {
    CHECK(rates.atoms[k].vertex == mu.atoms[k].vertex);
    CHECK(rates.atoms[k].mass == doctest::Approx(mu.atoms[k].mass / 0.25));
  }
}

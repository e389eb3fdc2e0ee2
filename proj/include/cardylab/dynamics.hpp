#pragma once

// Event-driven dynamical percolation: the full dynamic, the eps-cutoff
// dynamic (flips applied only at eps-pivotal vertices), and the exact
// continuous-time Markov chain on all colorings of a tiny map.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "cardylab/common.hpp"
#include "cardylab/percolation.hpp"
#include "cardylab/pivotal.hpp"

namespace cardylab {

struct DynTrajectory {
  Coloring initial;
  struct Event {
    double t = 0;
    int v = -1;
    bool applied = true;  // false only for rejected rings in cutoff mode
  };
  std::vector<Event> events;  // times strictly increasing
  Coloring final;
  double horizon = 0;
  std::string rate_source;
};

namespace detail_dyn {

struct RateTable {
  std::vector<int> vertex;
  std::vector<double> cum;  // cumulative rates
  double total = 0;

  explicit RateTable(const AtomicMeasure& rates) {
    for (const auto& a : rates.atoms) {
      if (!(a.mass >= 0) || !std::isfinite(a.mass))
        throw InvalidInput("rates must be finite and nonnegative");
      if (a.mass == 0) continue;
      total += a.mass;
      vertex.push_back(a.vertex);
      cum.push_back(total);
    }
  }

  int pick(Rng& rng) const {
    double u = rng.u01() * total;
    auto it = std::lower_bound(cum.begin(), cum.end(), u);
    if (it == cum.end()) --it;
    return vertex[it - cum.begin()];
  }
};

}  // namespace detail_dyn

// Gillespie simulation of the full dynamic: superposed exponential clocks,
// unconditional flips. Zero total rate is not an error: the trajectory is
// constant and comes back with no events.
inline DynTrajectory run_dynamics(const Coloring& initial,
                                  const AtomicMeasure& rates, double T,
                                  Rng& rng) {
  if (!(T >= 0)) throw InvalidInput("horizon must be nonnegative");
  detail_dyn::RateTable tab(rates);
  DynTrajectory out;
  out.initial = initial;
  out.final = initial;
  out.horizon = T;
  out.rate_source = "explicit";
  if (tab.total <= 0) return out;
  double t = 0;
  for (;;) {
    t += rng.exponential(tab.total);
    if (t > T) break;
    int v = tab.pick(rng);
    out.final.color[v] = out.final.color[v] == Red ? Blue : Red;
    out.events.push_back({t, v, true});
  }
  return out;
}

// The eps-cutoff dynamic: same clocks, but a ring at v only flips when v is
// eps-pivotal for the configuration just before the ring. Rejected rings are
// kept in the event list with applied=false.
inline DynTrajectory run_eps_cutoff(const Triangulation& tri,
                                    const Coloring& initial,
                                    const AtomicMeasure& rates, double eps,
                                    const std::function<double(int)>& area_of,
                                    double T, Rng& rng) {
  if (!(T >= 0)) throw InvalidInput("horizon must be nonnegative");
  if (eps < 0) throw InvalidInput("eps must be nonnegative");
  detail_dyn::RateTable tab(rates);
  DynTrajectory out;
  out.initial = initial;
  out.final = initial;
  out.horizon = T;
  out.rate_source = "explicit";
  if (tab.total <= 0) return out;
  double t = 0;
  for (;;) {
    t += rng.exponential(tab.total);
    if (t > T) break;
    int v = tab.pick(rng);
    bool flip = is_eps_pivotal(tri, out.final, v, eps, area_of);
    if (flip) out.final.color[v] = out.final.color[v] == Red ? Blue : Red;
    out.events.push_back({t, v, flip});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exact CTMC over all 2^k inner colorings of a tiny map.
// ---------------------------------------------------------------------------

struct RateMatrix {
  std::vector<int> inner;  // bit m of a state is the color of inner[m]
  Eigen::MatrixXd Q;       // symmetric, rows sum to 0
  Eigen::VectorXd exit;    // N(i) = -q_ii

  Coloring coloring_of(std::uint32_t state, const Triangulation& t,
                       Color boundary = Blue) const {
    Coloring c;
    c.bc = boundary == Blue ? BoundaryCondition::MonochromaticBlue
                            : BoundaryCondition::MonochromaticRed;
    c.color.assign(t.num_vertices, boundary);
    for (std::size_t m = 0; m < inner.size(); ++m)
      c.color[inner[m]] = (state >> m) & 1 ? Red : Blue;
    return c;
  }
};

inline RateMatrix build_exact_ctmc(const Triangulation& t, double eps,
                                   const std::function<double(int)>& area_of,
                                   const AtomicMeasure& rates,
                                   Color boundary = Blue) {
  if (t.n_inner > 12) throw TooManyStates("more than 2^12 colorings");
  RateMatrix rm;
  auto bm = t.boundary_vertex_mask();
  for (int v = 0; v < t.num_vertices; ++v)
    if (!bm[v]) rm.inner.push_back(v);
  int k = (int)rm.inner.size();

  std::vector<double> rate_of(t.num_vertices, 0.0);
  for (const auto& a : rates.atoms) {
    if (!(a.mass >= 0) || !std::isfinite(a.mass))
      throw InvalidInput("rates must be finite and nonnegative");
    rate_of[a.vertex] = a.mass;
  }

  std::uint32_t S = 1u << k;
  rm.Q = Eigen::MatrixXd::Zero(S, S);
  for (std::uint32_t i = 0; i < S; ++i) {
    Coloring c = rm.coloring_of(i, t, boundary);
    double row = 0;
    for (int m = 0; m < k; ++m) {
      int v = rm.inner[m];
      if (rate_of[v] == 0) continue;
      if (is_eps_pivotal(t, c, v, eps, area_of)) {
        rm.Q(i, i ^ (1u << m)) = rate_of[v];
        row += rate_of[v];
      }
    }
    rm.Q(i, i) = -row;
  }
  rm.exit = -rm.Q.diagonal();
  return rm;
}

// Jump chain of the CTMC: P restricted to states with positive exit rate;
// absorbing states listed separately with zero rows in P.
struct JumpSkeleton {
  Eigen::MatrixXd P;
  Eigen::VectorXd holding;  // exit rate N(i)
  std::vector<std::uint32_t> absorbing;
};

inline JumpSkeleton jump_skeleton(const RateMatrix& q) {
  int S = (int)q.Q.rows();
  JumpSkeleton js;
  js.P = Eigen::MatrixXd::Zero(S, S);
  js.holding = q.exit;
  for (int i = 0; i < S; ++i) {
    if (q.exit[i] <= 0) {
      js.absorbing.push_back((std::uint32_t)i);
      continue;
    }
    for (int j = 0; j < S; ++j)
      if (j != i) js.P(i, j) = q.Q(i, j) / q.exit[i];
  }
  return js;
}

}  // namespace cardylab

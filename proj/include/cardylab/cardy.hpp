#pragma once

// The Cardy embedding: Monte Carlo crossing frequencies projected to the
// equilateral triangle, pushforward metric/measures, and the continuum
// Riemann-map oracle (Schwarz-Christoffel) used to verify it.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <atomic>
#include <memory>
#include <cmath>
#include <complex>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "cardylab/common.hpp"
#include "cardylab/lattice.hpp"
#include "cardylab/percolation.hpp"
#include "cardylab/planar_map.hpp"

namespace cardylab {

struct BaryCoords {
  double x = 0, y = 0, z = 0;
};

inline BaryCoords project_to_delta(double x, double y, double z) {
  if (x < 0 || y < 0 || z < 0) throw NegativeInput();
  double s = x + y + z;
  if (s == 0) return {1.0 / 3, 1.0 / 3, 1.0 / 3};
  return {x / s, y / s, z / s};
}

// Planar position in the closed triangle with corners
// (0,0), (1,0), (1/2, sqrt(3)/2) carrying weights (x, y, z).
inline Vec2 delta_point(const BaryCoords& b) {
  return {b.y + 0.5 * b.z, b.z * (kSqrt3 / 2.0)};
}

struct EmbeddedMap {
  std::vector<std::array<double, 3>> freq;    // empirical P[E_a], P[E_b], P[E_c]
  std::vector<BaryCoords> coords;             // projected
  std::vector<std::array<double, 3>> stderr_; // sqrt(p(1-p)/N) per coordinate
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
};

// One shared i.i.d. sample set serves all three events and all vertices.
// Work is split into fixed-size batches with per-batch seed streams, so the
// counts (hence the reported frequencies) are independent of thread count.
inline EmbeddedMap cardy_embedding(const MarkedTriangulation& mt, std::uint64_t N,
                                   std::uint64_t seed, int threads = 1) {
  if (N < 1) throw InvalidInput("sample count must be positive");
  const Triangulation& t = mt.map;
  int V = t.num_vertices;
  CrossingEvaluator ev(t);

  const std::uint64_t batch_size = 1024;
  std::uint64_t n_batches = (N + batch_size - 1) / batch_size;
  if (threads < 1) threads = 1;
  threads = (int)std::min<std::uint64_t>(threads, n_batches);

  std::vector<std::vector<std::uint64_t>> counts(
      threads, std::vector<std::uint64_t>(3 * (std::size_t)V, 0));
  std::atomic<std::uint64_t> next{0};

  auto worker = [&](int tid) {
    auto& cnt = counts[tid];
    for (;;) {
      std::uint64_t b = next.fetch_add(1);
      if (b >= n_batches) break;
      auto rng = make_rng(seed, "cardy/" + std::to_string(b));
      std::uint64_t lo = b * batch_size;
      std::uint64_t hi = std::min(N, lo + batch_size);
      Coloring c;
      c.color.resize(V);
      c.bc = BoundaryCondition::Explicit;
      for (std::uint64_t s = lo; s < hi; ++s) {
        for (auto& x : c.color) x = rng.coin() ? Red : Blue;
        auto f = ev.eval(mt.ia, mt.ib, mt.ic, c);
        for (int e = 0; e < 3; ++e)
          for (int v = 0; v < V; ++v) cnt[(std::size_t)e * V + v] += f.flags[e][v];
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
  for (int i = 1; i < threads; ++i)
    for (std::size_t k = 0; k < counts[0].size(); ++k) counts[0][k] += counts[i][k];

  EmbeddedMap out;
  out.samples = N;
  out.seed = seed;
  out.freq.resize(V);
  out.coords.resize(V);
  out.stderr_.resize(V);
  for (int v = 0; v < V; ++v) {
    for (int e = 0; e < 3; ++e) {
      double p = (double)counts[0][(std::size_t)e * V + v] / (double)N;
      out.freq[v][e] = p;
      out.stderr_[v][e] = std::sqrt(p * (1 - p) / (double)N);
    }
    out.coords[v] = project_to_delta(out.freq[v][0], out.freq[v][1], out.freq[v][2]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pushforward of the graph metric and measures through the embedding.
// ---------------------------------------------------------------------------

struct PushforwardData {
  const Triangulation* map = nullptr;
  std::vector<Vec2> pos;  // embedded vertex positions in the triangle
  MetricMeasureData mmd;

  // nearest vertex; ties broken by smallest id (strict < keeps the first)
  int resolve(Vec2 x) const {
    int best = 0;
    double bd = dist2(pos[0], x);
    for (int v = 1; v < (int)pos.size(); ++v) {
      double d = dist2(pos[v], x);
      if (d < bd) {
        bd = d;
        best = v;
      }
    }
    return best;
  }

  double distance(Vec2 x, Vec2 y) const { return mmd.d(resolve(x), resolve(y)); }

  double mu_total() const { return mmd.mu_atom * (double)pos.size(); }
  double xi_total() const {
    double s = 0;
    auto bm = map->boundary_vertex_mask();
    for (int v = 0; v < (int)pos.size(); ++v)
      if (bm[v]) s += mmd.xi_atom;
    return s;
  }
  // mu-mass of a region given by a membership predicate on the triangle
  double mu_of(const std::function<bool(Vec2)>& in) const {
    double s = 0;
    for (const Vec2& p : pos)
      if (in(p)) s += mmd.mu_atom;
    return s;
  }
};

inline PushforwardData pushforward(const EmbeddedMap& em, const Triangulation& t,
                                   const MetricMeasureData& mmd) {
  if ((int)em.coords.size() != t.num_vertices ||
      (int)mmd.raw.size() != t.num_vertices)
    throw InvalidInput("embedding / metric data do not match the map");
  PushforwardData out;
  out.map = &t;
  out.mmd = mmd;
  out.pos.resize(t.num_vertices);
  for (int v = 0; v < t.num_vertices; ++v) out.pos[v] = delta_point(em.coords[v]);
  return out;
}

// ---------------------------------------------------------------------------
// Continuum oracle: the conformal map D -> triangle sending three marked
// boundary points to the corners, in barycentric coordinates. Route:
// D -> upper half-plane (explicit Jacobi sn for rectangles, Newton on the
// Schwarz-Christoffel integral for triangles), a Mobius normalization of the
// three mark preimages to (0, 1, infinity), then the incomplete-beta map
// onto the equilateral triangle evaluated by Gauss-Jacobi quadrature.
// ---------------------------------------------------------------------------

struct MarkedPolygon {
  std::vector<Vec2> vertices;  // simple, counterclockwise; 3 or 4 (rectangle)
  std::array<int, 3> marks;    // vertex indices, counterclockwise order
};

struct SCConfig {
  int nodes = 64;                // Gauss-Jacobi node count
  double exclusion_rel = 1e-4;   // corner exclusion radius / polygon diameter
};

namespace detail_sc {

using C = std::complex<double>;

// Nodes/weights for \int_{-1}^{1} (1-x)^a (1+x)^b f(x) dx (Golub-Welsch).
struct GaussJacobi {
  std::vector<double> x, w;
};

inline GaussJacobi gauss_jacobi(int n, double a, double b) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) {
    double s = 2.0 * k + a + b;
    J(k, k) = (b * b - a * a) == 0 && s == 0 ? 0 : (b * b - a * a) / (s * (s + 2));
    if (k + 1 < n) {
      double off;
      if (k == 0)
        off = std::sqrt(4 * (1 + a) * (1 + b) / ((2 + a + b) * (2 + a + b) * (3 + a + b)));
      else {
        double m = k + 1, t = 2 * m + a + b;
        off = std::sqrt(4 * m * (m + a) * (m + b) * (m + a + b) /
                        (t * t * (t + 1) * (t - 1)));
      }
      J(k, k + 1) = J(k + 1, k) = off;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  double mu0 = std::pow(2.0, a + b + 1) * std::beta(a + 1, b + 1);
  GaussJacobi gj;
  gj.x.resize(n);
  gj.w.resize(n);
  for (int k = 0; k < n; ++k) {
    gj.x[k] = es.eigenvalues()(k);
    double v0 = es.eigenvectors()(0, k);
    gj.w[k] = mu0 * v0 * v0;
  }
  return gj;
}

// \int_0^1 s^{p} f(s) ds for p > -1, via the (0, p) Jacobi rule on [-1,1].
struct PowerRule {
  std::vector<double> s;  // nodes in (0,1)
  std::vector<double> w;  // include the s^p weight and the ds scaling
  explicit PowerRule(int n, double p) {
    auto gj = gauss_jacobi(n, 0.0, p);
    s.resize(n);
    w.resize(n);
    for (int k = 0; k < n; ++k) {
      s[k] = 0.5 * (1.0 + gj.x[k]);
      w[k] = gj.w[k] * std::pow(2.0, -p) * 0.5;
    }
  }
};

// Incomplete-beta map F(z) = B(1/3,1/3)^{-1} \int_0^z t^{-2/3}(1-t)^{-2/3} dt:
// upper half-plane -> equilateral triangle with F(0)=0, F(1)=1,
// F(inf)=(1+i*sqrt(3))/2. Valid for Re z <= 1/2 (integrate from 0) or
// Re z > 1/2 (from 1); large |z| is handled by the caller's Mobius reduction.
class HalfPlaneToTriangle {
 public:
  explicit HalfPlaneToTriangle(int nodes) : rule_(nodes, -2.0 / 3.0) {}

  // barycentric weights of F(z) w.r.t. the corners (F(0), F(1), F(inf))
  std::array<double, 3> bary(C z) const {
    // reduce via the order-3 symmetry z -> 1/(1-z), which cyclically rotates
    // the corners; keeps the quadrature segment short and off the cut
    int rot = 0;
    for (int k = 0; k < 2; ++k) {
      C z1 = C(1.0, 0.0) / (C(1.0, 0.0) - z);
      if (badness(z1) < badness(z)) {
        z = z1;
        rot++;
      } else
        break;
    }
    C p = value(z);
    double cz = p.imag() / (kSqrt3 / 2.0);
    double cy = p.real() - p.imag() / kSqrt3;
    double cx = 1.0 - cy - cz;
    std::array<double, 3> b{cx, cy, cz};
    // rot applications of z -> 1/(1-z) send prevertex 0->1->inf->0, so the
    // weight of corner q at z equals the weight of corner sigma(q) at z'
    std::array<double, 3> out{};
    for (int q = 0; q < 3; ++q) out[q] = b[(q + rot) % 3];
    for (auto& v : out) v = std::max(0.0, std::min(1.0, v));
    double s = out[0] + out[1] + out[2];
    return {out[0] / s, out[1] / s, out[2] / s};
  }

  C value(C z) const {
    double Bc = std::beta(1.0 / 3.0, 1.0 / 3.0);
    if (z == C(0.0, 0.0)) return 0.0;
    if (z == C(1.0, 0.0)) return 1.0;
    if (z.real() <= 0.5) {
      C acc = 0;
      for (std::size_t k = 0; k < rule_.s.size(); ++k)
        acc += rule_.w[k] * std::pow(C(1.0, 0.0) - z * rule_.s[k], -2.0 / 3.0);
      return std::pow(z, 1.0 / 3.0) * acc / Bc;
    }
    C u = C(1.0, 0.0) - z;
    C acc = 0;
    for (std::size_t k = 0; k < rule_.s.size(); ++k)
      acc += rule_.w[k] * std::pow(C(1.0, 0.0) - u * rule_.s[k], -2.0 / 3.0);
    return C(1.0, 0.0) - std::pow(u, 1.0 / 3.0) * acc / Bc;
  }

 private:
  static double badness(C z) {
    if (!(z.imag() >= -1e-12)) return 1e300;  // left the closed half-plane
    return std::abs(z) + std::abs(z - C(1.0, 0.0));
  }
  PowerRule rule_;
};

// Mobius transform fixing the half-plane, sending (wa, wb, wc) on the
// extended real line (ccw) to (0, 1, inf). Infinite inputs encoded as
// (inf, 0) pairs via the flag below.
struct ExtReal {
  double v = 0;
  bool inf = false;
};

inline C mobius_to_012inf(C w, ExtReal wa, ExtReal wb, ExtReal wc) {
  // cross ratio (w - wa)(wb - wc) / ((w - wc)(wb - wa)) with limits
  auto diff = [](C x, ExtReal y) { return y.inf ? C(1.0, 0.0) : x - C(y.v, 0.0); };
  auto dd = [](ExtReal x, ExtReal y) {
    if (x.inf && y.inf) throw InvalidInput("coinciding mark preimages");
    if (x.inf || y.inf) return C(1.0, 0.0);
    return C(x.v - y.v, 0.0);
  };
  // infinite entries cancel one factor from numerator and denominator each;
  // diff/dd encode that cancellation by returning 1
  return (diff(w, wa) * dd(wb, wc)) / (diff(w, wc) * dd(wb, wa));
}

// --- Jacobi elliptic machinery for the rectangle -> half-plane map ---

inline double agm(double a, double b) {
  for (int i = 0; i < 60 && std::abs(a - b) > 1e-16 * a; ++i) {
    double a1 = 0.5 * (a + b);
    b = std::sqrt(a * b);
    a = a1;
  }
  return a;
}

inline double elliptic_K(double k) {
  double kp = std::sqrt(std::max(0.0, 1.0 - k * k));
  return kPi / (2.0 * agm(1.0, kp));
}

struct JacobiSCD {
  double sn, cn, dn;
};

// descending Landen / arithmetic-geometric mean scheme
inline JacobiSCD jacobi_scd(double u, double k) {
  if (k < 1e-12) return {std::sin(u), std::cos(u), 1.0};
  if (k > 1.0 - 1e-12) {
    double t = std::tanh(u);
    return {t, 1.0 / std::cosh(u), 1.0 / std::cosh(u)};
  }
  double a[62], c[62];
  a[0] = 1.0;
  c[0] = k;
  double b = std::sqrt(1.0 - k * k);
  int n = 0;
  while (n < 60 && std::abs(c[n]) > 1e-16) {
    a[n + 1] = 0.5 * (a[n] + b);
    c[n + 1] = 0.5 * (a[n] - b);
    b = std::sqrt(a[n] * b);
    ++n;
  }
  double phi = std::ldexp(1.0, n) * a[n] * u;
  for (int i = n; i > 0; --i)
    phi = 0.5 * (phi + std::asin(std::clamp(c[i] / a[i] * std::sin(phi), -1.0, 1.0)));
  double sn = std::sin(phi), cn = std::cos(phi);
  double dn = std::sqrt(std::max(1e-300, 1.0 - k * k * sn * sn));
  return {sn, cn, dn};
}

// sn at complex argument via the addition formula
inline C jacobi_sn(C z, double k) {
  double kp = std::sqrt(std::max(0.0, 1.0 - k * k));
  auto r = jacobi_scd(z.real(), k);
  auto i = jacobi_scd(z.imag(), kp);
  double den = i.cn * i.cn + k * k * r.sn * r.sn * i.sn * i.sn;
  if (std::abs(den) < 1e-300) den = 1e-300;
  return C(r.sn * i.dn, r.cn * r.dn * i.sn * i.cn) / den;
}

// modulus with K'(k)/K(k) = ratio, by bisection (ratio decreasing in k)
inline double modulus_for_ratio(double ratio) {
  double lo = 1e-12, hi = 1.0 - 1e-12;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    double kp = std::sqrt(1.0 - mid * mid);
    double r = elliptic_K(kp) / elliptic_K(mid);
    (r > ratio ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail_sc

inline std::vector<BaryCoords> riemann_to_delta(const MarkedPolygon& poly,
                                                const std::vector<Vec2>& queries,
                                                const SCConfig& cfg = {}) {
  using detail_sc::C;
  using detail_sc::ExtReal;
  const auto& V = poly.vertices;
  int nv = (int)V.size();
  if (nv != 3 && nv != 4)
    throw InvalidInput("only triangles and rectangles are supported");
  for (int m : poly.marks)
    if (m < 0 || m >= nv) throw InvalidInput("mark index out of range");
  if (poly.marks[0] == poly.marks[1] || poly.marks[1] == poly.marks[2] ||
      poly.marks[0] == poly.marks[2])
    throw InvalidInput("marks must be distinct");

  double diam = 0;
  for (int i = 0; i < nv; ++i)
    for (int j = i + 1; j < nv; ++j)
      diam = std::max(diam, std::sqrt(dist2(V[i], V[j])));
  double excl2 = cfg.exclusion_rel * diam;
  excl2 *= excl2;

  // signed area: require counterclockwise input
  double area2 = 0;
  for (int i = 0; i < nv; ++i) {
    int j = (i + 1) % nv;
    area2 += V[i].x * V[j].y - V[j].x * V[i].y;
  }
  if (area2 <= 0) throw InvalidInput("polygon must be counterclockwise");

  // marks must be in counterclockwise (cyclic index) order
  {
    int a = poly.marks[0], b = poly.marks[1], c = poly.marks[2];
    if (((b - a + nv) % nv) >= ((c - a + nv) % nv))
      throw InvalidInput("marks must be in counterclockwise order");
  }

  detail_sc::HalfPlaneToTriangle F(cfg.nodes);

  // to_zeta(q): canonical half-plane coordinate of q, with the three mark
  // preimages sent to (0, 1, inf). Cross ratios are Mobius-invariant, so any
  // half-plane chart of the domain yields the same zeta.
  std::function<C(Vec2)> to_zeta;

  if (nv == 4) {
    // rectangle: check right angles, set up the elliptic map
    auto e = [&](int i) {
      int j = (i + 1) % 4;
      return Vec2{V[j].x - V[i].x, V[j].y - V[i].y};
    };
    for (int i = 0; i < 4; ++i) {
      Vec2 u = e(i), w = e((i + 1) % 4);
      if (std::abs(u.x * w.x + u.y * w.y) > 1e-9 * diam * diam)
        throw InvalidInput("4-gon domains must be rectangles");
    }
    Vec2 ex = e(0), ey = e(3);
    double Lx = std::sqrt(ex.x * ex.x + ex.y * ex.y);
    double Ly = std::sqrt(ey.x * ey.x + ey.y * ey.y);
    double k = detail_sc::modulus_for_ratio(2.0 * Ly / Lx);
    double K = detail_sc::elliptic_K(k);
    double Kp = detail_sc::elliptic_K(std::sqrt(1.0 - k * k));
    // corners 0,1,2,3 -> -K, K, K+iK', -K+iK' -> sn: -1, 1, 1/k, -1/k
    std::array<double, 4> corner_pre{-1.0, 1.0, 1.0 / k, -1.0 / k};
    std::array<ExtReal, 3> pre{};
    for (int m = 0; m < 3; ++m) pre[m] = {corner_pre[poly.marks[m]], false};
    Vec2 origin = V[0];
    double ux = ex.x / Lx, uy = ex.y / Lx;  // unit vector along V0->V1
    to_zeta = [=](Vec2 q) {
      double qx = (q.x - origin.x) * ux + (q.y - origin.y) * uy;
      double qy = -(q.x - origin.x) * uy + (q.y - origin.y) * ux;
      C z(-K + 2.0 * K * qx / Lx, Kp * qy / Ly);
      if (std::abs(z.real()) < 1e-13 && std::abs(z.imag() - Kp) < 1e-13)
        z += C(1e-12, 0);  // conformal midpoint of the far edge maps to inf
      C w = detail_sc::jacobi_sn(z, k);
      return detail_sc::mobius_to_012inf(w, pre[0], pre[1], pre[2]);
    };
  } else {
    // triangle: forward map g(w) = V0 + (V1-V0) I(w)/I(1) with
    // I(w) = \int_0^w t^{a0-1}(1-t)^{a1-1} dt, inverted by Newton with
    // continuation from the interior reference point g(e^{i pi/3})
    std::array<double, 3> alpha{};  // interior angles / pi
    for (int i = 0; i < 3; ++i) {
      Vec2 u{V[(i + 2) % 3].x - V[i].x, V[(i + 2) % 3].y - V[i].y};
      Vec2 w{V[(i + 1) % 3].x - V[i].x, V[(i + 1) % 3].y - V[i].y};
      double nu = std::sqrt(u.x * u.x + u.y * u.y);
      double nw = std::sqrt(w.x * w.x + w.y * w.y);
      double cosang = std::clamp((u.x * w.x + u.y * w.y) / (nu * nw), -1.0, 1.0);
      alpha[i] = std::acos(cosang) / kPi;
    }

    // Inverting the Schwarz-Christoffel integral by Newton degenerates near
    // the corner whose prevertex is infinity (|w| blows up, the quadrature
    // segment gets long). So build the map in three cyclic frames -- frame
    // rho sends prevertices (0, 1, inf) to corners (V[rho], V[rho+1],
    // V[rho+2]) -- and invert each query in a frame whose infinity corner is
    // far from it. zeta is a cross ratio of the prevertices, hence the same
    // in every frame.
    struct Frame {
      std::function<C(C)> g, gp;      // forward map and derivative
      C w_ref, q_ref;                 // interior continuation anchor
      std::array<ExtReal, 3> vpre{};  // prevertex of polygon vertex j
      Vec2 far;                       // the corner at prevertex infinity
    };
    auto frames = std::make_shared<std::array<Frame, 3>>();
    for (int rho = 0; rho < 3; ++rho) {
      double a0 = alpha[rho], a1 = alpha[(rho + 1) % 3];
      auto rA = std::make_shared<detail_sc::PowerRule>(cfg.nodes, a0 - 1.0);
      auto rB = std::make_shared<detail_sc::PowerRule>(cfg.nodes, a1 - 1.0);
      double I1 = std::beta(a0, a1);
      C v0(V[rho].x, V[rho].y);
      C v1(V[(rho + 1) % 3].x, V[(rho + 1) % 3].y);
      C scale = (v1 - v0) / I1;
      auto Ieval = [=](C w) -> C {
        if (w.real() <= 0.5) {
          C acc = 0;
          for (std::size_t j = 0; j < rA->s.size(); ++j)
            acc += rA->w[j] * std::pow(C(1.0, 0.0) - w * rA->s[j], a1 - 1.0);
          return std::pow(w, a0) * acc;
        }
        C u = C(1.0, 0.0) - w;
        C acc = 0;
        for (std::size_t j = 0; j < rB->s.size(); ++j)
          acc += rB->w[j] * std::pow(C(1.0, 0.0) - u * rB->s[j], a0 - 1.0);
        return C(I1, 0.0) - std::pow(u, a1) * acc;
      };
      Frame& fr = (*frames)[rho];
      fr.g = [=](C w) { return v0 + scale * Ieval(w); };
      fr.gp = [=](C w) {
        return scale * std::pow(w, a0 - 1.0) *
               std::pow(C(1.0, 0.0) - w, a1 - 1.0);
      };
      fr.w_ref = C(0.5, kSqrt3 / 2.0);  // e^{i pi/3}
      fr.q_ref = fr.g(fr.w_ref);
      fr.vpre[rho] = {0.0, false};
      fr.vpre[(rho + 1) % 3] = {1.0, false};
      fr.vpre[(rho + 2) % 3] = {0.0, true};
      fr.far = V[(rho + 2) % 3];
    }

    auto invert_in = [](const Frame& fr, C q) -> C {
      // damped Newton with continuation from the interior reference point;
      // retried with a finer path when the residual check fails
      for (int steps : {8, 64, 512}) {
        C w = fr.w_ref;
        for (int s = 1; s <= steps; ++s) {
          C target = fr.q_ref + (q - fr.q_ref) * ((double)s / steps);
          for (int it = 0; it < 60; ++it) {
            C f = fr.g(w) - target;
            if (!(std::abs(f) >= 1e-12 * (1.0 + std::abs(target)))) break;
            C step = f / fr.gp(w);
            // damp to keep the iterate inside the open half-plane
            C wn = w - step;
            double damp = 1.0;
            while (!(wn.imag() > 0) && damp > 1e-6) {
              damp *= 0.5;
              wn = w - damp * step;
            }
            w = wn;
          }
          if (!std::isfinite(w.real()) || !std::isfinite(w.imag())) break;
        }
        if (std::isfinite(w.real()) && std::isfinite(w.imag()) &&
            std::abs(fr.g(w) - q) <= 1e-8 * (1.0 + std::abs(q)))
          return w;
      }
      throw InvalidInput("half-plane inversion failed to converge");
    };

    std::array<int, 3> mk = poly.marks;
    to_zeta = [=](Vec2 qv) -> C {
      C q(qv.x, qv.y);
      // frames ordered by distance of q to the frame's infinity corner,
      // farthest first
      std::array<int, 3> order{0, 1, 2};
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        return dist2(qv, (*frames)[a].far) > dist2(qv, (*frames)[b].far);
      });
      for (int oi = 0; oi < 3; ++oi) {
        const Frame& fr = (*frames)[order[oi]];
        C w;
        try {
          w = invert_in(fr, q);
        } catch (const InvalidInput&) {
          if (oi == 2) throw;
          continue;
        }
        return detail_sc::mobius_to_012inf(w, fr.vpre[mk[0]], fr.vpre[mk[1]],
                                           fr.vpre[mk[2]]);
      }
      throw InvalidInput("half-plane inversion failed to converge");
    };
  }

  // orientation sanity at an interior point (centroid)
  {
    Vec2 cen{0, 0};
    for (auto& p : V) {
      cen.x += p.x / nv;
      cen.y += p.y / nv;
    }
    if (to_zeta(cen).imag() <= 0)
      throw InvalidInput("marks do not wind counterclockwise");
  }

  std::vector<BaryCoords> out;
  out.reserve(queries.size());
  for (Vec2 q : queries) {
    for (int m = 0; m < 3; ++m)
      if (dist2(q, V[poly.marks[m]]) < excl2) throw QueryTooCloseToCorner();
    C zeta = to_zeta(q);
    if (zeta.imag() < 0) zeta = C(zeta.real(), 0.0);  // boundary roundoff
    auto b = F.bary(zeta);
    out.push_back({b[0], b[1], b[2]});
  }
  return out;
}

}  // namespace cardylab

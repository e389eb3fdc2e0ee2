// cardylab command-line surface. Every command computes its full result in
// memory first and only then writes files, so validation failures (exit 2)
// and usage errors leave nothing behind. Exit 3 flags a violated numeric
// budget (--tolerance style checks); the report file is still written.

#include <CLI11.hpp>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "cardylab/dynamics.hpp"
#include "cardylab/gff.hpp"
#include "cardylab/json_io.hpp"
#include "cardylab/svg.hpp"

using namespace cardylab;

namespace {

struct BudgetExceeded : Error {
  using Error::Error;
};

int resolve_threads(int flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("CARDYLAB_THREADS")) {
    int t = std::atoi(env);
    if (t > 0) return t;
  }
  return 1;
}

DomainSpec domain_by_name(const std::string& name) {
  if (name == "disk") return DomainSpec::disk(0, 0, 1.0);
  if (name == "triangle") return DomainSpec::equilateral_triangle();
  throw InvalidInput("unknown domain (expected disk or triangle): " + name);
}

// artifact to --out, envelope next to it
void emit(const std::string& out, const std::string& artifact,
          ResultEnvelope& env) {
  write_file(out, artifact);
  write_json_file(out + ".envelope.json", env.finish());
}

void emit_envelope_only(const std::string& out, ResultEnvelope& env) {
  write_json_file(out, env.finish());
}

MarkedTriangulation load_marked_map(const std::string& path,
                                    const std::string& marks,
                                    std::uint64_t seed) {
  auto lines = read_jsonl_file(path);
  if (lines.empty()) throw InvalidInput("no maps in " + path);
  MarkedTriangulation mt = marked_map_from_json(lines[0]);
  if (marks == "auto") {
    if (!lines[0].contains("marks")) {
      auto rng = make_rng(seed, "marks/0");
      mt = sample_marked_edges(mt.map, rng);
    }
  } else {
    int a, b, c;
    if (std::sscanf(marks.c_str(), "%d,%d,%d", &a, &b, &c) != 3)
      throw InvalidInput("marks must be 'auto' or three integers i,j,k");
    mt.ia = a;
    mt.ib = b;
    mt.ic = c;
  }
  return mt;
}

AtomicMeasure uniform_rates(const std::vector<int>& inner, double r,
                            const std::function<Vec2(int)>& pos) {
  AtomicMeasure m;
  for (int v : inner) m.atoms.push_back({v, pos ? pos(v) : Vec2{}, r});
  return m;
}

AtomicMeasure rates_from_spec(const std::string& spec,
                              const std::vector<int>& inner,
                              const std::function<Vec2(int)>& pos) {
  if (spec.rfind("uniform:", 0) == 0) {
    double r = std::stod(spec.substr(8));
    if (!(r >= 0)) throw InvalidInput("uniform rate must be nonnegative");
    return uniform_rates(inner, r, pos);
  }
  if (spec.rfind("field:", 0) == 0) {
    std::ifstream in(spec.substr(6));
    if (!in) throw InvalidInput("cannot open rates file: " + spec.substr(6));
    json j = json::parse(in);
    AtomicMeasure m;
    for (const auto& a : j.at("atoms"))
      m.atoms.push_back({a.at("v").get<int>(),
                         {a.at("x").get<double>(), a.at("y").get<double>()},
                         a.at("mass").get<double>()});
    return m;
  }
  throw InvalidInput("rates must be uniform:R or field:path");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cardylab: triangulations, percolation observables, Cardy "
               "embeddings, pivotal measures, GFF/GMC, dynamical percolation"};
  app.require_subcommand(1);
  app.fallthrough();  // lets --seed/--threads appear after the subcommand

  std::uint64_t seed = 0;
  int threads_flag = 0;
  app.add_option("--seed", seed, "master seed")->capture_default_str();
  app.add_option("--threads", threads_flag,
                 "worker threads (0: CARDYLAB_THREADS or 1)");

  // --- sample-map ---------------------------------------------------------
  auto* sm = app.add_subcommand("sample-map", "Boltzmann triangulation samples");
  int sm_boundary = 3, sm_count = 1;
  std::string sm_out = "maps.jsonl";
  sm->add_option("--boundary", sm_boundary, "boundary length")->required();
  sm->add_option("--count", sm_count, "number of samples");
  sm->add_option("--out", sm_out, "output JSONL path");
  sm->callback([&] {
    ResultEnvelope env("sample-map",
                       {{"boundary", sm_boundary}, {"count", sm_count}}, seed);
    std::vector<json> lines;
    json ns = json::array();
    double residual = 0;
    for (int k = 0; k < sm_count; ++k) {
      auto rng = make_rng(seed, "sample-map/" + std::to_string(k));
      BoltzmannMeta meta;
      auto m = sample_boltzmann(sm_boundary, rng, &meta);
      lines.push_back(map_to_json(m));
      ns.push_back(m.n_inner);
      residual = std::max(residual, meta.residual_estimate);
    }
    env.payload() = {{"count", sm_count}, {"n_inner", ns}};
    env.note("tail_cutoff_residual", residual);
    std::string art;
    for (auto& l : lines) art += l.dump() + "\n";
    emit(sm_out, art, env);
  });

  // --- crossing -----------------------------------------------------------
  auto* cr = app.add_subcommand("crossing",
                                "Monte Carlo crossing-event frequencies");
  std::string cr_map, cr_out = "flags.csv";
  std::uint64_t cr_samples = 10000;
  cr->add_option("--map", cr_map, "maps.jsonl input")->required();
  cr->add_option("--samples", cr_samples, "samples per map");
  cr->add_option("--out", cr_out, "output CSV path");
  cr->callback([&] {
    int threads = resolve_threads(threads_flag);
    auto lines = read_jsonl_file(cr_map);
    if (lines.empty()) throw InvalidInput("no maps in " + cr_map);
    std::string csv = "map,v,ea,eb,ec,se_a,se_b,se_c\n";
    char row[256];
    for (std::size_t i = 0; i < lines.size(); ++i) {
      MarkedTriangulation mt = marked_map_from_json(lines[i]);
      if (!lines[i].contains("marks")) {
        auto rng = make_rng(seed, "marks/" + std::to_string(i));
        mt = sample_marked_edges(mt.map, rng);
      }
      auto em = cardy_embedding(mt, cr_samples,
                                seed_split(seed, "crossing/" + std::to_string(i)),
                                threads);
      for (int v = 0; v < mt.map.num_vertices; ++v) {
        std::snprintf(row, sizeof row,
                      "%zu,%d,%.9f,%.9f,%.9f,%.3e,%.3e,%.3e\n", i, v,
                      em.freq[v][0], em.freq[v][1], em.freq[v][2],
                      em.stderr_[v][0], em.stderr_[v][1], em.stderr_[v][2]);
        csv += row;
      }
    }
    ResultEnvelope env("crossing",
                       {{"map", cr_map}, {"samples", cr_samples}}, seed);
    env.payload() = {{"maps", lines.size()}, {"samples", cr_samples}};
    emit(cr_out, csv, env);
  });

  // --- embed --------------------------------------------------------------
  auto* eb = app.add_subcommand("embed", "Cardy embedding of one map");
  std::string eb_map, eb_marks = "auto", eb_out = "embed.json", eb_svg;
  std::uint64_t eb_samples = 100000;
  eb->add_option("--map", eb_map, "map JSON/JSONL input")->required();
  eb->add_option("--marks", eb_marks, "auto or i,j,k boundary positions");
  eb->add_option("--samples", eb_samples, "Monte Carlo samples");
  eb->add_option("--out", eb_out, "output JSON path");
  eb->add_option("--svg", eb_svg, "optional SVG path");
  eb->callback([&] {
    int threads = resolve_threads(threads_flag);
    auto mt = load_marked_map(eb_map, eb_marks, seed);
    auto em = cardy_embedding(mt, eb_samples, seed, threads);
    ResultEnvelope env("embed",
                       {{"map", eb_map},
                        {"marks", eb_marks},
                        {"samples", eb_samples}},
                       seed);
    env.payload() = embedding_to_json(em);
    emit(eb_out, env.payload().dump(2) + "\n", env);
    if (!eb_svg.empty()) write_file(eb_svg, svg_embedded_map(em, mt.map));
  });

  // --- verify-cardy -------------------------------------------------------
  auto* vc = app.add_subcommand(
      "verify-cardy", "embedding vs the continuum triangle identity");
  std::string vc_domain = "triangle", vc_delta = "1/40",
              vc_out = "cardy_report.json";
  std::uint64_t vc_samples = 20000;
  double vc_tolerance = 0;
  vc->add_option("--domain", vc_domain, "triangle");
  vc->add_option("--delta", vc_delta, "mesh size as a rational");
  vc->add_option("--samples", vc_samples, "Monte Carlo samples");
  vc->add_option("--tolerance", vc_tolerance,
                 "exit 3 when the sup discrepancy exceeds this");
  vc->add_option("--out", vc_out, "report JSON path");
  vc->callback([&] {
    if (vc_domain != "triangle")
      throw InvalidInput("verify-cardy supports only --domain triangle");
    int threads = resolve_threads(threads_flag);
    auto dom = build_lattice_domain(DomainSpec::equilateral_triangle(),
                                    Rational::parse(vc_delta));
    std::array<Vec2, 3> corners{{{0, 0}, {1, 0}, {0.5, kSqrt3 / 2}}};
    auto mt = mark_nearest(dom, corners);
    auto em = cardy_embedding(mt, vc_samples, seed, threads);

    MarkedPolygon tri;
    tri.vertices = {corners[0], corners[1], corners[2]};
    tri.marks = {0, 1, 2};
    std::vector<Vec2> queries;
    std::vector<int> kept;
    for (int v = 0; v < dom.num_vertices(); ++v) {
      Vec2 p = dom.position(v);
      bool near_corner = false;
      for (Vec2 c : corners)
        if (dist2(p, c) < 1e-3) near_corner = true;
      if (near_corner) continue;
      queries.push_back(p);
      kept.push_back(v);
    }
    auto exact = riemann_to_delta(tri, queries);

    double sup = 0, budget = 0, sum_defect = 0;
    for (std::size_t k = 0; k < kept.size(); ++k) {
      int v = kept[k];
      sup = std::max({sup, std::fabs(em.coords[v].x - exact[k].x),
                      std::fabs(em.coords[v].y - exact[k].y),
                      std::fabs(em.coords[v].z - exact[k].z)});
      budget = std::max({budget, 4 * em.stderr_[v][0], 4 * em.stderr_[v][1],
                         4 * em.stderr_[v][2]});
    }
    for (int v = 0; v < dom.num_vertices(); ++v)
      sum_defect = std::max(
          sum_defect,
          std::fabs(em.freq[v][0] + em.freq[v][1] + em.freq[v][2] - 1.0));

    ResultEnvelope env("verify-cardy",
                       {{"domain", vc_domain},
                        {"delta", vc_delta},
                        {"samples", vc_samples}},
                       seed);
    env.payload() = {{"delta", vc_delta},
                     {"samples", vc_samples},
                     {"sup_discrepancy", sup},
                     {"mc_error_budget", budget},
                     {"sum_to_one_defect", sum_defect},
                     {"vertices", dom.num_vertices()},
                     {"compared", kept.size()}};
    emit_envelope_only(vc_out, env);
    if (vc_tolerance > 0 && sup > vc_tolerance)
      throw BudgetExceeded("sup discrepancy " + std::to_string(sup) +
                           " exceeds tolerance");
  });

  // --- four-arm -----------------------------------------------------------
  auto* fa = app.add_subcommand("four-arm", "alternating four-arm probability");
  std::string fa_deltas = "1/16,1/32,1/64", fa_out = "alpha4.csv";
  double fa_r = 1.0;
  std::uint64_t fa_samples = 100000;
  fa->add_option("--delta-list", fa_deltas, "comma-separated rational meshes");
  fa->add_option("--r", fa_r, "box half-size");
  fa->add_option("--samples", fa_samples, "samples per mesh");
  fa->add_option("--out", fa_out, "output CSV path");
  fa->callback([&] {
    int threads = resolve_threads(threads_flag);
    std::vector<FourArmEstimate> ests;
    std::string list = fa_deltas;
    for (std::size_t p = 0; p < list.size();) {
      auto q = list.find(',', p);
      if (q == std::string::npos) q = list.size();
      Rational d = Rational::parse(list.substr(p, q - p));
      ests.push_back(four_arm_probability(
          d.value(), fa_r, fa_samples,
          seed_split(seed, "four-arm/" + d.str()), threads));
      p = q + 1;
    }
    std::string csv = "delta,r,p,se,samples\n";
    char row[160];
    json payload = json::array();
    for (auto& e : ests) {
      std::snprintf(row, sizeof row, "%.9g,%.9g,%.9f,%.3e,%llu\n", e.delta,
                    e.r, e.p, e.se, (unsigned long long)e.samples);
      csv += row;
      payload.push_back(four_arm_to_json(e));
    }
    ResultEnvelope env("four-arm",
                       {{"delta_list", fa_deltas},
                        {"r", fa_r},
                        {"samples", fa_samples}},
                       seed);
    env.payload() = {{"estimates", payload}};
    if (ests.size() >= 2) {
      // weighted least-squares slope of log p against log delta
      double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
      for (auto& e : ests) {
        if (e.p <= 0 || e.se <= 0) continue;
        double w = (e.p / e.se) * (e.p / e.se);  // var of log p ~ (se/p)^2
        double x = std::log(e.delta), y = std::log(e.p);
        sw += w; sx += w * x; sy += w * y; sxx += w * x * x; sxy += w * x * y;
      }
      double denom = sw * sxx - sx * sx;
      if (denom > 0)
        env.payload()["log_log_slope"] = (sw * sxy - sx * sy) / denom;
    }
    emit(fa_out, csv, env);
  });

  // --- pivotals -----------------------------------------------------------
  auto* pv = app.add_subcommand("pivotals", "eps-pivotal measure of a sample");
  std::string pv_mode = "lattice", pv_domain = "disk", pv_delta = "1/16",
              pv_out = "pivotals.json", pv_svg;
  int pv_boundary = 3;
  double pv_eps = 0;
  std::uint64_t pv_a4_samples = 10000;
  pv->add_option("--mode", pv_mode, "map or lattice")->required();
  pv->add_option("--eps", pv_eps, "pivotal cutoff");
  pv->add_option("--boundary", pv_boundary, "map mode: boundary length");
  pv->add_option("--domain", pv_domain, "lattice mode: disk or triangle");
  pv->add_option("--delta", pv_delta, "lattice mode: mesh size");
  pv->add_option("--alpha4-samples", pv_a4_samples,
                 "lattice mode: samples for the four-arm normalization");
  pv->add_option("--out", pv_out, "output JSON path");
  pv->add_option("--svg", pv_svg, "lattice mode: optional SVG overlay");
  pv->callback([&] {
    ResultEnvelope env("pivotals",
                       {{"mode", pv_mode}, {"eps", pv_eps}}, seed);
    if (pv_mode == "map") {
      auto rng = make_rng(seed, "pivotals/map");
      auto m = sample_boltzmann(pv_boundary, rng);
      auto c = sample_percolation(m, BoundaryCondition::MonochromaticBlue, rng);
      auto meas = pivotal_measure(m, c, pv_eps);
      env.payload() = {{"map", map_to_json(m)},
                       {"measure", measure_to_json(meas)}};
      emit_envelope_only(pv_out, env);
    } else if (pv_mode == "lattice") {
      int threads = resolve_threads(threads_flag);
      auto dom = build_lattice_domain(domain_by_name(pv_domain),
                                      Rational::parse(pv_delta));
      auto alpha4 = four_arm_probability(dom.delta, 1.0, pv_a4_samples,
                                         seed_split(seed, "pivotals/alpha4"),
                                         threads);
      auto rng = make_rng(seed, "pivotals/coloring");
      auto c = sample_percolation(dom.tri, BoundaryCondition::MonochromaticBlue,
                                  rng);
      auto meas = pivotal_measure(dom, c, pv_eps, alpha4);
      env.payload() = {{"domain", domain_to_json(dom)},
                       {"measure", measure_to_json(meas)}};
      emit_envelope_only(pv_out, env);
      if (!pv_svg.empty())
        write_file(pv_svg, svg_pivotal_overlay(dom, c, meas));
    } else {
      throw InvalidInput("mode must be map or lattice");
    }
  });

  // --- gff ----------------------------------------------------------------
  auto* gf = app.add_subcommand("gff", "discrete Gaussian free field samples");
  std::string gf_domain = "disk", gf_delta = "1/64", gf_out = "fields.bin";
  std::uint64_t gf_samples = 1;
  gf->add_option("--domain", gf_domain, "disk or triangle");
  gf->add_option("--delta", gf_delta, "mesh size");
  gf->add_option("--samples", gf_samples, "number of fields");
  gf->add_option("--out", gf_out, "output binary path (f64 rows)");
  gf->callback([&] {
    auto dom = build_lattice_domain(domain_by_name(gf_domain),
                                    Rational::parse(gf_delta));
    GffSampler gs(dom);
    std::string bin;
    for (std::uint64_t s = 0; s < gf_samples; ++s) {
      auto rng = make_rng(seed, "gff/" + std::to_string(s));
      auto f = gs.sample(rng);
      bin.append(reinterpret_cast<const char*>(f.values.data()),
                 f.values.size() * sizeof(double));
    }
    json header = {{"domain", gf_domain},
                   {"delta", gf_delta},
                   {"vertices", dom.num_vertices()},
                   {"samples", gf_samples},
                   {"c_T", kGffNormalization},
                   {"layout", "row-major f64, one field per row, little-endian"},
                   {"coords", domain_to_json(dom)}};
    ResultEnvelope env("gff",
                       {{"domain", gf_domain},
                        {"delta", gf_delta},
                        {"samples", gf_samples}},
                       seed);
    env.note("c_T", kGffNormalization);
    env.payload() = {{"vertices", dom.num_vertices()},
                     {"samples", gf_samples}};
    emit(gf_out, bin, env);
    write_json_file(gf_out + ".header.json", header);
  });

  // --- gmc ----------------------------------------------------------------
  auto* gm = app.add_subcommand("gmc", "multiplicative-chaos measure of one "
                                       "field sample");
  std::string gm_domain = "disk", gm_delta = "1/32", gm_out = "gmc.json";
  double gm_exponent = std::sqrt(8.0 / 3.0) * 0.99, gm_r = 0, gm_alpha4 = 0;
  gm->add_option("--domain", gm_domain, "disk or triangle");
  gm->add_option("--delta", gm_delta, "mesh size");
  gm->add_option("--exponent", gm_exponent, "chaos exponent in (0,2)")
      ->required();
  gm->add_option("--r", gm_r, "regularization radius (default 4*delta)");
  gm->add_option("--alpha4", gm_alpha4,
                 "divide masses by this four-arm value (clock rates)");
  gm->add_option("--out", gm_out, "output JSON path");
  gm->callback([&] {
    auto dom = build_lattice_domain(domain_by_name(gm_domain),
                                    Rational::parse(gm_delta));
    auto rng = make_rng(seed, "gmc/field");
    auto f = sample_gff(dom, rng);
    double r = gm_r > 0 ? gm_r : default_regularization(dom);
    auto mu = gmc_measure(f, gm_exponent, r);
    ResultEnvelope env("gmc",
                       {{"domain", gm_domain},
                        {"delta", gm_delta},
                        {"exponent", gm_exponent},
                        {"r", r},
                        {"alpha4", gm_alpha4}},
                       seed);
    env.note("c_T", kGffNormalization);
    json jm = measure_to_json(mu);
    jm["exponent"] = mu.exponent;
    jm["r"] = mu.r;
    jm["delta"] = mu.delta;
    env.payload() = {{"measure", jm}};
    if (gm_alpha4 > 0) {
      FourArmEstimate a4;
      a4.p = gm_alpha4;
      auto rates = clock_rates(f, dom, a4, r);
      env.payload()["clock_rates"] = measure_to_json(rates);
    }
    emit_envelope_only(gm_out, env);
  });

  // --- dynamics -----------------------------------------------------------
  auto* dy = app.add_subcommand("dynamics", "dynamical percolation trajectory");
  std::string dy_mode = "full", dy_rates = "uniform:1", dy_out = "traj.jsonl";
  std::string dy_domain = "disk", dy_delta = "1/8", dy_map;
  double dy_eps = 0, dy_horizon = 1;
  dy->add_option("--mode", dy_mode, "full or cutoff")->required();
  dy->add_option("--eps", dy_eps, "cutoff mode: pivotal threshold");
  dy->add_option("--rates", dy_rates, "uniform:R or field:path");
  dy->add_option("--horizon", dy_horizon, "time horizon")->required();
  dy->add_option("--domain", dy_domain, "lattice source: disk or triangle");
  dy->add_option("--delta", dy_delta, "lattice source: mesh size");
  dy->add_option("--map", dy_map, "map source: maps.jsonl (overrides domain)");
  dy->add_option("--out", dy_out, "trajectory JSONL path");
  dy->callback([&] {
    Triangulation tri;
    std::function<Vec2(int)> pos;
    std::function<double(int)> area_of;
    LatticeDomain dom;
    if (!dy_map.empty()) {
      auto lines = read_jsonl_file(dy_map);
      if (lines.empty()) throw InvalidInput("no maps in " + dy_map);
      tri = map_from_json(lines[0]);
      if (tri.n_inner > 0) {
        double mu = 1.0 / (2.0 * tri.n_inner);
        area_of = [mu](int) { return mu; };
      }
    } else {
      dom = build_lattice_domain(domain_by_name(dy_domain),
                                 Rational::parse(dy_delta));
      tri = dom.tri;
      pos = [&dom](int v) { return dom.position(v); };
      double hex = dom.hexagon_area();
      area_of = [hex](int) { return hex; };
    }
    auto bm = tri.boundary_vertex_mask();
    std::vector<int> inner;
    for (int v = 0; v < tri.num_vertices; ++v)
      if (!bm[v]) inner.push_back(v);
    auto rates = rates_from_spec(dy_rates, inner, pos);

    auto rng = make_rng(seed, "dynamics/init");
    auto c0 = sample_percolation(tri, BoundaryCondition::MonochromaticBlue, rng);
    auto rng2 = make_rng(seed, "dynamics/clock");
    DynTrajectory tr;
    if (dy_mode == "full") {
      tr = run_dynamics(c0, rates, dy_horizon, rng2);
    } else if (dy_mode == "cutoff") {
      tr = run_eps_cutoff(tri, c0, rates, dy_eps, area_of, dy_horizon, rng2);
    } else {
      throw InvalidInput("mode must be full or cutoff");
    }

    std::string art;
    for (const auto& e : tr.events)
      art += trajectory_event_to_json(e).dump() + "\n";
    ResultEnvelope env("dynamics",
                       {{"mode", dy_mode},
                        {"eps", dy_eps},
                        {"rates", dy_rates},
                        {"horizon", dy_horizon}},
                       seed);
    json init = json::array(), fin = json::array();
    for (auto c : tr.initial.color) init.push_back((int)c);
    for (auto c : tr.final.color) fin.push_back((int)c);
    int applied = 0;
    for (const auto& e : tr.events) applied += e.applied;
    env.payload() = {{"initial", init},
                     {"final", fin},
                     {"events", tr.events.size()},
                     {"applied", applied}};
    emit(dy_out, art, env);
  });

  // --- ctmc ---------------------------------------------------------------
  auto* cm = app.add_subcommand("ctmc", "exact rate matrix of a tiny instance");
  std::string cm_map, cm_domain = "disk", cm_delta = "3/5",
              cm_out = "ctmc.json";
  double cm_eps = 0, cm_rate = 1;
  cm->add_option("--map", cm_map, "map source: maps.jsonl");
  cm->add_option("--domain", cm_domain, "lattice source: disk or triangle");
  cm->add_option("--delta", cm_delta, "lattice source: mesh size");
  cm->add_option("--eps", cm_eps, "pivotal threshold");
  cm->add_option("--rate", cm_rate, "uniform per-vertex rate");
  cm->add_option("--out", cm_out, "output JSON path");
  cm->callback([&] {
    Triangulation tri;
    std::function<double(int)> area_of;
    if (!cm_map.empty()) {
      auto lines = read_jsonl_file(cm_map);
      if (lines.empty()) throw InvalidInput("no maps in " + cm_map);
      tri = map_from_json(lines[0]);
      if (tri.n_inner > 0) {
        double mu = 1.0 / (2.0 * tri.n_inner);
        area_of = [mu](int) { return mu; };
      }
    } else {
      auto dom = build_lattice_domain(domain_by_name(cm_domain),
                                      Rational::parse(cm_delta));
      tri = dom.tri;
      double hex = dom.hexagon_area();
      area_of = [hex](int) { return hex; };
    }
    auto bm = tri.boundary_vertex_mask();
    std::vector<int> inner;
    for (int v = 0; v < tri.num_vertices; ++v)
      if (!bm[v]) inner.push_back(v);
    auto rm = build_exact_ctmc(tri, cm_eps, area_of,
                               uniform_rates(inner, cm_rate, nullptr));
    auto js = jump_skeleton(rm);

    int S = (int)rm.Q.rows();
    double sym = 0, urow = 0;
    for (int i = 0; i < S; ++i) {
      urow = std::max(urow, std::fabs(rm.Q.col(i).sum()));
      for (int j = 0; j < i; ++j)
        sym = std::max(sym, std::fabs(rm.Q(i, j) - rm.Q(j, i)));
    }
    json q = json::array();
    for (int i = 0; i < S; ++i) {
      json r = json::array();
      for (int j = 0; j < S; ++j) r.push_back(rm.Q(i, j));
      q.push_back(std::move(r));
    }
    ResultEnvelope env("ctmc",
                       {{"eps", cm_eps}, {"rate", cm_rate}}, seed);
    env.payload() = {{"states", S},
                     {"inner", rm.inner},
                     {"Q", std::move(q)},
                     {"absorbing", js.absorbing},
                     {"symmetry_residual", sym},
                     {"stationarity_residual", urow}};
    emit_envelope_only(cm_out, env);
  });

  // --- occupation ---------------------------------------------------------
  auto* oc = app.add_subcommand("occupation",
                                "occupation-measure estimate of a point set");
  std::string oc_points, oc_out = "occupation.json";
  double oc_dim = 1.0, oc_radius = 0.1, oc_grid = 0;
  bool oc_atoms = false;
  oc->add_option("--points", oc_points, "JSON array of [x,y] pairs")
      ->required();
  oc->add_option("--dim", oc_dim, "assumed dimension d");
  oc->add_option("--radius", oc_radius, "neighborhood radius r");
  oc->add_option("--grid", oc_grid, "grid cell size (default r/100)");
  oc->add_flag("--atoms", oc_atoms, "include the atom list in the output");
  oc->add_option("--out", oc_out, "output JSON path");
  oc->callback([&] {
    std::ifstream in(oc_points);
    if (!in) throw InvalidInput("cannot open points file: " + oc_points);
    json j = json::parse(in);
    std::vector<Vec2> pts;
    for (const auto& p : j)
      pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    auto m = occupation_estimate(pts, oc_dim, oc_radius, oc_grid);
    ResultEnvelope env("occupation",
                       {{"points", oc_points},
                        {"dim", oc_dim},
                        {"radius", oc_radius},
                        {"grid", oc_grid}},
                       seed);
    env.payload() = {{"total", m.total()}, {"cells", m.atoms.size()}};
    if (oc_atoms) env.payload()["atoms"] = measure_to_json(m)["atoms"];
    emit_envelope_only(oc_out, env);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const BudgetExceeded& e) {
    std::cerr << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

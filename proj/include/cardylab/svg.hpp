#pragma once

// Minimal static SVG emitters: embedded maps in the triangle Delta, loop
// ensembles over hexagon tilings, and pivotal-point overlays.

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

#include "cardylab/cardy.hpp"
#include "cardylab/gff.hpp"
#include "cardylab/lattice.hpp"
#include "cardylab/percolation.hpp"
#include "cardylab/pivotal.hpp"

namespace cardylab {

namespace detail_svg {

inline std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", x);
  return buf;
}

struct Canvas {
  std::string body;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;

  void grow(Vec2 p) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }

  void poly(const std::vector<Vec2>& pts, const std::string& style,
            bool closed) {
    if (pts.empty()) return;
    body += closed ? "<polygon points=\"" : "<polyline points=\"";
    for (Vec2 p : pts) {
      grow(p);
      body += num(p.x) + "," + num(-p.y) + " ";  // svg y runs down
    }
    body += "\" " + style + "/>\n";
  }

  void circle(Vec2 c, double r, const std::string& style) {
    grow({c.x - r, c.y - r});
    grow({c.x + r, c.y + r});
    body += "<circle cx=\"" + num(c.x) + "\" cy=\"" + num(-c.y) + "\" r=\"" +
            num(r) + "\" " + style + "/>\n";
  }

  void line(Vec2 a, Vec2 b, const std::string& style) {
    grow(a);
    grow(b);
    body += "<line x1=\"" + num(a.x) + "\" y1=\"" + num(-a.y) + "\" x2=\"" +
            num(b.x) + "\" y2=\"" + num(-b.y) + "\" " + style + "/>\n";
  }

  std::string finish() const {
    double pad = 0.05 * std::max(xmax - xmin, ymax - ymin) + 1e-9;
    double w = xmax - xmin + 2 * pad, h = ymax - ymin + 2 * pad;
    char head[256];
    std::snprintf(head, sizeof head,
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" "
                  "viewBox=\"%.3f %.3f %.3f %.3f\" width=\"800\">\n",
                  xmin - pad, -ymax - pad, w, h);
    return std::string(head) + body + "</svg>\n";
  }
};

inline Vec2 edge_midpoint(const LatticeDomain& dom, int h) {
  Vec2 a = dom.position(dom.tri.org[h]);
  Vec2 b = dom.position(dom.tri.head(h));
  return {(a.x + b.x) / 2, (a.y + b.y) / 2};
}

}  // namespace detail_svg

// Vertices at their Cardy coordinates inside Delta, edges as thin lines.
inline std::string svg_embedded_map(const EmbeddedMap& em,
                                    const Triangulation& t) {
  detail_svg::Canvas c;
  auto pt = [&](int v) { return delta_point(em.coords[v]); };
  c.poly({{0, 0}, {1, 0}, {0.5, kSqrt3 / 2}},
         "fill=\"none\" stroke=\"#888\" stroke-width=\"0.004\"", true);
  for (int e = 0; e < t.num_edges(); ++e)
    c.line(pt(t.org[2 * e]), pt(t.org[2 * e + 1]),
           "stroke=\"#36c\" stroke-width=\"0.002\"");
  for (int v = 0; v < t.num_vertices; ++v)
    c.circle(pt(v), 0.006, "fill=\"#c33\"");
  return c.finish();
}

// Hexagon tiling colored by the percolation configuration with the loops
// drawn through the midpoints of their crossed edges.
inline std::string svg_loop_ensemble(const LatticeDomain& dom,
                                     const Coloring& col,
                                     const LoopEnsemble& ens) {
  detail_svg::Canvas c;
  for (int v = 0; v < dom.num_vertices(); ++v) {
    const char* fill = col.color[v] == Red ? "#e8a0a0" : "#a0b8e8";
    c.poly(dom.hexagon_cell(v),
           std::string("fill=\"") + fill + "\" stroke=\"#fff\" stroke-width=\"" +
               detail_svg::num(dom.delta * 0.02) + "\"",
           true);
  }
  for (const auto& l : ens.loops) {
    std::vector<Vec2> pts;
    for (int h : l.crossed) pts.push_back(detail_svg::edge_midpoint(dom, h));
    if (!pts.empty()) pts.push_back(pts.front());
    c.poly(pts,
           "fill=\"none\" stroke=\"#222\" stroke-width=\"" +
               detail_svg::num(dom.delta * 0.1) + "\"",
           false);
  }
  return c.finish();
}

// Same tiling with measure atoms highlighted (pivotal points, clock rates).
inline std::string svg_pivotal_overlay(const LatticeDomain& dom,
                                       const Coloring& col,
                                       const AtomicMeasure& m) {
  detail_svg::Canvas c;
  for (int v = 0; v < dom.num_vertices(); ++v) {
    const char* fill = col.color[v] == Red ? "#e8a0a0" : "#a0b8e8";
    c.poly(dom.hexagon_cell(v),
           std::string("fill=\"") + fill + "\" stroke=\"#fff\" stroke-width=\"" +
               detail_svg::num(dom.delta * 0.02) + "\"",
           true);
  }
  for (const auto& a : m.atoms)
    c.circle(a.pos, dom.delta * 0.35,
             "fill=\"none\" stroke=\"#111\" stroke-width=\"" +
                 detail_svg::num(dom.delta * 0.08) + "\"");
  return c.finish();
}

}  // namespace cardylab

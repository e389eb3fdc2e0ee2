#pragma once

// JSON (de)serialization for maps, domains, embeddings, measures and
// trajectories, plus the result envelope every CLI command emits.

#include <chrono>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cardylab/cardy.hpp"
#include "cardylab/dynamics.hpp"
#include "cardylab/gff.hpp"
#include "cardylab/lattice.hpp"
#include "cardylab/pivotal.hpp"
#include "cardylab/planar_map.hpp"

namespace cardylab {

constexpr const char* kVersion = "0.1.0";

using nlohmann::json;

// --------------------------------------------------------------------------
// Maps. Schema: schemas/map.json.
// --------------------------------------------------------------------------

inline json map_to_json(const Triangulation& t) {
  return json{{"twin", t.twin}, {"nxt", t.nxt},         {"org", t.org},
              {"root", t.root}, {"ell", t.ell},         {"n", t.n_inner},
              {"v", t.num_vertices}};
}

inline Triangulation map_from_json(const json& j) {
  Triangulation t;
  t.twin = j.at("twin").get<std::vector<int>>();
  t.nxt = j.at("nxt").get<std::vector<int>>();
  t.org = j.at("org").get<std::vector<int>>();
  t.root = j.at("root").get<int>();
  t.ell = j.at("ell").get<int>();
  t.n_inner = j.at("n").get<int>();
  t.num_vertices = j.at("v").get<int>();
  t.validate();
  return t;
}

inline json marked_map_to_json(const MarkedTriangulation& mt) {
  json j = map_to_json(mt.map);
  j["marks"] = {mt.ia, mt.ib, mt.ic};
  return j;
}

inline MarkedTriangulation marked_map_from_json(const json& j) {
  MarkedTriangulation mt;
  mt.map = map_from_json(j);
  if (j.contains("marks")) {
    auto m = j.at("marks").get<std::vector<int>>();
    if (m.size() != 3) throw InvalidInput("marks must have three entries");
    mt.ia = m[0];
    mt.ib = m[1];
    mt.ic = m[2];
  }
  return mt;
}

// --------------------------------------------------------------------------
// Lattice domains. Schema: schemas/domain.json.
// --------------------------------------------------------------------------

inline json domain_to_json(const LatticeDomain& dom) {
  json inner = json::array(), boundary = json::array();
  for (int v : dom.inner)
    inner.push_back({dom.coord[v].first, dom.coord[v].second});
  for (int v : dom.boundary_cycle)
    boundary.push_back({dom.coord[v].first, dom.coord[v].second});
  return json{{"delta", dom.delta_rat.str()},
              {"inner", std::move(inner)},
              {"boundary", std::move(boundary)}};
}

// --------------------------------------------------------------------------
// Embeddings. Schema: schemas/embed.json.
// --------------------------------------------------------------------------

inline json embedding_to_json(const EmbeddedMap& em) {
  json verts = json::array();
  for (std::size_t v = 0; v < em.coords.size(); ++v) {
    verts.push_back({{"v", (int)v},
                     {"x", em.coords[v].x},
                     {"y", em.coords[v].y},
                     {"z", em.coords[v].z},
                     {"se_x", em.stderr_[v][0]},
                     {"se_y", em.stderr_[v][1]},
                     {"se_z", em.stderr_[v][2]}});
  }
  return json{{"samples", em.samples}, {"seed", em.seed},
              {"vertices", std::move(verts)}};
}

// --------------------------------------------------------------------------
// Measures and estimates.
// --------------------------------------------------------------------------

inline json four_arm_to_json(const FourArmEstimate& e) {
  return json{{"p", e.p},       {"se", e.se},     {"samples", e.samples},
              {"seed", e.seed}, {"delta", e.delta}, {"r", e.r}};
}

inline json measure_to_json(const AtomicMeasure& m) {
  json atoms = json::array();
  for (const auto& a : m.atoms)
    atoms.push_back({{"v", a.vertex}, {"x", a.pos.x}, {"y", a.pos.y},
                     {"mass", a.mass}});
  json j{{"atoms", std::move(atoms)}, {"total", m.total()}};
  if (m.has_alpha4) j["alpha4"] = four_arm_to_json(m.alpha4);
  return j;
}

inline json trajectory_event_to_json(const DynTrajectory::Event& e) {
  return json{{"t", e.t}, {"v", e.v}, {"applied", e.applied}};
}

// --------------------------------------------------------------------------
// Result envelope: {payload, metadata}. The payload is a pure function of
// the configuration (byte-identical across reruns); wall time and similar
// run facts live in the metadata only.
// --------------------------------------------------------------------------

class ResultEnvelope {
 public:
  ResultEnvelope(const std::string& command, json config, std::uint64_t seed)
      : t0_(std::chrono::steady_clock::now()) {
    metadata_["command"] = command;
    metadata_["config"] = std::move(config);
    metadata_["master_seed"] = seed;
    metadata_["version"] = kVersion;
  }

  json& payload() { return payload_; }
  void note(const std::string& key, json value) {
    metadata_[key] = std::move(value);
  }

  json finish() {
    auto dt = std::chrono::steady_clock::now() - t0_;
    metadata_["wall_time_s"] =
        std::chrono::duration<double>(dt).count();
    return json{{"payload", payload_}, {"metadata", metadata_}};
  }

 private:
  json payload_;
  json metadata_;
  std::chrono::steady_clock::time_point t0_;
};

// Write-at-end helpers: nothing touches the filesystem until the whole
// result is in memory, so failed runs leave no partial files behind.
inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot open output file: " + path);
  out << content;
  if (!out.good()) throw InvalidInput("write failed: " + path);
}

inline void write_json_file(const std::string& path, const json& j) {
  write_file(path, j.dump(2) + "\n");
}

inline void write_jsonl_file(const std::string& path,
                             const std::vector<json>& lines) {
  std::string s;
  for (const auto& l : lines) s += l.dump() + "\n";
  write_file(path, s);
}

inline std::vector<json> read_jsonl_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open input file: " + path);
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(json::parse(line));
  }
  return out;
}

}  // namespace cardylab

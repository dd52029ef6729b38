#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spikesim/decomposition.hpp"
#include "spikesim/dynamics.hpp"
#include "spikesim/graph.hpp"
#include "spikesim/plasticity.hpp"
#include "spikesim/types.hpp"

namespace spikesim {

struct PopulationInfo {
  std::string qualified_name;  // "area.population"
  std::uint32_t area = 0;
  VertexId first = 0;
  VertexId count = 0;
  NeuronParams params;
  double u_init = -70.0;
  double drive_dc_pa = 0.0;
  double drive_poisson_rate_hz = 0.0;
  double drive_poisson_weight_pa = 0.0;
  std::uint64_t drive_key = 0;  // RNG stream key root for the external drive
};

struct ProjectionInfo {
  std::string name;  // "source->target"
  Polarity polarity = Polarity::exc;
  bool plastic = false;
  StdpParams stdp;
};

// Fully materialized network: graph plus per-edge payloads, geometry and tags.
// This is the single input shared by the engine, the serial reference
// simulator and the decomposition pipeline.
struct NetworkInstance {
  DirectedGraph graph;
  std::vector<double> weight;               // per edge
  std::vector<std::uint16_t> delay_steps;   // per edge, >= d_min_steps
  std::vector<std::uint16_t> projection_of_edge;
  std::vector<Point3> coords;               // per vertex
  std::vector<std::uint16_t> pop_of_vertex;
  std::vector<std::uint16_t> area_of_vertex;
  std::vector<PopulationInfo> populations;
  std::vector<ProjectionInfo> projections;
  std::vector<AreaSpec> areas;
  double dt = 0.1;
  int d_min_steps = 1;
  int d_max_steps = 15;
  std::uint64_t seed = 1;

  VertexId n_vertices() const { return graph.n_vertices; }
  std::size_t n_edges() const { return graph.edges.size(); }
};

// Canonical ordering of edge payloads within one (pre, thread, delay) run.
// Content-based so that results do not depend on edge insertion order; the
// parent edge index only breaks ties between indistinguishable records.
struct EdgeContentKey {
  VertexId target;
  double weight;
  std::uint8_t polarity;
  std::uint8_t plastic;
  std::uint16_t projection;
  EdgeIndex edge_id;

  friend bool operator<(const EdgeContentKey& a, const EdgeContentKey& b) {
    if (a.target != b.target) return a.target < b.target;
    if (a.weight != b.weight) return a.weight < b.weight;
    if (a.polarity != b.polarity) return a.polarity < b.polarity;
    if (a.plastic != b.plastic) return a.plastic < b.plastic;
    if (a.projection != b.projection) return a.projection < b.projection;
    return a.edge_id < b.edge_id;
  }
};

inline EdgeContentKey edge_content_key(const NetworkInstance& net,
                                       EdgeIndex e) {
  const auto& proj = net.projections[net.projection_of_edge[e]];
  return EdgeContentKey{net.graph.edges[e].post,
                        net.weight[e],
                        static_cast<std::uint8_t>(proj.polarity),
                        static_cast<std::uint8_t>(proj.plastic ? 1 : 0),
                        net.projection_of_edge[e],
                        e};
}

}  // namespace spikesim

#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "spikesim/types.hpp"

namespace spikesim {

// Global synaptic graph. Edge order is insertion order and the edge index is
// its identity; duplicate (pre, post) pairs and self-loops are legal.
struct DirectedGraph {
  VertexId n_vertices = 0;
  std::vector<Edge> edges;
};

enum class Orientation { indegree, outdegree };

// Triplet view (pre_set, post_set, edge_set) over a parent graph. All three
// components are materialized sorted-ascending id vectors so set operations
// and downstream accumulation iterate deterministically. edge_set holds
// indices into the parent's edge list, which keeps multi-edges distinct.
struct SubGraph {
  Orientation orientation = Orientation::indegree;
  std::vector<VertexId> pre_set;
  std::vector<VertexId> post_set;
  std::vector<EdgeIndex> edge_set;

  friend bool operator==(const SubGraph&, const SubGraph&) = default;
};

DirectedGraph build_graph(VertexId n_vertices, std::vector<Edge> edges);

// Edges terminating in the selection; post_set keeps the full selection even
// for vertices with no incoming edge.
SubGraph indegree_subgraph(const DirectedGraph& g,
                           std::span<const VertexId> selection);

// Dual: edges originating in the selection; pre_set keeps the full selection.
SubGraph outdegree_subgraph(const DirectedGraph& g,
                            std::span<const VertexId> selection);

// Componentwise intersection / union. Both operands must share orientation
// (and, by contract, the same parent graph).
SubGraph subgraph_meet(const SubGraph& a, const SubGraph& b);
SubGraph subgraph_join(const SubGraph& a, const SubGraph& b);

// Restriction of an indegree sub-graph to edges whose source spiked.
SubGraph spiking_subgraph(const DirectedGraph& g, const SubGraph& s,
                          const SpikeSet& spikes);

struct LocalRemoteSplit {
  SubGraph local;   // edges whose source is owned
  SubGraph remote;  // edges whose source lives on another rank
};

// Requires s.post_set == owned. Both halves keep post_set = owned; their join
// reconstructs s and their edge sets are disjoint.
LocalRemoteSplit split_local_remote(const DirectedGraph& g, const SubGraph& s,
                                    std::span<const VertexId> owned);

// Edge-list text format: one "pre post" pair per line, '#' comments, and a
// leading "vertices N" directive so isolated trailing vertices survive a
// round-trip.
void save_edge_list(std::ostream& out, const DirectedGraph& g);
DirectedGraph load_edge_list(std::istream& in);

}  // namespace spikesim

#pragma once

// Brute-force set-enumeration oracle for the sub-graph algebra. Everything is
// computed with std::set walks over the raw edge list, independent of the
// production code paths it checks.

#include <set>
#include <vector>

#include "spikesim/graph.hpp"
#include "spikesim/rng.hpp"

namespace oracle {

struct SubGraphSets {
  std::set<spikesim::VertexId> pre;
  std::set<spikesim::VertexId> post;
  std::set<spikesim::EdgeIndex> edges;

  friend bool operator==(const SubGraphSets&, const SubGraphSets&) = default;
};

inline SubGraphSets indegree(const spikesim::DirectedGraph& g,
                             const std::set<spikesim::VertexId>& sel) {
  SubGraphSets s;
  s.post = sel;
  for (spikesim::EdgeIndex i = 0; i < g.edges.size(); ++i) {
    if (sel.count(g.edges[i].post)) {
      s.edges.insert(i);
      s.pre.insert(g.edges[i].pre);
    }
  }
  return s;
}

inline SubGraphSets outdegree(const spikesim::DirectedGraph& g,
                              const std::set<spikesim::VertexId>& sel) {
  SubGraphSets s;
  s.pre = sel;
  for (spikesim::EdgeIndex i = 0; i < g.edges.size(); ++i) {
    if (sel.count(g.edges[i].pre)) {
      s.edges.insert(i);
      s.post.insert(g.edges[i].post);
    }
  }
  return s;
}

template <typename T>
std::set<T> set_meet(const std::set<T>& a, const std::set<T>& b) {
  std::set<T> out;
  for (const T& x : a) {
    if (b.count(x)) out.insert(x);
  }
  return out;
}

template <typename T>
std::set<T> set_join(const std::set<T>& a, const std::set<T>& b) {
  std::set<T> out = a;
  out.insert(b.begin(), b.end());
  return out;
}

inline SubGraphSets meet(const SubGraphSets& a, const SubGraphSets& b) {
  return {set_meet(a.pre, b.pre), set_meet(a.post, b.post),
          set_meet(a.edges, b.edges)};
}

inline SubGraphSets join(const SubGraphSets& a, const SubGraphSets& b) {
  return {set_join(a.pre, b.pre), set_join(a.post, b.post),
          set_join(a.edges, b.edges)};
}

inline SubGraphSets spiking(const spikesim::DirectedGraph& g,
                            const SubGraphSets& s,
                            const std::set<spikesim::VertexId>& spikes) {
  SubGraphSets out;
  for (spikesim::EdgeIndex i : s.edges) {
    if (spikes.count(g.edges[i].pre)) {
      out.edges.insert(i);
      out.post.insert(g.edges[i].post);
    }
  }
  out.pre = set_meet(s.pre, spikes);
  return out;
}

inline SubGraphSets to_sets(const spikesim::SubGraph& s) {
  return {{s.pre_set.begin(), s.pre_set.end()},
          {s.post_set.begin(), s.post_set.end()},
          {s.edge_set.begin(), s.edge_set.end()}};
}

// Seeded random graph with duplicates and self-loops allowed.
inline spikesim::DirectedGraph random_graph(std::uint64_t seed,
                                            spikesim::VertexId max_vertices,
                                            std::size_t max_edges) {
  spikesim::RngSequence rng(spikesim::RngStream::keyed(seed, 0xDEAD));
  const auto n = static_cast<spikesim::VertexId>(1 + rng.uniform_int(max_vertices));
  const std::size_t m = rng.uniform_int(max_edges + 1);
  std::vector<spikesim::Edge> edges;
  edges.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    edges.push_back({static_cast<spikesim::VertexId>(rng.uniform_int(n)),
                     static_cast<spikesim::VertexId>(rng.uniform_int(n))});
  }
  return spikesim::build_graph(n, std::move(edges));
}

inline std::set<spikesim::VertexId> random_vertex_set(std::uint64_t seed,
                                                      spikesim::VertexId n,
                                                      double keep) {
  spikesim::RngStream s = spikesim::RngStream::keyed(seed, 0xBEEF);
  std::set<spikesim::VertexId> out;
  for (spikesim::VertexId v = 0; v < n; ++v) {
    if (s.uniform(v) < keep) out.insert(v);
  }
  return out;
}

// Random partition of [0, n) into k cells (some possibly empty cells are
// dropped).
inline std::vector<std::vector<spikesim::VertexId>> random_partition(
    std::uint64_t seed, spikesim::VertexId n, int k) {
  spikesim::RngStream s = spikesim::RngStream::keyed(seed, 0xF00D);
  std::vector<std::vector<spikesim::VertexId>> cells(k);
  for (spikesim::VertexId v = 0; v < n; ++v) {
    cells[s.uniform_int(v, k)].push_back(v);
  }
  std::erase_if(cells, [](const auto& c) { return c.empty(); });
  return cells;
}

}  // namespace oracle

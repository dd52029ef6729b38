#include "spikesim/graph.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace spikesim {

namespace {

std::vector<VertexId> sorted_unique(std::vector<VertexId> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

void check_selection(const DirectedGraph& g, std::span<const VertexId> sel) {
  for (VertexId v : sel) {
    if (v >= g.n_vertices) {
      throw std::invalid_argument("selection id " + std::to_string(v) +
                                  " >= " + std::to_string(g.n_vertices));
    }
  }
}

template <typename T>
std::vector<T> set_intersect(const std::vector<T>& a, const std::vector<T>& b) {
  std::vector<T> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::back_inserter(out));
  return out;
}

template <typename T>
std::vector<T> set_union(const std::vector<T>& a, const std::vector<T>& b) {
  std::vector<T> out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(),
                 std::back_inserter(out));
  return out;
}

}  // namespace

DirectedGraph build_graph(VertexId n_vertices, std::vector<Edge> edges) {
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const Edge& e = edges[i];
    if (e.pre >= n_vertices) {
      throw std::invalid_argument("edge " + std::to_string(i) + ": pre id " +
                                  std::to_string(e.pre) +
                                  " >= " + std::to_string(n_vertices));
    }
    if (e.post >= n_vertices) {
      throw std::invalid_argument("edge " + std::to_string(i) + ": post id " +
                                  std::to_string(e.post) +
                                  " >= " + std::to_string(n_vertices));
    }
  }
  return DirectedGraph{n_vertices, std::move(edges)};
}

SubGraph indegree_subgraph(const DirectedGraph& g,
                           std::span<const VertexId> selection) {
  check_selection(g, selection);
  std::vector<VertexId> post(selection.begin(), selection.end());
  post = sorted_unique(std::move(post));

  SubGraph s;
  s.orientation = Orientation::indegree;
  for (EdgeIndex i = 0; i < g.edges.size(); ++i) {
    if (std::binary_search(post.begin(), post.end(), g.edges[i].post)) {
      s.edge_set.push_back(i);
      s.pre_set.push_back(g.edges[i].pre);
    }
  }
  s.pre_set = sorted_unique(std::move(s.pre_set));
  s.post_set = std::move(post);
  return s;
}

SubGraph outdegree_subgraph(const DirectedGraph& g,
                            std::span<const VertexId> selection) {
  check_selection(g, selection);
  std::vector<VertexId> pre(selection.begin(), selection.end());
  pre = sorted_unique(std::move(pre));

  SubGraph s;
  s.orientation = Orientation::outdegree;
  for (EdgeIndex i = 0; i < g.edges.size(); ++i) {
    if (std::binary_search(pre.begin(), pre.end(), g.edges[i].pre)) {
      s.edge_set.push_back(i);
      s.post_set.push_back(g.edges[i].post);
    }
  }
  s.post_set = sorted_unique(std::move(s.post_set));
  s.pre_set = std::move(pre);
  return s;
}

namespace {

void check_same_orientation(const SubGraph& a, const SubGraph& b) {
  if (a.orientation != b.orientation) {
    throw std::invalid_argument(
        "sub-graph operands differ in orientation (indegree vs outdegree)");
  }
}

}  // namespace

SubGraph subgraph_meet(const SubGraph& a, const SubGraph& b) {
  check_same_orientation(a, b);
  SubGraph out;
  out.orientation = a.orientation;
  out.pre_set = set_intersect(a.pre_set, b.pre_set);
  out.post_set = set_intersect(a.post_set, b.post_set);
  out.edge_set = set_intersect(a.edge_set, b.edge_set);
  return out;
}

SubGraph subgraph_join(const SubGraph& a, const SubGraph& b) {
  check_same_orientation(a, b);
  SubGraph out;
  out.orientation = a.orientation;
  out.pre_set = set_union(a.pre_set, b.pre_set);
  out.post_set = set_union(a.post_set, b.post_set);
  out.edge_set = set_union(a.edge_set, b.edge_set);
  return out;
}

SubGraph spiking_subgraph(const DirectedGraph& g, const SubGraph& s,
                          const SpikeSet& spikes) {
  SubGraph out;
  out.orientation = s.orientation;
  std::vector<VertexId> sorted_spikes = sorted_unique(spikes);
  for (EdgeIndex idx : s.edge_set) {
    const Edge& e = g.edges[idx];
    if (std::binary_search(sorted_spikes.begin(), sorted_spikes.end(),
                           e.pre)) {
      out.edge_set.push_back(idx);
      out.post_set.push_back(e.post);
    }
  }
  out.post_set = sorted_unique(std::move(out.post_set));
  out.pre_set = set_intersect(s.pre_set, sorted_spikes);
  return out;
}

LocalRemoteSplit split_local_remote(const DirectedGraph& g, const SubGraph& s,
                                    std::span<const VertexId> owned) {
  std::vector<VertexId> own(owned.begin(), owned.end());
  own = sorted_unique(std::move(own));
  if (own != s.post_set) {
    throw std::invalid_argument(
        "split_local_remote: post_set of the sub-graph must equal the owned "
        "set");
  }

  LocalRemoteSplit out;
  out.local.orientation = s.orientation;
  out.remote.orientation = s.orientation;
  out.local.post_set = own;
  out.remote.post_set = own;
  for (EdgeIndex idx : s.edge_set) {
    const Edge& e = g.edges[idx];
    if (std::binary_search(own.begin(), own.end(), e.pre)) {
      out.local.edge_set.push_back(idx);
      out.local.pre_set.push_back(e.pre);
    } else {
      out.remote.edge_set.push_back(idx);
      out.remote.pre_set.push_back(e.pre);
    }
  }
  out.local.pre_set = sorted_unique(std::move(out.local.pre_set));
  out.remote.pre_set = sorted_unique(std::move(out.remote.pre_set));
  return out;
}

void save_edge_list(std::ostream& out, const DirectedGraph& g) {
  out << "vertices " << g.n_vertices << "\n";
  for (const Edge& e : g.edges) {
    out << e.pre << " " << e.post << "\n";
  }
}

DirectedGraph load_edge_list(std::istream& in) {
  std::vector<Edge> edges;
  VertexId n_vertices = 0;
  bool have_n = false;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;  // blank
    if (tok == "vertices") {
      if (!(ls >> n_vertices)) {
        throw std::invalid_argument("edge list line " +
                                    std::to_string(line_no) +
                                    ": malformed vertices directive");
      }
      have_n = true;
      continue;
    }
    Edge e{};
    std::istringstream pair(line);
    if (!(pair >> e.pre >> e.post)) {
      throw std::invalid_argument("edge list line " + std::to_string(line_no) +
                                  ": expected 'pre post'");
    }
    edges.push_back(e);
  }
  if (!have_n) {
    for (const Edge& e : edges) {
      n_vertices = std::max({n_vertices, e.pre + 1, e.post + 1});
    }
  }
  return build_graph(n_vertices, std::move(edges));
}

}  // namespace spikesim

#include "spikesim/reference.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "spikesim/rng.hpp"

namespace spikesim {

SpikeLog run_reference(const NetworkInstance& net, Step n_steps) {
  const VertexId n = net.n_vertices();
  const double dt = net.dt;

  // Per-pre adjacency in canonical (delay, content) order.
  std::vector<std::vector<EdgeIndex>> out_edges(n);
  for (EdgeIndex e = 0; e < net.graph.edges.size(); ++e) {
    out_edges[net.graph.edges[e].pre].push_back(e);
  }
  for (auto& v : out_edges) {
    std::sort(v.begin(), v.end(), [&](EdgeIndex a, EdgeIndex b) {
      if (net.delay_steps[a] != net.delay_steps[b]) {
        return net.delay_steps[a] < net.delay_steps[b];
      }
      return edge_content_key(net, a) < edge_content_key(net, b);
    });
  }

  // Plastic state per edge plus per-neuron post traces.
  std::vector<PlasticSynapseState> plastic_w(net.n_edges());
  std::vector<SpikeTrace> pre_traces(net.n_edges());
  std::vector<SpikeTrace> post_traces(n);
  std::vector<std::vector<EdgeIndex>> plastic_in(n);
  std::vector<double> post_tau(n, 15.0);
  for (EdgeIndex e = 0; e < net.graph.edges.size(); ++e) {
    const auto& proj = net.projections[net.projection_of_edge[e]];
    if (proj.plastic) {
      plastic_w[e].w = net.weight[e];
      plastic_in[net.graph.edges[e].post].push_back(e);
      post_tau[net.graph.edges[e].post] = proj.stdp.tau_minus;
    }
  }

  std::vector<NeuronState> states(n);
  std::vector<Propagators> props;
  std::vector<double> lambda, exp_neg_lambda;
  for (const PopulationInfo& p : net.populations) {
    props.push_back(make_propagators(p.params, dt));
    const double l = p.drive_poisson_rate_hz * dt * 1e-3;
    lambda.push_back(l);
    exp_neg_lambda.push_back(std::exp(-l));
  }
  std::vector<std::uint64_t> drive_key(n);
  for (VertexId v = 0; v < n; ++v) {
    const PopulationInfo& p = net.populations[net.pop_of_vertex[v]];
    states[v].u = p.u_init;
    states[v].i_ext = p.drive_dc_pa;
    drive_key[v] = hash_combine(p.drive_key, v - p.first);
  }

  // Spikes of the last d_max steps, indexed by emission step.
  std::vector<SpikeSet> history(static_cast<std::size_t>(net.d_max_steps) + 1);
  auto spikes_of = [&](Step e) -> SpikeSet& {
    return history[static_cast<std::size_t>(e % (net.d_max_steps + 1))];
  };

  SpikeLog log;
  for (Step t = 0; t < n_steps; ++t) {
    const double t_ms = static_cast<double>(t) * dt;

    // Delivery in canonical order: spiking pres ascending, emissions
    // ascending, then each pre's edges of the matching delay in content
    // order.
    std::vector<std::pair<VertexId, Step>> events;
    for (Step e = std::max<Step>(0, t - net.d_max_steps);
         e <= t - net.d_min_steps; ++e) {
      for (VertexId p : spikes_of(e)) events.push_back({p, e});
    }
    std::sort(events.begin(), events.end());
    for (const auto& [p, e] : events) {
      const int d = static_cast<int>(t - e);
      for (EdgeIndex ei : out_edges[p]) {
        if (net.delay_steps[ei] != d) continue;
        const VertexId post = net.graph.edges[ei].post;
        const auto& proj = net.projections[net.projection_of_edge[ei]];
        if (proj.plastic) {
          on_pre_spike(plastic_w[ei], post_traces[post], proj.stdp, t_ms);
          trace_bump(pre_traces[ei], t_ms, proj.stdp.tau_plus);
          deposit(states[post], plastic_w[ei].w, proj.polarity);
        } else {
          deposit(states[post], net.weight[ei], proj.polarity);
        }
      }
    }

    // Drive and update, ascending by global id.
    SpikeSet& spiked = spikes_of(t);
    spiked.clear();
    for (VertexId v = 0; v < n; ++v) {
      const std::uint16_t pop = net.pop_of_vertex[v];
      if (lambda[pop] > 0.0) {
        const double u =
            RngStream(drive_key[v]).uniform(static_cast<std::uint64_t>(t));
        const int c = poisson_from_uniform(u, lambda[pop], exp_neg_lambda[pop]);
        if (c > 0) {
          deposit(states[v], c * net.populations[pop].drive_poisson_weight_pa,
                  Polarity::exc);
        }
      }
      if (step_neuron(states[v], net.populations[pop].params, props[pop])) {
        spiked.push_back(v);
        for (EdgeIndex ei : plastic_in[v]) {
          const auto& proj = net.projections[net.projection_of_edge[ei]];
          on_post_spike(plastic_w[ei], pre_traces[ei], proj.stdp, t_ms);
        }
        if (!plastic_in[v].empty()) trace_bump(post_traces[v], t_ms, post_tau[v]);
        log.push_back({t, v});
      }
    }
  }
  return log;
}

}  // namespace spikesim

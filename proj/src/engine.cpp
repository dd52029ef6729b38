#include "spikesim/engine.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#include "spikesim/rng.hpp"

namespace spikesim {

namespace {

double time_ms_of(Step step, double dt) { return static_cast<double>(step) * dt; }

std::uint32_t index_in(const std::vector<VertexId>& sorted, VertexId v) {
  const auto it = std::lower_bound(sorted.begin(), sorted.end(), v);
  return static_cast<std::uint32_t>(it - sorted.begin());
}

bool contains(const std::vector<VertexId>& sorted, VertexId v) {
  return std::binary_search(sorted.begin(), sorted.end(), v);
}

}  // namespace

// ---------------------------------------------------------------------------
// EdgeStore

namespace {

struct BuildRecord {
  SynapseRecord rec;
  std::uint8_t thread;
  EdgeContentKey key;
};

}  // namespace

void EdgeStore::build(std::vector<SynapseRecord> records,
                      std::vector<std::uint8_t> thread_tags, int n_threads,
                      std::uint32_t n_pre, int d_min_steps, int d_max_steps) {
  if (records.size() != thread_tags.size()) {
    throw std::invalid_argument("EdgeStore: records/tags size mismatch");
  }
  records_ = std::move(records);
  thread_tag_ = std::move(thread_tags);
  n_threads_ = n_threads;
  n_pre_ = n_pre;
  d_min_ = d_min_steps;
  n_delays_ = d_max_steps - d_min_steps + 1;
  rebuild();
}

void EdgeStore::rebuild() {
  // Stable sort by (thread, pre, delay); within a run the caller-provided
  // content order is preserved.
  std::vector<std::uint32_t> order(records_.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) {
                     if (thread_tag_[a] != thread_tag_[b])
                       return thread_tag_[a] < thread_tag_[b];
                     if (records_[a].pre_local != records_[b].pre_local)
                       return records_[a].pre_local < records_[b].pre_local;
                     return records_[a].delay_steps < records_[b].delay_steps;
                   });
  std::vector<SynapseRecord> recs(records_.size());
  std::vector<std::uint8_t> tags(records_.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    recs[i] = records_[order[i]];
    tags[i] = thread_tag_[order[i]];
  }
  records_ = std::move(recs);
  thread_tag_ = std::move(tags);

  const std::size_t groups =
      static_cast<std::size_t>(n_threads_) * n_pre_;
  delay_begin_.assign(groups * (n_delays_ + 1), 0);
  std::size_t r = 0;
  for (std::size_t g = 0; g < groups; ++g) {
    const int thread = static_cast<int>(g / n_pre_);
    const std::uint32_t pre = static_cast<std::uint32_t>(g % n_pre_);
    const std::size_t base = g * (n_delays_ + 1);
    for (int j = 0; j < n_delays_; ++j) {
      delay_begin_[base + j] = static_cast<std::uint32_t>(r);
      while (r < records_.size() && thread_tag_[r] == thread &&
             records_[r].pre_local == pre &&
             records_[r].delay_steps == d_min_ + j) {
        ++r;
      }
    }
    delay_begin_[base + n_delays_] = static_cast<std::uint32_t>(r);
  }
  if (r != records_.size()) {
    throw std::logic_error("EdgeStore: records outside group/delay bounds");
  }
}

void EdgeStore::reassign_record_thread(EdgeIndex edge_id, int new_thread) {
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (records_[i].edge_id == edge_id) {
      thread_tag_[i] = static_cast<std::uint8_t>(new_thread);
      rebuild();
      return;
    }
  }
  throw std::invalid_argument("reassign_record_thread: unknown edge id");
}

// ---------------------------------------------------------------------------
// SpikeBuffer

void SpikeBuffer::enqueue(Step emission,
                          std::span<const std::uint32_t> pre_locals) {
  Slot& s = slot_for(emission);
  if (s.emission != emission) {
    s.ids.clear();
    s.emission = emission;
  }
  s.ids.insert(s.ids.end(), pre_locals.begin(), pre_locals.end());
}

bool SpikeBuffer::seal(Step emission) {
  Slot& s = slot_for(emission);
  if (s.emission != emission) {
    s.ids.clear();
    s.emission = emission;  // empty round
  }
  std::sort(s.ids.begin(), s.ids.end());
  return std::adjacent_find(s.ids.begin(), s.ids.end()) == s.ids.end();
}

std::span<const std::uint32_t> SpikeBuffer::spikes_for(Step emission) const {
  const Slot& s = slot_for(emission);
  if (s.emission != emission) return {};
  return s.ids;
}

// ---------------------------------------------------------------------------
// RankState

RankState RankState::build(const NetworkInstance& net,
                           const PartitionPlan& plan, int rank,
                           const EngineOptions& opts) {
  if (rank < 0 || rank >= plan.n_ranks) {
    throw std::invalid_argument("rank out of range");
  }
  if (plan.owner.size() != net.n_vertices()) {
    throw std::invalid_argument("plan does not cover the network");
  }

  RankState rs;
  rs.rank_ = rank;
  rs.n_threads_ = plan.n_threads;
  rs.dt_ = net.dt;
  rs.d_min_ = net.d_min_steps;
  rs.d_max_ = net.d_max_steps;
  rs.owned_ = plan.owned[rank];
  rs.thread_ranges_ = plan.thread_ranges[rank];

  rs.thread_of_owned_.resize(rs.owned_.size());
  for (int k = 0; k < rs.n_threads_; ++k) {
    const auto [b, e] = rs.thread_ranges_[k];
    for (std::uint32_t i = b; i < e; ++i) rs.thread_of_owned_[i] = k;
  }

  // Pre-table: owned plus every remote source of an in-edge, ascending.
  std::vector<VertexId> pre = rs.owned_;
  for (EdgeIndex ei = 0; ei < net.graph.edges.size(); ++ei) {
    const Edge& e = net.graph.edges[ei];
    if (plan.owner[e.post].first == rank) pre.push_back(e.pre);
  }
  std::sort(pre.begin(), pre.end());
  pre.erase(std::unique(pre.begin(), pre.end()), pre.end());
  rs.pre_table_ = std::move(pre);

  // Records, pre-sorted in canonical order.
  std::vector<BuildRecord> build;
  for (EdgeIndex ei = 0; ei < net.graph.edges.size(); ++ei) {
    const Edge& e = net.graph.edges[ei];
    if (plan.owner[e.post].first != rank) continue;
    const int delay = net.delay_steps[ei];
    if (delay < net.d_min_steps || delay > net.d_max_steps) {
      throw std::invalid_argument("edge " + std::to_string(ei) +
                                  ": delay outside [d_min, d_max]");
    }
    BuildRecord br;
    br.rec.weight = net.weight[ei];
    br.rec.edge_id = ei;
    br.rec.pre_local = index_in(rs.pre_table_, e.pre);
    br.rec.target_local = index_in(rs.owned_, e.post);
    br.rec.delay_steps = static_cast<std::uint16_t>(delay);
    const auto& proj = net.projections[net.projection_of_edge[ei]];
    br.rec.polarity = proj.polarity;
    br.rec.plastic = -1;
    br.thread = static_cast<std::uint8_t>(plan.owner[e.post].second);
    br.key = edge_content_key(net, ei);
    build.push_back(br);
  }
  std::sort(build.begin(), build.end(),
            [](const BuildRecord& a, const BuildRecord& b) {
              if (a.thread != b.thread) return a.thread < b.thread;
              if (a.rec.pre_local != b.rec.pre_local)
                return a.rec.pre_local < b.rec.pre_local;
              if (a.rec.delay_steps != b.rec.delay_steps)
                return a.rec.delay_steps < b.rec.delay_steps;
              return a.key < b.key;
            });

  // Plastic state is allocated in canonical record order.
  std::vector<SynapseRecord> records;
  std::vector<std::uint8_t> tags;
  records.reserve(build.size());
  tags.reserve(build.size());
  rs.plastic_in_.assign(rs.owned_.size(), {});
  rs.post_tau_minus_.assign(rs.owned_.size(), 0.0);
  for (BuildRecord& br : build) {
    const auto& proj = net.projections[br.key.projection];
    if (proj.plastic) {
      br.rec.plastic = static_cast<std::int32_t>(rs.plastic_.size());
      PlasticEdgeState pes;
      pes.syn.w = br.rec.weight;
      pes.projection = br.key.projection;
      rs.plastic_.push_back(pes);
      rs.plastic_in_[br.rec.target_local].push_back(
          static_cast<std::uint32_t>(br.rec.plastic));
      double& tau = rs.post_tau_minus_[br.rec.target_local];
      if (tau == 0.0) {
        tau = proj.stdp.tau_minus;
      } else if (tau != proj.stdp.tau_minus) {
        throw std::invalid_argument(
            "plastic projections targeting one neuron must share tau_minus");
      }
    }
    records.push_back(br.rec);
    tags.push_back(br.thread);
  }

  rs.store_.build(std::move(records), std::move(tags), rs.n_threads_,
                  static_cast<std::uint32_t>(rs.pre_table_.size()),
                  rs.d_min_, rs.d_max_);

  // Per-population parameters and drive.
  rs.pop_params_.reserve(net.populations.size());
  for (const PopulationInfo& p : net.populations) {
    rs.pop_params_.push_back(p.params);
    rs.pop_props_.push_back(make_propagators(p.params, net.dt));
    const double lambda = p.drive_poisson_rate_hz * net.dt * 1e-3;
    rs.pop_poisson_lambda_.push_back(lambda);
    rs.pop_poisson_exp_neg_lambda_.push_back(std::exp(-lambda));
    rs.pop_poisson_weight_.push_back(p.drive_poisson_weight_pa);
  }
  for (const ProjectionInfo& p : net.projections) rs.stdp_.push_back(p.stdp);

  rs.states_.resize(rs.owned_.size());
  rs.post_traces_.resize(rs.owned_.size());
  rs.pop_of_owned_.resize(rs.owned_.size());
  rs.drive_key_.resize(rs.owned_.size());
  rs.owned_pre_local_.resize(rs.owned_.size());
  for (std::size_t i = 0; i < rs.owned_.size(); ++i) {
    const VertexId v = rs.owned_[i];
    const std::uint16_t pop = net.pop_of_vertex[v];
    const PopulationInfo& pi = net.populations[pop];
    rs.pop_of_owned_[i] = pop;
    rs.states_[i].u = pi.u_init;
    rs.states_[i].i_ext = pi.drive_dc_pa;
    rs.drive_key_[i] = hash_combine(pi.drive_key, v - pi.first);
    rs.owned_pre_local_[i] = index_in(rs.pre_table_, v);
  }

  rs.buffer_ = std::make_unique<SpikeBuffer>(rs.d_max_);
  rs.thread_spikes_.resize(rs.n_threads_);

  if (opts.audit) {
    rs.audit_ = std::make_unique<Audit>();
    rs.audit_->record_touch =
        std::vector<std::atomic<std::uint32_t>>(rs.store_.size());
    rs.audit_->post_touch =
        std::vector<std::atomic<std::uint32_t>>(rs.owned_.size());
    for (auto& a : rs.audit_->record_touch) a.store(0, std::memory_order_relaxed);
    for (auto& a : rs.audit_->post_touch) a.store(0, std::memory_order_relaxed);
  }
  return rs;
}

void RankState::enqueue_spikes(std::span<const VertexId> global_ids,
                               Step emission) {
  std::vector<std::uint32_t> locals;
  locals.reserve(global_ids.size());
  for (VertexId v : global_ids) {
    // Ids with no edges into this rank have an empty spiking sub-graph here;
    // they are dropped.
    if (contains(pre_table_, v)) locals.push_back(index_in(pre_table_, v));
  }
  buffer_->enqueue(emission, locals);
}

void RankState::seal_round(Step emission) {
  if (emission != sealed_watermark_ + 1) {
    throw std::logic_error("rounds must be sealed in order");
  }
  const bool no_dup = buffer_->seal(emission);
  if (!no_dup && audit_) {
    throw AuditError("duplicate spike for one pre id within step " +
                         std::to_string(emission),
                     -1, -1);
  }
  sealed_watermark_ = emission;
}

void RankState::prepare_step(Step t) {
  if (t - d_min_ >= 0 && sealed_watermark_ < t - d_min_) {
    throw std::logic_error(
        "delivery at step " + std::to_string(t) +
        " would read spikes younger than the sealed watermark (d_min window "
        "violated)");
  }
  deliveries_.clear();
  const Step lo = std::max<Step>(0, t - d_max_);
  const Step hi = t - d_min_;
  for (Step e = lo; e <= hi; ++e) {
    for (std::uint32_t p : buffer_->spikes_for(e)) deliveries_.push_back({p, e});
  }
  std::sort(deliveries_.begin(), deliveries_.end());
}

template <bool Audit>
void RankState::deliver_impl(int thread, Step t) {
  const double t_ms = time_ms_of(t, dt_);
  for (const auto& [p, e] : deliveries_) {
    const auto run = store_.run(thread, p, static_cast<int>(t - e));
    for (const SynapseRecord& r : run) {
      if constexpr (Audit) {
        const std::size_t pos = static_cast<std::size_t>(&r - store_.all().data());
        audit_touch_record(pos, thread);
        audit_touch_post(r.target_local, thread);
      }
      if (r.plastic >= 0) {
        PlasticEdgeState& pes = plastic_[r.plastic];
        const StdpParams& sp = stdp_[pes.projection];
        on_pre_spike(pes.syn, post_traces_[r.target_local], sp, t_ms);
        trace_bump(pes.pre_trace, t_ms, sp.tau_plus);
        deposit(states_[r.target_local], pes.syn.w, r.polarity);
      } else {
        deposit(states_[r.target_local], r.weight, r.polarity);
      }
    }
  }
}

void RankState::deliver_thread(int thread, Step t) {
  if (audit_) {
    deliver_impl<true>(thread, t);
  } else {
    deliver_impl<false>(thread, t);
  }
}

void RankState::update_thread(int thread, Step t) {
  const auto [b, e] = thread_ranges_[thread];
  auto& spikes = thread_spikes_[thread];
  spikes.clear();
  const double t_ms = time_ms_of(t, dt_);
  for (std::uint32_t i = b; i < e; ++i) {
    NeuronState& st = states_[i];
    const std::uint16_t pop = pop_of_owned_[i];
    if (audit_) audit_touch_post(i, thread);
    const double lambda = pop_poisson_lambda_[pop];
    if (lambda > 0.0) {
      const double u = RngStream(drive_key_[i]).uniform(static_cast<std::uint64_t>(t));
      const int c =
          poisson_from_uniform(u, lambda, pop_poisson_exp_neg_lambda_[pop]);
      if (c > 0) deposit(st, c * pop_poisson_weight_[pop], Polarity::exc);
    }
    if (step_neuron(st, pop_params_[pop], pop_props_[pop])) {
      spikes.push_back(owned_[i]);
      for (std::uint32_t idx : plastic_in_[i]) {
        PlasticEdgeState& pes = plastic_[idx];
        on_post_spike(pes.syn, pes.pre_trace, stdp_[pes.projection], t_ms);
      }
      if (!plastic_in_[i].empty()) {
        trace_bump(post_traces_[i], t_ms, post_tau_minus_[i]);
      }
    }
  }
}

SpikeSet RankState::finish_step(Step t) {
  SpikeSet out;
  std::vector<std::uint32_t> locals;
  for (int k = 0; k < n_threads_; ++k) {
    for (VertexId v : thread_spikes_[k]) {
      out.push_back(v);
      log_.push_back({t, v});
      locals.push_back(owned_pre_local_[index_in(owned_, v)]);
    }
  }
  buffer_->enqueue(t, locals);
  step_ = t + 1;
  return out;
}

SpikeSet RankState::step(std::span<const VertexId> incoming_remote) {
  const Step t = step_;
  if (t > 0) {
    enqueue_spikes(incoming_remote, t - 1);
    seal_round(t - 1);
  } else if (!incoming_remote.empty()) {
    throw std::invalid_argument("no previous step to receive spikes for");
  }
  prepare_step(t);
  for (int k = 0; k < n_threads_; ++k) {
    deliver_thread(k, t);
    update_thread(k, t);
  }
  return finish_step(t);
}

void RankState::audit_touch_record(std::size_t record_pos, int thread) {
  auto& mask = audit_->record_touch[record_pos];
  mask.fetch_or(1u << thread, std::memory_order_relaxed);
  const SynapseRecord& r = store_.all()[record_pos];
  const int owner = thread_of_owned_[r.target_local];
  if (thread != owner) {
    throw AuditError(
        "race audit: edge " + std::to_string(r.edge_id) + " (post neuron " +
            std::to_string(owned_[r.target_local]) + ", owner thread " +
            std::to_string(owner) + ") accessed by thread " +
            std::to_string(thread),
        r.edge_id, owned_[r.target_local]);
  }
}

void RankState::audit_touch_post(std::uint32_t target_local, int thread) {
  auto& mask = audit_->post_touch[target_local];
  mask.fetch_or(1u << thread, std::memory_order_relaxed);
  const int owner = thread_of_owned_[target_local];
  if (thread != owner) {
    throw AuditError("race audit: post neuron " +
                         std::to_string(owned_[target_local]) +
                         " (owner thread " + std::to_string(owner) +
                         ") accessed by thread " + std::to_string(thread),
                     -1, owned_[target_local]);
  }
}

MemoryCounters RankState::memory_counters() const {
  MemoryCounters m;
  m.owned = owned_.size();
  m.pre_table = pre_table_.size();
  m.remote_pre = pre_table_.size() - owned_.size();
  m.records = store_.size();
  m.model_bytes = estimate_area_cost(static_cast<double>(m.owned),
                                     static_cast<double>(m.remote_pre),
                                     static_cast<double>(m.records))
                      .bytes();
  return m;
}

AccessAudit RankState::audit_report() const {
  if (!audit_) {
    throw std::logic_error("audit_report requires audit mode");
  }
  AccessAudit a;
  for (std::size_t i = 0; i < audit_->record_touch.size(); ++i) {
    const std::uint32_t mask =
        audit_->record_touch[i].load(std::memory_order_relaxed);
    const int n = std::popcount(mask);
    if (n == 0) {
      ++a.records_untouched;
    } else if (n == 1) {
      ++a.records_touched;
    } else {
      a.violating_edges.push_back({store_.all()[i].edge_id, mask});
    }
  }
  for (std::size_t i = 0; i < audit_->post_touch.size(); ++i) {
    const std::uint32_t mask =
        audit_->post_touch[i].load(std::memory_order_relaxed);
    const int n = std::popcount(mask);
    if (n == 0) {
      ++a.posts_untouched;
    } else if (n == 1) {
      ++a.posts_touched;
    } else {
      a.violating_posts.push_back({owned_[i], mask});
    }
  }
  return a;
}

std::vector<RankState> build_all_rank_states(const NetworkInstance& net,
                                             const PartitionPlan& plan,
                                             const EngineOptions& opts) {
  std::vector<RankState> out;
  out.reserve(plan.n_ranks);
  for (int r = 0; r < plan.n_ranks; ++r) {
    out.push_back(RankState::build(net, plan, r, opts));
  }
  return out;
}

}  // namespace spikesim

#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "spikesim/decomposition.hpp"
#include "spikesim/network.hpp"
#include "spikesim/types.hpp"

namespace spikesim {

struct SynapseRecord {
  double weight;  // static weight; plastic records carry theirs in PlasticEdgeState
  EdgeIndex edge_id;
  std::uint32_t pre_local;     // index into the rank's pre-table
  std::uint32_t target_local;  // index into the rank's owned list
  std::int32_t plastic;        // index into plastic state array, -1 if static
  std::uint16_t delay_steps;
  Polarity polarity;
};

struct PlasticEdgeState {
  PlasticSynapseState syn;
  SpikeTrace pre_trace;  // per-synapse trace of arrivals at this synapse
  std::uint16_t projection;
};

// Raised when the race auditor observes an edge or post-neuron accessed by a
// thread other than its owner.
class AuditError : public std::runtime_error {
 public:
  AuditError(std::string msg, std::int64_t edge_id, std::int64_t post_id)
      : std::runtime_error(std::move(msg)), edge_id(edge_id), post_id(post_id) {}
  std::int64_t edge_id;  // global edge index, -1 if not edge-related
  std::int64_t post_id;  // global neuron id, -1 if not neuron-related
};

// Records grouped per (thread, pre-neuron), each group sorted ascending by
// delay with per-delay offsets, so the records of (pre p, thread k, delay d)
// are one O(1) contiguous range. Within a run the caller's order (canonical
// content order) is preserved.
class EdgeStore {
 public:
  void build(std::vector<SynapseRecord> records,
             std::vector<std::uint8_t> thread_tags, int n_threads,
             std::uint32_t n_pre, int d_min_steps, int d_max_steps);

  std::span<const SynapseRecord> run(int thread, std::uint32_t pre_local,
                                     int delay) const {
    const std::size_t g =
        static_cast<std::size_t>(thread) * n_pre_ + pre_local;
    const std::size_t base = g * (n_delays_ + 1);
    const std::uint32_t b = delay_begin_[base + (delay - d_min_)];
    const std::uint32_t e = delay_begin_[base + (delay - d_min_) + 1];
    return {records_.data() + b, records_.data() + e};
  }

  std::span<const SynapseRecord> all() const { return records_; }
  std::size_t size() const { return records_.size(); }

  // Fault-injection hook for the race auditor: moves one record into another
  // thread's group without touching its target.
  void reassign_record_thread(EdgeIndex edge_id, int new_thread);

 private:
  void rebuild();

  std::vector<SynapseRecord> records_;
  std::vector<std::uint8_t> thread_tag_;
  std::vector<std::uint32_t> delay_begin_;
  std::uint32_t n_pre_ = 0;
  int n_threads_ = 0;
  int d_min_ = 1;
  int n_delays_ = 1;
};

// Ring of spike slots indexed by emission step. Capacity d_max+1 covers every
// emission still owing interactions; a slot is retired by lazy overwrite once
// its age exceeds d_max.
class SpikeBuffer {
 public:
  explicit SpikeBuffer(int d_max_steps)
      : slots_(static_cast<std::size_t>(d_max_steps) + 1) {}

  void enqueue(Step emission, std::span<const std::uint32_t> pre_locals);
  // Sort the slot into canonical ascending order once all contributions for
  // this emission are in. Returns false if a duplicate (pre, step) entry was
  // present (callers decide whether that is fatal).
  bool seal(Step emission);
  std::span<const std::uint32_t> spikes_for(Step emission) const;

 private:
  struct Slot {
    Step emission = -1;
    std::vector<std::uint32_t> ids;
  };
  Slot& slot_for(Step emission) {
    return slots_[static_cast<std::size_t>(emission % static_cast<Step>(
                      slots_.size()))];
  }
  const Slot& slot_for(Step emission) const {
    return slots_[static_cast<std::size_t>(emission % static_cast<Step>(
                      slots_.size()))];
  }
  std::vector<Slot> slots_;
};

struct MemoryCounters {
  std::size_t owned = 0;
  std::size_t pre_table = 0;
  std::size_t remote_pre = 0;
  std::size_t records = 0;
  double model_bytes = 0.0;  // linear cost model applied to the counters
};

struct AccessAudit {
  std::size_t records_touched = 0;
  std::size_t records_untouched = 0;
  std::size_t posts_touched = 0;
  std::size_t posts_untouched = 0;
  std::vector<std::pair<EdgeIndex, std::uint32_t>> violating_edges;
  std::vector<std::pair<VertexId, std::uint32_t>> violating_posts;

  bool ok() const {
    return violating_edges.empty() && violating_posts.empty();
  }
};

struct EngineOptions {
  bool audit = false;
};

// Per-rank simulation core. Phase methods are meant to be driven either
// serially (tests, single thread) or by one worker per thread index; no phase
// takes a lock. Between phases the owning driver is the single writer.
class RankState {
 public:
  static RankState build(const NetworkInstance& net, const PartitionPlan& plan,
                         int rank, const EngineOptions& opts);

  // --- step phases -------------------------------------------------------
  // Remote (or test-injected) spikes for an emission step; unknown ids are
  // dropped. Single-writer.
  void enqueue_spikes(std::span<const VertexId> global_ids, Step emission);
  void seal_round(Step emission);
  // Builds the delivery work list for step t and checks the d_min window.
  void prepare_step(Step t);
  void deliver_thread(int thread, Step t);
  void update_thread(int thread, Step t);
  // Merge per-thread spikes, log them, enqueue them locally; returns the
  // rank's spikes of step t (ascending global ids) for broadcast.
  SpikeSet finish_step(Step t);

  // Convenience single-writer step with synchronous exchange semantics:
  // incoming must be the full remote spike set of step-1.
  SpikeSet step(std::span<const VertexId> incoming_remote);

  // --- accessors ----------------------------------------------------------
  int rank() const { return rank_; }
  int n_threads() const { return n_threads_; }
  Step current_step() const { return step_; }
  Step sealed_watermark() const { return sealed_watermark_; }
  double dt() const { return dt_; }
  int d_min_steps() const { return d_min_; }
  int d_max_steps() const { return d_max_; }
  const SpikeLog& local_log() const { return log_; }
  const std::vector<VertexId>& owned_ids() const { return owned_; }
  const std::vector<VertexId>& pre_table() const { return pre_table_; }
  const EdgeStore& edge_store() const { return store_; }
  EdgeStore& edge_store_for_test() { return store_; }
  std::span<const PlasticEdgeState> plastic_states() const { return plastic_; }
  const NeuronState& neuron_state(std::uint32_t owned_index) const {
    return states_[owned_index];
  }
  NeuronState& neuron_state_for_test(std::uint32_t owned_index) {
    return states_[owned_index];
  }
  bool audit_enabled() const { return audit_ != nullptr; }

  MemoryCounters memory_counters() const;
  AccessAudit audit_report() const;

 private:
  RankState() = default;

  template <bool Audit>
  void deliver_impl(int thread, Step t);
  void apply_drive_and_update(std::uint32_t i, Step t, bool& spiked);

  void audit_touch_record(std::size_t record_pos, int thread);
  void audit_touch_post(std::uint32_t target_local, int thread);

  // immutable after build
  int rank_ = 0;
  int n_threads_ = 1;
  double dt_ = 0.1;
  int d_min_ = 1;
  int d_max_ = 1;
  std::vector<VertexId> owned_;
  std::vector<VertexId> pre_table_;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> thread_ranges_;
  std::vector<int> thread_of_owned_;
  EdgeStore store_;
  std::vector<NeuronParams> pop_params_;
  std::vector<Propagators> pop_props_;
  std::vector<double> pop_poisson_lambda_;
  std::vector<double> pop_poisson_exp_neg_lambda_;
  std::vector<double> pop_poisson_weight_;
  std::vector<std::uint16_t> pop_of_owned_;
  std::vector<std::uint64_t> drive_key_;
  std::vector<StdpParams> stdp_;
  std::vector<std::vector<std::uint32_t>> plastic_in_;  // per owned neuron
  std::vector<double> post_tau_minus_;                  // per owned neuron
  std::vector<std::uint32_t> owned_pre_local_;          // owned -> pre-table

  // mutable simulation state
  std::vector<NeuronState> states_;
  std::vector<SpikeTrace> post_traces_;
  std::vector<PlasticEdgeState> plastic_;
  std::unique_ptr<SpikeBuffer> buffer_;
  std::vector<std::pair<std::uint32_t, Step>> deliveries_;  // (pre_local, emission)
  std::vector<std::vector<VertexId>> thread_spikes_;
  SpikeLog log_;
  Step step_ = 0;
  Step sealed_watermark_ = -1;

  // audit instrumentation (allocated only in audit mode)
  struct Audit {
    std::vector<std::atomic<std::uint32_t>> record_touch;
    std::vector<std::atomic<std::uint32_t>> post_touch;
    std::vector<std::uint8_t> record_owner;
  };
  std::unique_ptr<Audit> audit_;
};

// Builds every rank of the plan (convenience for drivers and tests).
std::vector<RankState> build_all_rank_states(const NetworkInstance& net,
                                             const PartitionPlan& plan,
                                             const EngineOptions& opts);

}  // namespace spikesim

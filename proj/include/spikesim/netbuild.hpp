#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "spikesim/decomposition.hpp"
#include "spikesim/dynamics.hpp"
#include "spikesim/network.hpp"
#include "spikesim/plasticity.hpp"

namespace spikesim {

struct DriveConfig {
  double dc_pa = 0.0;
  double poisson_rate_hz = 0.0;
  double poisson_weight_pa = 0.0;

  friend bool operator==(const DriveConfig&, const DriveConfig&) = default;
};

struct PopulationConfig {
  std::string name;
  std::uint64_t count = 0;
  NeuronParams neuron;
  DriveConfig drive;
  std::optional<double> u_init;  // defaults to u_rest

  friend bool operator==(const PopulationConfig&,
                         const PopulationConfig&) = default;
};

struct AreaConfig {
  std::string name;
  Point3 centroid{0.0, 0.0, 0.0};
  Point3 extent{1.0, 1.0, 1.0};
  std::vector<PopulationConfig> populations;

  friend bool operator==(const AreaConfig&, const AreaConfig&) = default;
};

struct ConnectionRule {
  enum class Kind { fixed_indegree, pairwise_bernoulli };
  Kind kind = Kind::fixed_indegree;
  std::uint32_t k = 0;  // fixed_indegree
  double p = 0.0;       // pairwise_bernoulli

  friend bool operator==(const ConnectionRule&,
                         const ConnectionRule&) = default;
};

struct WeightRule {
  enum class Kind { constant, normal };
  Kind kind = Kind::constant;
  double value = 0.0;  // constant
  double mean = 0.0;   // normal
  double sd = 0.0;

  friend bool operator==(const WeightRule&, const WeightRule&) = default;
};

struct DelayRule {
  enum class Kind { constant, uniform_ms, uniform_steps, distance };
  Kind kind = Kind::constant;
  double ms = 1.0;       // constant
  double low_ms = 0.0;   // uniform_ms
  double high_ms = 0.0;
  int low_steps = 1;     // uniform_steps (inclusive)
  int high_steps = 1;
  double velocity_mm_per_ms = 1.0;  // distance
  double offset_ms = 1.0;

  friend bool operator==(const DelayRule&, const DelayRule&) = default;
};

struct ProjectionConfig {
  std::string source;  // "area.population"
  std::string target;
  ConnectionRule rule;
  WeightRule weight;
  DelayRule delay;
  Polarity polarity = Polarity::exc;
  bool plastic = false;
  StdpParams stdp;

  friend bool operator==(const ProjectionConfig&,
                         const ProjectionConfig&) = default;
};

struct DecompositionConfig {
  double sample_rate = 0.05;
  int ranks = 1;
  int threads = 1;

  friend bool operator==(const DecompositionConfig&,
                         const DecompositionConfig&) = default;
};

struct NetworkConfig {
  double dt_ms = 0.1;
  double d_min_ms = 0.1;
  double d_max_ms = 1.5;
  std::uint64_t seed = 1;
  double run_ms = 100.0;
  std::string stdp_delay_convention = "delivery";
  double fabric_latency_ms = 0.0;
  double gather_timeout_ms = 30000.0;
  std::string out_dir = "out";
  DecompositionConfig decomposition;
  std::vector<AreaConfig> areas;
  std::vector<ProjectionConfig> projections;

  int d_min_steps() const;
  int d_max_steps() const;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

// Parse/serialize the JSON config. parse_config(dump_config(cfg)) == cfg.
// Schema violations throw with a field path in the message.
NetworkConfig parse_config(const std::string& text);
std::string dump_config(const NetworkConfig& cfg);
NetworkConfig load_config_file(const std::string& path);
void validate_config(const NetworkConfig& cfg);

struct ConnectomeMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> density;  // area x area
  bool has_distances = false;
  std::vector<std::vector<double>> distance_mm;
};

ConnectomeMatrix load_connectome(std::istream& density_csv,
                                 std::istream* distance_csv = nullptr);
ConnectomeMatrix load_connectome_files(const std::string& density_path,
                                       const std::string& distance_path = "");

// Expected per-area cost before materialization, from the wiring recipe:
// in-edge counts are exact expectations, remote pre-neuron counts are
// expected distinct remote sources.
std::vector<CostEstimate> estimate_area_costs(const NetworkConfig& cfg);

NetworkInstance build_network(const NetworkConfig& cfg,
                              const ConnectomeMatrix* connectome = nullptr);

// Full decomposition pipeline for a built network: area-processes mapping by
// estimated cost, then per-area multisection on sampled coordinates.
PartitionPlan plan_decomposition(const NetworkConfig& cfg,
                                 const NetworkInstance& net, int n_ranks,
                                 int n_threads);

// Exact per-rank remote-pre counts measured on the materialized graph;
// fills plan.remote_pre_estimate.
void measure_remote_pre(const NetworkInstance& net, PartitionPlan& plan);

struct BalancedNetOptions {
  double exc_fraction = 0.8;
  std::uint32_t k_exc = 400;  // fixed indegree from E, independent of scale
  std::uint32_t k_inh = 100;
  double w_exc_pa = 87.8;
  double g = 8.0;  // inhibition dominance, w_inh = -g * w_exc
  double nu_ext_hz = 10500.0;
  bool stdp = true;
  StdpParams stdp_params{0.1, 0.057, 0.4, 15.0, 15.0, 87.8, 0.0};
  int delay_low_steps = 1;
  int delay_high_steps = 15;
  double dt_ms = 0.1;
  std::uint64_t seed = 1;
};

// 80/20 excitatory/inhibitory random network with fixed indegree and plastic
// E->E synapses; defaults settle in the low-rate asynchronous regime.
NetworkConfig make_balanced_random_net(double scale,
                                       const BalancedNetOptions& opts = {});

struct MicrocircuitTable {
  std::vector<std::string> populations;      // e.g. L23E ... L6I
  std::vector<std::uint64_t> full_counts;    // full-scale sizes
  std::vector<std::vector<double>> prob;     // prob[target][source]
};

MicrocircuitTable load_microcircuit_table(std::istream& populations_csv,
                                          std::istream& connectivity_csv);
MicrocircuitTable load_microcircuit_files(const std::string& populations_path,
                                          const std::string& connectivity_path);

struct LayeredNetOptions {
  double scale = 0.01;  // applied to the table's full-scale counts
  double w_exc_pa = 87.8;
  double g = 5.0;
  double bg_rate_hz = 11800.0;
  double connectome_scale = 1.0;  // density -> probability normalization
  std::vector<std::string> interarea_sources{"L23E", "L5E"};
  std::vector<std::pair<std::string, double>> interarea_targets{
      {"L4E", 0.5}, {"L23E", 0.3}, {"L6E", 0.2}};
  double exc_delay_ms = 1.5;
  double inh_delay_ms = 0.8;
  double velocity_mm_per_ms = 3.5;  // interareal, when distances are present
  double interarea_offset_ms = 0.5;
  double dt_ms = 0.1;
  std::uint64_t seed = 1;
};

// One microcircuit per connectome area; inter-area projections from the
// density matrix onto layer-specific targets.
NetworkConfig make_layered_cortex_net(const ConnectomeMatrix& connectome,
                                      const MicrocircuitTable& table,
                                      const LayeredNetOptions& opts = {});

}  // namespace spikesim

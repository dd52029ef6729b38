#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "doctest.h"
#include "spikesim/io.hpp"
#include "spikesim/netbuild.hpp"
#include "spikesim/reference.hpp"

using namespace spikesim;

namespace {

std::string minimal_config() {
  return R"({
    "areas": [
      {"name": "A", "populations": [
        {"name": "E", "count": 50},
        {"name": "I", "count": 10}
      ]},
      {"name": "B", "populations": [
        {"name": "E", "count": 40}
      ]}
    ],
    "projections": [
      {"source": "A.E", "target": "A.I",
       "rule": {"kind": "fixed_indegree", "k": 5},
       "weight": {"kind": "constant", "value": 10.0},
       "delay": {"kind": "uniform_steps", "low": 1, "high": 15}},
      {"source": "A.E", "target": "B.E",
       "rule": {"kind": "pairwise_bernoulli", "p": 0.05},
       "weight": {"kind": "normal", "mean": 8.0, "sd": 1.0},
       "delay": {"kind": "constant", "ms": 0.8}}
    ]
  })";
}

}  // namespace

TEST_CASE("parse_config fills defaults and round-trips through dump") {
  const NetworkConfig cfg = parse_config(minimal_config());
  CHECK(cfg.dt_ms == 0.1);
  CHECK(cfg.d_min_steps() == 1);
  CHECK(cfg.d_max_steps() == 15);
  CHECK(cfg.areas.size() == 2);
  CHECK(cfg.areas[0].populations[0].neuron.tau_m == 10.0);
  CHECK(cfg.stdp_delay_convention == "delivery");

  const NetworkConfig again = parse_config(dump_config(cfg));
  CHECK(again == cfg);
}

TEST_CASE("config validation errors carry field paths") {
  // probability out of range
  std::string bad = minimal_config();
  bad.replace(bad.find("\"p\": 0.05"), 9, "\"p\": 1.5");
  try {
    parse_config(bad);
    FAIL("expected error");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("probability out of range") != std::string::npos);
    CHECK(msg.find("projections[1]") != std::string::npos);
  }

  // d_min > d_max
  NetworkConfig cfg = parse_config(minimal_config());
  cfg.d_min_ms = 5.0;
  cfg.d_max_ms = 1.0;
  CHECK_THROWS_AS(validate_config(cfg), std::invalid_argument);

  // unknown population
  NetworkConfig cfg2 = parse_config(minimal_config());
  cfg2.projections[0].target = "A.X";
  try {
    validate_config(cfg2);
    FAIL("expected error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("unknown population 'A.X'") !=
          std::string::npos);
  }

  // population count 0
  NetworkConfig cfg3 = parse_config(minimal_config());
  cfg3.areas[0].populations[0].count = 0;
  CHECK_THROWS_AS(validate_config(cfg3), std::invalid_argument);
}

TEST_CASE("connectome loading") {
  std::istringstream ok("area,V1,M1\nV1,0.1,0.01\nM1,0.02,0.1\n");
  const ConnectomeMatrix m = load_connectome(ok);
  CHECK(m.labels == std::vector<std::string>{"V1", "M1"});
  CHECK(m.density[0][1] == 0.01);
  CHECK_FALSE(m.has_distances);

  std::istringstream d_ok("area,V1,M1\nV1,0.1,0.01\nM1,0.02,0.1\n");
  std::istringstream dist("area,V1,M1\nV1,0,7.5\nM1,7.5,0\n");
  const ConnectomeMatrix md = load_connectome(d_ok, &dist);
  CHECK(md.has_distances);
  CHECK(md.distance_mm[0][1] == 7.5);

  std::istringstream w2("area,V1,M1\nV1,0.1,0.01\nM1,0.02,0.1\n");
  std::istringstream asym("area,V1,M1\nV1,0,7.5\nM1,8.5,0\n");
  CHECK_THROWS_AS(load_connectome(w2, &asym), std::invalid_argument);

  std::istringstream ragged("area,V1,M1\nV1,0.1\nM1,0.02,0.1\n");
  CHECK_THROWS_AS(load_connectome(ragged), std::invalid_argument);

  std::istringstream text("area,V1,M1\nV1,0.1,foo\nM1,0.02,0.1\n");
  CHECK_THROWS_AS(load_connectome(text), std::invalid_argument);

  std::istringstream w3("area,V1,M1\nV1,0.1,0.01\nM1,0.02,0.1\n");
  std::istringstream wrong("area,V1,S1\nV1,0,7.5\nS1,7.5,0\n");
  CHECK_THROWS_AS(load_connectome(w3, &wrong), std::invalid_argument);
}

TEST_CASE("build_network: fixed indegree is exact, builds are reproducible") {
  const NetworkConfig cfg = parse_config(minimal_config());
  const NetworkInstance net = build_network(cfg);

  // Every A.I neuron has exactly 5 in-edges from projection 0.
  std::map<VertexId, int> indeg;
  for (std::size_t e = 0; e < net.n_edges(); ++e) {
    if (net.projection_of_edge[e] == 0) indeg[net.graph.edges[e].post]++;
  }
  CHECK(indeg.size() == 10);
  for (const auto& [post, k] : indeg) {
    CHECK(net.pop_of_vertex[post] == 1);
    CHECK(k == 5);
  }

  const NetworkInstance net2 = build_network(cfg);
  CHECK(net2.graph.edges == net.graph.edges);
  CHECK(net2.weight == net.weight);
  CHECK(net2.delay_steps == net.delay_steps);

  NetworkConfig other = cfg;
  other.seed = 2;
  CHECK(build_network(other).graph.edges != net.graph.edges);
}

TEST_CASE("pairwise bernoulli edge counts stay within binomial bounds") {
  NetworkConfig cfg = parse_config(minimal_config());
  cfg.areas[0].populations[0].count = 300;
  cfg.areas[1].populations[0].count = 300;
  cfg.projections[1].rule.p = 0.01;
  const NetworkInstance net = build_network(cfg);
  std::size_t inter = 0;
  for (std::size_t e = 0; e < net.n_edges(); ++e) {
    if (net.projection_of_edge[e] == 1) ++inter;
  }
  const double mean = 300.0 * 300.0 * 0.01;
  const double sd = std::sqrt(300.0 * 300.0 * 0.01 * 0.99);
  CHECK(std::abs(static_cast<double>(inter) - mean) < 5.0 * sd);
}

TEST_CASE("estimate_area_costs matches the recipe expectations") {
  const NetworkConfig cfg = parse_config(minimal_config());
  const auto costs = estimate_area_costs(cfg);
  REQUIRE(costs.size() == 2);
  CHECK(costs[0].n_post == 60.0);
  CHECK(costs[0].n_edges == 5.0 * 10);   // fixed_indegree K * N_target
  CHECK(costs[0].n_pre == 60.0);         // no inter-area sources into A
  CHECK(costs[1].n_edges == doctest::Approx(0.05 * 50 * 40));
  // Expected distinct remote sources of B: 50 * (1 - 0.95^40).
  CHECK(costs[1].n_pre ==
        doctest::Approx(40.0 + 50.0 * (1.0 - std::pow(0.95, 40.0))));
}

TEST_CASE("balanced random net: fixed indegree independent of scale") {
  BalancedNetOptions opts;
  opts.k_exc = 30;
  opts.k_inh = 8;
  const NetworkConfig small = make_balanced_random_net(0.05, opts);
  const NetworkConfig large = make_balanced_random_net(0.1, opts);
  CHECK(small.projections[0].rule.k == 30);
  CHECK(large.projections[0].rule.k == 30);
  CHECK(large.areas[0].populations[0].count ==
        2 * small.areas[0].populations[0].count);
  CHECK(small.projections[0].plastic);
  CHECK_FALSE(small.projections[1].plastic);
  CHECK(small.projections[2].weight.value < 0.0);  // inhibition dominated
}

TEST_CASE("plan_decomposition separates the areas and measures remote pre") {
  NetworkConfig cfg = parse_config(minimal_config());
  cfg.areas[0].populations[0].count = 200;
  cfg.areas[0].populations[1].count = 40;
  cfg.areas[1].populations[0].count = 240;
  const NetworkInstance net = build_network(cfg);
  PartitionPlan plan = plan_decomposition(cfg, net, 2, 2);
  validate_partition(plan, net.n_vertices());

  // Both areas have similar cost; each rank should own exactly one area.
  CHECK(plan.owned[0].size() == 240);
  CHECK(plan.owned[1].size() == 240);
  CHECK(plan.owner[0].first == plan.owner[239].first);
  CHECK(plan.owner[240].first == plan.owner[479].first);
  CHECK(plan.remote_pre_estimate[plan.owner[240].first] > 0.0);
}

TEST_CASE("zeroed connectome separates areas: per-area logs equal isolated runs") {
  std::istringstream pops("population,count\nE,40\nI,10\n");
  std::istringstream conn("pop,E,I\nE,0.2,0.3\nI,0.25,0.2\n");
  const MicrocircuitTable table = load_microcircuit_table(pops, conn);

  std::istringstream zero2("area,V1,M1\nV1,0,0\nM1,0,0\n");
  const ConnectomeMatrix both = load_connectome(zero2);
  std::istringstream zero1("area,V1\nV1,0\n");
  const ConnectomeMatrix v1_only = load_connectome(zero1);
  std::istringstream zero1b("area,M1\nM1,0\n");
  const ConnectomeMatrix m1_only = load_connectome(zero1b);

  LayeredNetOptions opts;
  opts.scale = 1.0;
  opts.bg_rate_hz = 14000.0;

  const NetworkInstance net2 = build_network(make_layered_cortex_net(both, table, opts));
  const NetworkInstance netA = build_network(make_layered_cortex_net(v1_only, table, opts));
  const NetworkInstance netB = build_network(make_layered_cortex_net(m1_only, table, opts));

  const Step steps = 300;
  const SpikeLog log2 = run_reference(net2, steps);
  const SpikeLog logA = run_reference(netA, steps);
  const SpikeLog logB = run_reference(netB, steps);
  REQUIRE(!log2.empty());

  // Split the combined log by area and map ids to area-local ones.
  const VertexId b_first = net2.areas[1].first_vertex;
  SpikeLog got_a, got_b;
  for (const SpikeEvent& e : log2) {
    if (e.id < b_first) {
      got_a.push_back(e);
    } else {
      got_b.push_back({e.step, e.id - b_first});
    }
  }
  CHECK(got_a == logA);
  CHECK(got_b == logB);
}

TEST_CASE("microcircuit table loader validates against the population list") {
  std::istringstream pops("population,count\nE,40\nI,10\n");
  std::istringstream conn("pop,E,X\nE,0.2,0.3\nX,0.25,0.2\n");
  CHECK_THROWS_AS(load_microcircuit_table(pops, conn), std::invalid_argument);
}

TEST_CASE("raster round-trip and ordering") {
  SpikeLog log{{0, 3}, {0, 7}, {12, 1}, {9999, 42}};
  std::stringstream ss;
  write_raster(ss, log, 0.1);
  CHECK(read_raster(ss, 0.1) == log);

  std::stringstream bad("0.1 x\n");
  CHECK_THROWS_AS(read_raster(bad, 0.1), std::invalid_argument);
}

// spikesim command line: build, decompose, simulate and verify spiking
// networks from JSON configs or the built-in benchmark generators.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spikesim/exchange.hpp"
#include "spikesim/io.hpp"
#include "spikesim/netbuild.hpp"
#include "spikesim/reference.hpp"

namespace fs = std::filesystem;
using namespace spikesim;

namespace {

struct NetSource {
  std::string config_path;
  std::string builtin;  // "brn" | "layered"
  double scale = 1.0;
  std::string connectome_path;
  std::string distances_path;
  std::string microcircuit_pops = "fixtures/potjans2014_populations.csv";
  std::string microcircuit_conn = "fixtures/potjans2014_connectivity.csv";
  std::uint64_t seed = 0;  // 0 = keep config seed
  int ranks = 0;           // 0 = keep config value
  int threads = 0;
  Step steps = 0;  // 0 = derive from run_ms
};

void add_net_options(CLI::App* cmd, NetSource& src) {
  cmd->add_option("--config", src.config_path, "network config JSON");
  cmd->add_option("--builtin", src.builtin,
                  "generate a built-in network: brn | layered")
      ->check(CLI::IsMember({"brn", "layered"}));
  cmd->add_option("--scale", src.scale, "size scale for built-in networks");
  cmd->add_option("--connectome", src.connectome_path,
                  "area x area density CSV (layered builtin)");
  cmd->add_option("--distances", src.distances_path,
                  "area x area distance CSV (optional)");
  cmd->add_option("--microcircuit-pops", src.microcircuit_pops,
                  "per-area population table CSV");
  cmd->add_option("--microcircuit-conn", src.microcircuit_conn,
                  "per-area connectivity table CSV");
  cmd->add_option("--seed", src.seed, "override the config seed");
  cmd->add_option("--ranks", src.ranks, "override rank count");
  cmd->add_option("--threads", src.threads, "override threads per rank");
  cmd->add_option("--steps", src.steps, "override the step count");
}

struct LoadedNet {
  NetworkConfig cfg;
  ConnectomeMatrix connectome;
  bool has_connectome = false;
};

LoadedNet load_net(const NetSource& src) {
  LoadedNet out;
  if (!src.config_path.empty()) {
    out.cfg = load_config_file(src.config_path);
  } else if (src.builtin == "brn") {
    BalancedNetOptions opts;
    if (src.seed) opts.seed = src.seed;
    out.cfg = make_balanced_random_net(src.scale, opts);
  } else if (src.builtin == "layered") {
    if (src.connectome_path.empty()) {
      throw std::runtime_error("--builtin layered requires --connectome");
    }
    out.connectome =
        load_connectome_files(src.connectome_path, src.distances_path);
    out.has_connectome = true;
    const MicrocircuitTable table =
        load_microcircuit_files(src.microcircuit_pops, src.microcircuit_conn);
    LayeredNetOptions opts;
    opts.scale = src.scale;
    if (src.seed) opts.seed = src.seed;
    out.cfg = make_layered_cortex_net(out.connectome, table, opts);
  } else {
    throw std::runtime_error("either --config or --builtin is required");
  }
  if (!src.connectome_path.empty() && !out.has_connectome) {
    out.connectome =
        load_connectome_files(src.connectome_path, src.distances_path);
    out.has_connectome = true;
  }
  if (src.seed) out.cfg.seed = src.seed;
  if (src.ranks) out.cfg.decomposition.ranks = src.ranks;
  if (src.threads) out.cfg.decomposition.threads = src.threads;
  return out;
}

Step steps_of(const NetSource& src, const NetworkConfig& cfg) {
  if (src.steps > 0) return src.steps;
  return static_cast<Step>(std::llround(cfg.run_ms / cfg.dt_ms));
}

double wall_ms_max(const std::vector<RankRunStats>& stats) {
  double m = 0.0;
  for (const auto& s : stats) m = std::max(m, s.total_ms);
  return m;
}

void print_area_rates(std::ostream& os, const NetworkInstance& net,
                      const SpikeLog& log, Step n_steps) {
  const double secs = n_steps * net.dt * 1e-3;
  std::vector<std::size_t> counts(net.areas.size(), 0);
  for (const SpikeEvent& e : log) counts[net.area_of_vertex[e.id]]++;
  for (std::size_t a = 0; a < net.areas.size(); ++a) {
    const double rate =
        secs > 0.0
            ? counts[a] / (secs * static_cast<double>(net.areas[a].n_neurons))
            : 0.0;
    os << "  area " << net.areas[a].name << ": " << counts[a] << " spikes, "
       << rate << " Hz/neuron\n";
  }
}

int cmd_simulate(const NetSource& src, const std::string& out_dir_flag,
                 bool audit, bool no_overlap, bool step_times,
                 double latency_ms) {
  LoadedNet loaded = load_net(src);
  const NetworkConfig& cfg = loaded.cfg;
  const NetworkInstance net =
      build_network(cfg, loaded.has_connectome ? &loaded.connectome : nullptr);
  const PartitionPlan plan = plan_decomposition(
      cfg, net, cfg.decomposition.ranks, cfg.decomposition.threads);

  SimOptions opts;
  opts.n_steps = steps_of(src, cfg);
  opts.overlap = !no_overlap;
  opts.audit = audit;
  opts.record_step_times = step_times;
  opts.fabric_latency_ms =
      latency_ms >= 0.0 ? latency_ms : cfg.fabric_latency_ms;
  opts.gather_timeout_ms = cfg.gather_timeout_ms;

  const SimResult res = run_simulation(net, plan, opts);

  const fs::path out_dir = out_dir_flag.empty() ? cfg.out_dir : out_dir_flag;
  fs::create_directories(out_dir);
  {
    std::ofstream raster(out_dir / "raster.txt");
    write_raster(raster, res.log, net.dt);
  }
  {
    std::ofstream mem(out_dir / "stats_memory.csv");
    write_memory_csv(mem, res.memory);
  }
  {
    std::ofstream timing(out_dir / "stats_timing.csv");
    write_timing_csv(timing, res.stats);
  }
  {
    std::ofstream resolved(out_dir / "resolved_config.json");
    resolved << dump_config(cfg) << "\n";
  }

  std::cout << "simulated " << opts.n_steps << " steps ("
            << opts.n_steps * net.dt << " ms), " << plan.n_ranks << " ranks x "
            << plan.n_threads << " threads, wall " << wall_ms_max(res.stats)
            << " ms\n";
  std::cout << "spikes: " << res.log.size() << "\n";
  print_area_rates(std::cout, net, res.log, opts.n_steps);
  if (audit) {
    for (std::size_t r = 0; r < res.audits.size(); ++r) {
      std::cout << "  audit rank " << r << ": "
                << (res.audits[r].ok() ? "clean" : "VIOLATIONS") << " ("
                << res.audits[r].records_touched << " records, "
                << res.audits[r].posts_touched << " posts single-owner)\n";
    }
  }
  std::cout << "outputs in " << out_dir.string() << "\n";
  return 0;
}

int cmd_plan(const NetSource& src, const std::string& out_path) {
  LoadedNet loaded = load_net(src);
  const NetworkInstance net = build_network(
      loaded.cfg, loaded.has_connectome ? &loaded.connectome : nullptr);
  const PartitionPlan plan =
      plan_decomposition(loaded.cfg, net, loaded.cfg.decomposition.ranks,
                         loaded.cfg.decomposition.threads);
  if (out_path.empty()) {
    dump_plan(std::cout, plan);
  } else {
    std::ofstream out(out_path);
    dump_plan(out, plan);
    std::cout << "plan written to " << out_path << "\n";
  }
  return 0;
}

int cmd_verify(const NetSource& src, bool no_overlap) {
  LoadedNet loaded = load_net(src);
  const NetworkConfig& cfg = loaded.cfg;
  const NetworkInstance net =
      build_network(cfg, loaded.has_connectome ? &loaded.connectome : nullptr);
  const PartitionPlan plan = plan_decomposition(
      cfg, net, cfg.decomposition.ranks, cfg.decomposition.threads);
  const Step n_steps = steps_of(src, cfg);

  const SpikeLog expect = run_reference(net, n_steps);
  SimOptions opts;
  opts.n_steps = n_steps;
  opts.overlap = !no_overlap;
  const SimResult res = run_simulation(net, plan, opts);

  if (res.log == expect) {
    std::cout << "verify OK: " << expect.size() << " spikes match the serial "
              << "reference bit-exactly over " << n_steps << " steps\n";
    return 0;
  }
  const std::size_t n = std::min(res.log.size(), expect.size());
  std::size_t i = 0;
  while (i < n && res.log[i] == expect[i]) ++i;
  std::cerr << "verify FAILED: first divergence at ";
  if (i < n) {
    std::cerr << "step " << expect[i].step << ", neuron " << expect[i].id
              << " (engine has step " << res.log[i].step << ", neuron "
              << res.log[i].id << ")\n";
  } else {
    std::cerr << "log length " << i << " (reference " << expect.size()
              << " spikes, engine " << res.log.size() << ")\n";
  }
  return 1;
}

int cmd_bench(const NetSource& src, const std::string& sizes_csv, Step steps,
              const std::string& out_csv) {
  std::vector<double> sizes;
  std::stringstream ss(sizes_csv);
  std::string item;
  while (std::getline(ss, item, ',')) sizes.push_back(std::stod(item));
  if (sizes.empty()) throw std::runtime_error("--sizes is empty");

  std::ostringstream csv;
  csv << "size,neurons,edges,build_ms,sim_ms,ms_per_step,max_pre_table,"
         "max_owned,records,model_bytes\n";
  std::cout << "size neurons edges build_ms sim_ms ms/step max_pre_table "
               "model_bytes\n";
  for (double size : sizes) {
    NetSource scaled = src;
    scaled.scale = src.scale * size;
    LoadedNet loaded = load_net(scaled);
    // Scale explicit configs by multiplying population counts.
    if (!src.config_path.empty()) {
      for (auto& area : loaded.cfg.areas) {
        for (auto& pop : area.populations) {
          pop.count = std::max<std::uint64_t>(
              1, static_cast<std::uint64_t>(std::llround(pop.count * size)));
        }
      }
    }
    const auto t0 = std::chrono::steady_clock::now();
    const NetworkInstance net = build_network(
        loaded.cfg, loaded.has_connectome ? &loaded.connectome : nullptr);
    const PartitionPlan plan =
        plan_decomposition(loaded.cfg, net, loaded.cfg.decomposition.ranks,
                           loaded.cfg.decomposition.threads);
    const double build_ms = std::chrono::duration<double, std::milli>(
                                std::chrono::steady_clock::now() - t0)
                                .count();

    SimOptions opts;
    opts.n_steps = steps;
    const SimResult res = run_simulation(net, plan, opts);
    const double sim_ms = wall_ms_max(res.stats);

    std::size_t max_pre = 0, max_owned = 0, records = 0;
    double bytes = 0.0;
    for (const MemoryCounters& m : res.memory) {
      max_pre = std::max(max_pre, m.pre_table);
      max_owned = std::max(max_owned, m.owned);
      records += m.records;
      bytes = std::max(bytes, m.model_bytes);
    }
    std::cout << size << " " << net.n_vertices() << " " << net.n_edges() << " "
              << build_ms << " " << sim_ms << " " << sim_ms / steps << " "
              << max_pre << " " << bytes << "\n";
    csv << size << "," << net.n_vertices() << "," << net.n_edges() << ","
        << build_ms << "," << sim_ms << "," << sim_ms / steps << "," << max_pre
        << "," << max_owned << "," << records << "," << bytes << "\n";
  }
  if (!out_csv.empty()) {
    std::ofstream out(out_csv);
    out << csv.str();
    std::cout << "bench table written to " << out_csv << "\n";
  }
  return 0;
}

int cmd_raster_data(const NetSource& src, const std::string& raster_path,
                    const std::string& out_dir_flag) {
  LoadedNet loaded = load_net(src);
  const NetworkInstance net = build_network(
      loaded.cfg, loaded.has_connectome ? &loaded.connectome : nullptr);
  std::ifstream in(raster_path);
  if (!in) throw std::runtime_error("cannot open raster " + raster_path);
  const SpikeLog log = read_raster(in, net.dt);

  const fs::path out_dir =
      out_dir_flag.empty() ? loaded.cfg.out_dir : out_dir_flag;
  fs::create_directories(out_dir);

  std::vector<std::ofstream> outs;
  for (const AreaSpec& a : net.areas) {
    outs.emplace_back(out_dir / ("raster_" + a.name + ".txt"));
  }
  std::vector<std::size_t> counts(net.areas.size(), 0);
  Step max_step = 0;
  for (const SpikeEvent& e : log) {
    const std::uint16_t a = net.area_of_vertex[e.id];
    const VertexId local = e.id - net.areas[a].first_vertex;
    char line[64];
    std::snprintf(line, sizeof(line), "%.6f %u %u\n",
                  static_cast<double>(e.step) * net.dt, e.id, local);
    outs[a] << line;
    counts[a]++;
    max_step = std::max(max_step, e.step);
  }
  std::cout << "split " << log.size() << " spikes across " << net.areas.size()
            << " areas into " << out_dir.string() << "\n";
  print_area_rates(std::cout, net, log, max_step + 1);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spikesim: indegree-partitioned spiking network simulator"};
  app.require_subcommand(1);

  NetSource src;
  std::string out_dir, plan_out, sizes = "0.25,0.5,1", bench_csv, raster_path;
  bool audit = false, no_overlap = false, step_times = false;
  double latency_ms = -1.0;
  Step bench_steps = 1000;

  CLI::App* sim = app.add_subcommand("simulate", "run a simulation");
  add_net_options(sim, src);
  sim->add_option("--out-dir", out_dir, "output directory");
  sim->add_flag("--audit", audit, "enable the race auditor");
  sim->add_flag("--no-overlap", no_overlap,
                "exchange synchronously between steps");
  sim->add_flag("--step-times", step_times, "record per-step wall times");
  sim->add_option("--latency-ms", latency_ms, "injected fabric latency");

  CLI::App* plan = app.add_subcommand("plan", "dump the partition plan");
  add_net_options(plan, src);
  plan->add_option("--out", plan_out, "write the plan to a file");

  CLI::App* verify =
      app.add_subcommand("verify", "compare against the serial reference");
  add_net_options(verify, src);
  verify->add_flag("--no-overlap", no_overlap, "synchronous exchange");

  CLI::App* bench = app.add_subcommand("bench", "multi-scale timing/memory");
  add_net_options(bench, src);
  bench->add_option("--sizes", sizes, "comma-separated scale factors");
  bench->add_option("--bench-steps", bench_steps, "steps per size");
  bench->add_option("--out", bench_csv, "write the table as CSV");

  CLI::App* rd =
      app.add_subcommand("raster-data", "split a raster by area tags");
  add_net_options(rd, src);
  rd->add_option("--raster", raster_path, "raster file")->required();
  rd->add_option("--out-dir", out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      return cmd_simulate(src, out_dir, audit, no_overlap, step_times,
                          latency_ms);
    }
    if (plan->parsed()) return cmd_plan(src, plan_out);
    if (verify->parsed()) return cmd_verify(src, no_overlap);
    if (bench->parsed()) return cmd_bench(src, sizes, bench_steps, bench_csv);
    if (rd->parsed()) return cmd_raster_data(src, raster_path, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

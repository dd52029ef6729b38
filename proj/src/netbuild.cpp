#include "spikesim/netbuild.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "spikesim/rng.hpp"

namespace spikesim {

using json = nlohmann::ordered_json;

int NetworkConfig::d_min_steps() const {
  return std::max(1, static_cast<int>(std::lround(d_min_ms / dt_ms)));
}

int NetworkConfig::d_max_steps() const {
  return std::max(d_min_steps(),
                  static_cast<int>(std::lround(d_max_ms / dt_ms)));
}

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw std::invalid_argument("config: " + path + ": " + msg);
}

const json& need(const json& j, const std::string& path, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) fail(path, std::string("missing field '") + key + "'");
  return *it;
}

template <typename T>
T as(const json& j, const std::string& path) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    fail(path, std::string("bad value: ") + e.what());
  }
}

template <typename T>
T get_or(const json& j, const std::string& path, const char* key, T def) {
  const auto it = j.find(key);
  if (it == j.end()) return def;
  return as<T>(*it, path + "." + key);
}

template <typename T>
T get_req(const json& j, const std::string& path, const char* key) {
  return as<T>(need(j, path, key), path + "." + key);
}

Point3 get_point(const json& j, const std::string& path, const char* key,
                 Point3 def) {
  const auto it = j.find(key);
  if (it == j.end()) return def;
  const auto v = as<std::vector<double>>(*it, path + "." + key);
  if (v.size() != 3) fail(path + "." + key, "expected 3 coordinates");
  return Point3{v[0], v[1], v[2]};
}

NeuronParams parse_neuron(const json& j, const std::string& path) {
  NeuronParams d;
  NeuronParams p;
  p.tau_m = get_or(j, path, "tau_m", d.tau_m);
  p.u_rest = get_or(j, path, "u_rest", d.u_rest);
  p.r_mohm = get_or(j, path, "r_mohm", d.r_mohm);
  p.theta = get_or(j, path, "theta", d.theta);
  p.u_reset = get_or(j, path, "u_reset", d.u_reset);
  p.t_refractory = get_or(j, path, "t_refractory", d.t_refractory);
  p.tau_syn_exc = get_or(j, path, "tau_syn_exc", d.tau_syn_exc);
  p.tau_syn_inh = get_or(j, path, "tau_syn_inh", d.tau_syn_inh);
  const std::string mode =
      get_or<std::string>(j, path, "synapse_mode", "current_based");
  if (mode == "current_based") {
    p.synapse_mode = SynapseMode::current_based;
  } else if (mode == "conductance_based") {
    p.synapse_mode = SynapseMode::conductance_based;
  } else {
    fail(path + ".synapse_mode", "expected current_based|conductance_based");
  }
  p.e_syn_exc = get_or(j, path, "e_syn_exc", d.e_syn_exc);
  p.e_syn_inh = get_or(j, path, "e_syn_inh", d.e_syn_inh);
  return p;
}

json dump_neuron(const NeuronParams& p) {
  json j;
  j["tau_m"] = p.tau_m;
  j["u_rest"] = p.u_rest;
  j["r_mohm"] = p.r_mohm;
  j["theta"] = p.theta;
  j["u_reset"] = p.u_reset;
  j["t_refractory"] = p.t_refractory;
  j["tau_syn_exc"] = p.tau_syn_exc;
  j["tau_syn_inh"] = p.tau_syn_inh;
  j["synapse_mode"] = p.synapse_mode == SynapseMode::current_based
                          ? "current_based"
                          : "conductance_based";
  j["e_syn_exc"] = p.e_syn_exc;
  j["e_syn_inh"] = p.e_syn_inh;
  return j;
}

StdpParams parse_stdp(const json& j, const std::string& path) {
  StdpParams d;
  StdpParams p;
  p.lambda = get_or(j, path, "lambda", d.lambda);
  p.alpha = get_or(j, path, "alpha", d.alpha);
  p.mu = get_or(j, path, "mu", d.mu);
  p.tau_plus = get_or(j, path, "tau_plus", d.tau_plus);
  p.tau_minus = get_or(j, path, "tau_minus", d.tau_minus);
  p.w_ref = get_or(j, path, "w_ref", d.w_ref);
  p.w_min = get_or(j, path, "w_min", d.w_min);
  return p;
}

json dump_stdp(const StdpParams& p) {
  json j;
  j["lambda"] = p.lambda;
  j["alpha"] = p.alpha;
  j["mu"] = p.mu;
  j["tau_plus"] = p.tau_plus;
  j["tau_minus"] = p.tau_minus;
  j["w_ref"] = p.w_ref;
  j["w_min"] = p.w_min;
  return j;
}

}  // namespace

NetworkConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: JSON parse error: ") +
                                e.what());
  }
  NetworkConfig cfg;
  const std::string root = "$";
  cfg.dt_ms = get_or(j, root, "dt_ms", cfg.dt_ms);
  cfg.d_min_ms = get_or(j, root, "d_min_ms", cfg.d_min_ms);
  cfg.d_max_ms = get_or(j, root, "d_max_ms", cfg.d_max_ms);
  cfg.seed = get_or(j, root, "seed", cfg.seed);
  cfg.run_ms = get_or(j, root, "run_ms", cfg.run_ms);
  cfg.stdp_delay_convention = get_or<std::string>(
      j, root, "stdp_delay_convention", cfg.stdp_delay_convention);
  cfg.fabric_latency_ms =
      get_or(j, root, "fabric_latency_ms", cfg.fabric_latency_ms);
  cfg.gather_timeout_ms =
      get_or(j, root, "gather_timeout_ms", cfg.gather_timeout_ms);
  cfg.out_dir = get_or<std::string>(j, root, "out_dir", cfg.out_dir);
  if (j.contains("decomposition")) {
    const json& d = j["decomposition"];
    const std::string p = root + ".decomposition";
    cfg.decomposition.sample_rate =
        get_or(d, p, "sample_rate", cfg.decomposition.sample_rate);
    cfg.decomposition.ranks = get_or(d, p, "ranks", cfg.decomposition.ranks);
    cfg.decomposition.threads =
        get_or(d, p, "threads", cfg.decomposition.threads);
  }

  for (std::size_t ai = 0; ai < need(j, root, "areas").size(); ++ai) {
    const json& a = j["areas"][ai];
    const std::string ap = root + ".areas[" + std::to_string(ai) + "]";
    AreaConfig ac;
    ac.name = get_req<std::string>(a, ap, "name");
    ac.centroid = get_point(a, ap, "centroid", ac.centroid);
    ac.extent = get_point(a, ap, "extent", ac.extent);
    for (std::size_t pi = 0; pi < need(a, ap, "populations").size(); ++pi) {
      const json& p = a["populations"][pi];
      const std::string pp = ap + ".populations[" + std::to_string(pi) + "]";
      PopulationConfig pc;
      pc.name = get_req<std::string>(p, pp, "name");
      pc.count = get_req<std::uint64_t>(p, pp, "count");
      if (p.contains("neuron")) pc.neuron = parse_neuron(p["neuron"], pp + ".neuron");
      if (p.contains("drive")) {
        const json& dr = p["drive"];
        const std::string dp = pp + ".drive";
        pc.drive.dc_pa = get_or(dr, dp, "dc_pa", 0.0);
        pc.drive.poisson_rate_hz = get_or(dr, dp, "poisson_rate_hz", 0.0);
        pc.drive.poisson_weight_pa = get_or(dr, dp, "poisson_weight_pa", 0.0);
      }
      if (p.contains("u_init")) {
        pc.u_init = as<double>(p["u_init"], pp + ".u_init");
      }
      ac.populations.push_back(std::move(pc));
    }
    cfg.areas.push_back(std::move(ac));
  }

  if (j.contains("projections")) {
    for (std::size_t qi = 0; qi < j["projections"].size(); ++qi) {
      const json& q = j["projections"][qi];
      const std::string qp = root + ".projections[" + std::to_string(qi) + "]";
      ProjectionConfig pc;
      pc.source = get_req<std::string>(q, qp, "source");
      pc.target = get_req<std::string>(q, qp, "target");

      const json& r = need(q, qp, "rule");
      const std::string rk = get_req<std::string>(r, qp + ".rule", "kind");
      if (rk == "fixed_indegree") {
        pc.rule.kind = ConnectionRule::Kind::fixed_indegree;
        pc.rule.k = get_req<std::uint32_t>(r, qp + ".rule", "k");
      } else if (rk == "pairwise_bernoulli") {
        pc.rule.kind = ConnectionRule::Kind::pairwise_bernoulli;
        pc.rule.p = get_req<double>(r, qp + ".rule", "p");
      } else {
        fail(qp + ".rule.kind", "expected fixed_indegree|pairwise_bernoulli");
      }

      const json& w = need(q, qp, "weight");
      const std::string wk = get_req<std::string>(w, qp + ".weight", "kind");
      if (wk == "constant") {
        pc.weight.kind = WeightRule::Kind::constant;
        pc.weight.value = get_req<double>(w, qp + ".weight", "value");
      } else if (wk == "normal") {
        pc.weight.kind = WeightRule::Kind::normal;
        pc.weight.mean = get_req<double>(w, qp + ".weight", "mean");
        pc.weight.sd = get_req<double>(w, qp + ".weight", "sd");
      } else {
        fail(qp + ".weight.kind", "expected constant|normal");
      }

      const json& d = need(q, qp, "delay");
      const std::string dk = get_req<std::string>(d, qp + ".delay", "kind");
      if (dk == "constant") {
        pc.delay.kind = DelayRule::Kind::constant;
        pc.delay.ms = get_req<double>(d, qp + ".delay", "ms");
      } else if (dk == "uniform_ms") {
        pc.delay.kind = DelayRule::Kind::uniform_ms;
        pc.delay.low_ms = get_req<double>(d, qp + ".delay", "low_ms");
        pc.delay.high_ms = get_req<double>(d, qp + ".delay", "high_ms");
      } else if (dk == "uniform_steps") {
        pc.delay.kind = DelayRule::Kind::uniform_steps;
        pc.delay.low_steps = get_req<int>(d, qp + ".delay", "low");
        pc.delay.high_steps = get_req<int>(d, qp + ".delay", "high");
      } else if (dk == "distance") {
        pc.delay.kind = DelayRule::Kind::distance;
        pc.delay.velocity_mm_per_ms =
            get_req<double>(d, qp + ".delay", "velocity_mm_per_ms");
        pc.delay.offset_ms = get_req<double>(d, qp + ".delay", "offset_ms");
      } else {
        fail(qp + ".delay.kind",
             "expected constant|uniform_ms|uniform_steps|distance");
      }

      const std::string pol = get_or<std::string>(q, qp, "polarity", "exc");
      if (pol == "exc") {
        pc.polarity = Polarity::exc;
      } else if (pol == "inh") {
        pc.polarity = Polarity::inh;
      } else {
        fail(qp + ".polarity", "expected exc|inh");
      }
      pc.plastic = get_or(q, qp, "plastic", false);
      if (q.contains("stdp")) pc.stdp = parse_stdp(q["stdp"], qp + ".stdp");
      cfg.projections.push_back(std::move(pc));
    }
  }

  validate_config(cfg);
  return cfg;
}

std::string dump_config(const NetworkConfig& cfg) {
  json j;
  j["dt_ms"] = cfg.dt_ms;
  j["d_min_ms"] = cfg.d_min_ms;
  j["d_max_ms"] = cfg.d_max_ms;
  j["seed"] = cfg.seed;
  j["run_ms"] = cfg.run_ms;
  j["stdp_delay_convention"] = cfg.stdp_delay_convention;
  j["fabric_latency_ms"] = cfg.fabric_latency_ms;
  j["gather_timeout_ms"] = cfg.gather_timeout_ms;
  j["out_dir"] = cfg.out_dir;
  j["decomposition"] = {{"sample_rate", cfg.decomposition.sample_rate},
                        {"ranks", cfg.decomposition.ranks},
                        {"threads", cfg.decomposition.threads}};
  j["areas"] = json::array();
  for (const AreaConfig& a : cfg.areas) {
    json ja;
    ja["name"] = a.name;
    ja["centroid"] = {a.centroid[0], a.centroid[1], a.centroid[2]};
    ja["extent"] = {a.extent[0], a.extent[1], a.extent[2]};
    ja["populations"] = json::array();
    for (const PopulationConfig& p : a.populations) {
      json jp;
      jp["name"] = p.name;
      jp["count"] = p.count;
      jp["neuron"] = dump_neuron(p.neuron);
      jp["drive"] = {{"dc_pa", p.drive.dc_pa},
                     {"poisson_rate_hz", p.drive.poisson_rate_hz},
                     {"poisson_weight_pa", p.drive.poisson_weight_pa}};
      if (p.u_init) jp["u_init"] = *p.u_init;
      ja["populations"].push_back(std::move(jp));
    }
    j["areas"].push_back(std::move(ja));
  }
  j["projections"] = json::array();
  for (const ProjectionConfig& q : cfg.projections) {
    json jq;
    jq["source"] = q.source;
    jq["target"] = q.target;
    switch (q.rule.kind) {
      case ConnectionRule::Kind::fixed_indegree:
        jq["rule"] = {{"kind", "fixed_indegree"}, {"k", q.rule.k}};
        break;
      case ConnectionRule::Kind::pairwise_bernoulli:
        jq["rule"] = {{"kind", "pairwise_bernoulli"}, {"p", q.rule.p}};
        break;
    }
    switch (q.weight.kind) {
      case WeightRule::Kind::constant:
        jq["weight"] = {{"kind", "constant"}, {"value", q.weight.value}};
        break;
      case WeightRule::Kind::normal:
        jq["weight"] = {{"kind", "normal"},
                        {"mean", q.weight.mean},
                        {"sd", q.weight.sd}};
        break;
    }
    switch (q.delay.kind) {
      case DelayRule::Kind::constant:
        jq["delay"] = {{"kind", "constant"}, {"ms", q.delay.ms}};
        break;
      case DelayRule::Kind::uniform_ms:
        jq["delay"] = {{"kind", "uniform_ms"},
                       {"low_ms", q.delay.low_ms},
                       {"high_ms", q.delay.high_ms}};
        break;
      case DelayRule::Kind::uniform_steps:
        jq["delay"] = {{"kind", "uniform_steps"},
                       {"low", q.delay.low_steps},
                       {"high", q.delay.high_steps}};
        break;
      case DelayRule::Kind::distance:
        jq["delay"] = {{"kind", "distance"},
                       {"velocity_mm_per_ms", q.delay.velocity_mm_per_ms},
                       {"offset_ms", q.delay.offset_ms}};
        break;
    }
    jq["polarity"] = q.polarity == Polarity::exc ? "exc" : "inh";
    jq["plastic"] = q.plastic;
    if (q.plastic) jq["stdp"] = dump_stdp(q.stdp);
    j["projections"].push_back(std::move(jq));
  }
  return j.dump(2);
}

NetworkConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void validate_config(const NetworkConfig& cfg) {
  if (!(cfg.dt_ms > 0.0)) fail("$.dt_ms", "must be > 0");
  if (cfg.d_min_ms > cfg.d_max_ms) fail("$.d_min_ms", "d_min > d_max");
  if (cfg.run_ms < 0.0) fail("$.run_ms", "must be >= 0");
  if (cfg.stdp_delay_convention != "delivery") {
    fail("$.stdp_delay_convention", "only 'delivery' is supported");
  }
  if (!(cfg.decomposition.sample_rate > 0.0) ||
      cfg.decomposition.sample_rate > 1.0) {
    fail("$.decomposition.sample_rate", "must be in (0, 1]");
  }
  if (cfg.decomposition.ranks < 1) fail("$.decomposition.ranks", "must be >= 1");
  if (cfg.decomposition.threads < 1 || cfg.decomposition.threads > 32) {
    fail("$.decomposition.threads", "must be in [1, 32]");
  }
  if (cfg.areas.empty()) fail("$.areas", "at least one area required");

  std::map<std::string, const PopulationConfig*> pops;
  for (std::size_t ai = 0; ai < cfg.areas.size(); ++ai) {
    const AreaConfig& a = cfg.areas[ai];
    const std::string ap = "$.areas[" + std::to_string(ai) + "]";
    if (a.name.empty()) fail(ap + ".name", "empty area name");
    for (int d = 0; d < 3; ++d) {
      if (!(a.extent[d] > 0.0)) fail(ap + ".extent", "must be positive");
    }
    if (a.populations.empty()) fail(ap + ".populations", "empty area");
    for (std::size_t pi = 0; pi < a.populations.size(); ++pi) {
      const PopulationConfig& p = a.populations[pi];
      const std::string pp = ap + ".populations[" + std::to_string(pi) + "]";
      if (p.count == 0) fail(pp + ".count", "population count must be >= 1");
      const std::string qual = a.name + "." + p.name;
      if (!pops.emplace(qual, &p).second) {
        fail(pp + ".name", "duplicate population '" + qual + "'");
      }
      const NeuronParams& n = p.neuron;
      if (!(n.tau_m > 0.0)) fail(pp + ".neuron.tau_m", "must be > 0");
      if (!(n.tau_syn_exc > 0.0)) fail(pp + ".neuron.tau_syn_exc", "must be > 0");
      if (!(n.tau_syn_inh > 0.0)) fail(pp + ".neuron.tau_syn_inh", "must be > 0");
      if (!(n.theta > n.u_reset)) {
        fail(pp + ".neuron.theta", "threshold must exceed reset");
      }
      if (n.t_refractory < 0.0) fail(pp + ".neuron.t_refractory", "must be >= 0");
      if (p.drive.poisson_rate_hz < 0.0) {
        fail(pp + ".drive.poisson_rate_hz", "must be >= 0");
      }
    }
  }

  for (std::size_t qi = 0; qi < cfg.projections.size(); ++qi) {
    const ProjectionConfig& q = cfg.projections[qi];
    const std::string qp = "$.projections[" + std::to_string(qi) + "]";
    if (!pops.count(q.source)) {
      fail(qp + ".source", "unknown population '" + q.source + "'");
    }
    if (!pops.count(q.target)) {
      fail(qp + ".target", "unknown population '" + q.target + "'");
    }
    if (q.rule.kind == ConnectionRule::Kind::pairwise_bernoulli) {
      if (q.rule.p < 0.0 || q.rule.p > 1.0) {
        fail(qp + ".rule.p", "probability out of range");
      }
    }
    if (q.weight.kind == WeightRule::Kind::normal && q.weight.sd < 0.0) {
      fail(qp + ".weight.sd", "must be >= 0");
    }
    switch (q.delay.kind) {
      case DelayRule::Kind::constant:
        if (q.delay.ms < 0.0) fail(qp + ".delay.ms", "must be >= 0");
        break;
      case DelayRule::Kind::uniform_ms:
        if (q.delay.low_ms > q.delay.high_ms) {
          fail(qp + ".delay", "low_ms > high_ms");
        }
        break;
      case DelayRule::Kind::uniform_steps:
        if (q.delay.low_steps > q.delay.high_steps) {
          fail(qp + ".delay", "low > high");
        }
        if (q.delay.low_steps < cfg.d_min_steps() ||
            q.delay.high_steps > cfg.d_max_steps()) {
          fail(qp + ".delay", "step range outside [d_min, d_max]");
        }
        break;
      case DelayRule::Kind::distance:
        if (!(q.delay.velocity_mm_per_ms > 0.0)) {
          fail(qp + ".delay.velocity_mm_per_ms", "must be > 0");
        }
        break;
    }
    if (q.plastic) {
      const StdpParams& s = q.stdp;
      if (s.lambda < 0.0) fail(qp + ".stdp.lambda", "must be >= 0");
      if (s.mu < 0.0 || s.mu > 1.0) fail(qp + ".stdp.mu", "must be in [0, 1]");
      if (!(s.tau_plus > 0.0)) fail(qp + ".stdp.tau_plus", "must be > 0");
      if (!(s.tau_minus > 0.0)) fail(qp + ".stdp.tau_minus", "must be > 0");
      if (s.w_min < 0.0) fail(qp + ".stdp.w_min", "must be >= 0");
    }
  }
}

// ---------------------------------------------------------------------------
// CSV + connectome

namespace {

std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::string trimmed = line;
    trimmed.erase(0, trimmed.find_first_not_of(" \t"));
    if (trimmed.empty() || trimmed[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cell.erase(0, cell.find_first_not_of(" \t"));
      cell.erase(cell.find_last_not_of(" \t") + 1);
      cells.push_back(cell);
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

double parse_cell(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("connectome: non-numeric cell '" + s +
                                "' at " + where);
  }
}

struct LabeledMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> values;
};

LabeledMatrix parse_labeled_matrix(std::istream& in, const char* what) {
  const auto rows = parse_csv(in);
  if (rows.size() < 2) {
    throw std::invalid_argument(std::string(what) + ": need header plus rows");
  }
  LabeledMatrix m;
  m.labels.assign(rows[0].begin() + 1, rows[0].end());
  const std::size_t n = m.labels.size();
  if (rows.size() != n + 1) {
    throw std::invalid_argument(std::string(what) + ": expected " +
                                std::to_string(n) + " data rows, got " +
                                std::to_string(rows.size() - 1));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = rows[i + 1];
    if (row.size() != n + 1) {
      throw std::invalid_argument(std::string(what) + ": ragged row " +
                                  std::to_string(i + 1));
    }
    if (row[0] != m.labels[i]) {
      throw std::invalid_argument(std::string(what) + ": row label '" +
                                  row[0] + "' does not match column label '" +
                                  m.labels[i] + "'");
    }
    std::vector<double> vals;
    for (std::size_t c = 1; c < row.size(); ++c) {
      vals.push_back(parse_cell(row[c], std::string(what) + " row " +
                                            std::to_string(i + 1) + " col " +
                                            std::to_string(c)));
    }
    m.values.push_back(std::move(vals));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = i + 1; k < n; ++k) {
      if (m.labels[i] == m.labels[k]) {
        throw std::invalid_argument(std::string(what) + ": duplicate label '" +
                                    m.labels[i] + "'");
      }
    }
  }
  return m;
}

}  // namespace

ConnectomeMatrix load_connectome(std::istream& density_csv,
                                 std::istream* distance_csv) {
  ConnectomeMatrix c;
  LabeledMatrix d = parse_labeled_matrix(density_csv, "density matrix");
  c.labels = std::move(d.labels);
  c.density = std::move(d.values);
  if (distance_csv != nullptr) {
    LabeledMatrix dist = parse_labeled_matrix(*distance_csv, "distance matrix");
    if (dist.labels != c.labels) {
      throw std::invalid_argument(
          "connectome: label mismatch between density and distance files");
    }
    const std::size_t n = c.labels.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (dist.values[i][i] != 0.0) {
        throw std::invalid_argument(
            "connectome: distance diagonal must be zero");
      }
      for (std::size_t k = 0; k < n; ++k) {
        if (dist.values[i][k] != dist.values[k][i]) {
          throw std::invalid_argument(
              "connectome: distance matrix must be symmetric");
        }
        if (dist.values[i][k] < 0.0) {
          throw std::invalid_argument("connectome: negative distance");
        }
      }
    }
    c.has_distances = true;
    c.distance_mm = std::move(dist.values);
  }
  return c;
}

ConnectomeMatrix load_connectome_files(const std::string& density_path,
                                       const std::string& distance_path) {
  std::ifstream d(density_path);
  if (!d) throw std::runtime_error("cannot open " + density_path);
  if (distance_path.empty()) return load_connectome(d);
  std::ifstream dist(distance_path);
  if (!dist) throw std::runtime_error("cannot open " + distance_path);
  return load_connectome(d, &dist);
}

// ---------------------------------------------------------------------------
// Layout + wiring

namespace {

struct Layout {
  std::vector<AreaSpec> areas;
  std::vector<PopulationInfo> pops;
  std::map<std::string, std::uint16_t> pop_index;
  VertexId n_vertices = 0;
};

Layout make_layout(const NetworkConfig& cfg) {
  Layout lay;
  VertexId next = 0;
  for (std::size_t ai = 0; ai < cfg.areas.size(); ++ai) {
    const AreaConfig& a = cfg.areas[ai];
    AreaSpec spec;
    spec.area_id = static_cast<std::uint32_t>(ai);
    spec.name = a.name;
    spec.first_vertex = next;
    for (int d = 0; d < 3; ++d) {
      spec.box.lo[d] = a.centroid[d] - 0.5 * a.extent[d];
      spec.box.hi[d] = a.centroid[d] + 0.5 * a.extent[d];
    }
    for (const PopulationConfig& p : a.populations) {
      PopulationInfo info;
      info.qualified_name = a.name + "." + p.name;
      info.area = static_cast<std::uint32_t>(ai);
      info.first = next;
      info.count = static_cast<VertexId>(p.count);
      info.params = p.neuron;
      info.u_init = p.u_init.value_or(p.neuron.u_rest);
      info.drive_dc_pa = p.drive.dc_pa;
      info.drive_poisson_rate_hz = p.drive.poisson_rate_hz;
      info.drive_poisson_weight_pa = p.drive.poisson_weight_pa;
      info.drive_key = RngStream::keyed(cfg.seed, fnv1a64("drive"),
                                        fnv1a64(info.qualified_name))
                           .key();
      lay.pop_index[info.qualified_name] =
          static_cast<std::uint16_t>(lay.pops.size());
      lay.pops.push_back(std::move(info));
      next += static_cast<VertexId>(p.count);
    }
    spec.n_neurons = next - spec.first_vertex;
    lay.areas.push_back(std::move(spec));
  }
  lay.n_vertices = next;
  return lay;
}

double expected_edges(const ProjectionConfig& q, double n_src, double n_tgt) {
  switch (q.rule.kind) {
    case ConnectionRule::Kind::fixed_indegree:
      return static_cast<double>(q.rule.k) * n_tgt;
    case ConnectionRule::Kind::pairwise_bernoulli:
      return q.rule.p * n_src * n_tgt;
  }
  return 0.0;
}

double expected_distinct_sources(const ProjectionConfig& q, double n_src,
                                 double n_tgt) {
  if (n_src <= 0.0) return 0.0;
  switch (q.rule.kind) {
    case ConnectionRule::Kind::fixed_indegree: {
      const double draws = static_cast<double>(q.rule.k) * n_tgt;
      return n_src * (1.0 - std::pow(1.0 - 1.0 / n_src, draws));
    }
    case ConnectionRule::Kind::pairwise_bernoulli:
      return n_src * (1.0 - std::pow(1.0 - q.rule.p, n_tgt));
  }
  return 0.0;
}

}  // namespace

std::vector<CostEstimate> estimate_area_costs(const NetworkConfig& cfg) {
  const Layout lay = make_layout(cfg);
  std::vector<double> owned(cfg.areas.size(), 0.0);
  std::vector<double> in_edges(cfg.areas.size(), 0.0);
  std::vector<double> remote_pre(cfg.areas.size(), 0.0);
  for (const PopulationInfo& p : lay.pops) {
    owned[p.area] += p.count;
  }
  for (const ProjectionConfig& q : cfg.projections) {
    const PopulationInfo& src = lay.pops[lay.pop_index.at(q.source)];
    const PopulationInfo& tgt = lay.pops[lay.pop_index.at(q.target)];
    const double e = expected_edges(q, src.count, tgt.count);
    in_edges[tgt.area] += e;
    if (src.area != tgt.area) {
      remote_pre[tgt.area] +=
          expected_distinct_sources(q, src.count, tgt.count);
    }
  }
  std::vector<CostEstimate> costs;
  for (std::size_t a = 0; a < cfg.areas.size(); ++a) {
    costs.push_back(estimate_area_cost(owned[a], remote_pre[a], in_edges[a]));
  }
  return costs;
}

NetworkInstance build_network(const NetworkConfig& cfg,
                              const ConnectomeMatrix* connectome) {
  validate_config(cfg);
  Layout lay = make_layout(cfg);

  NetworkInstance net;
  net.dt = cfg.dt_ms;
  net.d_min_steps = cfg.d_min_steps();
  net.d_max_steps = cfg.d_max_steps();
  net.seed = cfg.seed;
  net.areas = std::move(lay.areas);
  net.populations = lay.pops;

  // Coordinates: uniform inside each area's box, keyed by area name so a
  // population keeps its geometry when other areas come or go.
  net.coords.resize(lay.n_vertices);
  net.pop_of_vertex.resize(lay.n_vertices);
  net.area_of_vertex.resize(lay.n_vertices);
  for (std::size_t ai = 0; ai < net.areas.size(); ++ai) {
    const AreaSpec& a = net.areas[ai];
    const RngStream coords =
        RngStream::keyed(cfg.seed, fnv1a64("coords"), fnv1a64(a.name));
    for (std::uint64_t i = 0; i < a.n_neurons; ++i) {
      const VertexId v = a.first_vertex + static_cast<VertexId>(i);
      for (int d = 0; d < 3; ++d) {
        const double u = coords.uniform(i * 3 + d);
        net.coords[v][d] = a.box.lo[d] + u * (a.box.hi[d] - a.box.lo[d]);
      }
      net.area_of_vertex[v] = static_cast<std::uint16_t>(ai);
    }
  }
  for (std::size_t pi = 0; pi < net.populations.size(); ++pi) {
    const PopulationInfo& p = net.populations[pi];
    for (VertexId v = p.first; v < p.first + p.count; ++v) {
      net.pop_of_vertex[v] = static_cast<std::uint16_t>(pi);
    }
  }

  // Interareal distance lookup for distance-rule delays.
  auto area_distance = [&](std::uint32_t a, std::uint32_t b) -> double {
    if (connectome == nullptr || !connectome->has_distances) {
      throw std::invalid_argument(
          "delay rule 'distance' requires a connectome distance matrix");
    }
    auto find = [&](const std::string& name) -> std::size_t {
      for (std::size_t i = 0; i < connectome->labels.size(); ++i) {
        if (connectome->labels[i] == name) return i;
      }
      throw std::invalid_argument("area '" + name +
                                  "' not present in connectome labels");
    };
    return connectome->distance_mm[find(net.areas[a].name)]
                                  [find(net.areas[b].name)];
  };

  std::vector<Edge> edges;
  for (std::size_t qi = 0; qi < cfg.projections.size(); ++qi) {
    const ProjectionConfig& q = cfg.projections[qi];
    const PopulationInfo& src = net.populations[lay.pop_index.at(q.source)];
    const PopulationInfo& tgt = net.populations[lay.pop_index.at(q.target)];

    ProjectionInfo info;
    info.name = q.source + "->" + q.target;
    info.polarity = q.polarity;
    info.plastic = q.plastic;
    info.stdp = q.stdp;
    net.projections.push_back(info);
    const std::uint64_t proj_key = fnv1a64(info.name);

    double fixed_delay_ms = -1.0;
    if (q.delay.kind == DelayRule::Kind::constant) {
      fixed_delay_ms = q.delay.ms;
    } else if (q.delay.kind == DelayRule::Kind::distance) {
      fixed_delay_ms =
          area_distance(src.area, tgt.area) / q.delay.velocity_mm_per_ms +
          q.delay.offset_ms;
    }
    auto quantize = [&](double ms) -> std::uint16_t {
      const int steps = static_cast<int>(std::lround(ms / cfg.dt_ms));
      return static_cast<std::uint16_t>(
          std::clamp(steps, net.d_min_steps, net.d_max_steps));
    };

    // Independent per-target streams keyed by projection name and the
    // target's index within its population: reproducible regardless of build
    // order and stable when unrelated areas are added or removed.
    for (VertexId tl = 0; tl < tgt.count; ++tl) {
      const VertexId target = tgt.first + tl;
      const RngStream conn =
          RngStream::keyed(cfg.seed, fnv1a64("conn"), proj_key, tl);
      const RngStream wstream =
          RngStream::keyed(cfg.seed, fnv1a64("weight"), proj_key, tl);
      const RngStream dstream =
          RngStream::keyed(cfg.seed, fnv1a64("delay"), proj_key, tl);

      std::uint64_t ordinal = 0;
      auto emit = [&](VertexId source) {
        edges.push_back({source, target});
        net.projection_of_edge.push_back(static_cast<std::uint16_t>(qi));
        double w = 0.0;
        switch (q.weight.kind) {
          case WeightRule::Kind::constant:
            w = q.weight.value;
            break;
          case WeightRule::Kind::normal:
            w = q.weight.mean + q.weight.sd * wstream.normal(ordinal);
            break;
        }
        net.weight.push_back(w);
        std::uint16_t delay;
        switch (q.delay.kind) {
          case DelayRule::Kind::constant:
          case DelayRule::Kind::distance:
            delay = quantize(fixed_delay_ms);
            break;
          case DelayRule::Kind::uniform_ms:
            delay = quantize(q.delay.low_ms +
                             dstream.uniform(ordinal) *
                                 (q.delay.high_ms - q.delay.low_ms));
            break;
          case DelayRule::Kind::uniform_steps:
            delay = static_cast<std::uint16_t>(
                q.delay.low_steps +
                dstream.uniform_int(ordinal, q.delay.high_steps -
                                                 q.delay.low_steps + 1));
            break;
        }
        net.delay_steps.push_back(delay);
        ++ordinal;
      };

      switch (q.rule.kind) {
        case ConnectionRule::Kind::fixed_indegree:
          for (std::uint32_t k = 0; k < q.rule.k; ++k) {
            emit(src.first + static_cast<VertexId>(
                                 conn.uniform_int(k, src.count)));
          }
          break;
        case ConnectionRule::Kind::pairwise_bernoulli:
          if (q.rule.p > 0.0) {
            for (VertexId sl = 0; sl < src.count; ++sl) {
              if (conn.uniform(sl) < q.rule.p) emit(src.first + sl);
            }
          }
          break;
      }
    }
  }

  net.graph = build_graph(lay.n_vertices, std::move(edges));
  return net;
}

PartitionPlan plan_decomposition(const NetworkConfig& cfg,
                                 const NetworkInstance& net, int n_ranks,
                                 int n_threads) {
  const std::vector<CostEstimate> costs = estimate_area_costs(cfg);
  std::vector<double> bytes;
  for (const CostEstimate& c : costs) bytes.push_back(c.bytes());
  const AreaProcessMap map = map_areas_to_processes(bytes, n_ranks);

  std::vector<DivisionGrid> grids;
  for (std::size_t a = 0; a < net.areas.size(); ++a) {
    const AreaSpec& area = net.areas[a];
    const int cells = static_cast<int>(map.ranks_of_area[a].size());
    const Point3 extent{area.box.hi[0] - area.box.lo[0],
                        area.box.hi[1] - area.box.lo[1],
                        area.box.hi[2] - area.box.lo[2]};
    const std::array<int, 3> parts = near_cubic_parts(cells, extent);
    const std::span<const Point3> coords(net.coords.data() + area.first_vertex,
                                         area.n_neurons);
    // Keep at least ~100 sample points per cell so the quantile cuts stay
    // close to the true population quantiles even for small areas.
    const PositionSample sample = sample_positions(
        coords, cfg.decomposition.sample_rate,
        hash_combine(mix64(cfg.seed), fnv1a64(area.name)),
        static_cast<std::size_t>(cells) * 100);
    grids.push_back(multisection_divide(sample.points, parts, area.box));
  }

  PartitionPlan plan =
      make_partition_plan(net.areas, map, grids, net.coords, n_threads);
  validate_partition(plan, net.n_vertices());
  measure_remote_pre(net, plan);
  return plan;
}

void measure_remote_pre(const NetworkInstance& net, PartitionPlan& plan) {
  std::vector<std::vector<bool>> seen(
      plan.n_ranks, std::vector<bool>(net.n_vertices(), false));
  std::vector<double> counts(plan.n_ranks, 0.0);
  for (const Edge& e : net.graph.edges) {
    const int r = plan.owner[e.post].first;
    if (plan.owner[e.pre].first != r && !seen[r][e.pre]) {
      seen[r][e.pre] = true;
      counts[r] += 1.0;
    }
  }
  plan.remote_pre_estimate = std::move(counts);
}

// ---------------------------------------------------------------------------
// Benchmark network generators

NetworkConfig make_balanced_random_net(double scale,
                                       const BalancedNetOptions& opts) {
  if (scale < 0.001) throw std::invalid_argument("scale too small");
  NetworkConfig cfg;
  cfg.dt_ms = opts.dt_ms;
  cfg.d_min_ms = opts.delay_low_steps * opts.dt_ms;
  cfg.d_max_ms = opts.delay_high_steps * opts.dt_ms;
  cfg.seed = opts.seed;
  cfg.run_ms = 1000.0;

  const auto n_exc = static_cast<std::uint64_t>(
      std::llround(10000.0 * scale * opts.exc_fraction));
  const auto n_inh = static_cast<std::uint64_t>(
      std::llround(10000.0 * scale * (1.0 - opts.exc_fraction)));

  NeuronParams neuron;
  neuron.tau_m = 10.0;
  neuron.u_rest = -70.0;
  neuron.r_mohm = 40.0;
  neuron.theta = -50.0;
  neuron.u_reset = -70.0;
  neuron.t_refractory = 2.0;
  neuron.tau_syn_exc = 0.5;
  neuron.tau_syn_inh = 0.5;

  AreaConfig area;
  area.name = "net";
  area.centroid = {0.0, 0.0, 0.0};
  area.extent = {1.0, 1.0, 1.0};

  DriveConfig drive;
  drive.poisson_rate_hz = opts.nu_ext_hz;
  drive.poisson_weight_pa = opts.w_exc_pa;

  PopulationConfig exc{"E", std::max<std::uint64_t>(1, n_exc), neuron, drive, {}};
  PopulationConfig inh{"I", std::max<std::uint64_t>(1, n_inh), neuron, drive, {}};
  area.populations = {exc, inh};
  cfg.areas = {area};

  DelayRule delay;
  delay.kind = DelayRule::Kind::uniform_steps;
  delay.low_steps = opts.delay_low_steps;
  delay.high_steps = opts.delay_high_steps;

  auto proj = [&](const std::string& s, const std::string& t,
                  std::uint32_t k, double w, Polarity pol,
                  bool plastic) {
    ProjectionConfig q;
    q.source = s;
    q.target = t;
    q.rule.kind = ConnectionRule::Kind::fixed_indegree;
    q.rule.k = k;
    q.weight.kind = WeightRule::Kind::constant;
    q.weight.value = w;
    q.delay = delay;
    q.polarity = pol;
    q.plastic = plastic;
    if (plastic) {
      q.stdp = opts.stdp_params;
      q.stdp.w_ref = opts.w_exc_pa;
    }
    return q;
  };

  const double w_inh = -opts.g * opts.w_exc_pa;
  cfg.projections = {
      proj("net.E", "net.E", opts.k_exc, opts.w_exc_pa, Polarity::exc,
           opts.stdp),
      proj("net.E", "net.I", opts.k_exc, opts.w_exc_pa, Polarity::exc, false),
      proj("net.I", "net.E", opts.k_inh, w_inh, Polarity::inh, false),
      proj("net.I", "net.I", opts.k_inh, w_inh, Polarity::inh, false),
  };
  validate_config(cfg);
  return cfg;
}

MicrocircuitTable load_microcircuit_table(std::istream& populations_csv,
                                          std::istream& connectivity_csv) {
  MicrocircuitTable t;
  const auto pop_rows = parse_csv(populations_csv);
  for (std::size_t i = 0; i < pop_rows.size(); ++i) {
    const auto& row = pop_rows[i];
    if (i == 0 && row.size() >= 2 && row[0] == "population") continue;  // header
    if (row.size() != 2) {
      throw std::invalid_argument("population table: expected 'name,count'");
    }
    t.populations.push_back(row[0]);
    t.full_counts.push_back(
        static_cast<std::uint64_t>(parse_cell(row[1], "population counts")));
  }
  LabeledMatrix m = parse_labeled_matrix(connectivity_csv, "microcircuit table");
  if (m.labels != t.populations) {
    throw std::invalid_argument(
        "microcircuit table: population list does not match connectivity "
        "labels");
  }
  t.prob = std::move(m.values);
  return t;
}

MicrocircuitTable load_microcircuit_files(const std::string& populations_path,
                                          const std::string& connectivity_path) {
  std::ifstream p(populations_path);
  if (!p) throw std::runtime_error("cannot open " + populations_path);
  std::ifstream c(connectivity_path);
  if (!c) throw std::runtime_error("cannot open " + connectivity_path);
  return load_microcircuit_table(p, c);
}

NetworkConfig make_layered_cortex_net(const ConnectomeMatrix& connectome,
                                      const MicrocircuitTable& table,
                                      const LayeredNetOptions& opts) {
  if (connectome.labels.empty()) {
    throw std::invalid_argument("connectome has no areas");
  }
  NetworkConfig cfg;
  cfg.dt_ms = opts.dt_ms;
  cfg.seed = opts.seed;
  cfg.run_ms = 1000.0;

  NeuronParams neuron;  // same family as the balanced network
  neuron.tau_m = 10.0;
  neuron.u_rest = -70.0;
  neuron.r_mohm = 40.0;
  neuron.theta = -50.0;
  neuron.u_reset = -70.0;
  neuron.t_refractory = 2.0;
  neuron.tau_syn_exc = 0.5;
  neuron.tau_syn_inh = 0.5;

  double max_delay_ms = std::max(opts.exc_delay_ms, opts.inh_delay_ms);

  for (std::size_t ai = 0; ai < connectome.labels.size(); ++ai) {
    AreaConfig area;
    area.name = connectome.labels[ai];
    area.centroid = {2.0 * static_cast<double>(ai), 0.0, 0.0};
    area.extent = {1.0, 1.0, 1.0};
    for (std::size_t pi = 0; pi < table.populations.size(); ++pi) {
      PopulationConfig pop;
      pop.name = table.populations[pi];
      pop.count = std::max<std::uint64_t>(
          1, static_cast<std::uint64_t>(
                 std::llround(opts.scale * table.full_counts[pi])));
      pop.neuron = neuron;
      pop.drive.poisson_rate_hz = opts.bg_rate_hz;
      pop.drive.poisson_weight_pa = opts.w_exc_pa;
      area.populations.push_back(std::move(pop));
    }
    cfg.areas.push_back(std::move(area));
  }

  auto is_exc = [](const std::string& pop) { return pop.back() == 'E'; };

  // Intra-area microcircuit wiring from the fixture table.
  for (const AreaConfig& area : cfg.areas) {
    for (std::size_t ti = 0; ti < table.populations.size(); ++ti) {
      for (std::size_t si = 0; si < table.populations.size(); ++si) {
        const double p = table.prob[ti][si];
        if (p <= 0.0) continue;
        ProjectionConfig q;
        q.source = area.name + "." + table.populations[si];
        q.target = area.name + "." + table.populations[ti];
        q.rule.kind = ConnectionRule::Kind::pairwise_bernoulli;
        q.rule.p = p;
        q.weight.kind = WeightRule::Kind::constant;
        const bool exc = is_exc(table.populations[si]);
        q.weight.value = exc ? opts.w_exc_pa : -opts.g * opts.w_exc_pa;
        q.polarity = exc ? Polarity::exc : Polarity::inh;
        q.delay.kind = DelayRule::Kind::constant;
        q.delay.ms = exc ? opts.exc_delay_ms : opts.inh_delay_ms;
        cfg.projections.push_back(std::move(q));
      }
    }
  }

  // Inter-area wiring: connectome density scaled to probabilities, sources
  // from the configured excitatory layers onto layer-specific targets.
  for (std::size_t s = 0; s < connectome.labels.size(); ++s) {
    for (std::size_t t = 0; t < connectome.labels.size(); ++t) {
      if (s == t) continue;
      const double density = connectome.density[s][t];
      if (density <= 0.0) continue;
      for (const std::string& src_pop : opts.interarea_sources) {
        for (const auto& [tgt_pop, frac] : opts.interarea_targets) {
          const double p =
              std::clamp(density * opts.connectome_scale * frac, 0.0, 1.0);
          if (p <= 0.0) continue;
          ProjectionConfig q;
          q.source = connectome.labels[s] + "." + src_pop;
          q.target = connectome.labels[t] + "." + tgt_pop;
          q.rule.kind = ConnectionRule::Kind::pairwise_bernoulli;
          q.rule.p = p;
          q.weight.kind = WeightRule::Kind::constant;
          q.weight.value = opts.w_exc_pa;
          q.polarity = Polarity::exc;
          if (connectome.has_distances) {
            q.delay.kind = DelayRule::Kind::distance;
            q.delay.velocity_mm_per_ms = opts.velocity_mm_per_ms;
            q.delay.offset_ms = opts.interarea_offset_ms;
            max_delay_ms = std::max(
                max_delay_ms, connectome.distance_mm[s][t] /
                                      opts.velocity_mm_per_ms +
                                  opts.interarea_offset_ms);
          } else {
            // No distance matrix shipped: fall back to the plain delay rule.
            q.delay.kind = DelayRule::Kind::constant;
            q.delay.ms = opts.exc_delay_ms;
          }
          cfg.projections.push_back(std::move(q));
        }
      }
    }
  }

  cfg.d_min_ms = cfg.dt_ms;
  cfg.d_max_ms = max_delay_ms;
  cfg.decomposition.ranks = static_cast<int>(connectome.labels.size());
  validate_config(cfg);
  return cfg;
}

}  // namespace spikesim

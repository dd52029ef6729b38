#include "spikesim/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "spikesim/rng.hpp"

namespace spikesim {

CostEstimate estimate_area_cost(double n_owned, double expected_remote_pre,
                                double n_in_edges) {
  CostEstimate c;
  c.n_pre = n_owned + expected_remote_pre;
  c.n_post = n_owned;
  c.n_edges = n_in_edges;
  return c;
}

AreaProcessMap map_areas_to_processes(const std::vector<double>& costs,
                                      int n_ranks) {
  const int n_areas = static_cast<int>(costs.size());
  if (n_areas == 0) throw std::invalid_argument("no areas to map");
  if (n_ranks < n_areas) {
    throw std::invalid_argument(
        "n_ranks (" + std::to_string(n_ranks) + ") < n_areas (" +
        std::to_string(n_areas) + "): merge areas or add ranks");
  }
  double total = std::accumulate(costs.begin(), costs.end(), 0.0);
  if (total <= 0.0) total = 1.0;

  std::vector<int> assigned(n_areas);
  std::vector<double> remainder(n_areas);
  int sum = 0;
  for (int a = 0; a < n_areas; ++a) {
    const double quota = n_ranks * costs[a] / total;
    assigned[a] = static_cast<int>(std::floor(quota));
    remainder[a] = quota - assigned[a];
    if (assigned[a] < 1) {
      assigned[a] = 1;
      remainder[a] = -1.0;  // lifted to the floor; out of the remainder race
    }
    sum += assigned[a];
  }

  auto order_by_remainder = [&](bool descending) {
    std::vector<int> idx(n_areas);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int x, int y) {
      if (remainder[x] != remainder[y]) {
        return descending ? remainder[x] > remainder[y]
                          : remainder[x] < remainder[y];
      }
      return descending ? x < y : x > y;
    });
    return idx;
  };

  if (sum < n_ranks) {
    const auto idx = order_by_remainder(true);
    int left = n_ranks - sum;
    for (int i = 0; left > 0; i = (i + 1) % n_areas) {
      ++assigned[idx[i]];
      --left;
    }
  } else if (sum > n_ranks) {
    // Overshoot can only come from floor lifts; take seats back from the
    // smallest remainders among areas above the floor.
    const auto idx = order_by_remainder(false);
    int excess = sum - n_ranks;
    while (excess > 0) {
      bool any = false;
      for (int i : idx) {
        if (excess == 0) break;
        if (assigned[i] > 1) {
          --assigned[i];
          --excess;
          any = true;
        }
      }
      if (!any) {
        throw std::logic_error("rank apportionment cannot satisfy floors");
      }
    }
  }

  AreaProcessMap map;
  map.n_ranks = n_ranks;
  map.ranks_of_area.resize(n_areas);
  int next = 0;
  for (int a = 0; a < n_areas; ++a) {
    for (int k = 0; k < assigned[a]; ++k) map.ranks_of_area[a].push_back(next++);
  }
  return map;
}

namespace {

std::vector<std::pair<std::uint32_t, std::uint32_t>> even_ranges(
    std::size_t count, int n_threads) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> ranges;
  const std::size_t base = count / n_threads;
  const std::size_t rem = count % n_threads;
  std::size_t begin = 0;
  for (int k = 0; k < n_threads; ++k) {
    const std::size_t len = base + (static_cast<std::size_t>(k) < rem ? 1 : 0);
    ranges.emplace_back(static_cast<std::uint32_t>(begin),
                        static_cast<std::uint32_t>(begin + len));
    begin += len;
  }
  return ranges;
}

void finish_plan(PartitionPlan& plan) {
  for (int r = 0; r < plan.n_ranks; ++r) {
    auto& owned = plan.owned[r];
    std::sort(owned.begin(), owned.end());
    plan.thread_ranges[r] = even_ranges(owned.size(), plan.n_threads);
    for (int k = 0; k < plan.n_threads; ++k) {
      const auto [b, e] = plan.thread_ranges[r][k];
      for (std::uint32_t i = b; i < e; ++i) plan.owner[owned[i]] = {r, k};
    }
  }
  plan.remote_pre_estimate.assign(plan.n_ranks, 0.0);
}

}  // namespace

PartitionPlan random_equivalent_map(VertexId n_vertices, int n_ranks,
                                    std::uint64_t seed, int n_threads) {
  if (n_ranks < 1 || n_threads < 1) {
    throw std::invalid_argument("rank and thread counts must be >= 1");
  }
  std::vector<VertexId> ids(n_vertices);
  std::iota(ids.begin(), ids.end(), 0);
  RngSequence rng(RngStream::keyed(seed, fnv1a64("random_equivalent_map")));
  deterministic_shuffle(ids, rng);

  PartitionPlan plan;
  plan.n_ranks = n_ranks;
  plan.n_threads = n_threads;
  plan.owner.assign(n_vertices, {-1, -1});
  plan.owned.resize(n_ranks);
  plan.thread_ranges.resize(n_ranks);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    plan.owned[i % n_ranks].push_back(ids[i]);
  }
  finish_plan(plan);
  return plan;
}

PositionSample sample_positions(std::span<const Point3> points, double rate,
                                std::uint64_t seed, std::size_t min_size) {
  if (points.empty()) {
    throw std::invalid_argument("sample_positions: empty input");
  }
  if (!(rate > 0.0) || rate > 1.0) {
    throw std::invalid_argument("sample_positions: rate must be in (0, 1]");
  }
  const std::size_t n = points.size();
  std::size_t size = static_cast<std::size_t>(std::ceil(rate * n));
  size = std::min(n, std::max(size, min_size));

  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  RngSequence rng(RngStream::keyed(seed, fnv1a64("sample_positions")));
  // Partial Fisher-Yates: the first `size` entries form the sample.
  for (std::size_t i = 0; i < size; ++i) {
    const std::size_t j = i + rng.uniform_int(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(size);
  std::sort(idx.begin(), idx.end());

  PositionSample s;
  s.indices = std::move(idx);
  s.points.reserve(size);
  for (std::uint32_t i : s.indices) s.points.push_back(points[i]);
  return s;
}

namespace {

// Split `count` items into `parts` groups, sizes differing by at most one,
// larger groups first.
std::vector<std::size_t> group_sizes(std::size_t count, int parts) {
  std::vector<std::size_t> sizes(parts);
  const std::size_t base = count / parts;
  const std::size_t rem = count % parts;
  for (int i = 0; i < parts; ++i) {
    sizes[i] = base + (static_cast<std::size_t>(i) < rem ? 1 : 0);
  }
  return sizes;
}

}  // namespace

DivisionGrid multisection_divide(std::span<const Point3> sample,
                                 std::array<int, 3> parts, const Box3& box) {
  if (sample.empty()) {
    throw std::invalid_argument("multisection_divide: empty sample");
  }
  for (int d = 0; d < 3; ++d) {
    if (parts[d] < 1) {
      throw std::invalid_argument("multisection_divide: parts must be >= 1");
    }
  }

  DivisionGrid grid;
  grid.parts = parts;
  grid.box = box;

  // Groups at the current level; each group is a list of sample indices.
  std::vector<std::vector<std::uint32_t>> groups(1);
  groups[0].resize(sample.size());
  std::iota(groups[0].begin(), groups[0].end(), 0);

  for (int d = 0; d < 3; ++d) {
    std::vector<std::vector<std::uint32_t>> next;
    for (auto& g : groups) {
      // Duplicate coordinates tie-break deterministically by point index, so
      // group sizes stay balanced even when a coordinate value straddles a
      // cut.
      std::sort(g.begin(), g.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (sample[a][d] != sample[b][d]) return sample[a][d] < sample[b][d];
        return a < b;
      });
      const auto sizes = group_sizes(g.size(), parts[d]);
      std::size_t at = 0;
      for (int i = 0; i < parts[d]; ++i) {
        next.emplace_back(g.begin() + at, g.begin() + at + sizes[i]);
        if (i + 1 < parts[d]) {
          const std::size_t cut_at = at + sizes[i];
          double cut;
          if (cut_at == 0) {
            cut = box.lo[d];
          } else if (cut_at >= g.size()) {
            cut = box.hi[d];
          } else {
            cut = 0.5 * (sample[g[cut_at - 1]][d] + sample[g[cut_at]][d]);
          }
          grid.cuts[d].push_back(cut);
        }
        at += sizes[i];
      }
    }
    groups = std::move(next);
  }

  grid.sample_cell_counts.reserve(groups.size());
  for (const auto& g : groups) grid.sample_cell_counts.push_back(g.size());
  return grid;
}

int DivisionGrid::locate(const Point3& p) const {
  int cell = 0;
  int group = 0;
  for (int d = 0; d < 3; ++d) {
    const int k = parts[d];
    int i = 0;
    if (k > 1) {
      const double* base = cuts[d].data() + static_cast<std::size_t>(group) *
                                                static_cast<std::size_t>(k - 1);
      // A point exactly on a cut goes to the lower cell.
      i = static_cast<int>(std::lower_bound(base, base + (k - 1), p[d]) - base);
    }
    cell = cell * k + i;
    group = group * k + i;
  }
  return cell;
}

std::vector<int> apply_division(std::span<const Point3> points,
                                const DivisionGrid& grid) {
  std::vector<int> cells;
  cells.reserve(points.size());
  for (const Point3& p : points) cells.push_back(grid.locate(p));
  return cells;
}

std::array<int, 3> near_cubic_parts(int n_ranks, const Point3& extent) {
  if (n_ranks < 1) throw std::invalid_argument("n_ranks must be >= 1");
  std::vector<int> factors;
  int n = n_ranks;
  for (int f = 2; f * f <= n; ++f) {
    while (n % f == 0) {
      factors.push_back(f);
      n /= f;
    }
  }
  if (n > 1) factors.push_back(n);
  std::sort(factors.rbegin(), factors.rend());

  std::array<int, 3> parts{1, 1, 1};
  for (int f : factors) {
    int best = 0;
    double best_len = -1.0;
    for (int d = 0; d < 3; ++d) {
      const double len = extent[d] / parts[d];
      if (len > best_len) {
        best_len = len;
        best = d;
      }
    }
    parts[best] *= f;
  }
  return parts;
}

PartitionPlan make_partition_plan(const std::vector<AreaSpec>& areas,
                                  const AreaProcessMap& map,
                                  const std::vector<DivisionGrid>& grids,
                                  std::span<const Point3> coords,
                                  int n_threads) {
  if (areas.size() != map.ranks_of_area.size() || areas.size() != grids.size()) {
    throw std::invalid_argument(
        "make_partition_plan: areas, map and grids must align");
  }
  if (n_threads < 1) throw std::invalid_argument("n_threads must be >= 1");

  VertexId n_vertices = 0;
  for (const AreaSpec& a : areas) {
    n_vertices = std::max(n_vertices,
                          static_cast<VertexId>(a.first_vertex + a.n_neurons));
  }
  if (coords.size() != n_vertices) {
    throw std::invalid_argument(
        "make_partition_plan: coordinate count does not match vertex count");
  }

  PartitionPlan plan;
  plan.n_ranks = map.n_ranks;
  plan.n_threads = n_threads;
  plan.owner.assign(n_vertices, {-1, -1});
  plan.owned.resize(map.n_ranks);
  plan.thread_ranges.resize(map.n_ranks);

  for (std::size_t a = 0; a < areas.size(); ++a) {
    const auto& ranks = map.ranks_of_area[a];
    const DivisionGrid& grid = grids[a];
    if (static_cast<int>(ranks.size()) != grid.n_cells()) {
      throw std::invalid_argument("area " + areas[a].name +
                                  ": grid cell count != rank count");
    }
    const VertexId first = areas[a].first_vertex;
    for (std::uint64_t i = 0; i < areas[a].n_neurons; ++i) {
      const VertexId v = first + static_cast<VertexId>(i);
      const int cell = grid.locate(coords[v]);
      plan.owned[ranks[cell]].push_back(v);
    }
  }
  finish_plan(plan);
  return plan;
}

void validate_partition(const PartitionPlan& plan, VertexId n_vertices) {
  if (plan.owner.size() != n_vertices) {
    throw std::runtime_error("partition covers wrong vertex count");
  }
  std::vector<std::uint8_t> seen(n_vertices, 0);
  for (int r = 0; r < plan.n_ranks; ++r) {
    for (VertexId v : plan.owned[r]) {
      if (v >= n_vertices) throw std::runtime_error("owned id out of range");
      if (seen[v]) {
        throw std::runtime_error("vertex " + std::to_string(v) +
                                 " owned by more than one rank");
      }
      seen[v] = 1;
      if (plan.owner[v].first != r) {
        throw std::runtime_error("owner map inconsistent with owned list");
      }
    }
  }
  for (VertexId v = 0; v < n_vertices; ++v) {
    if (!seen[v]) {
      throw std::runtime_error("vertex " + std::to_string(v) + " unowned");
    }
  }
}

namespace {

void dump_id_ranges(std::ostream& out, const std::vector<VertexId>& ids) {
  if (ids.empty()) {
    out << "none";
    return;
  }
  std::size_t i = 0;
  bool first = true;
  while (i < ids.size()) {
    std::size_t j = i;
    while (j + 1 < ids.size() && ids[j + 1] == ids[j] + 1) ++j;
    if (!first) out << ",";
    first = false;
    if (j == i) {
      out << ids[i];
    } else {
      out << ids[i] << "-" << ids[j];
    }
    i = j + 1;
  }
}

std::vector<VertexId> parse_id_ranges(const std::string& text) {
  std::vector<VertexId> ids;
  if (text == "none") return ids;
  std::istringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::size_t dash = item.find('-');
    if (dash == std::string::npos) {
      ids.push_back(static_cast<VertexId>(std::stoul(item)));
    } else {
      const VertexId a = static_cast<VertexId>(std::stoul(item.substr(0, dash)));
      const VertexId b =
          static_cast<VertexId>(std::stoul(item.substr(dash + 1)));
      for (VertexId v = a; v <= b; ++v) ids.push_back(v);
    }
  }
  return ids;
}

}  // namespace

void dump_plan(std::ostream& out, const PartitionPlan& plan) {
  out << "plan ranks " << plan.n_ranks << " threads " << plan.n_threads
      << " vertices " << plan.owner.size() << "\n";
  for (int r = 0; r < plan.n_ranks; ++r) {
    out << "rank " << r << " owned " << plan.owned[r].size() << " ids ";
    dump_id_ranges(out, plan.owned[r]);
    out << "\n";
    out << "rank " << r << " threads";
    for (const auto& [b, e] : plan.thread_ranges[r]) out << " " << b << " " << e;
    out << "\n";
    out << "rank " << r << " est_remote_pre " << plan.remote_pre_estimate[r]
        << "\n";
  }
}

PartitionPlan parse_plan(std::istream& in) {
  PartitionPlan plan;
  std::string line;
  VertexId n_vertices = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    if (tok == "plan") {
      std::string k1, k2, k3;
      if (!(ls >> k1 >> plan.n_ranks >> k2 >> plan.n_threads >> k3 >>
            n_vertices) ||
          k1 != "ranks" || k2 != "threads" || k3 != "vertices") {
        throw std::invalid_argument("plan header malformed");
      }
      plan.owner.assign(n_vertices, {-1, -1});
      plan.owned.resize(plan.n_ranks);
      plan.thread_ranges.resize(plan.n_ranks);
      plan.remote_pre_estimate.assign(plan.n_ranks, 0.0);
      have_header = true;
    } else if (tok == "rank") {
      if (!have_header) throw std::invalid_argument("rank line before header");
      int r = -1;
      std::string kind;
      ls >> r >> kind;
      if (r < 0 || r >= plan.n_ranks) {
        throw std::invalid_argument("plan rank id out of range");
      }
      if (kind == "owned") {
        std::size_t count = 0;
        std::string ids_kw, ranges;
        ls >> count >> ids_kw >> ranges;
        plan.owned[r] = parse_id_ranges(ranges);
        if (plan.owned[r].size() != count) {
          throw std::invalid_argument("plan owned count mismatch for rank " +
                                      std::to_string(r));
        }
      } else if (kind == "threads") {
        std::uint32_t b, e;
        while (ls >> b >> e) plan.thread_ranges[r].emplace_back(b, e);
      } else if (kind == "est_remote_pre") {
        ls >> plan.remote_pre_estimate[r];
      } else {
        throw std::invalid_argument("unknown plan line kind: " + kind);
      }
    } else if (tok == "grid" || tok == "cuts" || tok == "area") {
      continue;  // informational sections from the CLI dump
    } else {
      throw std::invalid_argument("unknown plan line: " + tok);
    }
  }
  if (!have_header) throw std::invalid_argument("plan header missing");
  for (int r = 0; r < plan.n_ranks; ++r) {
    for (int k = 0; k < plan.n_threads; ++k) {
      const auto [b, e] = plan.thread_ranges[r][k];
      for (std::uint32_t i = b; i < e; ++i) {
        plan.owner[plan.owned[r][i]] = {r, k};
      }
    }
  }
  validate_partition(plan, n_vertices);
  return plan;
}

}  // namespace spikesim

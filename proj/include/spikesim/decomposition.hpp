#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "spikesim/types.hpp"

namespace spikesim {

using Point3 = std::array<double, 3>;

struct Box3 {
  Point3 lo{0.0, 0.0, 0.0};
  Point3 hi{1.0, 1.0, 1.0};

  friend bool operator==(const Box3&, const Box3&) = default;
};

struct AreaSpec {
  std::uint32_t area_id = 0;
  std::string name;
  std::uint64_t n_neurons = 0;
  VertexId first_vertex = 0;  // areas occupy contiguous global id ranges
  Box3 box;
};

// Fixed per-item costs of the linear memory model.
inline constexpr double kBytesPerPre = 16.0;
inline constexpr double kBytesPerPost = 120.0;
inline constexpr double kBytesPerEdge = 32.0;

struct CostEstimate {
  double n_pre = 0.0;  // owned + (expected) remote pre-neurons
  double n_post = 0.0;
  double n_edges = 0.0;

  double bytes() const {
    return n_pre * kBytesPerPre + n_post * kBytesPerPost +
           n_edges * kBytesPerEdge;
  }
};

CostEstimate estimate_area_cost(double n_owned, double expected_remote_pre,
                                double n_in_edges);

struct AreaProcessMap {
  std::vector<std::vector<int>> ranks_of_area;
  int n_ranks = 0;
};

// Largest-remainder apportionment of ranks proportional to cost, floor of one
// rank per area; ties resolve to the lowest area id.
AreaProcessMap map_areas_to_processes(const std::vector<double>& costs,
                                      int n_ranks);

struct PartitionPlan {
  int n_ranks = 1;
  int n_threads = 1;
  std::vector<std::pair<std::int32_t, std::int32_t>> owner;  // per vertex
  std::vector<std::vector<VertexId>> owned;  // per rank, sorted ascending
  // Per rank, per thread: [begin, end) index range into the sorted owned list.
  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>>
      thread_ranges;
  std::vector<double> remote_pre_estimate;  // per rank, informational

  VertexId n_vertices() const { return static_cast<VertexId>(owner.size()); }

  friend bool operator==(const PartitionPlan&, const PartitionPlan&) = default;
};

// Naive baseline: seeded shuffle dealt round-robin into equal cells.
PartitionPlan random_equivalent_map(VertexId n_vertices, int n_ranks,
                                    std::uint64_t seed, int n_threads = 1);

struct PositionSample {
  std::vector<std::uint32_t> indices;  // into the source point list
  std::vector<Point3> points;
};

// Seeded uniform subsample without replacement,
// size = min(n, max(ceil(rate*n), min_size)).
PositionSample sample_positions(std::span<const Point3> points, double rate,
                                std::uint64_t seed, std::size_t min_size = 1);

// Recursive coordinate multisection. Cuts at rank-order quantiles of the
// sample; cells tile the given box. Cell ids nest as
// ((i0 * parts[1]) + i1) * parts[2] + i2.
struct DivisionGrid {
  std::array<int, 3> parts{1, 1, 1};
  Box3 box;
  // cuts[d] holds (groups_at_level_d * (parts[d]-1)) cut coordinates, where
  // groups_at_level_d = parts[0] * ... * parts[d-1].
  std::array<std::vector<double>, 3> cuts;
  std::vector<std::size_t> sample_cell_counts;

  int n_cells() const { return parts[0] * parts[1] * parts[2]; }
  int locate(const Point3& p) const;

  friend bool operator==(const DivisionGrid&, const DivisionGrid&) = default;
};

DivisionGrid multisection_divide(std::span<const Point3> sample,
                                 std::array<int, 3> parts, const Box3& box);

std::vector<int> apply_division(std::span<const Point3> points,
                                const DivisionGrid& grid);

// Greedy near-cubic factorization of a rank count; largest factors go to the
// longest axis.
std::array<int, 3> near_cubic_parts(int n_ranks, const Point3& extent);

// Combine area->rank map, per-area grids and coordinates into the final plan:
// rank from grid cell, thread from contiguous near-equal post-neuron ranges.
PartitionPlan make_partition_plan(const std::vector<AreaSpec>& areas,
                                  const AreaProcessMap& map,
                                  const std::vector<DivisionGrid>& grids,
                                  std::span<const Point3> coords,
                                  int n_threads);

// Every vertex has exactly one owner; rank/thread ids in range; owned lists
// consistent with the owner map. Throws on violation.
void validate_partition(const PartitionPlan& plan, VertexId n_vertices);

void dump_plan(std::ostream& out, const PartitionPlan& plan);
PartitionPlan parse_plan(std::istream& in);

}  // namespace spikesim

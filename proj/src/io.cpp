#include "spikesim/io.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace spikesim {

void write_raster(std::ostream& out, const SpikeLog& log, double dt) {
  char line[64];
  for (const SpikeEvent& e : log) {
    std::snprintf(line, sizeof(line), "%.6f %u\n",
                  static_cast<double>(e.step) * dt, e.id);
    out << line;
  }
}

SpikeLog read_raster(std::istream& in, double dt) {
  SpikeLog log;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    double t;
    VertexId id;
    if (!(ls >> t)) continue;  // blank
    if (!(ls >> id)) {
      throw std::invalid_argument("raster line " + std::to_string(line_no) +
                                  ": expected 'time_ms id'");
    }
    log.push_back({static_cast<Step>(std::llround(t / dt)), id});
  }
  return log;
}

void write_memory_csv(std::ostream& out,
                      const std::vector<MemoryCounters>& per_rank) {
  out << "rank,owned,pre_table,remote_pre,records,model_bytes\n";
  for (std::size_t r = 0; r < per_rank.size(); ++r) {
    const MemoryCounters& m = per_rank[r];
    out << r << "," << m.owned << "," << m.pre_table << "," << m.remote_pre
        << "," << m.records << "," << m.model_bytes << "\n";
  }
}

void write_timing_csv(std::ostream& out,
                      const std::vector<RankRunStats>& per_rank) {
  out << "rank,step,step_ms,deliver_ms_total,update_ms_total,"
         "exchange_wait_ms_total,total_ms\n";
  for (std::size_t r = 0; r < per_rank.size(); ++r) {
    const RankRunStats& s = per_rank[r];
    if (s.step_ms.empty()) {
      out << r << ",all,," << s.deliver_ms << "," << s.update_ms << ","
          << s.exchange_wait_ms << "," << s.total_ms << "\n";
      continue;
    }
    for (std::size_t t = 0; t < s.step_ms.size(); ++t) {
      out << r << "," << t << "," << s.step_ms[t];
      if (t + 1 == s.step_ms.size()) {
        out << "," << s.deliver_ms << "," << s.update_ms << ","
            << s.exchange_wait_ms << "," << s.total_ms;
      } else {
        out << ",,,,";
      }
      out << "\n";
    }
  }
}

}  // namespace spikesim

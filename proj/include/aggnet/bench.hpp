#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aggnet/engine.hpp"
#include "aggnet/maintain.hpp"

namespace aggnet {

struct WorkloadEvent {
  enum class Kind { Read, Write, EdgeAdd, EdgeDel, NodeAdd, NodeDel };
  int64_t ts = 0;
  Kind kind = Kind::Read;
  std::string a, b; // node labels; b used by edge events
  int64_t value = 0;
};

struct Trace {
  std::vector<WorkloadEvent> events;
};

std::string event_kind_name(WorkloadEvent::Kind k);

// CSV lines "ts,kind,node[,node2][,value]"; '#' comments.
void save_trace(const Trace& t, std::ostream& out);
Trace load_trace(std::istream& in);
Trace load_trace_file(const std::string& path);
void save_trace_file(const Trace& t, const std::string& path);

struct ZipfParams {
  double skew = 1.0;
  double write_read_ratio = 1.0; // expected writes per read
  int64_t count = 10000;
  uint64_t seed = 1;
  bool degree_correlated = false; // hot ranks follow out-degree instead of a shuffle
  int64_t value_range = 100;
};

// Zipfian node activity; also stores the exact expected per-node rates as the
// graph's activity estimates.
Trace gen_zipf(DataGraph& g, const ZipfParams& p);

// Just the activity estimates, no trace.
void assign_zipf_activity(DataGraph& g, const ZipfParams& p);

// Activity file: lines "label <write_rate> <read_rate>".
void load_activity_file(DataGraph& g, const std::string& path);

// Common-Log-Format-style lines; malformed lines are skipped and counted.
struct HttpTrace {
  struct Event {
    std::string client;
    int64_t ts;
  };
  std::vector<Event> events;
  size_t skipped = 0;
  size_t clients = 0;
};

HttpTrace parse_http_trace(std::istream& in);

// Clients mapped onto graph nodes round-robin; when there are fewer clients
// than nodes, each client's events are split across its node set (seeded).
Trace http_to_trace(const HttpTrace& h, DataGraph& g, double write_read_ratio, uint64_t seed,
                    int64_t value_range = 100);

struct MetricsReport {
  double wall_seconds = 0;
  double ops_per_sec = 0;
  double read_latency_mean_us = 0;
  double read_latency_p95_us = 0;
  double read_latency_max_us = 0;
  std::map<std::string, int64_t> op_counts;
  int64_t errors = 0;
  double sharing_index = 0;
  double mean_depth = 0;
  double plan_cost = 0;
  double replay_seconds = 0;
  std::vector<std::pair<std::string, AggResult>> final_reads; // quiescent, by label
  std::vector<Decision> final_decisions; // plan in force when the replay ended

  std::string text() const;
  std::string json() const;
  static std::string csv_header();
  std::string csv_row(const std::string& tag) const;
};

struct BenchConfig {
  EngineConfig engine;
  PlanMethod plan_method = PlanMethod::Optimal;
  std::optional<DataflowPlan> fixed_plan; // replay under this plan instead of deciding
  bool isolated_latency = false; // each read runs alone, timed around the call
  bool capture_final_reads = true;
  int adapt_every = 0; // events between frontier re-decisions; 0 disables
  AdaptThresholds adapt_thresholds;
  MaintainParams maintain;
};

// Replays the trace through the engine; structural updates apply in an
// exclusive phase with both pools drained.
MetricsReport run_benchmark(DataGraph& g, OverlayGraph& o, const QuerySpec& q, UdaPtr uda,
                            const CostModel& cm, const Trace& trace, const BenchConfig& cfg);

} // namespace aggnet

#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "aggnet/dataflow.hpp"
#include "aggnet/uda.hpp"

namespace aggnet {

enum class WriteModel { Queueing, UniThread };

struct EngineConfig {
  int read_threads = 1;
  int write_threads = 1;
  WriteModel write_model = WriteModel::Queueing;
  WindowSpec window = WindowSpec::count(1);
};

// Executes reads and writes over a decided overlay. Writes propagate deltas
// along positive/negative out-edges into push-decided nodes; reads resolve
// pull subtrees on the calling thread and snapshot push PAOs.
class Engine {
public:
  Engine(const DataGraph& g, const OverlayGraph& o, UdaPtr uda, const DataflowPlan& plan,
         EngineConfig cfg);
  ~Engine();

  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  // Synchronous write: window update plus full propagation on this thread
  // (uni-thread) or micro-task enqueue (queueing).
  void write(NodeId v, int64_t ts, int64_t value);
  // Pooled write; the write worker runs the same path as write().
  void submit_write(NodeId v, int64_t ts, int64_t value);

  AggResult read(NodeId v) const;
  void submit_read(NodeId v, std::function<void(AggResult)> done);

  size_t expire(int64_t now);

  void drain();

  // Swap in a new plan between epochs (pools must be drained) and rebuild
  // every push PAO from the writer windows.
  void set_plan(const DataflowPlan& plan);
  // Rebuild after external overlay mutation (maintenance epoch).
  void rebuild();

  uint64_t node_version(OvlId n) const;
  const DataflowPlan& plan() const { return plan_; }
  const EngineConfig& config() const { return cfg_; }

  // Observed activity since the last reset, for adaptive re-decision.
  void reset_observed();
  void observed_rates(double seconds, std::vector<double>& write_rate,
                      std::vector<double>& read_rate) const;

  uint64_t error_count() const { return errors_.load(); }
  void count_error() { errors_.fetch_add(1); }

private:
  struct NodeState {
    PaoPtr pao; // maintained only at push-decided nodes
    uint64_t version = 0;
  };

  struct Delta {
    std::shared_ptr<Pao> removed; // old contribution, may be null
    std::shared_ptr<Pao> added;   // new contribution, may be null
  };

  void apply_at(OvlId n, const std::vector<Delta>& deltas);
  void propagate(OvlId n, std::shared_ptr<std::vector<Delta>> deltas);
  PaoPtr resolve(OvlId n) const;
  std::shared_ptr<std::vector<Delta>> append_window(NodeId v, int64_t ts, int64_t value);

  const DataGraph& g_;
  const OverlayGraph& o_;
  UdaPtr uda_;
  DataflowPlan plan_;
  EngineConfig cfg_;

  std::vector<NodeState> state_;
  mutable std::vector<std::mutex> node_mutex_;

  struct WriterWindow {
    std::deque<StreamEntry> values;
    std::mutex mutex;
  };
  std::vector<std::unique_ptr<WriterWindow>> window_; // by graph node

  mutable std::vector<std::atomic<uint64_t>> observed_writes_, observed_reads_;
  std::atomic<uint64_t> errors_{0};

  // shared worker-pool machinery
  class Pool;
  std::unique_ptr<Pool> write_pool_, read_pool_;
};

} // namespace aggnet

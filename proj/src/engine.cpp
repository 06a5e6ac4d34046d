#include "aggnet/engine.hpp"

#include <algorithm>

namespace aggnet {

// Fixed-size worker pool; drain() waits until every submitted task finished.
class Engine::Pool {
public:
  explicit Pool(int threads) {
    for (int i = 0; i < threads; ++i)
      workers_.emplace_back([this] { run(); });
  }

  ~Pool() {
    {
      std::lock_guard<std::mutex> lk(mutex_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& w : workers_) w.join();
  }

  void submit(std::function<void()> task) {
    {
      std::lock_guard<std::mutex> lk(mutex_);
      pending_.fetch_add(1, std::memory_order_relaxed);
      queue_.push_back(std::move(task));
    }
    cv_.notify_one();
  }

  void drain() {
    std::unique_lock<std::mutex> lk(mutex_);
    idle_cv_.wait(lk, [this] { return pending_.load() == 0; });
  }

private:
  void run() {
    for (;;) {
      std::function<void()> task;
      {
        std::unique_lock<std::mutex> lk(mutex_);
        cv_.wait(lk, [this] { return stop_ || !queue_.empty(); });
        if (stop_ && queue_.empty()) return;
        task = std::move(queue_.front());
        queue_.pop_front();
      }
      task();
      if (pending_.fetch_sub(1) == 1) {
        std::lock_guard<std::mutex> lk(mutex_);
        idle_cv_.notify_all();
      }
    }
  }

  std::deque<std::function<void()>> queue_;
  std::mutex mutex_;
  std::condition_variable cv_, idle_cv_;
  std::atomic<uint64_t> pending_{0};
  bool stop_ = false;
  std::vector<std::thread> workers_;
};

Engine::Engine(const DataGraph& g, const OverlayGraph& o, UdaPtr uda, const DataflowPlan& plan,
               EngineConfig cfg)
    : g_(g), o_(o), uda_(std::move(uda)), plan_(plan), cfg_(cfg) {
  if (cfg_.read_threads < 1 || cfg_.write_threads < 1) throw Error("engine: thread counts must be >= 1");
  if (o_.negative_edge_count() > 0 && !uda_->caps().subtractable)
    throw Error("engine: overlay has negative edges but aggregate " + uda_->name() +
                " does not support subtraction");
  state_.resize(o_.limit());
  node_mutex_ = std::vector<std::mutex>(o_.limit());
  window_.resize(g_.max_id());
  for (NodeId v = 0; v < g_.max_id(); ++v) window_[v] = std::make_unique<WriterWindow>();
  observed_writes_ = std::vector<std::atomic<uint64_t>>(g_.max_id());
  observed_reads_ = std::vector<std::atomic<uint64_t>>(g_.max_id());
  write_pool_ = std::make_unique<Pool>(cfg_.write_threads);
  read_pool_ = std::make_unique<Pool>(cfg_.read_threads);
  rebuild();
}

Engine::~Engine() = default;

void Engine::drain() {
  write_pool_->drain();
  read_pool_->drain();
}

void Engine::set_plan(const DataflowPlan& plan) {
  plan_ = plan;
  rebuild();
}

void Engine::rebuild() {
  if ((OvlId)state_.size() < o_.limit()) {
    state_.resize(o_.limit());
    node_mutex_ = std::vector<std::mutex>(o_.limit());
  }
  if ((NodeId)window_.size() < g_.max_id()) {
    size_t old = window_.size();
    window_.resize(g_.max_id());
    for (size_t v = old; v < window_.size(); ++v) window_[v] = std::make_unique<WriterWindow>();
    std::vector<std::atomic<uint64_t>> w2(g_.max_id()), r2(g_.max_id());
    for (size_t v = 0; v < observed_writes_.size(); ++v) {
      w2[v] = observed_writes_[v].load();
      r2[v] = observed_reads_[v].load();
    }
    observed_writes_ = std::move(w2);
    observed_reads_ = std::move(r2);
  }
  if ((OvlId)plan_.decision.size() < o_.limit()) plan_.decision.resize(o_.limit(), Decision::Pull);

  // signed contribution counts per node via one topological pass
  auto order = o_.topo_order();
  std::vector<CoverageVector> contrib(o_.limit());
  for (OvlId x : order) {
    CoverageVector cv;
    if (o_.kind(x) == NodeKind::Writer) cv[o_.graph_node(x)] = 1;
    for (const auto& e : o_.in(x))
      for (const auto& [w, c] : contrib[e.node]) {
        cv[w] += e.sign > 0 ? c : -c;
        if (cv[w] == 0) cv.erase(w);
      }
    contrib[x] = std::move(cv);
  }
  for (OvlId n = 0; n < o_.limit(); ++n) {
    if (!o_.alive(n)) {
      state_[n].pao.reset();
      continue;
    }
    bool push_decided = o_.kind(n) == NodeKind::Writer || plan_.decision[n] == Decision::Push;
    if (!push_decided) {
      state_[n].pao.reset();
      continue;
    }
    PaoPtr p = uda_->initialize();
    for (const auto& [w, cnt] : contrib[n]) {
      const auto& win = window_[w]->values;
      for (const auto& entry : win) {
        PaoPtr unit = uda_->lift(entry.value);
        for (int64_t i = 0; i < cnt; ++i) uda_->merge(*p, *unit);
        for (int64_t i = 0; i < -cnt; ++i) uda_->unmerge(*p, *unit);
      }
    }
    state_[n].pao = std::move(p);
  }
}

void Engine::apply_at(OvlId n, const std::vector<Delta>& deltas) {
  std::lock_guard<std::mutex> lk(node_mutex_[n]);
  NodeState& st = state_[n];
  if (!st.pao) return; // decision changed under us; rebuild will fix state
  for (const auto& d : deltas) uda_->update(*st.pao, d.removed.get(), d.added.get());
  ++st.version;
}

// Forward the delta batch from node n to its push-decided consumers. Negative
// edges swap removed/added, which applies the inverse contribution.
void Engine::propagate(OvlId n, std::shared_ptr<std::vector<Delta>> deltas) {
  for (const auto& e : o_.out(n)) {
    OvlId m = e.node;
    if (o_.kind(m) != NodeKind::Writer && plan_.decision[m] == Decision::Pull) continue;
    std::shared_ptr<std::vector<Delta>> fwd = deltas;
    if (e.sign < 0) {
      auto flipped = std::make_shared<std::vector<Delta>>();
      for (const auto& d : *deltas) flipped->push_back({d.added, d.removed});
      fwd = std::move(flipped);
    }
    if (cfg_.write_model == WriteModel::Queueing) {
      write_pool_->submit([this, m, fwd] {
        apply_at(m, *fwd);
        propagate(m, fwd);
      });
    } else {
      apply_at(m, *fwd);
      propagate(m, fwd);
    }
  }
}

// Window appends run on the submitting thread so per-writer order is the
// submission order; only the PAO applications fan out as micro-tasks.
std::shared_ptr<std::vector<Engine::Delta>> Engine::append_window(NodeId v, int64_t ts,
                                                                  int64_t value) {
  auto deltas = std::make_shared<std::vector<Delta>>();
  WriterWindow& win = *window_[v];
  std::lock_guard<std::mutex> lk(win.mutex);
  if (!win.values.empty() && ts < win.values.back().ts)
    throw Error("out-of-order write on node " + g_.label(v));
  win.values.push_back({ts, value});
  deltas->push_back({nullptr, std::shared_ptr<Pao>(uda_->lift(value))});
  if (cfg_.window.kind == WindowSpec::Kind::Count) {
    while ((int64_t)win.values.size() > cfg_.window.param) {
      deltas->push_back({std::shared_ptr<Pao>(uda_->lift(win.values.front().value)), nullptr});
      win.values.pop_front();
    }
  }
  return deltas;
}

void Engine::write(NodeId v, int64_t ts, int64_t value) {
  if (!g_.alive(v)) throw Error("write: unknown node " + std::to_string(v));
  if ((size_t)v >= window_.size()) throw Error("write: node added since the last rebuild");
  auto deltas = append_window(v, ts, value);
  observed_writes_[v].fetch_add(1, std::memory_order_relaxed);
  auto wid = o_.writer_of(v);
  if (!wid) return; // feeds no reader; the window is still maintained
  apply_at(*wid, *deltas);
  propagate(*wid, deltas);
}

void Engine::submit_write(NodeId v, int64_t ts, int64_t value) {
  if (!g_.alive(v)) throw Error("write: unknown node " + std::to_string(v));
  std::shared_ptr<std::vector<Delta>> deltas;
  try {
    deltas = append_window(v, ts, value);
  } catch (const Error&) {
    count_error();
    return;
  }
  observed_writes_[v].fetch_add(1, std::memory_order_relaxed);
  auto wid = o_.writer_of(v);
  if (!wid) return;
  OvlId w = *wid;
  // queueing: propagate() fans out per-node micro-tasks from here;
  // uni-thread: the same worker recurses through the whole write
  write_pool_->submit([this, w, deltas] {
    apply_at(w, *deltas);
    propagate(w, deltas);
  });
}

PaoPtr Engine::resolve(OvlId n) const {
  bool push_decided = o_.kind(n) == NodeKind::Writer || plan_.decision[n] == Decision::Push;
  if (push_decided) {
    std::lock_guard<std::mutex> lk(node_mutex_[n]);
    return state_[n].pao ? state_[n].pao->clone() : uda_->initialize();
  }
  PaoPtr p = uda_->initialize();
  for (const auto& e : o_.in(n)) {
    PaoPtr c = resolve(e.node);
    if (e.sign > 0) uda_->merge(*p, *c);
    else uda_->unmerge(*p, *c);
  }
  return p;
}

AggResult Engine::read(NodeId v) const {
  if (!g_.alive(v)) throw Error("read: unknown reader " + std::to_string(v));
  if ((size_t)v >= observed_reads_.size())
    throw Error("read: node added since the last rebuild");
  observed_reads_[v].fetch_add(1, std::memory_order_relaxed);
  auto rid = o_.reader_of(v);
  if (!rid) return uda_->finalize(*uda_->initialize()); // empty-aggregate sentinel
  return uda_->finalize(*resolve(*rid));
}

void Engine::submit_read(NodeId v, std::function<void(AggResult)> done) {
  read_pool_->submit([this, v, done = std::move(done)] {
    try {
      done(read(v));
    } catch (const Error&) {
      const_cast<Engine*>(this)->count_error();
      done(AggResult{});
    }
  });
}

size_t Engine::expire(int64_t now) {
  if (cfg_.window.kind != WindowSpec::Kind::Time) return 0;
  size_t dropped = 0;
  for (NodeId v = 0; v < (NodeId)window_.size(); ++v) {
    if (!g_.alive(v)) continue;
    auto deltas = std::make_shared<std::vector<Delta>>();
    {
      WriterWindow& win = *window_[v];
      std::lock_guard<std::mutex> lk(win.mutex);
      while (!win.values.empty() && win.values.front().ts <= now - cfg_.window.param) {
        deltas->push_back({std::shared_ptr<Pao>(uda_->lift(win.values.front().value)), nullptr});
        win.values.pop_front();
      }
    }
    if (deltas->empty()) continue;
    dropped += deltas->size();
    auto wid = o_.writer_of(v);
    if (!wid) continue;
    apply_at(*wid, *deltas);
    propagate(*wid, deltas);
  }
  return dropped;
}

uint64_t Engine::node_version(OvlId n) const {
  std::lock_guard<std::mutex> lk(node_mutex_[n]);
  return state_[n].version;
}

void Engine::reset_observed() {
  for (auto& c : observed_writes_) c.store(0);
  for (auto& c : observed_reads_) c.store(0);
}

void Engine::observed_rates(double seconds, std::vector<double>& write_rate,
                            std::vector<double>& read_rate) const {
  if (seconds <= 0) seconds = 1;
  write_rate.assign(observed_writes_.size(), 0.0);
  read_rate.assign(observed_reads_.size(), 0.0);
  for (size_t v = 0; v < observed_writes_.size(); ++v) {
    write_rate[v] = (double)observed_writes_[v].load() / seconds;
    read_rate[v] = (double)observed_reads_[v].load() / seconds;
  }
}

} // namespace aggnet

#pragma once

// Shared fixtures and independent oracles for the test suites. Oracles here
// must not share code paths with the implementation they check.

#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "aggnet/bench.hpp"
#include "aggnet/construct.hpp"
#include "aggnet/dataflow.hpp"
#include "aggnet/engine.hpp"
#include "aggnet/graph.hpp"
#include "aggnet/maintain.hpp"
#include "aggnet/overlay.hpp"
#include "aggnet/uda.hpp"

namespace aggnet::testing {

// ------------------------------------------------------------ fixture: the
// seven-node running example. In-neighbor sets:
//   N(a)={c,d,e,f} N(b)={e,f} N(c)={a,b,f} N(d)={a,b,c}
//   N(e)={a,b,c,d} N(f)={a,b,e} N(g)={a,b,c,d,e,f}
// Writer out-degrees a:5 b:5 c:4 d:3 e:4 f:4 g:0, so the ascending writer
// order is {d,c,e,f,a,b} and g feeds no reader.
inline const char* kSevenNodeEdges =
    "c\ta\n"
    "d\ta\n"
    "e\ta\n"
    "f\ta\n"
    "e\tb\n"
    "f\tb\n"
    "a\tc\n"
    "b\tc\n"
    "f\tc\n"
    "a\td\n"
    "b\td\n"
    "c\td\n"
    "a\te\n"
    "b\te\n"
    "c\te\n"
    "d\te\n"
    "a\tf\n"
    "b\tf\n"
    "e\tf\n"
    "a\tg\n"
    "b\tg\n"
    "c\tg\n"
    "d\tg\n"
    "e\tg\n"
    "f\tg\n";

inline DataGraph seven_node_graph() {
  std::istringstream in(kSevenNodeEdges);
  return load_graph(in);
}

// latest values: a=4 (after writes 1 then 4), b=7, c=9, d=3, e=1, f=6, g=2
inline void seven_node_writes(Engine& e, const DataGraph& g) {
  auto id = [&](const char* l) { return *g.find(l); };
  e.write(id("a"), 1, 1);
  e.write(id("a"), 2, 4);
  e.write(id("b"), 2, 7);
  e.write(id("c"), 2, 9);
  e.write(id("d"), 2, 3);
  e.write(id("e"), 2, 1);
  e.write(id("f"), 2, 6);
  e.write(id("g"), 2, 2);
  e.drain();
}

inline void set_uniform_activity(DataGraph& g, double w = 1.0, double r = 1.0) {
  for (NodeId v = 0; v < g.max_id(); ++v)
    if (g.alive(v)) g.set_activity(v, w, r);
}

// --------------------------------------------------------- random graphs

inline DataGraph random_graph(int n, double mean_degree, uint64_t seed) {
  DataGraph g;
  for (int i = 0; i < n; ++i) g.intern("n" + std::to_string(i));
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, n - 1);
  int64_t edges = (int64_t)std::llround(mean_degree * n);
  int64_t placed = 0;
  while (placed < edges) {
    int u = pick(rng), v = pick(rng);
    if (u == v || g.has_edge(u, v)) continue;
    g.add_edge(u, v);
    ++placed;
  }
  return g;
}

// preferential attachment with a copying step: a newcomer either copies most
// of an existing node's target list or attaches preferentially. Copying is
// what plants the shared writer groups (bicliques) real web and social
// graphs exhibit.
inline DataGraph preferential_attachment_graph(int n, int edges_per_node, uint64_t seed,
                                               double copy_prob = 0.5) {
  DataGraph g;
  std::mt19937_64 rng(seed);
  auto chance = [&](double p) { return (double)(rng() % 1000000) / 1e6 < p; };
  std::vector<NodeId> targets; // nodes repeated by in-degree, for the PA bias
  for (int i = 0; i < n; ++i) {
    NodeId v = g.intern("n" + std::to_string(i));
    if (i == 0) continue;
    std::set<NodeId> chosen;
    auto attach = [&](NodeId t) {
      if (t == v || chosen.count(t)) return;
      chosen.insert(t);
      g.add_edge(v, t);
      targets.push_back(t);
    };
    if (i > 2 && chance(copy_prob)) {
      NodeId proto = (NodeId)(rng() % (uint64_t)i);
      for (NodeId t : g.out(proto))
        if (chance(0.9)) attach(t);
    }
    int m = std::min<int>(edges_per_node, i);
    for (int e = (int)chosen.size(); e < m; ++e) {
      for (int tries = 0; tries < 30; ++tries) {
        NodeId t = (targets.empty() || chance(0.1)) ? (NodeId)(rng() % (uint64_t)i)
                                                    : targets[rng() % targets.size()];
        if (t == v || chosen.count(t)) continue;
        attach(t);
        break;
      }
    }
  }
  return g;
}

// --------------------------------------------------------------- oracles

// independent BFS over explicit reversed-direction adjacency
inline std::vector<NodeId> bfs_neighborhood_oracle(const DataGraph& g, const QuerySpec& q, NodeId v) {
  std::set<NodeId> seen{v};
  std::vector<NodeId> frontier{v}, result;
  for (int hop = 0; hop < q.hops; ++hop) {
    std::vector<NodeId> next;
    for (NodeId x : frontier) {
      std::vector<NodeId> step;
      if (q.direction == EdgeDir::In || q.direction == EdgeDir::Both)
        for (NodeId y : g.in(x)) step.push_back(y);
      if (q.direction == EdgeDir::Out || q.direction == EdgeDir::Both)
        for (NodeId y : g.out(x)) step.push_back(y);
      for (NodeId y : step) {
        if (seen.count(y)) continue;
        seen.insert(y);
        next.push_back(y);
        if (!q.writer_filter || g.attr_equals(y, *q.writer_filter)) result.push_back(y);
      }
    }
    frontier = std::move(next);
  }
  std::sort(result.begin(), result.end());
  return result;
}

// per-writer window contents maintained independently of the engine
struct WindowOracle {
  explicit WindowOracle(WindowSpec s) : spec(s) {}
  WindowSpec spec;
  std::map<NodeId, std::vector<std::pair<int64_t, int64_t>>> values; // (ts, value)

  void write(NodeId v, int64_t ts, int64_t value) {
    auto& w = values[v];
    w.push_back({ts, value});
    if (spec.kind == WindowSpec::Kind::Count)
      while ((int64_t)w.size() > spec.param) w.erase(w.begin());
  }
  void expire(int64_t now) {
    if (spec.kind != WindowSpec::Kind::Time) return;
    for (auto& [v, w] : values)
      while (!w.empty() && w.front().first <= now - spec.param) w.erase(w.begin());
  }
  std::vector<int64_t> window(NodeId v) const {
    std::vector<int64_t> out;
    auto it = values.find(v);
    if (it == values.end()) return out;
    for (auto& [ts, val] : it->second) out.push_back(val);
    return out;
  }
};

// direct aggregation over N(r)'s in-window values
inline AggResult direct_aggregate(const Uda& uda, const WindowOracle& windows,
                                  const std::vector<NodeId>& writers) {
  PaoPtr p = uda.initialize();
  for (NodeId w : writers)
    for (int64_t v : windows.window(w)) {
      PaoPtr unit = uda.lift(v);
      uda.merge(*p, *unit);
    }
  return uda.finalize(*p);
}

// ---------------------------------------------- fixture: planner worked
// instance. Two writers feed i1 which serves two readers; three writers feed
// i3 which serves the 60-input reader s together with 59 side writers. With
// H(k)=1, L(k)=k and window factor 1:
//   PUSH(a_w)=3  PULL(a_w)=10   PUSH(i3)=10 PULL(i3)=6
//   PUSH(s_r)=70 PULL(s_r)=120
// so i3 prefers pull, s_r prefers push, and the min cut must arbitrate.
struct PlannerWorkedInstance {
  DataGraph g;
  OverlayGraph o;
  OvlId i1 = -1, i3 = -1;
  OvlId m_r = -1, n_r = -1, s_r = -1;
  OvlId a_w = -1, b_w = -1;
  CostModel cm;
};

inline PlannerWorkedInstance planner_worked_instance() {
  PlannerWorkedInstance fx;
  DataGraph& g = fx.g;
  OverlayGraph& o = fx.o;
  auto writer = [&](const std::string& label, double rate) {
    NodeId v = g.intern(label);
    g.set_activity(v, rate, 0.0);
    return o.add_writer(v);
  };
  auto reader = [&](const std::string& label, double rate) {
    NodeId v = g.intern(label);
    g.set_activity(v, 0.0, rate);
    return o.add_reader(v);
  };
  fx.a_w = writer("a", 3);
  fx.b_w = writer("b", 3);
  fx.i1 = o.add_partial();
  o.add_edge(fx.a_w, fx.i1);
  o.add_edge(fx.b_w, fx.i1);
  fx.m_r = reader("m", 5);
  fx.n_r = reader("n", 5);
  o.add_edge(fx.i1, fx.m_r);
  o.add_edge(fx.i1, fx.n_r);

  OvlId c_w = writer("c", 3), d_w = writer("d", 3), e_w = writer("e", 4);
  fx.i3 = o.add_partial();
  o.add_edge(c_w, fx.i3);
  o.add_edge(d_w, fx.i3);
  o.add_edge(e_w, fx.i3);
  fx.s_r = reader("s", 2);
  o.add_edge(fx.i3, fx.s_r);
  for (int i = 1; i <= 59; ++i)
    o.add_edge(writer("t" + std::to_string(i), i == 1 ? 2.0 : 1.0), fx.s_r);

  fx.cm = CostModel::for_aggregate("sum", 1.0);
  return fx;
}

// ------------------------------------------------- dataflow brute force

// Minimum modeled cost over all partitions with writers pushed and no
// pull -> push edge. Exponential; callers keep instances small.
inline double brute_force_plan_cost(const OverlayGraph& o, const FrequencyAnnotation& f,
                                    const CostModel& cm, std::vector<Decision>* best_out = nullptr) {
  std::vector<OvlId> free_nodes;
  for (OvlId v = 0; v < o.limit(); ++v)
    if (o.alive(v) && o.kind(v) != NodeKind::Writer) free_nodes.push_back(v);
  if (free_nodes.size() > 22) throw Error("brute force instance too large");

  double best = std::numeric_limits<double>::infinity();
  std::vector<Decision> best_plan;
  for (uint64_t mask = 0; mask < (1ull << free_nodes.size()); ++mask) {
    std::vector<Decision> d(o.limit(), Decision::Push);
    for (size_t i = 0; i < free_nodes.size(); ++i)
      if (mask & (1ull << i)) d[free_nodes[i]] = Decision::Pull;
    bool ok = true;
    for (OvlId v = 0; v < o.limit() && ok; ++v) {
      if (!o.alive(v)) continue;
      if (d[v] == Decision::Push)
        for (const auto& e : o.in(v))
          if (d[e.node] == Decision::Pull) {
            ok = false;
            break;
          }
    }
    if (!ok) continue;
    double cost = plan_cost(o, f, cm, d);
    if (cost < best - 1e-12) {
      best = cost;
      best_plan = d;
    }
  }
  if (best_out) *best_out = best_plan;
  return best;
}

// random annotated overlay for planner tests: layered DAG of writers,
// partials and readers with random rates
inline std::pair<DataGraph, OverlayGraph> random_planner_instance(int total_nodes, uint64_t seed) {
  std::mt19937_64 rng(seed);
  DataGraph g;
  OverlayGraph o;
  int writers = 2 + (int)(rng() % std::max(1, total_nodes / 3));
  int readers = 1 + (int)(rng() % std::max(1, total_nodes / 3));
  int partials = std::max(0, total_nodes - writers - readers);

  std::vector<OvlId> pool;
  for (int i = 0; i < writers; ++i) {
    NodeId v = g.intern("w" + std::to_string(i));
    g.set_activity(v, (double)(rng() % 40) / 4.0, (double)(rng() % 40) / 4.0);
    pool.push_back(o.add_writer(v));
  }
  for (int i = 0; i < partials; ++i) {
    OvlId p = o.add_partial();
    int fan = 1 + (int)(rng() % 3);
    std::set<OvlId> chosen;
    for (int k = 0; k < fan; ++k) chosen.insert(pool[rng() % pool.size()]);
    for (OvlId u : chosen) o.add_edge(u, p, +1);
    pool.push_back(p);
  }
  for (int i = 0; i < readers; ++i) {
    NodeId v = g.intern("r" + std::to_string(i));
    g.set_activity(v, (double)(rng() % 40) / 4.0, (double)(rng() % 40) / 4.0);
    OvlId r = o.add_reader(v);
    int fan = 1 + (int)(rng() % 3);
    std::set<OvlId> chosen;
    for (int k = 0; k < fan; ++k) chosen.insert(pool[rng() % pool.size()]);
    for (OvlId u : chosen) o.add_edge(u, r, +1);
  }
  // partials with no outputs would be degenerate; wire them to a reader
  for (OvlId n = 0; n < o.limit(); ++n)
    if (o.alive(n) && o.kind(n) == NodeKind::Partial && o.out(n).empty()) {
      for (OvlId m = o.limit() - 1; m >= 0; --m)
        if (o.alive(m) && o.kind(m) == NodeKind::Reader && !o.has_edge(n, m, +1)) {
          o.add_edge(n, m, +1);
          break;
        }
    }
  return {std::move(g), std::move(o)};
}

// ------------------------------------------------------- engine helpers

inline DataflowPlan all_push_plan(const OverlayGraph& o) {
  DataflowPlan p;
  p.method = PlanMethod::AllPush;
  p.decision.assign(o.limit(), Decision::Push);
  return p;
}

inline DataflowPlan all_pull_plan(const OverlayGraph& o) {
  DataflowPlan p;
  p.method = PlanMethod::AllPull;
  p.decision.assign(o.limit(), Decision::Push);
  for (OvlId v = 0; v < o.limit(); ++v)
    if (o.alive(v) && o.kind(v) != NodeKind::Writer) p.decision[v] = Decision::Pull;
  return p;
}

// quiescent check: every reader's engine result equals direct aggregation
// over its current neighborhood and window
inline bool oracle_reads_match(Engine& eng, const DataGraph& g, const QuerySpec& q, const Uda& uda,
                               const WindowOracle& windows, std::string* why = nullptr) {
  eng.drain();
  for (NodeId v = 0; v < g.max_id(); ++v) {
    if (!g.alive(v)) continue;
    if (q.reader_pred && !g.attr_equals(v, *q.reader_pred)) continue;
    AggResult got = eng.read(v);
    AggResult want = direct_aggregate(uda, windows, bfs_neighborhood_oracle(g, q, v));
    if (!(got == want)) {
      if (why)
        *why = "reader " + g.label(v) + ": engine=" + got.str() + " direct=" + want.str();
      return false;
    }
  }
  return true;
}

} // namespace aggnet::testing

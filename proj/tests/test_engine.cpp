#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"

using namespace aggnet;
using namespace aggnet::testing;

namespace {

struct Rig {
  DataGraph g;
  BipartiteGraph a;
  OverlayGraph o;
  UdaPtr uda;
  DataflowPlan plan;
  std::unique_ptr<Engine> engine;
};

Rig make_rig(const char* agg, PlanMethod method, WindowSpec window = WindowSpec::count(1),
             Algorithm algo = Algorithm::Trivial, int write_threads = 1,
             WriteModel wm = WriteModel::Queueing) {
  Rig r;
  r.g = seven_node_graph();
  set_uniform_activity(r.g);
  QuerySpec q;
  q.window = window;
  r.a = derive_bipartite(r.g, q);
  ConstructionParams p;
  p.initial_chunk_size = 8;
  r.o = build_overlay(r.a, algo, p);
  r.uda = make_aggregate(agg);
  CostModel cm = CostModel::for_aggregate(agg, (double)window.param);
  r.plan = decide(r.o, r.g, cm, method);
  EngineConfig cfg;
  cfg.write_threads = write_threads;
  cfg.window = window;
  cfg.write_model = wm;
  r.engine = std::make_unique<Engine>(r.g, r.o, r.uda, r.plan, cfg);
  return r;
}

} // namespace

TEST_CASE("read: running example SUM with count window 1 gives 19 at a_r") {
  for (PlanMethod m : {PlanMethod::AllPush, PlanMethod::AllPull, PlanMethod::Optimal}) {
    Rig r = make_rig("sum", m);
    seven_node_writes(*r.engine, r.g);
    AggResult res = r.engine->read(*r.g.find("a"));
    CAPTURE((int)m);
    CHECK(!res.empty);
    CHECK(res.scalar == 19); // 9 + 3 + 1 + 6
  }
}

TEST_CASE("read: every reader of the running example matches the direct oracle") {
  for (Algorithm algo : {Algorithm::Trivial, Algorithm::Vnm, Algorithm::VnmN, Algorithm::Iob}) {
    Rig r = make_rig("sum", PlanMethod::Optimal, WindowSpec::count(1), algo);
    WindowOracle windows{WindowSpec::count(1)};
    auto id = [&](const char* l) { return *r.g.find(l); };
    r.engine->write(id("a"), 1, 1);
    windows.write(id("a"), 1, 1);
    r.engine->write(id("a"), 2, 4);
    windows.write(id("a"), 2, 4);
    int64_t vals[] = {7, 9, 3, 1, 6, 2};
    const char* names[] = {"b", "c", "d", "e", "f", "g"};
    for (int i = 0; i < 6; ++i) {
      r.engine->write(id(names[i]), 2, vals[i]);
      windows.write(id(names[i]), 2, vals[i]);
    }
    std::string why;
    QuerySpec q;
    bool ok = oracle_reads_match(*r.engine, r.g, q, *r.uda, windows, &why);
    CAPTURE(algorithm_name(algo));
    CAPTURE(why);
    CHECK(ok);
  }
}

TEST_CASE("write: propagation stops at pull nodes") {
  Rig r = make_rig("sum", PlanMethod::AllPull);
  NodeId a = *r.g.find("a");
  OvlId a_w = *r.o.writer_of(a);
  OvlId e_r = *r.o.reader_of(*r.g.find("e"));
  uint64_t writer_v0 = r.engine->node_version(a_w);
  uint64_t reader_v0 = r.engine->node_version(e_r);
  r.engine->write(a, 1, 5);
  r.engine->drain();
  CHECK(r.engine->node_version(a_w) > writer_v0); // writer PAO always maintained
  CHECK(r.engine->node_version(e_r) == reader_v0); // pull reader untouched
  CHECK(r.engine->read(*r.g.find("e")).scalar == 5); // resolved on demand
}

TEST_CASE("write: partial aggregator updates eagerly, pull reader lazily") {
  // compiled running example: write 5 on a_w bumps the shared partial's PAO,
  // a pull reader stays untouched until read
  DataGraph g = seven_node_graph();
  set_uniform_activity(g);
  QuerySpec q;
  BipartiteGraph a = derive_bipartite(g, q);
  OverlayGraph o = trivial_overlay(a);
  MinedBiclique b;
  for (const char* w : {"a", "b", "c"}) b.writers.push_back(*o.writer_of(*g.find(w)));
  for (const char* r : {"c", "d", "e", "f", "g"}) b.readers.push_back(*o.reader_of(*g.find(r)));
  b.negatives = {{*o.reader_of(*g.find("c")), *o.writer_of(*g.find("c"))},
                 {*o.reader_of(*g.find("f")), *o.writer_of(*g.find("c"))}};
  apply_biclique(o, b);
  OvlId pa = -1;
  for (OvlId n = 0; n < o.limit(); ++n)
    if (o.alive(n) && o.kind(n) == NodeKind::Partial) pa = n;
  REQUIRE(pa != -1);
  UdaPtr uda = make_aggregate("sum");
  DataflowPlan plan = all_push_plan(o);
  OvlId gr = *o.reader_of(*g.find("g"));
  plan.decision[gr] = Decision::Pull; // one lazy reader
  EngineConfig cfg;
  cfg.window = WindowSpec::count(1);
  Engine eng(g, o, uda, plan, cfg);
  uint64_t pa_v0 = eng.node_version(pa), gr_v0 = eng.node_version(gr);
  eng.write(*g.find("a"), 1, 5);
  eng.drain();
  CHECK(eng.node_version(pa) > pa_v0);   // eager partial
  CHECK(eng.node_version(gr) == gr_v0);  // lazy reader untouched
  seven_node_writes(eng, g);
  CHECK(eng.read(*g.find("g")).scalar == 4 + 7 + 9 + 3 + 1 + 6); // resolved on demand
}

TEST_CASE("write: unknown node rejected, out-of-order rejected") {
  Rig r = make_rig("sum", PlanMethod::AllPush);
  CHECK_THROWS_AS(r.engine->write(999, 1, 1), Error);
  r.engine->write(*r.g.find("a"), 10, 1);
  CHECK_THROWS_AS(r.engine->write(*r.g.find("a"), 5, 2), Error);
}

TEST_CASE("write: 1000 random writes keep every push node equal to the direct sum") {
  Rig r = make_rig("sum", PlanMethod::AllPush, WindowSpec::count(1), Algorithm::VnmN);
  WindowOracle windows{WindowSpec::count(1)};
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    NodeId v = (NodeId)(rng() % r.g.max_id());
    int64_t val = (int64_t)(rng() % 100);
    r.engine->write(v, i, val);
    windows.write(v, i, val);
  }
  r.engine->drain();
  // every push node's finalize equals the direct aggregate over its coverage
  for (OvlId n = 0; n < r.o.limit(); ++n) {
    if (!r.o.alive(n) || r.o.kind(n) == NodeKind::Writer) continue;
    CoverageVector cv = coverage(r.o, n);
    PaoPtr direct = r.uda->initialize();
    for (auto& [w, c] : cv) {
      REQUIRE(c >= 0);
      for (int64_t v : windows.window(w)) {
        PaoPtr unit = r.uda->lift(v);
        for (int64_t k = 0; k < c; ++k) r.uda->merge(*direct, *unit);
      }
    }
    OvlId rid = n;
    if (r.o.kind(n) == NodeKind::Reader) {
      AggResult got = r.engine->read(r.o.graph_node(rid));
      CHECK(got == r.uda->finalize(*direct));
    }
  }
}

TEST_CASE("read: node with empty neighborhood returns the empty sentinel") {
  Rig r = make_rig("sum", PlanMethod::Optimal);
  NodeId lonely = r.g.intern("lonely");
  r.g.set_activity(lonely, 1, 1);
  r.engine->rebuild(); // the graph changed between epochs
  AggResult res = r.engine->read(lonely);
  CHECK(res.empty);
  CHECK(res.scalar == 0); // SUM finalizes empty as 0

  Rig rmax = make_rig("max", PlanMethod::Optimal, WindowSpec::count(1), Algorithm::VnmD);
  NodeId lonely2 = rmax.g.intern("lonely");
  rmax.g.set_activity(lonely2, 1, 1);
  rmax.engine->rebuild();
  CHECK(rmax.engine->read(lonely2).empty); // MAX: no value
}

TEST_CASE("read: MAX over a duplicate-insensitive multi-path overlay matches the oracle") {
  Rig r = make_rig("max", PlanMethod::Optimal, WindowSpec::count(2), Algorithm::VnmD);
  WindowOracle windows{WindowSpec::count(2)};
  std::mt19937_64 rng(77);
  for (int i = 0; i < 300; ++i) {
    NodeId v = (NodeId)(rng() % r.g.max_id());
    int64_t val = (int64_t)(rng() % 1000);
    r.engine->write(v, i, val);
    windows.write(v, i, val);
  }
  std::string why;
  QuerySpec q;
  q.window = WindowSpec::count(2);
  bool ok = oracle_reads_match(*r.engine, r.g, q, *r.uda, windows, &why);
  CAPTURE(why);
  CHECK(ok);
}

TEST_CASE("expire: count windows expire at write time") {
  Rig r = make_rig("sum", PlanMethod::AllPush, WindowSpec::count(1));
  NodeId a = *r.g.find("a");
  r.engine->write(a, 1, 10);
  r.engine->write(a, 2, 32);
  r.engine->drain();
  CHECK(r.engine->expire(100) == 0); // nothing left to drop
  CHECK(r.engine->read(*r.g.find("e")).scalar >= 32); // only the newer value counted
}

TEST_CASE("expire: time window drops stale values and propagates deletions") {
  Rig r = make_rig("sum", PlanMethod::AllPush, WindowSpec::time(10));
  WindowOracle windows{WindowSpec::time(10)};
  std::mt19937_64 rng(3);
  int64_t ts = 0;
  for (int i = 0; i < 200; ++i) {
    NodeId v = (NodeId)(rng() % r.g.max_id());
    int64_t val = (int64_t)(rng() % 50);
    ts += rng() % 3;
    r.engine->write(v, ts, val);
    windows.write(v, ts, val);
  }
  r.engine->drain();
  size_t dropped = r.engine->expire(ts);
  windows.expire(ts);
  CHECK(dropped > 0);
  std::string why;
  QuerySpec q;
  q.window = WindowSpec::time(10);
  bool ok = oracle_reads_match(*r.engine, r.g, q, *r.uda, windows, &why);
  CAPTURE(why);
  CHECK(ok);
  CHECK(r.engine->expire(ts) == 0); // no stale values remain
}

TEST_CASE("window invariant: boundary timestamps never leak out-of-window values") {
  Rig r = make_rig("sum", PlanMethod::AllPush, WindowSpec::time(10));
  NodeId c = *r.g.find("c");
  r.engine->write(c, 0, 100);   // expires exactly at now = 10
  r.engine->write(c, 10, 7);    // stays
  r.engine->drain();
  r.engine->expire(10);
  AggResult res = r.engine->read(*r.g.find("a")); // N(a) = {c,d,e,f}
  CHECK(res.scalar == 7);
}

TEST_CASE("builtin aggregates: worked values") {
  UdaPtr sum = make_aggregate("sum");
  PaoPtr p = sum->initialize();
  for (int64_t v : {9, 3, 1, 6}) {
    PaoPtr unit = sum->lift(v);
    sum->merge(*p, *unit);
  }
  CHECK(sum->finalize(*p).scalar == 19);
  CHECK(sum->caps().subtractable);
  CHECK(!sum->caps().duplicate_insensitive);

  UdaPtr max = make_aggregate("max");
  PaoPtr m = max->initialize();
  PaoPtr five = max->lift(5), three = max->lift(3);
  max->merge(*m, *five);
  max->merge(*m, *three);
  max->merge(*m, *three); // duplicate contribution
  CHECK(max->finalize(*m).scalar == 5);
  CHECK(max->caps().duplicate_insensitive);
  CHECK(!max->caps().subtractable);

  UdaPtr topk = make_aggregate("topk:2");
  PaoPtr t = topk->initialize();
  for (int64_t v : {8, 8, 5, 9, 9, 9}) {
    PaoPtr unit = topk->lift(v);
    topk->merge(*t, *unit);
  }
  AggResult res = topk->finalize(*t);
  REQUIRE(res.items.size() == 2);
  CHECK(res.items[0] == std::pair<int64_t, int64_t>{9, 3});
  CHECK(res.items[1] == std::pair<int64_t, int64_t>{8, 2});

  CHECK(make_aggregate("count")->caps().subtractable);
  CHECK_THROWS_AS(make_aggregate("median"), Error);
}

TEST_CASE("builtin aggregates: topk orders frequency ties by value") {
  UdaPtr topk = make_aggregate("topk:3");
  PaoPtr t = topk->initialize();
  for (int64_t v : {30, 10, 20}) {
    PaoPtr unit = topk->lift(v);
    topk->merge(*t, *unit);
  }
  AggResult res = topk->finalize(*t);
  REQUIRE(res.items.size() == 3);
  CHECK(res.items[0].first == 10);
  CHECK(res.items[1].first == 20);
  CHECK(res.items[2].first == 30);
}

TEST_CASE("UDA algebra: merge commutes, insert/delete cancels, unmerge inverts") {
  std::mt19937_64 rng(42);
  for (const char* name : {"sum", "count", "min", "max", "topk:3"}) {
    UdaPtr uda = make_aggregate(name);
    for (int round = 0; round < 30; ++round) {
      std::vector<int64_t> values;
      for (int i = 0; i < 6; ++i) values.push_back((int64_t)(rng() % 20));
      // associativity/commutativity up to finalize-equivalence
      PaoPtr fwd = uda->initialize(), rev = uda->initialize();
      for (size_t i = 0; i < values.size(); ++i) {
        PaoPtr u1 = uda->lift(values[i]);
        uda->merge(*fwd, *u1);
        PaoPtr u2 = uda->lift(values[values.size() - 1 - i]);
        uda->merge(*rev, *u2);
      }
      CHECK(uda->finalize(*fwd) == uda->finalize(*rev));
      // update(update(p, none, x), x, none) is finalize-equivalent to p
      PaoPtr p = uda->initialize();
      for (size_t i = 0; i + 1 < values.size(); ++i) {
        PaoPtr u = uda->lift(values[i]);
        uda->merge(*p, *u);
      }
      AggResult before = uda->finalize(*p);
      PaoPtr x = uda->lift(values.back());
      uda->update(*p, nullptr, x.get());
      uda->update(*p, x.get(), nullptr);
      CHECK(uda->finalize(*p) == before);
      // subtractable: unmerge(merge(a,b), b) ~ a
      if (uda->caps().subtractable) {
        PaoPtr a = uda->initialize(), b = uda->initialize();
        for (int i = 0; i < 3; ++i) {
          PaoPtr ua = uda->lift(values[i]);
          uda->merge(*a, *ua);
          PaoPtr ub = uda->lift(values[i + 3]);
          uda->merge(*b, *ub);
        }
        AggResult want = uda->finalize(*a);
        uda->merge(*a, *b);
        uda->unmerge(*a, *b);
        CHECK(uda->finalize(*a) == want);
      } else {
        PaoPtr a = uda->lift(1), b = uda->lift(2);
        CHECK_THROWS_AS(uda->unmerge(*a, *b), Error);
      }
    }
  }
}

TEST_CASE("negative-edge neutrality: vnmn overlays read identically to trivial (SUM)") {
  DataGraph g = random_graph(40, 5.0, 808);
  set_uniform_activity(g);
  QuerySpec q;
  BipartiteGraph a = derive_bipartite(g, q);
  ConstructionParams p;
  p.initial_chunk_size = 8;
  OverlayGraph neg = build_overlay(a, Algorithm::VnmN, p);
  OverlayGraph triv = trivial_overlay(a);
  UdaPtr uda = make_aggregate("sum");
  CostModel cm = CostModel::for_aggregate("sum", 1);
  Engine e1(g, neg, uda, decide(neg, g, cm, PlanMethod::Optimal), {.window = WindowSpec::count(1)});
  Engine e2(g, triv, uda, decide(triv, g, cm, PlanMethod::AllPull), {.window = WindowSpec::count(1)});
  std::mt19937_64 rng(6);
  for (int i = 0; i < 500; ++i) {
    NodeId v = (NodeId)(rng() % g.max_id());
    int64_t val = (int64_t)(rng() % 100);
    e1.write(v, i, val);
    e2.write(v, i, val);
  }
  e1.drain();
  e2.drain();
  for (NodeId v = 0; v < g.max_id(); ++v) CHECK(e1.read(v) == e2.read(v));
}

TEST_CASE("push determinism: uni-thread write model repeats version sequences") {
  auto run_once = [](std::vector<uint64_t>& versions, std::vector<int64_t>& results) {
    DataGraph g = seven_node_graph();
    set_uniform_activity(g);
    QuerySpec q;
    BipartiteGraph a = derive_bipartite(g, q);
    OverlayGraph o = trivial_overlay(a);
    UdaPtr uda = make_aggregate("sum");
    CostModel cm = CostModel::for_aggregate("sum", 1);
    EngineConfig cfg;
    cfg.write_model = WriteModel::UniThread;
    cfg.write_threads = 1;
    Engine e(g, o, uda, decide(o, g, cm, PlanMethod::AllPush), cfg);
    std::mt19937_64 rng(12);
    for (int i = 0; i < 200; ++i) {
      e.write((NodeId)(rng() % g.max_id()), i, (int64_t)(rng() % 50));
      e.drain();
      for (OvlId n = 0; n < o.limit(); ++n)
        if (o.alive(n)) versions.push_back(e.node_version(n));
    }
    for (NodeId v = 0; v < g.max_id(); ++v) results.push_back(e.read(v).scalar);
  };
  std::vector<uint64_t> v1, v2;
  std::vector<int64_t> r1, r2;
  run_once(v1, r1);
  run_once(v2, r2);
  CHECK(v1 == v2);
  CHECK(r1 == r2);
}

TEST_CASE("queueing model with several write threads settles to the oracle") {
  for (const char* agg : {"sum", "max", "topk:3"}) {
    Rig r = make_rig(agg, PlanMethod::AllPush, WindowSpec::count(2), Algorithm::Vnm, 4);
    WindowOracle windows{WindowSpec::count(2)};
    std::mt19937_64 rng(9);
    for (int i = 0; i < 2000; ++i) {
      NodeId v = (NodeId)(rng() % r.g.max_id());
      int64_t val = (int64_t)(rng() % 30);
      r.engine->submit_write(v, i, val);
      windows.write(v, i, val);
      if (i % 97 == 0) r.engine->drain(); // settle occasionally to keep per-writer order
    }
    r.engine->drain();
    std::string why;
    QuerySpec q;
    q.window = WindowSpec::count(2);
    bool ok = oracle_reads_match(*r.engine, r.g, q, *r.uda, windows, &why);
    CAPTURE(agg);
    CAPTURE(why);
    CHECK(ok);
  }
}

TEST_CASE("set_plan: swapping plans between epochs rebuilds state correctly") {
  Rig r = make_rig("sum", PlanMethod::AllPull, WindowSpec::count(1), Algorithm::Iob);
  WindowOracle windows{WindowSpec::count(1)};
  std::mt19937_64 rng(15);
  for (int i = 0; i < 300; ++i) {
    NodeId v = (NodeId)(rng() % r.g.max_id());
    int64_t val = (int64_t)(rng() % 100);
    r.engine->write(v, i, val);
    windows.write(v, i, val);
  }
  r.engine->drain();
  CostModel cm = CostModel::for_aggregate("sum", 1);
  r.engine->set_plan(decide(r.o, r.g, cm, PlanMethod::AllPush));
  std::string why;
  QuerySpec q;
  CHECK(oracle_reads_match(*r.engine, r.g, q, *r.uda, windows, &why));
}

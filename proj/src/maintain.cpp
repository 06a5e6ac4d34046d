#include "aggnet/maintain.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace aggnet {

namespace {

// nodes within `hops` of any seed, ignoring edge direction
std::set<NodeId> local_candidates(const DataGraph& g, std::vector<NodeId> seeds, int hops) {
  std::set<NodeId> seen(seeds.begin(), seeds.end());
  std::vector<std::pair<NodeId, int>> stack;
  for (NodeId s : seeds) stack.push_back({s, 0});
  while (!stack.empty()) {
    auto [x, d] = stack.back();
    stack.pop_back();
    if (d == hops) continue;
    for (NodeId y : g.out(x))
      if (seen.insert(y).second) stack.push_back({y, d + 1});
    for (NodeId y : g.in(x))
      if (seen.insert(y).second) stack.push_back({y, d + 1});
  }
  return seen;
}

bool is_reader(const DataGraph& g, const QuerySpec& q, NodeId v) {
  return !q.reader_pred || g.attr_equals(v, *q.reader_pred);
}

DeltaList diff_neighborhoods(const DataGraph& g, const QuerySpec& q, const std::set<NodeId>& cand,
                             const std::map<NodeId, std::vector<NodeId>>& before) {
  DeltaList deltas;
  for (NodeId r : cand) {
    if (!g.alive(r) || !is_reader(g, q, r)) continue;
    std::vector<NodeId> now = neighborhood(g, q, r);
    auto it = before.find(r);
    const std::vector<NodeId> empty;
    const std::vector<NodeId>& old = it == before.end() ? empty : it->second;
    DeltaEntry e;
    e.reader = r;
    std::set_difference(now.begin(), now.end(), old.begin(), old.end(), std::back_inserter(e.added));
    std::set_difference(old.begin(), old.end(), now.begin(), now.end(),
                        std::back_inserter(e.removed));
    if (!e.added.empty() || !e.removed.empty()) deltas.push_back(std::move(e));
  }
  return deltas;
}

} // namespace

DeltaList affected_readers(const DataGraph& g, const QuerySpec& q, NodeId a, NodeId b, bool removal) {
  DataGraph& gm = const_cast<DataGraph&>(g); // applied and reverted below
  std::set<NodeId> cand = local_candidates(g, {a, b}, q.hops);
  std::map<NodeId, std::vector<NodeId>> before;
  for (NodeId r : cand)
    if (is_reader(g, q, r)) before[r] = neighborhood(g, q, r);
  if (removal) {
    if (!gm.remove_edge(a, b)) throw Error("affected_readers: edge does not exist");
  } else {
    gm.add_edge(a, b);
  }
  DeltaList deltas = diff_neighborhoods(g, q, cand, before);
  if (removal) gm.add_edge(a, b);
  else gm.remove_edge(a, b);
  return deltas;
}

namespace {

// Greedy exact cover of `want` by existing overlay nodes (writers/partials
// whose covered set fits inside the remainder). Returns the cover nodes.
std::vector<OvlId> greedy_cover(const OverlayGraph& o, const std::set<NodeId>& want) {
  // nodes below a negative edge are not reusable: their positive-path index
  // overstates what they net-aggregate
  std::vector<char> tainted(o.limit(), 0);
  if (o.negative_edge_count() > 0) {
    std::vector<OvlId> stack;
    for (OvlId n = 0; n < o.limit(); ++n) {
      if (!o.alive(n)) continue;
      for (const auto& e : o.in(n))
        if (e.sign < 0 && !tainted[n]) {
          tainted[n] = 1;
          stack.push_back(n);
        }
    }
    while (!stack.empty()) {
      OvlId x = stack.back();
      stack.pop_back();
      for (const auto& e : o.out(x))
        if (!tainted[e.node]) {
          tainted[e.node] = 1;
          stack.push_back(e.node);
        }
    }
  }
  std::set<NodeId> uncovered = want;
  std::vector<OvlId> cover;
  while (!uncovered.empty()) {
    // max overlap among exact-subset candidates: overlap == |covered(v)|
    std::map<OvlId, int64_t> overlap;
    for (NodeId w : uncovered)
      for (OvlId v : o.covering_nodes(w)) {
        if (o.kind(v) == NodeKind::Reader || tainted[v]) continue;
        ++overlap[v];
      }
    OvlId best = -1;
    int64_t best_overlap = 0;
    size_t best_size = 0;
    for (auto& [v, ov] : overlap) {
      size_t size = o.covered_counts(v).size();
      if (ov != (int64_t)size) continue; // not a subset of the remainder
      if (ov > best_overlap || (ov == best_overlap && size > best_size) ||
          (ov == best_overlap && size == best_size && (best == -1 || v < best))) {
        best = v;
        best_overlap = ov;
        best_size = size;
      }
    }
    if (best == -1) throw Error("greedy_cover: uncovered writers remain");
    cover.push_back(best);
    for (NodeId w : o.covered(best)) uncovered.erase(w);
  }
  return cover;
}

// Aggregate node computing exactly `want`: an existing node when one matches,
// otherwise a fresh partial over a greedy cover.
OvlId aggregate_over(OverlayGraph& o, const std::set<NodeId>& want) {
  std::vector<OvlId> cover = greedy_cover(o, want);
  if (cover.size() == 1) return cover[0];
  OvlId p = o.add_partial();
  for (OvlId v : cover) o.add_edge(v, p, +1);
  return p;
}

void rebuild_reader(OverlayGraph& o, NodeId reader, const std::vector<NodeId>& new_inputs) {
  auto rid = o.reader_of(reader);
  if (rid) o.remove_node(*rid);
  gc_orphan_partials(o);
  if (!new_inputs.empty()) iob_add_reader(o, reader, new_inputs);
}

bool upstream_has_negative(const OverlayGraph& o, OvlId n) {
  std::set<OvlId> seen{n};
  std::vector<OvlId> stack{n};
  while (!stack.empty()) {
    OvlId x = stack.back();
    stack.pop_back();
    for (const auto& e : o.in(x)) {
      if (e.sign < 0) return true;
      if (seen.insert(e.node).second) stack.push_back(e.node);
    }
  }
  return false;
}

} // namespace

void apply_edge_add(OverlayGraph& o, const DeltaEntry& delta, const MaintainParams& params,
                    std::vector<int>& direct_edge_counter) {
  if (delta.added.empty()) return;
  for (NodeId w : delta.added) o.ensure_writer(w);
  if ((size_t)delta.reader >= direct_edge_counter.size())
    direct_edge_counter.resize(delta.reader + 1, 0);
  auto net_inputs = [&](OvlId rid) {
    // signed coverage, not the positive-path index: negative repairs cancel
    std::vector<NodeId> inputs;
    for (auto& [w, c] : coverage(o, rid))
      if (c > 0) inputs.push_back(w);
    return inputs;
  };

  auto rid = o.reader_of(delta.reader);
  if (!rid) {
    // first inputs for this reader
    iob_add_reader(o, delta.reader, delta.added);
    return;
  }
  if ((int)delta.added.size() > params.direct_edge_threshold) {
    std::set<NodeId> want(delta.added.begin(), delta.added.end());
    o.add_edge(aggregate_over(o, want), *rid, +1);
    return;
  }
  for (NodeId w : delta.added) o.add_edge(*o.writer_of(w), *rid, +1);
  direct_edge_counter[delta.reader] += (int)delta.added.size();
  if (direct_edge_counter[delta.reader] > params.direct_edge_threshold) {
    rebuild_reader(o, delta.reader, net_inputs(*rid));
    direct_edge_counter[delta.reader] = 0;
  }
}

void apply_edge_del(OverlayGraph& o, const DeltaEntry& delta, const MaintainParams& params) {
  if (delta.removed.empty()) return;
  auto rid_opt = o.reader_of(delta.reader);
  if (!rid_opt) return;
  OvlId rid = *rid_opt;
  std::set<NodeId> gone(delta.removed.begin(), delta.removed.end());

  std::vector<NodeId> target;
  for (auto& [w, c] : coverage(o, rid)) // signed: negative repairs cancel here
    if (c > 0 && !gone.count(w)) target.push_back(w);

  // multi-path or negative-edge neighborhoods are rebuilt outright
  if (o.mode() == OverlayMode::DupInsensitive || upstream_has_negative(o, rid)) {
    rebuild_reader(o, delta.reader, target);
    return;
  }

  // affected partial aggregators upstream of the reader
  std::set<OvlId> upstream{rid};
  std::vector<OvlId> stack{rid};
  while (!stack.empty()) {
    OvlId x = stack.back();
    stack.pop_back();
    for (const auto& e : o.in(x))
      if (upstream.insert(e.node).second) stack.push_back(e.node);
  }
  std::vector<OvlId> affected;
  for (OvlId x : upstream) {
    if (!o.alive(x) || o.kind(x) != NodeKind::Partial) continue;
    for (const auto& [w, c] : o.covered_counts(x))
      if (c > 0 && gone.count(w)) {
        affected.push_back(x);
        break;
      }
  }

  if ((int)affected.size() > params.split_limit) {
    rebuild_reader(o, delta.reader, target);
    return;
  }

  // split path: bottom-up, each affected aggregator gets a clean part
  // (coverage minus the deleted writers) and a dirty part; the aggregator
  // keeps serving its other consumers through {clean, dirty}
  std::set<OvlId> affected_set(affected.begin(), affected.end());
  std::vector<OvlId> order;
  for (OvlId x : o.topo_order())
    if (affected_set.count(x)) order.push_back(x);

  std::map<OvlId, OvlId> clean_of, dirty_of; // -1 when the side is empty
  auto side_of = [&](OvlId u, bool clean) -> OvlId {
    bool touched = false;
    for (const auto& [w, c] : o.covered_counts(u))
      if (c > 0 && gone.count(w)) {
        touched = true;
        break;
      }
    if (o.kind(u) == NodeKind::Writer)
      return (gone.count(o.graph_node(u)) > 0) == clean ? -1 : u;
    if (!touched) return clean ? u : -1;
    return clean ? clean_of[u] : dirty_of[u];
  };

  for (OvlId p : order) {
    std::vector<OvlId> clean_in, dirty_in;
    for (const auto& e : std::vector<OvlEdge>(o.in(p))) {
      OvlId cs = side_of(e.node, true), ds = side_of(e.node, false);
      if (cs != -1) clean_in.push_back(cs);
      if (ds != -1) dirty_in.push_back(ds);
      o.remove_edge(e.node, p, e.sign);
    }
    auto build_side = [&](std::vector<OvlId>& in) -> OvlId {
      if (in.empty()) return -1;
      if (in.size() == 1) return in[0];
      OvlId part = o.add_partial();
      for (OvlId u : in) o.add_edge(u, part, +1);
      return part;
    };
    OvlId cp = build_side(clean_in), dp = build_side(dirty_in);
    clean_of[p] = cp;
    dirty_of[p] = dp;
    if (cp != -1) o.add_edge(cp, p, +1);
    if (dp != -1) o.add_edge(dp, p, +1);
  }

  // rewire the reader onto clean parts; direct deleted-writer edges just go
  for (const auto& e : std::vector<OvlEdge>(o.in(rid))) {
    OvlId u = e.node;
    bool touched = false;
    for (const auto& [w, c] : o.covered_counts(u))
      if (c > 0 && gone.count(w)) {
        touched = true;
        break;
      }
    if (!touched) continue;
    o.remove_edge(u, rid, e.sign);
    OvlId cs = o.kind(u) == NodeKind::Writer ? -1 : clean_of.count(u) ? clean_of[u] : -1;
    if (cs != -1) o.add_edge(cs, rid, +1);
  }
  if (o.in(rid).empty()) o.remove_node(rid);
  gc_orphan_partials(o);
}

// Re-establishes decision consistency after repairs: a node keeps push only
// while all its inputs stayed push; demotions cascade in topological order.
// Fresh plans are re-decided by the caller between epochs.
static void normalize_decisions(OverlayGraph& o) {
  for (OvlId n : o.topo_order()) {
    if (o.kind(n) == NodeKind::Writer) continue;
    if (o.decision(n) != Decision::Push) continue;
    for (const auto& e : o.in(n))
      if (o.decision(e.node) != Decision::Push) {
        o.set_decision(n, Decision::Pull);
        break;
      }
  }
}

void apply_structure_update(DataGraph& g, OverlayGraph& o, const QuerySpec& q,
                            const StructureUpdate& u, const MaintainParams& params,
                            std::vector<int>& direct_edge_counter) {
  auto run_deltas = [&](const DeltaList& deltas) {
    for (const DeltaEntry& d : deltas) {
      if (!d.removed.empty()) {
        DeltaEntry del{d.reader, {}, d.removed};
        apply_edge_del(o, del, params);
      }
      if (!d.added.empty()) {
        DeltaEntry add{d.reader, d.added, {}};
        apply_edge_add(o, add, params, direct_edge_counter);
      }
    }
  };

  switch (u.kind) {
    case StructureUpdate::Kind::EdgeAdd: {
      auto a = g.find(u.u), b = g.find(u.v);
      if (!a || !b) throw Error("edge add: unknown endpoint");
      if (g.has_edge(*a, *b)) return;
      DeltaList deltas = affected_readers(g, q, *a, *b, false);
      g.add_edge(*a, *b);
      run_deltas(deltas);
      break;
    }
    case StructureUpdate::Kind::EdgeDel: {
      auto a = g.find(u.u), b = g.find(u.v);
      if (!a || !b) throw Error("edge del: unknown endpoint");
      if (!g.has_edge(*a, *b)) throw Error("edge del: edge does not exist");
      DeltaList deltas = affected_readers(g, q, *a, *b, true);
      g.remove_edge(*a, *b);
      run_deltas(deltas);
      break;
    }
    case StructureUpdate::Kind::NodeAdd: {
      if (g.find(u.u)) throw Error("node add: label already in use");
      NodeId v = g.intern(u.u);
      g.set_activity(v, 0.0, 0.0);
      o.ensure_writer(v);
      for (const std::string& spec : u.initial_edges) {
        auto sep = spec.find('>');
        if (sep == std::string::npos) throw Error("node add: bad edge spec " + spec);
        StructureUpdate e;
        e.kind = StructureUpdate::Kind::EdgeAdd;
        e.u = spec.substr(0, sep);
        e.v = spec.substr(sep + 1);
        apply_structure_update(g, o, q, e, params, direct_edge_counter);
      }
      break;
    }
    case StructureUpdate::Kind::NodeDel: {
      auto v = g.find(u.u);
      if (!v) throw Error("node del: unknown node " + u.u);
      std::set<NodeId> cand = local_candidates(g, {*v}, q.hops);
      cand.erase(*v);
      std::map<NodeId, std::vector<NodeId>> before;
      for (NodeId r : cand)
        if (is_reader(g, q, r)) before[r] = neighborhood(g, q, r);
      g.remove_node(*v);
      run_deltas(diff_neighborhoods(g, q, cand, before));
      if (auto rid = o.reader_of(*v)) o.remove_node(*rid);
      if (auto wid = o.writer_of(*v)) o.remove_node(*wid);
      break;
    }
  }
  gc_orphan_partials(o);
  normalize_decisions(o);
}

} // namespace aggnet

#include "aggnet/overlay.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace aggnet {

OvlId OverlayGraph::add_writer(NodeId graph_node) {
  if (writer_of_.count(graph_node)) throw Error("writer already materialized");
  OvlId id = (OvlId)kind_.size();
  kind_.push_back(NodeKind::Writer);
  gnode_.push_back(graph_node);
  decision_.push_back(Decision::Push);
  alive_.push_back(1);
  in_.emplace_back();
  out_.emplace_back();
  covered_.emplace_back();
  ++alive_count_;
  writer_of_[graph_node] = id;
  index_add(id, graph_node, 1);
  return id;
}

OvlId OverlayGraph::add_reader(NodeId graph_node) {
  if (reader_of_.count(graph_node)) throw Error("reader already materialized");
  OvlId id = (OvlId)kind_.size();
  kind_.push_back(NodeKind::Reader);
  gnode_.push_back(graph_node);
  decision_.push_back(Decision::Pull);
  alive_.push_back(1);
  in_.emplace_back();
  out_.emplace_back();
  covered_.emplace_back();
  ++alive_count_;
  reader_of_[graph_node] = id;
  return id;
}

OvlId OverlayGraph::add_partial() {
  OvlId id = (OvlId)kind_.size();
  kind_.push_back(NodeKind::Partial);
  gnode_.push_back(-1);
  decision_.push_back(Decision::Push); // all-push placeholder is always consistent
  alive_.push_back(1);
  in_.emplace_back();
  out_.emplace_back();
  covered_.emplace_back();
  ++alive_count_;
  return id;
}

OvlId OverlayGraph::ensure_writer(NodeId graph_node) {
  auto it = writer_of_.find(graph_node);
  if (it != writer_of_.end()) return it->second;
  return add_writer(graph_node);
}

std::optional<OvlId> OverlayGraph::writer_of(NodeId g) const {
  auto it = writer_of_.find(g);
  if (it == writer_of_.end()) return std::nullopt;
  return it->second;
}

std::optional<OvlId> OverlayGraph::reader_of(NodeId g) const {
  auto it = reader_of_.find(g);
  if (it == reader_of_.end()) return std::nullopt;
  return it->second;
}

void OverlayGraph::check(OvlId n) const {
  if (!alive(n)) throw Error("unknown overlay node " + std::to_string(n));
}

void OverlayGraph::index_add(OvlId n, NodeId w, int64_t count) {
  auto& m = covered_[n];
  auto it = m.find(w);
  if (it == m.end()) {
    if (count != 0) {
      m.emplace(w, count);
      covering_[w].insert(n);
    }
    return;
  }
  it->second += count;
  if (it->second == 0) {
    m.erase(it);
    auto ci = covering_.find(w);
    ci->second.erase(n);
    if (ci->second.empty()) covering_.erase(ci);
  }
}

// Applies a covered-writer delta at `start` and forwards it through the
// positive out-closure in topological order (each descendant handled once).
void OverlayGraph::propagate_covered(OvlId start, const std::map<NodeId, int64_t>& delta) {
  if (delta.empty()) return;
  // collect the positive-edge descendant set
  std::vector<OvlId> stack{start};
  std::set<OvlId> seen{start};
  while (!stack.empty()) {
    OvlId x = stack.back();
    stack.pop_back();
    for (const auto& e : out_[x])
      if (e.sign > 0 && !seen.count(e.node)) {
        seen.insert(e.node);
        stack.push_back(e.node);
      }
  }
  // in-degree restricted to the set, then Kahn order
  std::map<OvlId, int> indeg;
  for (OvlId x : seen) indeg[x] = 0;
  for (OvlId x : seen)
    for (const auto& e : out_[x])
      if (e.sign > 0 && seen.count(e.node)) ++indeg[e.node];
  std::vector<OvlId> order;
  std::vector<OvlId> ready;
  for (auto& [x, d] : indeg)
    if (d == 0) ready.push_back(x);
  while (!ready.empty()) {
    OvlId x = ready.back();
    ready.pop_back();
    order.push_back(x);
    for (const auto& e : out_[x])
      if (e.sign > 0 && seen.count(e.node) && --indeg[e.node] == 0) ready.push_back(e.node);
  }
  if (order.size() != seen.size()) throw Error("overlay cycle detected while updating indexes");
  // pending multiplicity of the delta per node; start carries 1
  std::map<OvlId, int64_t> mult;
  mult[start] = 1;
  for (OvlId x : order) {
    auto mi = mult.find(x);
    if (mi == mult.end() || mi->second == 0) continue;
    int64_t k = mi->second;
    if (x != start)
      for (const auto& [w, c] : delta) index_add(x, w, c * k);
    for (const auto& e : out_[x])
      if (e.sign > 0) mult[e.node] += k;
  }
}

void OverlayGraph::add_edge(OvlId u, OvlId v, int sign) {
  check(u);
  check(v);
  if (u == v) throw Error("overlay self edge");
  if (sign != 1 && sign != -1) throw Error("edge sign must be +1 or -1");
  OvlEdge e{u, (int8_t)sign};
  auto& outs = out_[u];
  if (std::find(outs.begin(), outs.end(), OvlEdge{v, (int8_t)sign}) != outs.end())
    throw Error("duplicate overlay edge");
  outs.push_back({v, (int8_t)sign});
  in_[v].push_back(e);
  ++edges_;
  if (sign < 0) ++negative_edges_;
  if (sign > 0) {
    std::map<NodeId, int64_t> delta = covered_[u];
    for (auto& [w, c] : delta) index_add(v, w, c);
    propagate_covered(v, delta);
  }
}

void OverlayGraph::remove_edge(OvlId u, OvlId v, int sign) {
  check(u);
  check(v);
  auto& outs = out_[u];
  auto oi = std::find(outs.begin(), outs.end(), OvlEdge{v, (int8_t)sign});
  if (oi == outs.end()) throw Error("removing nonexistent overlay edge");
  outs.erase(oi);
  auto& ins = in_[v];
  ins.erase(std::find(ins.begin(), ins.end(), OvlEdge{u, (int8_t)sign}));
  --edges_;
  if (sign < 0) --negative_edges_;
  if (sign > 0) {
    std::map<NodeId, int64_t> delta;
    for (const auto& [w, c] : covered_[u]) delta[w] = -c;
    for (auto& [w, c] : delta) index_add(v, w, c);
    propagate_covered(v, delta);
  }
}

bool OverlayGraph::has_edge(OvlId u, OvlId v, int sign) const {
  if (!alive(u) || !alive(v)) return false;
  const auto& outs = out_[u];
  return std::find(outs.begin(), outs.end(), OvlEdge{v, (int8_t)sign}) != outs.end();
}

void OverlayGraph::remove_node(OvlId n) {
  check(n);
  for (auto e : std::vector<OvlEdge>(in_[n])) remove_edge(e.node, n, e.sign);
  for (auto e : std::vector<OvlEdge>(out_[n])) remove_edge(n, e.node, e.sign);
  if (kind_[n] == NodeKind::Writer) {
    index_add(n, gnode_[n], -1);
    writer_of_.erase(gnode_[n]);
  }
  if (kind_[n] == NodeKind::Reader) reader_of_.erase(gnode_[n]);
  alive_[n] = 0;
  --alive_count_;
}

size_t OverlayGraph::count_kind(NodeKind k) const {
  size_t c = 0;
  for (OvlId n = 0; n < limit(); ++n)
    if (alive_[n] && kind_[n] == k) ++c;
  return c;
}

NodeKind OverlayGraph::kind(OvlId n) const {
  check(n);
  return kind_[n];
}

NodeId OverlayGraph::graph_node(OvlId n) const {
  check(n);
  return gnode_[n];
}

Decision OverlayGraph::decision(OvlId n) const {
  check(n);
  return decision_[n];
}

void OverlayGraph::set_decision(OvlId n, Decision d) {
  check(n);
  decision_[n] = d;
}

const std::vector<OvlEdge>& OverlayGraph::in(OvlId n) const {
  check(n);
  return in_[n];
}

const std::vector<OvlEdge>& OverlayGraph::out(OvlId n) const {
  check(n);
  return out_[n];
}

std::vector<NodeId> OverlayGraph::covered(OvlId n) const {
  check(n);
  std::vector<NodeId> r;
  r.reserve(covered_[n].size());
  for (const auto& [w, c] : covered_[n])
    if (c > 0) r.push_back(w);
  return r;
}

const std::map<NodeId, int64_t>& OverlayGraph::covered_counts(OvlId n) const {
  check(n);
  return covered_[n];
}

const std::set<OvlId>& OverlayGraph::covering_nodes(NodeId writer) const {
  static const std::set<OvlId> empty;
  auto it = covering_.find(writer);
  return it == covering_.end() ? empty : it->second;
}

std::vector<OvlId> OverlayGraph::topo_order() const {
  std::vector<int> indeg(limit(), 0);
  for (OvlId n = 0; n < limit(); ++n)
    if (alive_[n]) indeg[n] = (int)in_[n].size();
  std::vector<OvlId> ready, order;
  for (OvlId n = 0; n < limit(); ++n)
    if (alive_[n] && indeg[n] == 0) ready.push_back(n);
  while (!ready.empty()) {
    OvlId x = ready.back();
    ready.pop_back();
    order.push_back(x);
    for (const auto& e : out_[x])
      if (--indeg[e.node] == 0) ready.push_back(e.node);
  }
  if (order.size() != alive_count_) throw Error("overlay graph has a cycle");
  return order;
}

OverlayGraph trivial_overlay(const BipartiteGraph& a) {
  OverlayGraph o(OverlayMode::DupSensitive);
  for (NodeId r = 0; r < a.node_limit; ++r) {
    if (!a.reader[r] || a.inputs[r].empty()) continue;
    OvlId rid = o.add_reader(r);
    for (NodeId w : a.inputs[r]) o.add_edge(o.ensure_writer(w), rid, +1);
    o.set_decision(rid, Decision::Push);
  }
  return o;
}

double sharing_index(const OverlayGraph& o, const BipartiteGraph& a) {
  size_t base = a.edge_count();
  if (base == 0) throw Error("sharing index undefined: A_G has no edges");
  return 1.0 - (double)o.edge_count() / (double)base;
}

CoverageVector coverage(const OverlayGraph& o, OvlId n) {
  if (!o.alive(n)) throw Error("coverage: unknown overlay node " + std::to_string(n));
  // upstream closure
  std::set<OvlId> up{n};
  std::vector<OvlId> stack{n};
  while (!stack.empty()) {
    OvlId x = stack.back();
    stack.pop_back();
    for (const auto& e : o.in(x))
      if (!up.count(e.node)) {
        up.insert(e.node);
        stack.push_back(e.node);
      }
  }
  // topo order restricted to the closure
  std::map<OvlId, int> indeg;
  for (OvlId x : up) indeg[x] = (int)o.in(x).size();
  std::vector<OvlId> ready, order;
  for (auto& [x, d] : indeg)
    if (d == 0) ready.push_back(x);
  while (!ready.empty()) {
    OvlId x = ready.back();
    ready.pop_back();
    order.push_back(x);
    for (const auto& e : o.out(x)) {
      auto it = indeg.find(e.node);
      if (it != indeg.end() && --it->second == 0) ready.push_back(e.node);
    }
  }
  if (order.size() != up.size()) throw Error("coverage: cycle detected");
  std::map<OvlId, CoverageVector> contrib;
  for (OvlId x : order) {
    CoverageVector cv;
    if (o.kind(x) == NodeKind::Writer) cv[o.graph_node(x)] = 1;
    for (const auto& e : o.in(x)) {
      for (const auto& [w, c] : contrib[e.node]) {
        int64_t& slot = cv[w];
        int64_t add = e.sign > 0 ? c : -c;
        if (__builtin_add_overflow(slot, add, &slot)) throw Error("coverage counter overflow");
        if (slot == 0) cv.erase(w);
      }
    }
    contrib[x] = std::move(cv);
  }
  return contrib[n];
}

static void add_violation(std::vector<Violation>& v, const std::string& kind, const std::string& detail) {
  v.push_back({kind, detail});
}

std::vector<Violation> validate(const OverlayGraph& o, const BipartiteGraph& a, const AggCaps& caps) {
  std::vector<Violation> violations;

  // acyclicity
  bool acyclic = true;
  try {
    o.topo_order();
  } catch (const Error&) {
    acyclic = false;
    add_violation(violations, "cycle", "overlay graph is not acyclic");
  }

  bool has_negative = false;
  for (OvlId n = 0; n < o.limit(); ++n) {
    if (!o.alive(n)) continue;
    for (const auto& e : o.out(n))
      if (e.sign < 0) has_negative = true;
    switch (o.kind(n)) {
      case NodeKind::Writer:
        if (!o.in(n).empty())
          add_violation(violations, "writer-input", "writer node " + std::to_string(n) + " has incoming edges");
        if (o.decision(n) != Decision::Push)
          add_violation(violations, "writer-pull", "writer node " + std::to_string(n) + " is not push");
        break;
      case NodeKind::Reader:
        if (!o.out(n).empty())
          add_violation(violations, "reader-output", "reader node " + std::to_string(n) + " has outgoing edges");
        break;
      case NodeKind::Partial:
        break;
    }
  }

  if (has_negative && !caps.subtractable)
    add_violation(violations, "capability",
                  "overlay has negative edges but the aggregate is not subtractable");

  // decision consistency: push node's inputs all push; pull node's downstream all pull
  for (OvlId n = 0; n < o.limit(); ++n) {
    if (!o.alive(n)) continue;
    if (o.decision(n) == Decision::Push) {
      for (const auto& e : o.in(n))
        if (o.decision(e.node) != Decision::Push)
          add_violation(violations, "decision",
                        "push node " + std::to_string(n) + " has pull input " + std::to_string(e.node));
    }
  }

  if (!acyclic) return violations;

  // coverage against A_G, per reader
  bool multipath = false;
  for (NodeId r = 0; r < a.node_limit; ++r) {
    if (!a.reader[r]) continue;
    auto rid = o.reader_of(r);
    if (!rid) {
      if (!a.inputs[r].empty())
        add_violation(violations, "coverage", "reader " + std::to_string(r) + " missing from overlay");
      continue;
    }
    CoverageVector cv = coverage(o, *rid);
    if (o.mode() == OverlayMode::DupSensitive) {
      for (const auto& [w, c] : cv) {
        if (c != 1)
          add_violation(violations, "coverage",
                        "reader " + std::to_string(r) + " net contribution of writer " + std::to_string(w) +
                            " is " + std::to_string(c));
        else if (!a.has_edge(w, r))
          add_violation(violations, "coverage",
                        "reader " + std::to_string(r) + " aggregates writer " + std::to_string(w) +
                            " outside N(r)");
        if (c > 1) multipath = true;
      }
      for (NodeId w : a.inputs[r])
        if (!cv.count(w))
          add_violation(violations, "coverage",
                        "reader " + std::to_string(r) + " misses writer " + std::to_string(w));
    } else {
      // duplicate-insensitive: reachability over >= 1 positive path, no negatives
      for (const auto& [w, c] : cv) {
        if (c > 1) multipath = true;
        if (c < 1)
          add_violation(violations, "coverage",
                        "reader " + std::to_string(r) + " net contribution of writer " + std::to_string(w) +
                            " is " + std::to_string(c));
        else if (!a.has_edge(w, r))
          add_violation(violations, "coverage",
                        "reader " + std::to_string(r) + " aggregates writer " + std::to_string(w) +
                            " outside N(r)");
      }
      for (NodeId w : a.inputs[r])
        if (!cv.count(w) || cv.at(w) < 1)
          add_violation(violations, "coverage",
                        "reader " + std::to_string(r) + " misses writer " + std::to_string(w));
    }
  }
  if (o.mode() == OverlayMode::DupInsensitive && has_negative)
    add_violation(violations, "capability", "duplicate-insensitive overlay carries negative edges");
  if (multipath && !caps.duplicate_insensitive)
    add_violation(violations, "duplicate-path",
                  "multiple positive paths present but the aggregate is duplicate-sensitive");

  // index consistency: recompute covered sets from scratch
  {
    auto order = o.topo_order();
    std::vector<std::map<NodeId, int64_t>> cov(o.limit());
    for (OvlId x : order) {
      if (o.kind(x) == NodeKind::Writer) cov[x][o.graph_node(x)] += 1;
      for (const auto& e : o.in(x))
        if (e.sign > 0)
          for (const auto& [w, c] : cov[e.node]) cov[x][w] += c;
    }
    for (OvlId x = 0; x < o.limit(); ++x) {
      if (!o.alive(x)) continue;
      for (auto it = cov[x].begin(); it != cov[x].end();)
        it = it->second == 0 ? cov[x].erase(it) : std::next(it);
      if (cov[x] != o.covered_counts(x))
        add_violation(violations, "index", "covered-writer index of node " + std::to_string(x) + " is stale");
    }
  }
  return violations;
}

DepthProfile depth_profile(const OverlayGraph& o) {
  DepthProfile p;
  auto order = o.topo_order();
  std::vector<int> depth(o.limit(), 0);
  for (OvlId x : order) {
    int d = 0;
    for (const auto& e : o.in(x)) d = std::max(d, depth[e.node] + 1);
    depth[x] = d;
    if (o.kind(x) == NodeKind::Reader) p.reader_depth[o.graph_node(x)] = d;
  }
  double sum = 0;
  for (auto& [r, d] : p.reader_depth) sum += d;
  p.mean = p.reader_depth.empty() ? 0.0 : sum / (double)p.reader_depth.size();
  return p;
}

void save_overlay(const OverlayGraph& o, std::ostream& out) {
  out << "mode " << (o.mode() == OverlayMode::DupSensitive ? "dup_sensitive" : "dup_insensitive") << "\n";
  for (OvlId n = 0; n < o.limit(); ++n) {
    if (!o.alive(n)) continue;
    out << n << ' ';
    switch (o.kind(n)) {
      case NodeKind::Writer: out << "writer:" << o.graph_node(n); break;
      case NodeKind::Reader: out << "reader:" << o.graph_node(n); break;
      case NodeKind::Partial: out << "partial"; break;
    }
    out << ' ' << (o.decision(n) == Decision::Push ? "push" : "pull");
    for (const auto& e : o.in(n)) out << ' ' << (e.sign > 0 ? '+' : '-') << e.node;
    out << "\n";
  }
}

OverlayGraph load_overlay(std::istream& in) {
  std::string line;
  OverlayGraph o;
  bool mode_seen = false;
  struct Rec {
    OvlId id;
    NodeKind kind;
    NodeId gnode;
    Decision dec;
    std::vector<std::pair<OvlId, int>> inputs;
  };
  std::vector<Rec> recs;
  OvlId max_id = -1;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    if (!mode_seen) {
      std::string kw, m;
      if (!(ls >> kw >> m) || kw != "mode") throw Error("overlay file: expected mode line first");
      if (m == "dup_sensitive") o.set_mode(OverlayMode::DupSensitive);
      else if (m == "dup_insensitive") o.set_mode(OverlayMode::DupInsensitive);
      else throw Error("overlay file: unknown mode " + m);
      mode_seen = true;
      continue;
    }
    Rec r;
    std::string kind, dec;
    if (!(ls >> r.id >> kind >> dec))
      throw Error("overlay file: bad record at line " + std::to_string(lineno));
    if (kind == "partial") {
      r.kind = NodeKind::Partial;
      r.gnode = -1;
    } else if (kind.rfind("writer:", 0) == 0) {
      r.kind = NodeKind::Writer;
      r.gnode = (NodeId)std::stol(kind.substr(7));
    } else if (kind.rfind("reader:", 0) == 0) {
      r.kind = NodeKind::Reader;
      r.gnode = (NodeId)std::stol(kind.substr(7));
    } else {
      throw Error("overlay file: unknown kind " + kind + " at line " + std::to_string(lineno));
    }
    if (dec == "push") r.dec = Decision::Push;
    else if (dec == "pull") r.dec = Decision::Pull;
    else throw Error("overlay file: unknown decision " + dec);
    std::string tok;
    while (ls >> tok) {
      if (tok.size() < 2 || (tok[0] != '+' && tok[0] != '-'))
        throw Error("overlay file: bad input token " + tok + " at line " + std::to_string(lineno));
      r.inputs.push_back({(OvlId)std::stol(tok.substr(1)), tok[0] == '+' ? +1 : -1});
    }
    max_id = std::max(max_id, r.id);
    recs.push_back(std::move(r));
  }
  // allocate ids densely up to max_id, tombstoning the gaps, so ids round-trip
  std::vector<char> present(max_id + 1, 0);
  for (const auto& r : recs) {
    if (present[r.id]) throw Error("overlay file: duplicate node id " + std::to_string(r.id));
    present[r.id] = 1;
  }
  std::vector<Rec*> by_id(max_id + 1, nullptr);
  for (auto& r : recs) by_id[r.id] = &r;
  std::vector<OvlId> dead;
  for (OvlId i = 0; i <= max_id; ++i) {
    if (by_id[i]) {
      Rec& r = *by_id[i];
      OvlId got = r.kind == NodeKind::Writer   ? o.add_writer(r.gnode)
                  : r.kind == NodeKind::Reader ? o.add_reader(r.gnode)
                                               : o.add_partial();
      (void)got;
      o.set_decision(i, r.dec);
    } else {
      dead.push_back(o.add_partial());
    }
  }
  for (const auto& r : recs)
    for (auto [u, s] : r.inputs) o.add_edge(u, r.id, s);
  for (OvlId d : dead) o.remove_node(d);
  return o;
}

void save_overlay_file(const OverlayGraph& o, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot open " + path);
  save_overlay(o, f);
}

OverlayGraph load_overlay_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open " + path);
  return load_overlay(f);
}

} // namespace aggnet

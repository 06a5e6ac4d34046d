#include "aggnet/graph.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <istream>
#include <sstream>

namespace aggnet {

void QuerySpec::check() const {
  if (hops < 1) throw Error("query: hop count must be >= 1");
  if (window.param <= 0) throw Error("query: window parameter must be positive");
}

NodeId DataGraph::intern(const std::string& label) {
  auto it = by_label_.find(label);
  if (it != by_label_.end()) return it->second;
  NodeId id = (NodeId)labels_.size();
  labels_.push_back(label);
  by_label_.emplace(label, id);
  alive_.push_back(1);
  out_.emplace_back();
  in_.emplace_back();
  streams_.emplace_back();
  write_rate_.push_back(0.0);
  read_rate_.push_back(0.0);
  has_activity_.push_back(0);
  attrs_.emplace_back();
  ++alive_nodes_;
  return id;
}

std::optional<NodeId> DataGraph::find(const std::string& label) const {
  auto it = by_label_.find(label);
  if (it == by_label_.end() || !alive_[it->second]) return std::nullopt;
  return it->second;
}

const std::string& DataGraph::label(NodeId v) const {
  check_node(v);
  return labels_[v];
}

void DataGraph::check_node(NodeId v) const {
  if (!alive(v)) throw Error("unknown node id " + std::to_string(v));
}

static bool sorted_insert(std::vector<NodeId>& vec, NodeId x) {
  auto it = std::lower_bound(vec.begin(), vec.end(), x);
  if (it != vec.end() && *it == x) return false;
  vec.insert(it, x);
  return true;
}

static bool sorted_erase(std::vector<NodeId>& vec, NodeId x) {
  auto it = std::lower_bound(vec.begin(), vec.end(), x);
  if (it == vec.end() || *it != x) return false;
  vec.erase(it);
  return true;
}

void DataGraph::add_edge(NodeId u, NodeId v, bool symmetric) {
  check_node(u);
  check_node(v);
  if (u == v) throw Error("self loop rejected on node " + labels_[u]);
  if (sorted_insert(out_[u], v)) {
    sorted_insert(in_[v], u);
    ++edges_;
  }
  if (symmetric && sorted_insert(out_[v], u)) {
    sorted_insert(in_[u], v);
    ++edges_;
  }
}

bool DataGraph::remove_edge(NodeId u, NodeId v) {
  check_node(u);
  check_node(v);
  if (!sorted_erase(out_[u], v)) return false;
  sorted_erase(in_[v], u);
  --edges_;
  return true;
}

bool DataGraph::has_edge(NodeId u, NodeId v) const {
  if (!alive(u) || !alive(v)) return false;
  return std::binary_search(out_[u].begin(), out_[u].end(), v);
}

void DataGraph::remove_node(NodeId v) {
  check_node(v);
  for (NodeId w : std::vector<NodeId>(out_[v])) remove_edge(v, w);
  for (NodeId w : std::vector<NodeId>(in_[v])) remove_edge(w, v);
  alive_[v] = 0;
  by_label_.erase(labels_[v]);
  --alive_nodes_;
}

const std::vector<NodeId>& DataGraph::out(NodeId v) const {
  check_node(v);
  return out_[v];
}

const std::vector<NodeId>& DataGraph::in(NodeId v) const {
  check_node(v);
  return in_[v];
}

void DataGraph::record_write(NodeId v, int64_t ts, int64_t value) {
  check_node(v);
  auto& s = streams_[v];
  if (!s.empty() && ts < s.back().ts)
    throw Error("out-of-order write on node " + labels_[v] + ": ts " + std::to_string(ts) +
                " < " + std::to_string(s.back().ts));
  s.push_back({ts, value});
}

const std::vector<StreamEntry>& DataGraph::stream(NodeId v) const {
  check_node(v);
  return streams_[v];
}

void DataGraph::set_activity(NodeId v, double write_rate, double read_rate) {
  check_node(v);
  if (write_rate < 0 || read_rate < 0) throw Error("activity rates must be non-negative");
  write_rate_[v] = write_rate;
  read_rate_[v] = read_rate;
  has_activity_[v] = 1;
}

bool DataGraph::has_activity(NodeId v) const {
  check_node(v);
  return has_activity_[v];
}

double DataGraph::write_rate(NodeId v) const {
  check_node(v);
  return write_rate_[v];
}

double DataGraph::read_rate(NodeId v) const {
  check_node(v);
  return read_rate_[v];
}

void DataGraph::set_attr(NodeId v, const std::string& key, const std::string& value) {
  check_node(v);
  attrs_[v][key] = value;
}

bool DataGraph::attr_equals(NodeId v, const AttrTest& t) const {
  check_node(v);
  auto it = attrs_[v].find(t.key);
  return it != attrs_[v].end() && it->second == t.value;
}

size_t BipartiteGraph::edge_count() const {
  size_t n = 0;
  for (const auto& l : inputs) n += l.size();
  return n;
}

std::vector<NodeId> BipartiteGraph::readers() const {
  std::vector<NodeId> r;
  for (NodeId v = 0; v < node_limit; ++v)
    if (reader[v]) r.push_back(v);
  return r;
}

std::vector<int64_t> BipartiteGraph::writer_degrees() const {
  std::vector<int64_t> deg(node_limit, 0);
  for (const auto& l : inputs)
    for (NodeId w : l) ++deg[w];
  return deg;
}

bool BipartiteGraph::has_edge(NodeId w, NodeId r) const {
  if (r < 0 || r >= node_limit || !reader[r]) return false;
  return std::binary_search(inputs[r].begin(), inputs[r].end(), w);
}

DataGraph load_graph(std::istream& in, const LoadOptions& opts) {
  DataGraph g;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string u, v, extra;
    if (!(ls >> u >> v))
      throw Error("parse error at line " + std::to_string(lineno) + ": expected \"u<tab>v\"");
    if (ls >> extra)
      throw Error("parse error at line " + std::to_string(lineno) + ": trailing field \"" + extra + "\"");
    NodeId a = g.intern(u);
    NodeId b = g.intern(v);
    if (a == b) throw Error("self loop rejected at line " + std::to_string(lineno) + ": node " + u);
    g.add_edge(a, b, opts.symmetric);
  }
  return g;
}

DataGraph load_graph_file(const std::string& path, const LoadOptions& opts) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open " + path);
  return load_graph(f, opts);
}

std::vector<NodeId> neighborhood(const DataGraph& g, const QuerySpec& q, NodeId v) {
  q.check();
  if (!g.alive(v)) throw Error("neighborhood: unknown node id " + std::to_string(v));
  // BFS over reversed query direction, bounded by q.hops
  std::vector<int> dist(g.max_id(), -1);
  std::deque<NodeId> queue;
  dist[v] = 0;
  queue.push_back(v);
  std::vector<NodeId> result;
  while (!queue.empty()) {
    NodeId x = queue.front();
    queue.pop_front();
    if (dist[x] == q.hops) continue;
    auto step = [&](const std::vector<NodeId>& nbrs) {
      for (NodeId y : nbrs) {
        if (dist[y] >= 0) continue;
        dist[y] = dist[x] + 1;
        queue.push_back(y);
        if (!q.writer_filter || g.attr_equals(y, *q.writer_filter)) result.push_back(y);
      }
    };
    switch (q.direction) {
      case EdgeDir::In: step(g.in(x)); break;
      case EdgeDir::Out: step(g.out(x)); break;
      case EdgeDir::Both:
        step(g.in(x));
        step(g.out(x));
        break;
    }
  }
  std::sort(result.begin(), result.end());
  return result;
}

BipartiteGraph derive_bipartite(const DataGraph& g, const QuerySpec& q) {
  q.check();
  BipartiteGraph a;
  a.node_limit = g.max_id();
  a.reader.assign(a.node_limit, 0);
  a.inputs.assign(a.node_limit, {});
  for (NodeId v = 0; v < a.node_limit; ++v) {
    if (!g.alive(v)) continue;
    if (q.reader_pred && !g.attr_equals(v, *q.reader_pred)) continue;
    a.reader[v] = 1;
    a.inputs[v] = neighborhood(g, q, v);
  }
  return a;
}

} // namespace aggnet

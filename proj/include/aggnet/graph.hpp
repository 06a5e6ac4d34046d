#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "aggnet/common.hpp"

namespace aggnet {

struct StreamEntry {
  int64_t ts;
  int64_t value;
};

enum class EdgeDir { In, Out, Both };

struct WindowSpec {
  enum class Kind { Count, Time };
  Kind kind = Kind::Count;
  int64_t param = 1; // c for count windows, T for time windows

  static WindowSpec count(int64_t c) { return {Kind::Count, c}; }
  static WindowSpec time(int64_t t) { return {Kind::Time, t}; }
};

// Equality test on a static node attribute.
struct AttrTest {
  std::string key;
  std::string value;
};

// Ego-centric aggregate query: aggregate, window, neighborhood rule, reader predicate.
struct QuerySpec {
  std::string aggregate = "sum";
  WindowSpec window = WindowSpec::count(1);
  int hops = 1;
  EdgeDir direction = EdgeDir::In; // In: N(x) = {y | y -> x}
  std::optional<AttrTest> writer_filter; // filters neighborhood members
  std::optional<AttrTest> reader_pred;   // nullopt: every node is a reader

  void check() const;
};

// The evolving directed base graph with per-node content streams and activity
// estimates. Structure mutation is single-writer; see the maintenance module.
class DataGraph {
public:
  NodeId intern(const std::string& label); // get-or-create
  std::optional<NodeId> find(const std::string& label) const;
  const std::string& label(NodeId v) const;

  // Edges. Self loops are rejected: self-aggregation is undefined.
  void add_edge(NodeId u, NodeId v, bool symmetric = false);
  bool remove_edge(NodeId u, NodeId v); // true if the edge existed
  bool has_edge(NodeId u, NodeId v) const;
  void remove_node(NodeId v);

  bool alive(NodeId v) const { return v >= 0 && v < (NodeId)alive_.size() && alive_[v]; }
  NodeId max_id() const { return (NodeId)alive_.size(); }
  size_t node_count() const { return alive_nodes_; }
  size_t edge_count() const { return edges_; }
  const std::vector<NodeId>& out(NodeId v) const;
  const std::vector<NodeId>& in(NodeId v) const;

  // Content streams; timestamps per node are non-decreasing.
  void record_write(NodeId v, int64_t ts, int64_t value);
  const std::vector<StreamEntry>& stream(NodeId v) const;

  // Activity estimates (events per unit time).
  void set_activity(NodeId v, double write_rate, double read_rate);
  bool has_activity(NodeId v) const;
  double write_rate(NodeId v) const;
  double read_rate(NodeId v) const;

  void set_attr(NodeId v, const std::string& key, const std::string& value);
  bool attr_equals(NodeId v, const AttrTest& t) const;

private:
  void check_node(NodeId v) const;

  std::vector<std::string> labels_;
  std::unordered_map<std::string, NodeId> by_label_;
  std::vector<char> alive_;
  std::vector<std::vector<NodeId>> out_, in_;
  std::vector<std::vector<StreamEntry>> streams_;
  std::vector<double> write_rate_, read_rate_;
  std::vector<char> has_activity_;
  std::vector<std::unordered_map<std::string, std::string>> attrs_;
  size_t edges_ = 0;
  size_t alive_nodes_ = 0;
};

// Writer/reader incidence structure A_G derived from the data graph and the
// query. Every graph node owns both roles; a writer only shows up in overlay
// construction if some reader consumes it.
struct BipartiteGraph {
  NodeId node_limit = 0;                    // ids are < node_limit
  std::vector<char> reader;                 // reader role present
  std::vector<std::vector<NodeId>> inputs;  // sorted N(r) per reader, empty otherwise

  size_t edge_count() const;
  std::vector<NodeId> readers() const;
  std::vector<int64_t> writer_degrees() const; // out-degree per node id
  bool has_edge(NodeId w, NodeId r) const;
};

struct LoadOptions {
  bool symmetric = false; // treat each line as an undirected pair
};

// Line-oriented "u <tab> v" records; '#' comments; duplicate lines collapse.
DataGraph load_graph(std::istream& in, const LoadOptions& opts = {});
DataGraph load_graph_file(const std::string& path, const LoadOptions& opts = {});

// N(v) under q: nodes reaching v by <= k reversed query-direction steps,
// excluding v itself, filtered by the writer filter. Sorted by id.
std::vector<NodeId> neighborhood(const DataGraph& g, const QuerySpec& q, NodeId v);

BipartiteGraph derive_bipartite(const DataGraph& g, const QuerySpec& q);

} // namespace aggnet

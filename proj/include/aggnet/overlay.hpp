#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "aggnet/graph.hpp"

namespace aggnet {

enum class NodeKind : uint8_t { Writer, Reader, Partial };
enum class Decision : uint8_t { Push, Pull };
enum class OverlayMode : uint8_t { DupSensitive, DupInsensitive };

// Capability flags an aggregate declares; they gate negative edges and
// multi-path overlays.
struct AggCaps {
  bool duplicate_insensitive = false;
  bool subtractable = false;
};

struct OvlEdge {
  OvlId node;
  int8_t sign; // +1 or -1
  bool operator==(const OvlEdge& o) const { return node == o.node && sign == o.sign; }
};

// Signed DAG of writer / partial-aggregator / reader nodes, with per-node
// push/pull decisions. Immutable during execution epochs; all mutation goes
// through the add/remove methods below, which keep the forward index (input
// lists) and the reverse index (writer -> nodes covering it) consistent.
class OverlayGraph {
public:
  explicit OverlayGraph(OverlayMode mode = OverlayMode::DupSensitive) : mode_(mode) {}

  OverlayMode mode() const { return mode_; }
  void set_mode(OverlayMode m) { mode_ = m; }

  OvlId add_writer(NodeId graph_node);
  OvlId add_reader(NodeId graph_node);
  OvlId add_partial();
  OvlId ensure_writer(NodeId graph_node); // get-or-create

  std::optional<OvlId> writer_of(NodeId graph_node) const;
  std::optional<OvlId> reader_of(NodeId graph_node) const;

  void add_edge(OvlId u, OvlId v, int sign = +1);
  void remove_edge(OvlId u, OvlId v, int sign = +1);
  bool has_edge(OvlId u, OvlId v, int sign = +1) const;
  void remove_node(OvlId n);

  bool alive(OvlId n) const { return n >= 0 && n < (OvlId)alive_.size() && alive_[n]; }
  OvlId limit() const { return (OvlId)alive_.size(); }
  size_t node_count() const { return alive_count_; }
  size_t edge_count() const { return edges_; }
  size_t negative_edge_count() const { return negative_edges_; }
  size_t count_kind(NodeKind k) const;

  NodeKind kind(OvlId n) const;
  NodeId graph_node(OvlId n) const; // for writer/reader nodes
  Decision decision(OvlId n) const;
  void set_decision(OvlId n, Decision d);

  const std::vector<OvlEdge>& in(OvlId n) const;  // forward index: input list
  const std::vector<OvlEdge>& out(OvlId n) const;

  // Covered-writer set I(n): writers reaching n over positive edges.
  // Maintained incrementally on every mutation.
  std::vector<NodeId> covered(OvlId n) const;
  const std::map<NodeId, int64_t>& covered_counts(OvlId n) const;
  // Reverse index: overlay nodes whose covered set contains the writer.
  const std::set<OvlId>& covering_nodes(NodeId writer) const;

  // Topological order of alive nodes; throws on a cycle.
  std::vector<OvlId> topo_order() const;

private:
  void check(OvlId n) const;
  void propagate_covered(OvlId start, const std::map<NodeId, int64_t>& delta);
  void index_add(OvlId n, NodeId w, int64_t count);

  OverlayMode mode_;
  std::vector<NodeKind> kind_;
  std::vector<NodeId> gnode_;
  std::vector<Decision> decision_;
  std::vector<char> alive_;
  std::vector<std::vector<OvlEdge>> in_, out_;
  std::vector<std::map<NodeId, int64_t>> covered_;
  std::map<NodeId, std::set<OvlId>> covering_;
  std::map<NodeId, OvlId> writer_of_, reader_of_;
  size_t edges_ = 0;
  size_t negative_edges_ = 0;
  size_t alive_count_ = 0;
};

// Signed per-writer contribution counts for one overlay node.
using CoverageVector = std::map<NodeId, int64_t>;

struct Violation {
  std::string kind;
  std::string detail;
};

// Identity compilation: one writer node per connected writer, one reader node
// per reader with inputs, a direct positive edge per A_G edge, all push.
OverlayGraph trivial_overlay(const BipartiteGraph& a);

// 1 - edges(overlay)/edges(A_G); negative for pathological overlays.
double sharing_index(const OverlayGraph& o, const BipartiteGraph& a);

// Exact signed contributions by topological DP over the upstream closure.
CoverageVector coverage(const OverlayGraph& o, OvlId n);

// Full validation pass: structure, decisions, coverage vs A_G, capability
// rules, index consistency. Violations are data, not errors.
std::vector<Violation> validate(const OverlayGraph& o, const BipartiteGraph& a, const AggCaps& caps);

struct DepthProfile {
  std::map<NodeId, int> reader_depth; // by graph node
  double mean = 0.0;
};

DepthProfile depth_profile(const OverlayGraph& o);

// Line-oriented text: "mode <m>" then one record per node:
//   <id> writer:<graph-id>|reader:<graph-id>|partial push|pull [<+|-><input-id>...]
// '#' comments; round-trips exactly.
void save_overlay(const OverlayGraph& o, std::ostream& out);
OverlayGraph load_overlay(std::istream& in);
void save_overlay_file(const OverlayGraph& o, const std::string& path);
OverlayGraph load_overlay_file(const std::string& path);

} // namespace aggnet

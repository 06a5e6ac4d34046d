#pragma once

#include <vector>

#include "aggnet/construct.hpp"
#include "aggnet/overlay.hpp"

namespace aggnet {

struct StructureUpdate {
  enum class Kind { EdgeAdd, EdgeDel, NodeAdd, NodeDel };
  Kind kind;
  int64_t ts = 0;
  std::string u, v;                       // node labels; v used by edge ops
  std::vector<std::string> initial_edges; // node_add: optional "u>x" targets
};

struct DeltaEntry {
  NodeId reader;
  std::vector<NodeId> added;   // writers entering N(reader)
  std::vector<NodeId> removed; // writers leaving N(reader)
};

using DeltaList = std::vector<DeltaEntry>;

struct MaintainParams {
  int direct_edge_threshold = 8; // above this, deltas get their own aggregator
  int split_limit = 5;           // more touched aggregators than this: rebuild the reader
};

// Exact per-reader input-list deltas the update would cause; the update must
// not be applied to g yet.
DeltaList affected_readers(const DataGraph& g, const QuerySpec& q, NodeId a, NodeId b, bool removal);

// Incremental repair; every entry point keeps the overlay's coverage equal to
// the post-update N(r) of every reader.
void apply_edge_add(OverlayGraph& o, const DeltaEntry& delta, const MaintainParams& params,
                    std::vector<int>& direct_edge_counter);
void apply_edge_del(OverlayGraph& o, const DeltaEntry& delta, const MaintainParams& params);

// Applies one structural update end to end: mutate g, then repair o.
void apply_structure_update(DataGraph& g, OverlayGraph& o, const QuerySpec& q,
                            const StructureUpdate& u, const MaintainParams& params,
                            std::vector<int>& direct_edge_counter);

} // namespace aggnet

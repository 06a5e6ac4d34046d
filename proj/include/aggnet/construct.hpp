#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "aggnet/overlay.hpp"

namespace aggnet {

struct ConstructionParams {
  int initial_chunk_size = 100;
  double adapt_fraction = 0.9;
  int k1 = 2;              // max insertion paths per reader (negative mode)
  int k2 = 5;              // max negative edges per path
  double overlap_pct = 20; // consecutive-chunk reader overlap (duplicate mode)
  int max_iterations = 10;
  int64_t min_benefit = 1;
  int num_hashes = 2;
  uint64_t seed = 1;

  void check() const;
};

enum class MineMode { Basic, Negative, Duplicate };
enum class VnmVariant { Base, Adaptive, Negative, Duplicate };
enum class Algorithm { Trivial, Vnm, VnmA, VnmN, VnmD, Iob };

Algorithm algorithm_from_name(const std::string& name);
std::string algorithm_name(Algorithm a);

// Readers sorted lexicographically by their min-hash shingle vectors, ties by
// id; readers with empty input lists go last.
std::vector<NodeId> shingle_order(const BipartiteGraph& a, int num_hashes, uint64_t seed);

// Writers ascending by out-degree in A_G, ties by id.
std::vector<NodeId> sort_writers(const BipartiteGraph& a);

// One aggregation node of the mining frontier: its input items in any order.
// `reused[i]` marks an input available only through a previously mined edge
// (duplicate mode).
struct MiningInput {
  OvlId node;
  std::vector<OvlId> items;
  std::vector<char> reused;
};

struct MinedBiclique {
  std::vector<OvlId> writers; // path items, root first
  std::vector<OvlId> readers; // support at the path end
  std::vector<std::pair<OvlId, OvlId>> negatives; // (reader, writer): missing edge, repaired
  std::vector<std::pair<OvlId, OvlId>> reused;    // (reader, writer): edge mined before
  int64_t benefit = 0;
};

// Prefix tree over item lists with support / negative-support / mined-support
// sets per node. Item positions strictly increase along any root path.
class FpTree {
public:
  FpTree(MineMode mode, int k1, int k2);
  ~FpTree();
  FpTree(FpTree&&) noexcept;
  FpTree& operator=(FpTree&&) noexcept;

  // All mineable bicliques ordered by descending benefit (deterministic ties).
  std::vector<MinedBiclique> mine_all(int64_t min_benefit) const;
  std::optional<MinedBiclique> mine_best(int64_t min_benefit) const;

  // test hook: tree structure snapshot
  struct NodeView {
    OvlId item;
    std::vector<OvlId> support, neg_support, mined_support;
    std::vector<NodeView> children;
  };
  std::vector<NodeView> export_roots() const;

private:
  struct Node;
  struct Impl;
  std::unique_ptr<Impl> impl_;

  void insert(const MiningInput& txn, const std::vector<int>& positions);

  friend FpTree build_fptree(const std::vector<MiningInput>&, const std::vector<OvlId>&, MineMode,
                             const ConstructionParams&);
};

// `item_order` positions every item the chunk mentions; lists are rewritten
// in that order before insertion, one reader at a time.
FpTree build_fptree(const std::vector<MiningInput>& chunk, const std::vector<OvlId>& item_order,
                    MineMode mode, const ConstructionParams& params);

// Splices a partial aggregation node over the biclique: mined positive edges
// removed, negative edges added. Throws (leaving the overlay untouched) when
// the biclique does not match the current frontier.
void apply_biclique(OverlayGraph& o, const MinedBiclique& b);

// Smallest c with prefix benefit mass >= fraction of the total at current_c.
int adapt_chunk(const std::vector<std::pair<int, int64_t>>& benefit_by_support_size, int current_c,
                double fraction);

struct VnmStats {
  std::vector<double> sharing_index_per_iteration;
  std::vector<int> chunk_size_per_iteration;
  int bicliques_accepted = 0;
};

OverlayGraph run_vnm(const BipartiteGraph& a, VnmVariant variant, const ConstructionParams& params,
                     VnmStats* stats = nullptr);

// Incremental set-cover insertion of one reader; maintains the forward and
// reverse indexes through the OverlayGraph mutators.
void iob_add_reader(OverlayGraph& o, NodeId r, const std::vector<NodeId>& inputs);

OverlayGraph iob_build(const BipartiteGraph& a, const ConstructionParams& params,
                       VnmStats* stats = nullptr);

OverlayGraph build_overlay(const BipartiteGraph& a, Algorithm algo, const ConstructionParams& params);

// Removes partial nodes with no consumers (or no inputs), cascading.
int gc_orphan_partials(OverlayGraph& o);

} // namespace aggnet

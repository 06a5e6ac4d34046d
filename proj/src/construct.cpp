#include "aggnet/construct.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <unordered_map>

namespace aggnet {

void ConstructionParams::check() const {
  if (initial_chunk_size < 1 || k1 < 1 || k2 < 0 || max_iterations < 1 || num_hashes < 1)
    throw Error("construction params must be positive");
  if (adapt_fraction <= 0 || adapt_fraction > 1) throw Error("adapt_fraction must be in (0,1]");
  if (overlap_pct < 0 || overlap_pct >= 100) throw Error("overlap_pct must be in [0,100)");
  if (min_benefit < 1) throw Error("min_benefit must be >= 1");
}

Algorithm algorithm_from_name(const std::string& name) {
  if (name == "trivial") return Algorithm::Trivial;
  if (name == "vnm") return Algorithm::Vnm;
  if (name == "vnma") return Algorithm::VnmA;
  if (name == "vnmn") return Algorithm::VnmN;
  if (name == "vnmd") return Algorithm::VnmD;
  if (name == "iob") return Algorithm::Iob;
  throw Error("unknown algorithm " + name);
}

std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Trivial: return "trivial";
    case Algorithm::Vnm: return "vnm";
    case Algorithm::VnmA: return "vnma";
    case Algorithm::VnmN: return "vnmn";
    case Algorithm::VnmD: return "vnmd";
    case Algorithm::Iob: return "iob";
  }
  return "?";
}

// ---------------------------------------------------------------- shingles

namespace {

uint64_t shingle_hash(uint64_t seed, int hash_idx, uint64_t member) {
  return mix64(hash_combine(hash_combine(seed, (uint64_t)hash_idx), member));
}

// min-hash signature vectors, lexicographic sort, empty lists last
template <typename Id>
std::vector<Id> shingle_sort(const std::vector<std::pair<Id, const std::vector<Id>*>>& sets,
                             int num_hashes, uint64_t seed) {
  struct Entry {
    Id id;
    std::vector<uint64_t> sig;
    bool empty;
  };
  std::vector<Entry> entries;
  entries.reserve(sets.size());
  for (const auto& [id, members] : sets) {
    Entry e{id, {}, members->empty()};
    if (!e.empty) {
      e.sig.resize(num_hashes, UINT64_MAX);
      for (Id m : *members)
        for (int h = 0; h < num_hashes; ++h)
          e.sig[h] = std::min(e.sig[h], shingle_hash(seed, h, (uint64_t)m));
    }
    entries.push_back(std::move(e));
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.empty != b.empty) return !a.empty; // empty input lists go last
    if (a.sig != b.sig) return a.sig < b.sig;
    return a.id < b.id;
  });
  std::vector<Id> order;
  order.reserve(entries.size());
  for (auto& e : entries) order.push_back(e.id);
  return order;
}

} // namespace

std::vector<NodeId> shingle_order(const BipartiteGraph& a, int num_hashes, uint64_t seed) {
  if (num_hashes < 1) throw Error("shingle_order: num_hashes must be >= 1");
  std::vector<std::pair<NodeId, const std::vector<NodeId>*>> sets;
  for (NodeId r = 0; r < a.node_limit; ++r)
    if (a.reader[r]) sets.push_back({r, &a.inputs[r]});
  return shingle_sort(sets, num_hashes, seed);
}

std::vector<NodeId> sort_writers(const BipartiteGraph& a) {
  auto deg = a.writer_degrees();
  std::vector<NodeId> writers;
  for (NodeId w = 0; w < a.node_limit; ++w)
    if (deg[w] > 0) writers.push_back(w);
  std::sort(writers.begin(), writers.end(), [&](NodeId x, NodeId y) {
    if (deg[x] != deg[y]) return deg[x] < deg[y];
    return x < y;
  });
  return writers;
}

// ----------------------------------------------------------------- FP-tree

struct FpTree::Node {
  OvlId item = -1;
  int pos = -1; // position in the item order
  int depth = 0;
  int seq = 0; // creation order, for deterministic ties
  Node* parent = nullptr;
  std::map<int, std::unique_ptr<Node>> children; // keyed by item position
  std::vector<int> support, neg_support, mined_support;
};

struct FpTree::Impl {
  MineMode mode;
  int k1, k2;
  std::unique_ptr<Node> root;
  std::vector<MiningInput> txns;
  int next_seq = 1;

  Node* make_child(Node* parent, OvlId item, int pos) {
    auto n = std::make_unique<Node>();
    n->item = item;
    n->pos = pos;
    n->depth = parent->depth + 1;
    n->seq = next_seq++;
    n->parent = parent;
    Node* raw = n.get();
    parent->children.emplace(pos, std::move(n));
    return raw;
  }
};

FpTree::FpTree(MineMode mode, int k1, int k2) : impl_(std::make_unique<Impl>()) {
  impl_->mode = mode;
  impl_->k1 = k1;
  impl_->k2 = k2;
  impl_->root = std::make_unique<Node>();
}

FpTree::~FpTree() = default;
FpTree::FpTree(FpTree&&) noexcept = default;
FpTree& FpTree::operator=(FpTree&&) noexcept = default;

// Inserts one transaction. Basic/duplicate mode: the classic longest-prefix
// walk, one path plus a new branch for the suffix. Negative mode: score every
// anchored insertion point breadth-first, take the k1 best, repair the skipped
// path items with negative-support entries.
void FpTree::insert(const MiningInput& txn, const std::vector<int>& positions) {
  Impl& im = *impl_;
  int tid = (int)im.txns.size();
  im.txns.push_back(txn);

  std::set<std::pair<Node*, int>> guard; // one support entry per (node, txn)
  std::set<int> pos_set(positions.begin(), positions.end());
  std::map<int, size_t> pos_to_idx;
  for (size_t i = 0; i < positions.size(); ++i) pos_to_idx[positions[i]] = i;

  auto is_reused = [&](int pos) {
    if (txn.reused.empty()) return false;
    return txn.reused[pos_to_idx.at(pos)] != 0;
  };
  auto add_support = [&](Node* n, std::vector<int> Node::*member) {
    if (!guard.insert({n, tid}).second) return;
    (n->*member).push_back(tid);
  };

  // walk/extend below `from`, consuming items with position > from->pos that
  // are not matched on the path to `from`
  auto extend = [&](Node* from, const std::set<int>& matched_on_path) {
    Node* cur = from;
    for (size_t i = 0; i < positions.size(); ++i) {
      int pos = positions[i];
      if (pos <= from->pos || matched_on_path.count(pos)) continue;
      auto it = cur->children.find(pos);
      Node* next = it != cur->children.end() ? it->second.get()
                                             : im.make_child(cur, txn.items[i], pos);
      cur = next;
      add_support(cur, is_reused(pos) ? &Node::mined_support : &Node::support);
    }
  };

  if (im.mode != MineMode::Negative) {
    extend(im.root.get(), {});
    return;
  }

  struct Cand {
    Node* n;
    int matched, missing;
  };
  std::vector<Cand> cands;
  std::deque<Cand> queue;
  for (auto& [pos, child] : im.root->children) queue.push_back({child.get(), 0, 0});
  while (!queue.empty()) {
    Cand c = queue.front();
    queue.pop_front();
    bool match = pos_set.count(c.n->pos) > 0;
    match ? ++c.matched : ++c.missing;
    if (c.missing > im.k2) continue; // too many negative edges down this path
    if (match) cands.push_back(c);
    for (auto& [pos, child] : c.n->children) queue.push_back({child.get(), c.matched, c.missing});
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    int sa = a.matched - a.missing, sb = b.matched - b.missing;
    if (sa != sb) return sa > sb;
    if (a.n->depth != b.n->depth) return a.n->depth > b.n->depth;
    return a.n->seq < b.n->seq;
  });

  int taken = 0;
  for (const Cand& c : cands) {
    if (taken >= im.k1 || c.matched - c.missing < 1) break;
    std::set<int> matched_on_path;
    std::vector<Node*> path;
    for (Node* x = c.n; x->parent; x = x->parent) path.push_back(x);
    for (Node* x : path) {
      bool m = pos_set.count(x->pos) > 0;
      if (m) matched_on_path.insert(x->pos);
      add_support(x, m ? &Node::support : &Node::neg_support);
    }
    extend(c.n, matched_on_path);
    ++taken;
  }
  if (taken == 0) extend(im.root.get(), {}); // nothing shareable: plain insertion
}

std::vector<MinedBiclique> FpTree::mine_all(int64_t min_benefit) const {
  const Impl& im = *impl_;
  std::vector<MinedBiclique> out;
  std::vector<const Node*> stack;
  for (auto it = im.root->children.rbegin(); it != im.root->children.rend(); ++it)
    stack.push_back(it->second.get());
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    for (auto it = n->children.rbegin(); it != n->children.rend(); ++it)
      stack.push_back(it->second.get());

    std::vector<int> support = n->support;
    if (im.mode == MineMode::Duplicate && !n->mined_support.empty()) {
      support.insert(support.end(), n->mined_support.begin(), n->mined_support.end());
      std::sort(support.begin(), support.end());
      support.erase(std::unique(support.begin(), support.end()), support.end());
    }
    if (support.empty()) continue;
    int64_t s = (int64_t)support.size();
    int64_t l = n->depth;
    int64_t benefit = l * s - l - s;
    std::vector<std::pair<OvlId, OvlId>> negatives, reused;
    for (const Node* x = n; x->parent; x = x->parent) {
      for (int tid : x->neg_support)
        if (std::binary_search(support.begin(), support.end(), tid))
          negatives.push_back({im.txns[tid].node, x->item});
      if (im.mode == MineMode::Duplicate)
        for (int tid : x->mined_support)
          if (std::binary_search(support.begin(), support.end(), tid))
            reused.push_back({im.txns[tid].node, x->item});
    }
    // a negative edge is both an edge added and an edge not removed
    benefit -= 2 * (int64_t)negatives.size();
    benefit -= (int64_t)reused.size();
    if (benefit < min_benefit) continue;

    MinedBiclique b;
    b.benefit = benefit;
    for (const Node* x = n; x->parent; x = x->parent) b.writers.push_back(x->item);
    std::reverse(b.writers.begin(), b.writers.end());
    for (int tid : support) b.readers.push_back(im.txns[tid].node);
    std::sort(negatives.begin(), negatives.end());
    std::sort(reused.begin(), reused.end());
    b.negatives = std::move(negatives);
    b.reused = std::move(reused);
    out.push_back(std::move(b));
  }
  std::sort(out.begin(), out.end(), [](const MinedBiclique& a, const MinedBiclique& b) {
    if (a.benefit != b.benefit) return a.benefit > b.benefit;
    if (a.writers.size() != b.writers.size()) return a.writers.size() > b.writers.size();
    if (a.writers != b.writers) return a.writers < b.writers;
    return a.readers < b.readers;
  });
  return out;
}

std::optional<MinedBiclique> FpTree::mine_best(int64_t min_benefit) const {
  auto all = mine_all(min_benefit);
  if (all.empty()) return std::nullopt;
  return all.front();
}

std::vector<FpTree::NodeView> FpTree::export_roots() const {
  std::function<NodeView(const Node*)> conv = [&](const Node* n) {
    NodeView v;
    v.item = n->item;
    for (int tid : n->support) v.support.push_back(impl_->txns[tid].node);
    for (int tid : n->neg_support) v.neg_support.push_back(impl_->txns[tid].node);
    for (int tid : n->mined_support) v.mined_support.push_back(impl_->txns[tid].node);
    for (auto& [pos, c] : n->children) v.children.push_back(conv(c.get()));
    return v;
  };
  std::vector<NodeView> roots;
  for (auto& [pos, c] : impl_->root->children) roots.push_back(conv(c.get()));
  return roots;
}

FpTree build_fptree(const std::vector<MiningInput>& chunk, const std::vector<OvlId>& item_order,
                    MineMode mode, const ConstructionParams& params) {
  params.check();
  FpTree tree(mode, mode == MineMode::Negative ? params.k1 : 1,
              mode == MineMode::Negative ? params.k2 : 0);
  std::unordered_map<OvlId, int> pos_of;
  for (size_t i = 0; i < item_order.size(); ++i) pos_of[item_order[i]] = (int)i;
  for (const MiningInput& raw : chunk) {
    std::vector<std::pair<int, size_t>> keyed;
    for (size_t i = 0; i < raw.items.size(); ++i) {
      auto it = pos_of.find(raw.items[i]);
      if (it == pos_of.end()) throw Error("build_fptree: item missing from the order");
      keyed.push_back({it->second, i});
    }
    std::sort(keyed.begin(), keyed.end());
    MiningInput txn;
    txn.node = raw.node;
    std::vector<int> positions;
    for (auto& [pos, idx] : keyed) {
      txn.items.push_back(raw.items[idx]);
      txn.reused.push_back(raw.reused.empty() ? 0 : raw.reused[idx]);
      positions.push_back(pos);
    }
    tree.insert(txn, positions);
  }
  return tree;
}

// --------------------------------------------------------------- biclique

void apply_biclique(OverlayGraph& o, const MinedBiclique& b) {
  if (b.writers.empty() || b.readers.empty()) throw Error("apply_biclique: empty biclique");
  std::map<OvlId, std::set<OvlId>> missing, reused;
  for (auto& [r, w] : b.negatives) missing[r].insert(w);
  for (auto& [r, w] : b.reused) reused[r].insert(w);

  // every pair must match the live frontier before anything is touched
  for (OvlId r : b.readers) {
    if (!o.alive(r)) throw Error("apply_biclique: dead reader node");
    for (OvlId w : b.writers) {
      if (!o.alive(w)) throw Error("apply_biclique: dead writer node");
      bool is_missing = missing.count(r) && missing[r].count(w);
      bool is_reused = reused.count(r) && reused[r].count(w);
      if (is_missing) {
        if (o.has_edge(w, r, +1)) throw Error("apply_biclique: negative pair has a live edge");
        // an earlier biclique may already subtract w from r; a second
        // parallel negative edge is not representable, so reject up front
        if (o.has_edge(w, r, -1)) throw Error("apply_biclique: negative pair already repaired");
      } else if (is_reused) {
        const auto& cc = o.covered_counts(r);
        bool covered = true;
        for (const auto& [gw, c] : o.covered_counts(w)) {
          auto jt = cc.find(gw);
          covered &= jt != cc.end() && jt->second >= c;
        }
        if (!covered) throw Error("apply_biclique: reused pair is not covered");
      } else if (!o.has_edge(w, r, +1)) {
        throw Error("apply_biclique: mined edge no longer present");
      }
    }
    // a repaired edge w -> r must not close a cycle
    if (missing.count(r)) {
      std::set<OvlId> seen{r};
      std::vector<OvlId> stack{r};
      while (!stack.empty()) {
        OvlId x = stack.back();
        stack.pop_back();
        for (const auto& e : o.out(x))
          if (seen.insert(e.node).second) stack.push_back(e.node);
      }
      for (OvlId w : missing[r])
        if (seen.count(w)) throw Error("apply_biclique: negative edge would close a cycle");
    }
  }

  OvlId p = o.add_partial();
  for (OvlId w : b.writers) o.add_edge(w, p, +1);
  for (OvlId r : b.readers) {
    for (OvlId w : b.writers) {
      bool is_missing = missing.count(r) && missing[r].count(w);
      bool is_reused = reused.count(r) && reused[r].count(w);
      if (!is_missing && !is_reused) o.remove_edge(w, r, +1);
    }
    o.add_edge(p, r, +1);
    if (missing.count(r))
      for (OvlId w : missing[r]) o.add_edge(w, r, -1);
  }
}

int adapt_chunk(const std::vector<std::pair<int, int64_t>>& hist, int current_c, double fraction) {
  int64_t total = 0;
  for (auto& [s, benefit] : hist)
    if (s <= current_c) total += benefit;
  if (total <= 0) return current_c;
  std::vector<std::pair<int, int64_t>> sorted(hist.begin(), hist.end());
  std::sort(sorted.begin(), sorted.end());
  int64_t prefix = 0;
  for (auto& [s, benefit] : sorted) {
    if (s > current_c) break;
    prefix += benefit;
    if ((double)prefix >= fraction * (double)total - 1e-9) return s;
  }
  return current_c;
}

// -------------------------------------------------------------------- VNM

namespace {

// Frontier input list of one aggregation node: current positive in-edges plus,
// in duplicate mode, items reachable through previously mined edges.
MiningInput frontier_list_of(const OverlayGraph& o, OvlId n, bool duplicate,
                             const std::set<std::pair<OvlId, OvlId>>& mined_pairs) {
  MiningInput t;
  t.node = n;
  std::set<OvlId> present;
  for (const auto& e : o.in(n))
    if (e.sign > 0) {
      t.items.push_back(e.node);
      t.reused.push_back(0);
      present.insert(e.node);
    }
  if (duplicate) {
    auto lo = mined_pairs.lower_bound({n, std::numeric_limits<OvlId>::min()});
    for (auto it = lo; it != mined_pairs.end() && it->first == n; ++it) {
      OvlId w = it->second;
      if (!o.alive(w) || present.count(w)) continue;
      t.items.push_back(w);
      t.reused.push_back(1);
      present.insert(w);
    }
  }
  return t;
}

} // namespace

OverlayGraph run_vnm(const BipartiteGraph& a, VnmVariant variant, const ConstructionParams& params,
                     VnmStats* stats) {
  params.check();
  OverlayGraph o = trivial_overlay(a);
  bool duplicate = variant == VnmVariant::Duplicate;
  if (duplicate) o.set_mode(OverlayMode::DupInsensitive);
  MineMode mode = duplicate                         ? MineMode::Duplicate
                  : variant == VnmVariant::Negative ? MineMode::Negative
                                                    : MineMode::Basic;
  bool adaptive = variant != VnmVariant::Base;
  std::set<std::pair<OvlId, OvlId>> mined_pairs; // (reader, writer)

  int chunk_size = params.initial_chunk_size;
  for (int iter = 0; iter < params.max_iterations; ++iter) {
    // frontier: aggregation nodes with >= 2 usable inputs
    std::vector<MiningInput> txns;
    std::map<OvlId, int64_t> degree;
    for (OvlId n = 0; n < o.limit(); ++n) {
      if (!o.alive(n) || o.kind(n) == NodeKind::Writer) continue;
      MiningInput t = frontier_list_of(o, n, duplicate, mined_pairs);
      if (t.items.size() < 2) continue;
      for (size_t i = 0; i < t.items.size(); ++i)
        if (!t.reused[i]) ++degree[t.items[i]];
      txns.push_back(std::move(t));
    }
    if (txns.empty()) break;

    std::vector<OvlId> item_order;
    {
      std::set<OvlId> seen;
      for (const auto& t : txns)
        for (OvlId x : t.items)
          if (seen.insert(x).second) item_order.push_back(x);
      std::sort(item_order.begin(), item_order.end(), [&](OvlId x, OvlId y) {
        int64_t dx = degree.count(x) ? degree[x] : 0;
        int64_t dy = degree.count(y) ? degree[y] : 0;
        if (dx != dy) return dx < dy;
        return x < y;
      });
    }

    std::vector<std::pair<OvlId, const std::vector<OvlId>*>> sets;
    for (const auto& t : txns) sets.push_back({t.node, &t.items});
    std::vector<OvlId> order = shingle_sort(sets, params.num_hashes, params.seed + (uint64_t)iter);

    int c = std::max(2, chunk_size);
    size_t step = (size_t)c;
    if (duplicate)
      step = (size_t)std::max(1, c - (int)std::lround(c * params.overlap_pct / 100.0));

    std::map<int, int64_t> hist;
    int accepted = 0;
    for (size_t start = 0; start < order.size(); start += step) {
      size_t end = std::min(order.size(), start + (size_t)c);
      std::vector<OvlId> members(order.begin() + start, order.begin() + end);
      // repeated mining with a chunk-local rebuild after each accepted biclique
      for (;;) {
        std::vector<MiningInput> chunk;
        for (OvlId n : members) {
          if (!o.alive(n)) continue;
          MiningInput t = frontier_list_of(o, n, duplicate, mined_pairs);
          if (t.items.size() >= 2) chunk.push_back(std::move(t));
        }
        if (chunk.empty()) break;
        std::vector<OvlId> chunk_order = item_order;
        {
          std::set<OvlId> known(chunk_order.begin(), chunk_order.end());
          for (const auto& t : chunk)
            for (OvlId x : t.items)
              if (known.insert(x).second) chunk_order.push_back(x); // partials minted this pass
        }
        FpTree tree = build_fptree(chunk, chunk_order, mode, params);
        auto cands = tree.mine_all(params.min_benefit);
        bool applied = false;
        for (const auto& cand : cands) {
          try {
            apply_biclique(o, cand);
          } catch (const Error&) {
            continue; // stale against the frontier; try the next one
          }
          applied = true;
          ++accepted;
          // AGGNET_DEBUG_VALIDATE: re-validate after every application; slow,
          // for chasing construction bugs only
          if (std::getenv("AGGNET_DEBUG_VALIDATE")) {
            auto vio = validate(o, a, AggCaps{true, true});
            if (!vio.empty())
              throw Error("overlay invalid after biclique (iteration " + std::to_string(iter) +
                          "): " + vio[0].detail);
          }
          hist[(int)cand.readers.size()] += cand.benefit;
          if (duplicate)
            for (OvlId r : cand.readers)
              for (OvlId w : cand.writers) mined_pairs.insert({r, w});
          break;
        }
        if (!applied) break;
      }
      if (end >= order.size()) break;
    }

    if (stats) {
      stats->sharing_index_per_iteration.push_back(sharing_index(o, a));
      stats->chunk_size_per_iteration.push_back(c);
      stats->bicliques_accepted += accepted;
    }
    if (accepted == 0) break;
    if (adaptive) {
      std::vector<std::pair<int, int64_t>> hv(hist.begin(), hist.end());
      chunk_size = adapt_chunk(hv, c, params.adapt_fraction);
    }
  }
  return o;
}

// -------------------------------------------------------------------- IOB

namespace {

// Nodes downstream of any negative edge: their positive-path index overstates
// net coverage, so the cover searches must not reuse them.
std::vector<char> negative_tainted(const OverlayGraph& o) {
  std::vector<char> tainted(o.limit(), 0);
  if (o.negative_edge_count() == 0) return tainted;
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
  return tainted;
}

bool covered_subset(const OverlayGraph& o, OvlId v, const std::set<NodeId>& a) {
  for (const auto& [w, c] : o.covered_counts(v))
    if (c > 0 && !a.count(w)) return false;
  return true;
}

// max |covered(v) ∩ uncovered|; ties prefer larger covered sets, then smaller
// id. Flat scratch arrays keep this O(sum of covering-set sizes) per call.
// With subset_only, candidates must satisfy covered(v) ⊆ uncovered, which for
// clean (untainted) nodes is just overlap == |covered(v)|.
template <typename Pred>
OvlId best_cover_node(const OverlayGraph& o, const std::set<NodeId>& uncovered, Pred usable,
                      bool subset_only = false) {
  static thread_local std::vector<int64_t> overlap;
  static thread_local std::vector<OvlId> touched;
  if ((OvlId)overlap.size() < o.limit()) overlap.resize(o.limit(), 0);
  touched.clear();
  for (NodeId w : uncovered)
    for (OvlId v : o.covering_nodes(w)) {
      if (overlap[v] == 0) touched.push_back(v);
      ++overlap[v];
    }
  OvlId best = -1;
  int64_t best_overlap = 0;
  size_t best_size = 0;
  for (OvlId v : touched) {
    int64_t ov = overlap[v];
    if (!usable(v)) continue;
    size_t size = o.covered_counts(v).size();
    if (subset_only && ov != (int64_t)size) continue;
    if (ov > best_overlap || (ov == best_overlap && size > best_size) ||
        (ov == best_overlap && size == best_size && (best == -1 || v < best))) {
      best = v;
      best_overlap = ov;
      best_size = size;
    }
  }
  for (OvlId v : touched) overlap[v] = 0;
  return best;
}

} // namespace

void iob_add_reader(OverlayGraph& o, NodeId r, const std::vector<NodeId>& inputs) {
  if (inputs.empty()) throw Error("iob_add_reader: empty input list");
  if (o.reader_of(r)) throw Error("iob_add_reader: reader already present");
  for (NodeId w : inputs) o.ensure_writer(w);
  OvlId rid = o.add_reader(r);

  std::set<NodeId> uncovered(inputs.begin(), inputs.end());
  std::vector<char> tainted = negative_tainted(o);
  std::set<OvlId> banned{rid};
  while (!uncovered.empty()) {
    OvlId best =
        best_cover_node(o, uncovered, [&](OvlId v) { return !banned.count(v) && !tainted[v]; });
    if (best == -1) throw Error("iob_add_reader: inputs reference unknown writers");

    std::vector<NodeId> b = o.covered(best);
    bool subset = std::all_of(b.begin(), b.end(), [&](NodeId w) { return uncovered.count(w) > 0; });
    if (subset && o.kind(best) != NodeKind::Reader) {
      o.add_edge(best, rid, +1);
      for (NodeId w : b) uncovered.erase(w);
      continue;
    }

    // restructure: hoist the in-edges of `best` lying fully inside the
    // uncovered set into a shared child
    std::vector<OvlId> movable;
    for (const auto& e : o.in(best))
      if (e.sign > 0 && !tainted[e.node] && covered_subset(o, e.node, uncovered))
        movable.push_back(e.node);
    if (movable.empty()) {
      banned.insert(best);
      continue;
    }
    if (movable.size() == 1) {
      // one movable input is usable as-is; no pass-through node
      OvlId u = movable[0];
      o.add_edge(u, rid, +1);
      for (NodeId w : o.covered(u)) uncovered.erase(w);
      continue;
    }
    OvlId child = o.add_partial();
    for (OvlId u : movable) {
      o.remove_edge(u, best, +1);
      o.add_edge(u, child, +1);
    }
    o.add_edge(child, best, +1);
    o.add_edge(child, rid, +1);
    for (NodeId w : o.covered(child)) uncovered.erase(w);
  }
}

int gc_orphan_partials(OverlayGraph& o) {
  int removed = 0;
  bool changed = true;
  while (changed) {
    changed = false;
    for (OvlId n = 0; n < o.limit(); ++n) {
      if (!o.alive(n) || o.kind(n) != NodeKind::Partial) continue;
      if (o.out(n).empty() || o.in(n).empty()) {
        o.remove_node(n);
        ++removed;
        changed = true;
      }
    }
  }
  return removed;
}

namespace {

// Re-runs the greedy exact cover for one partial aggregator and rewires it
// when a strictly smaller input list exists.
bool refine_partial(OverlayGraph& o, OvlId p) {
  std::vector<NodeId> target = o.covered(p);
  if (target.empty()) return false;

  std::set<OvlId> forbidden{p}; // p and everything downstream of it
  std::vector<OvlId> stack{p};
  while (!stack.empty()) {
    OvlId x = stack.back();
    stack.pop_back();
    for (const auto& e : o.out(x))
      if (forbidden.insert(e.node).second) stack.push_back(e.node);
  }

  std::set<NodeId> uncovered(target.begin(), target.end());
  std::vector<char> tainted = negative_tainted(o);
  std::vector<OvlId> cover;
  while (!uncovered.empty()) {
    OvlId best = best_cover_node(
        o, uncovered,
        [&](OvlId v) {
          return !forbidden.count(v) && !tainted[v] && o.kind(v) != NodeKind::Reader;
        },
        /*subset_only=*/true);
    if (best == -1) return false; // no exact cover from here; keep as is
    cover.push_back(best);
    for (NodeId w : o.covered(best)) uncovered.erase(w);
  }
  if (cover.size() >= o.in(p).size()) return false;

  for (auto e : std::vector<OvlEdge>(o.in(p))) o.remove_edge(e.node, p, e.sign);
  for (OvlId v : cover) o.add_edge(v, p, +1);
  return true;
}

} // namespace

OverlayGraph iob_build(const BipartiteGraph& a, const ConstructionParams& params,
                       VnmStats* stats) {
  params.check();
  OverlayGraph o(OverlayMode::DupSensitive);
  std::vector<NodeId> order = shingle_order(a, params.num_hashes, params.seed);
  for (NodeId r : order) {
    if (a.inputs[r].empty()) continue;
    iob_add_reader(o, r, a.inputs[r]);
  }
  if (stats && a.edge_count() > 0)
    stats->sharing_index_per_iteration.push_back(sharing_index(o, a));
  for (int iter = 1; iter < params.max_iterations; ++iter) {
    bool changed = false;
    for (OvlId p = 0; p < o.limit(); ++p) {
      if (!o.alive(p) || o.kind(p) != NodeKind::Partial) continue;
      changed |= refine_partial(o, p);
    }
    gc_orphan_partials(o);
    if (stats && a.edge_count() > 0)
      stats->sharing_index_per_iteration.push_back(sharing_index(o, a));
    if (!changed) break;
  }
  return o;
}

OverlayGraph build_overlay(const BipartiteGraph& a, Algorithm algo, const ConstructionParams& params) {
  switch (algo) {
    case Algorithm::Trivial: return trivial_overlay(a);
    case Algorithm::Vnm: return run_vnm(a, VnmVariant::Base, params);
    case Algorithm::VnmA: return run_vnm(a, VnmVariant::Adaptive, params);
    case Algorithm::VnmN: return run_vnm(a, VnmVariant::Negative, params);
    case Algorithm::VnmD: return run_vnm(a, VnmVariant::Duplicate, params);
    case Algorithm::Iob: return iob_build(a, params);
  }
  throw Error("unknown algorithm");
}

} // namespace aggnet

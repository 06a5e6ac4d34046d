#include "aggnet/dataflow.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>

namespace aggnet {

namespace {
constexpr double kEps = 1e-9;
}

double CostCurve::at(int k) const {
  if (pts.empty()) throw Error("empty cost curve");
  if (k < 1) k = 1;
  if (k <= pts.front().first) return pts.front().second;
  if (k >= pts.back().first) {
    if (pts.size() == 1) return pts.back().second;
    // extrapolate with the last segment's slope
    auto [k1, c1] = pts[pts.size() - 2];
    auto [k2, c2] = pts.back();
    double slope = (c2 - c1) / (double)(k2 - k1);
    return c2 + slope * (k - k2);
  }
  for (size_t i = 1; i < pts.size(); ++i) {
    if (k <= pts[i].first) {
      auto [k1, c1] = pts[i - 1];
      auto [k2, c2] = pts[i];
      double t = (double)(k - k1) / (double)(k2 - k1);
      return c1 + t * (c2 - c1);
    }
  }
  return pts.back().second;
}

CostCurve CostCurve::constant(double c) { return {{{1, c}}}; }

CostCurve CostCurve::linear(double a) { return {{{1, a}, {2, 2 * a}}}; }

CostCurve CostCurve::logarithmic(double a) {
  CostCurve c;
  for (int k = 1; k <= 1 << 20; k <<= 1) c.pts.push_back({k, a * (1.0 + std::log2((double)k))});
  return c;
}

CostModel CostModel::for_aggregate(std::string_view name, double window_factor) {
  CostModel cm;
  cm.window_factor = window_factor;
  if (name == "sum" || name == "count" || name.substr(0, 4) == "topk") {
    cm.push_one = CostCurve::constant(1.0);
    cm.pull_one = CostCurve::linear(1.0);
  } else if (name == "min" || name == "max") {
    cm.push_one = CostCurve::logarithmic(1.0);
    cm.pull_one = CostCurve::linear(1.0);
  } else {
    throw Error("no built-in cost model for aggregate " + std::string(name));
  }
  return cm;
}

FrequencyAnnotation annotate_frequencies(const OverlayGraph& o, const DataGraph& g) {
  FrequencyAnnotation f;
  f.push_freq.assign(o.limit(), 0.0);
  f.pull_freq.assign(o.limit(), 0.0);
  auto order = o.topo_order();
  for (OvlId v : order) {
    if (o.kind(v) == NodeKind::Writer) {
      NodeId gv = o.graph_node(v);
      if (!g.has_activity(gv)) throw Error("missing activity estimate for node " + g.label(gv));
      f.push_freq[v] = g.write_rate(gv);
    } else {
      double s = 0;
      for (const auto& e : o.in(v)) s += f.push_freq[e.node];
      f.push_freq[v] = s;
    }
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    OvlId v = *it;
    if (o.kind(v) == NodeKind::Reader) {
      NodeId gv = o.graph_node(v);
      if (!g.has_activity(gv)) throw Error("missing activity estimate for node " + g.label(gv));
      f.pull_freq[v] = g.read_rate(gv);
    } else {
      double s = 0;
      for (const auto& e : o.out(v)) s += f.pull_freq[e.node];
      f.pull_freq[v] = s;
    }
  }
  return f;
}

static int cost_degree(const OverlayGraph& o, OvlId v, const CostModel& cm) {
  if (o.kind(v) == NodeKind::Writer) return std::max(1, (int)std::lround(cm.window_factor));
  return std::max<int>(1, (int)o.in(v).size());
}

double push_cost(const OverlayGraph& o, OvlId v, const FrequencyAnnotation& f, const CostModel& cm) {
  return f.push_freq[v] * cm.H(cost_degree(o, v, cm));
}

double pull_cost(const OverlayGraph& o, OvlId v, const FrequencyAnnotation& f, const CostModel& cm) {
  return f.pull_freq[v] * cm.L(cost_degree(o, v, cm));
}

double node_weight(const OverlayGraph& o, OvlId v, const FrequencyAnnotation& f, const CostModel& cm) {
  return pull_cost(o, v, f, cm) - push_cost(o, v, f, cm);
}

double plan_cost(const OverlayGraph& o, const FrequencyAnnotation& f, const CostModel& cm,
                 const std::vector<Decision>& decision) {
  double total = 0;
  for (OvlId v = 0; v < o.limit(); ++v) {
    if (!o.alive(v)) continue;
    total += decision[v] == Decision::Push ? push_cost(o, v, f, cm) : pull_cost(o, v, f, cm);
  }
  return total;
}

bool plan_valid(const OverlayGraph& o, const std::vector<Decision>& decision) {
  for (OvlId v = 0; v < o.limit(); ++v) {
    if (!o.alive(v)) continue;
    if (o.kind(v) == NodeKind::Writer && decision[v] != Decision::Push) return false;
    if (decision[v] == Decision::Push)
      for (const auto& e : o.in(v))
        if (decision[e.node] != Decision::Push) return false;
  }
  return true;
}

PruneResult prune(const OverlayGraph& o, const std::vector<double>& weights) {
  PruneResult r;
  r.fixed.assign(o.limit(), std::nullopt);
  std::vector<char> removed(o.limit(), 1);
  std::vector<OvlId> nodes;
  for (OvlId v = 0; v < o.limit(); ++v)
    if (o.alive(v)) {
      removed[v] = 0;
      nodes.push_back(v);
    }

  // mandatory labels first: writers are always push. Zero-weight nodes stay
  // in the residual: either side is cost-neutral for them, and the min-cut
  // places them on a side consistent with their neighbors.
  for (OvlId v : nodes) {
    if (o.kind(v) == NodeKind::Writer) {
      r.fixed[v] = Decision::Push;
      removed[v] = 1;
    }
  }

  auto in_live = [&](OvlId v) {
    int c = 0;
    for (const auto& e : o.in(v)) c += !removed[e.node];
    return c;
  };
  auto out_live = [&](OvlId v) {
    int c = 0;
    for (const auto& e : o.out(v)) c += !removed[e.node];
    return c;
  };

  // P1/P2 to fixpoint, worklist-driven
  std::deque<OvlId> work(nodes.begin(), nodes.end());
  std::vector<char> queued(o.limit(), 0);
  for (OvlId v : nodes) queued[v] = 1;
  while (!work.empty()) {
    OvlId v = work.front();
    work.pop_front();
    queued[v] = 0;
    if (removed[v]) continue;
    bool fixed = false;
    if (weights[v] > kEps && in_live(v) == 0) {
      r.fixed[v] = Decision::Push;
      fixed = true;
    } else if (weights[v] < -kEps && out_live(v) == 0) {
      r.fixed[v] = Decision::Pull;
      fixed = true;
    }
    if (!fixed) continue;
    removed[v] = 1;
    for (const auto& e : o.out(v))
      if (!removed[e.node] && !queued[e.node]) {
        queued[e.node] = 1;
        work.push_back(e.node);
      }
    for (const auto& e : o.in(v))
      if (!removed[e.node] && !queued[e.node]) {
        queued[e.node] = 1;
        work.push_back(e.node);
      }
  }

  // weakly connected components of the residual
  std::vector<char> seen(o.limit(), 0);
  for (OvlId v : nodes) {
    if (removed[v] || seen[v]) continue;
    std::vector<OvlId> comp, stack{v};
    seen[v] = 1;
    while (!stack.empty()) {
      OvlId x = stack.back();
      stack.pop_back();
      comp.push_back(x);
      auto visit = [&](OvlId y) {
        if (!removed[y] && !seen[y]) {
          seen[y] = 1;
          stack.push_back(y);
        }
      };
      for (const auto& e : o.in(x)) visit(e.node);
      for (const auto& e : o.out(x)) visit(e.node);
    }
    std::sort(comp.begin(), comp.end());
    r.components.push_back(std::move(comp));
  }
  return r;
}

namespace {

// Edmonds-Karp on a small adjacency-matrix-free residual network.
struct FlowNet {
  struct Arc {
    int to;
    double cap;
    int rev;
  };
  std::vector<std::vector<Arc>> adj;

  explicit FlowNet(int n) : adj(n) {}

  void add(int u, int v, double cap) {
    adj[u].push_back({v, cap, (int)adj[v].size()});
    adj[v].push_back({u, 0.0, (int)adj[u].size() - 1});
  }

  double max_flow(int s, int t) {
    double total = 0;
    for (;;) {
      std::vector<int> prev_node(adj.size(), -1), prev_arc(adj.size(), -1);
      std::deque<int> q{s};
      prev_node[s] = s;
      while (!q.empty() && prev_node[t] < 0) {
        int x = q.front();
        q.pop_front();
        for (size_t i = 0; i < adj[x].size(); ++i) {
          const Arc& a = adj[x][i];
          if (a.cap > kEps && prev_node[a.to] < 0) {
            prev_node[a.to] = x;
            prev_arc[a.to] = (int)i;
            q.push_back(a.to);
          }
        }
      }
      if (prev_node[t] < 0) break;
      double bottleneck = std::numeric_limits<double>::infinity();
      for (int x = t; x != s; x = prev_node[x]) bottleneck = std::min(bottleneck, adj[prev_node[x]][prev_arc[x]].cap);
      for (int x = t; x != s; x = prev_node[x]) {
        Arc& a = adj[prev_node[x]][prev_arc[x]];
        a.cap -= bottleneck;
        adj[x][a.rev].cap += bottleneck;
      }
      total += bottleneck;
    }
    return total;
  }

  std::vector<char> reachable(int s) const {
    std::vector<char> seen(adj.size(), 0);
    std::deque<int> q{s};
    seen[s] = 1;
    while (!q.empty()) {
      int x = q.front();
      q.pop_front();
      for (const Arc& a : adj[x])
        if (a.cap > kEps && !seen[a.to]) {
          seen[a.to] = 1;
          q.push_back(a.to);
        }
    }
    return seen;
  }
};

} // namespace

std::vector<std::pair<OvlId, Decision>> solve_component(const OverlayGraph& o,
                                                        const std::vector<OvlId>& component,
                                                        const std::vector<double>& weights) {
  if (component.empty()) return {};
  std::map<OvlId, int> index;
  for (size_t i = 0; i < component.size(); ++i) index[component[i]] = (int)i;
  int n = (int)component.size();
  int s = n, t = n + 1;
  FlowNet net(n + 2);
  double finite_sum = 0;
  for (OvlId v : component) finite_sum += std::abs(weights[v]);
  double inf = finite_sum + 1.0; // provably never in a min cut
  for (OvlId v : component) {
    for (const auto& e : o.out(v)) {
      auto it = index.find(e.node);
      if (it != index.end()) net.add(index[v], it->second, inf);
    }
    if (weights[v] < -kEps) net.add(s, index[v], -weights[v]);
    else if (weights[v] > kEps) net.add(index[v], t, weights[v]);
  }
  net.max_flow(s, t);
  auto reach = net.reachable(s);
  std::vector<std::pair<OvlId, Decision>> r;
  r.reserve(component.size());
  for (size_t i = 0; i < component.size(); ++i)
    r.push_back({component[i], reach[i] ? Decision::Pull : Decision::Push});
  return r;
}

namespace {

std::vector<Decision> greedy_decide(const OverlayGraph& o, const FrequencyAnnotation& f,
                                    const CostModel& cm) {
  enum class T : uint8_t { None, Push, Pull, TentativePull };
  std::vector<T> state(o.limit(), T::None);
  auto order = o.topo_order();
  for (OvlId v : order) {
    if (o.kind(v) == NodeKind::Writer) {
      state[v] = T::Push;
      continue;
    }
    double pc = push_cost(o, v, f, cm), lc = pull_cost(o, v, f, cm);
    bool prefers_pull = pc > lc + kEps;
    bool any_pull = false, any_tentative = false;
    for (const auto& e : o.in(v)) {
      if (state[e.node] == T::Pull) any_pull = true;
      if (state[e.node] == T::TentativePull) any_tentative = true;
    }
    if (any_pull) {
      state[v] = T::Pull;
    } else if (prefers_pull && any_tentative) {
      state[v] = T::Pull;
      for (const auto& e : o.in(v))
        if (state[e.node] == T::TentativePull) state[e.node] = T::Pull;
    } else if (prefers_pull) {
      state[v] = T::TentativePull;
    } else if (!any_tentative) {
      state[v] = T::Push;
    } else {
      // resolve the tentative-pull input group in one local step
      double group_push = 0, group_pull = 0;
      for (const auto& e : o.in(v))
        if (state[e.node] == T::TentativePull) {
          group_push += push_cost(o, e.node, f, cm);
          group_pull += pull_cost(o, e.node, f, cm);
        }
      T resolved = group_push <= group_pull + kEps ? T::Push : T::Pull;
      for (const auto& e : o.in(v))
        if (state[e.node] == T::TentativePull) state[e.node] = resolved;
      state[v] = resolved == T::Push ? T::Push : T::Pull;
    }
  }
  std::vector<Decision> d(o.limit(), Decision::Push);
  for (OvlId v = 0; v < o.limit(); ++v) {
    if (!o.alive(v)) continue;
    d[v] = state[v] == T::Push ? Decision::Push : Decision::Pull; // leftover tentative = pull
  }
  return d;
}

} // namespace

DataflowPlan decide(const OverlayGraph& o, const DataGraph& g, const CostModel& cm, PlanMethod method) {
  FrequencyAnnotation f = annotate_frequencies(o, g);
  DataflowPlan plan;
  plan.method = method;
  plan.decision.assign(o.limit(), Decision::Push);
  switch (method) {
    case PlanMethod::AllPush:
      break;
    case PlanMethod::AllPull:
      for (OvlId v = 0; v < o.limit(); ++v)
        if (o.alive(v) && o.kind(v) != NodeKind::Writer) plan.decision[v] = Decision::Pull;
      break;
    case PlanMethod::Greedy:
      plan.decision = greedy_decide(o, f, cm);
      break;
    case PlanMethod::Optimal: {
      std::vector<double> w(o.limit(), 0.0);
      for (OvlId v = 0; v < o.limit(); ++v)
        if (o.alive(v)) w[v] = node_weight(o, v, f, cm);
      PruneResult pr = prune(o, w);
      for (OvlId v = 0; v < o.limit(); ++v)
        if (o.alive(v) && pr.fixed[v]) plan.decision[v] = *pr.fixed[v];
      for (const auto& comp : pr.components)
        for (auto [v, d] : solve_component(o, comp, w)) plan.decision[v] = d;
      break;
    }
  }
  if (!plan_valid(o, plan.decision)) throw Error("planner produced an invalid partition");
  plan.modeled_cost = plan_cost(o, f, cm, plan.decision);
  return plan;
}

// Split candidate for one node: the prefix length minimizing the modeled cost
// of pre-aggregating the l coldest inputs and pulling the rest on demand.
//   cost(l) = (sum of the l smallest push frequencies) * H(l) + f_l(v) * L(k - l + 1)
// cost(0) = f_l(v) * L(k); interior minima are the only split opportunities.
static int best_split_prefix(const std::vector<double>& in_freq, double fl, const CostModel& cm) {
  int k = (int)in_freq.size();
  double best = fl * cm.L(k); // l = 0
  int best_l = 0;
  double prefix = 0;
  for (int l = 1; l <= k; ++l) {
    prefix += in_freq[l - 1];
    double c = prefix * cm.H(l) + fl * cm.L(k - l + 1);
    if (c < best - kEps) {
      best = c;
      best_l = l;
    }
  }
  return best_l;
}

int split_nodes(OverlayGraph& o, const DataGraph& g, const CostModel& cm) {
  int splits = 0;
  double current_cost = decide(o, g, cm, PlanMethod::Optimal).modeled_cost;
  {
    std::vector<OvlId> nodes;
    for (OvlId v = 0; v < o.limit(); ++v)
      if (o.alive(v) && o.kind(v) != NodeKind::Writer && o.in(v).size() >= 3) nodes.push_back(v);
    for (OvlId v : nodes) {
      FrequencyAnnotation f = annotate_frequencies(o, g);
      // negative inputs stay put; only positive inputs are split out
      std::vector<OvlEdge> pos;
      for (const auto& e : o.in(v))
        if (e.sign > 0) pos.push_back(e);
      if (pos.size() < 3) continue;
      std::sort(pos.begin(), pos.end(), [&](const OvlEdge& a, const OvlEdge& b) {
        if (f.push_freq[a.node] != f.push_freq[b.node]) return f.push_freq[a.node] < f.push_freq[b.node];
        return a.node < b.node;
      });
      std::vector<double> freqs;
      for (const auto& e : pos) freqs.push_back(f.push_freq[e.node]);
      int l = best_split_prefix(freqs, f.pull_freq[v], cm);
      if (l <= 1 || l >= (int)pos.size()) continue;
      // splice in the child, keep it only if the optimal plan got cheaper
      OvlId child = o.add_partial();
      for (int i = 0; i < l; ++i) {
        o.remove_edge(pos[i].node, v, +1);
        o.add_edge(pos[i].node, child, +1);
      }
      o.add_edge(child, v, +1);
      double with_split = decide(o, g, cm, PlanMethod::Optimal).modeled_cost;
      if (with_split < current_cost - kEps) {
        current_cost = with_split;
        ++splits;
      } else {
        o.remove_edge(child, v, +1);
        for (int i = 0; i < l; ++i) {
          o.remove_edge(pos[i].node, child, +1);
          o.add_edge(pos[i].node, v, +1);
        }
        o.remove_node(child);
      }
    }
  }
  return splits;
}

DataflowPlan adapt(const OverlayGraph& o, const CostModel& cm, const DataflowPlan& plan,
                   const FrequencyAnnotation& observed, const AdaptThresholds& th) {
  DataflowPlan out = plan;
  out.method = plan.method;
  bool changed = true;
  while (changed) {
    changed = false;
    for (OvlId v = 0; v < o.limit(); ++v) {
      if (!o.alive(v) || o.kind(v) == NodeKind::Writer) continue;
      double pc = push_cost(o, v, observed, cm), lc = pull_cost(o, v, observed, cm);
      double w = lc - pc;
      if (std::abs(w) <= th.min_benefit_fraction * (pc + lc) + kEps) continue;
      if (out.decision[v] == Decision::Pull && w > 0) {
        // frontier pull node: all inputs push
        bool frontier = true;
        for (const auto& e : o.in(v)) frontier &= out.decision[e.node] == Decision::Push;
        if (frontier) {
          out.decision[v] = Decision::Push;
          changed = true;
        }
      } else if (out.decision[v] == Decision::Push && w < 0) {
        // frontier push node: all outputs pull
        bool frontier = !o.out(v).empty();
        for (const auto& e : o.out(v)) frontier &= out.decision[e.node] == Decision::Pull;
        if (frontier) {
          out.decision[v] = Decision::Pull;
          changed = true;
        }
      }
    }
  }
  if (!plan_valid(o, out.decision)) throw Error("adapt produced an invalid partition");
  out.modeled_cost = plan_cost(o, observed, cm, out.decision);
  return out;
}

} // namespace aggnet

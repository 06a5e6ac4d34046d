#pragma once

#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "aggnet/overlay.hpp"

namespace aggnet {

// Monotone piecewise-linear curve over the input count k.
struct CostCurve {
  std::vector<std::pair<int, double>> pts; // (k, cost), k ascending

  double at(int k) const;
  static CostCurve constant(double c);
  static CostCurve linear(double a);
  static CostCurve logarithmic(double a); // a * (1 + log2 k)
};

// H(k): cost of one push into a k-input node; L(k): cost of one pull of a
// k-input node. Writers are costed as window_factor-input nodes.
struct CostModel {
  CostCurve push_one = CostCurve::constant(1.0);
  CostCurve pull_one = CostCurve::linear(1.0);
  double window_factor = 1.0;

  double H(int k) const { return push_one.at(k); }
  double L(int k) const { return pull_one.at(k); }

  static CostModel for_aggregate(std::string_view name, double window_factor = 1.0);
};

struct FrequencyAnnotation {
  std::vector<double> push_freq; // f_h by overlay id
  std::vector<double> pull_freq; // f_l by overlay id
};

// f_h by a forward topological pass from writer rates, f_l by a backward pass
// from reader rates. Requires activity estimates for every materialized role.
FrequencyAnnotation annotate_frequencies(const OverlayGraph& o, const DataGraph& g);

double push_cost(const OverlayGraph& o, OvlId v, const FrequencyAnnotation& f, const CostModel& cm);
double pull_cost(const OverlayGraph& o, OvlId v, const FrequencyAnnotation& f, const CostModel& cm);
// w(v) = PULL(v) - PUSH(v): the benefit of a push decision.
double node_weight(const OverlayGraph& o, OvlId v, const FrequencyAnnotation& f, const CostModel& cm);

enum class PlanMethod { Optimal, Greedy, AllPush, AllPull };

struct DataflowPlan {
  std::vector<Decision> decision; // by overlay id (alive nodes meaningful)
  double modeled_cost = 0.0;
  PlanMethod method = PlanMethod::Optimal;
};

double plan_cost(const OverlayGraph& o, const FrequencyAnnotation& f, const CostModel& cm,
                 const std::vector<Decision>& decision);

struct PruneResult {
  // fixed[v] set when P1/P2 (or a mandatory label) decided v
  std::vector<std::optional<Decision>> fixed;
  std::vector<std::vector<OvlId>> components; // residual, weakly connected
};

// Writers are fixed push up front (mandatory), then P1/P2 run to fixpoint.
PruneResult prune(const OverlayGraph& o, const std::vector<double>& weights);

// Max-flow / min-cut on one residual component; returns the decision per node.
// Y (pull) = nodes reachable from the source in the residual graph.
std::vector<std::pair<OvlId, Decision>> solve_component(const OverlayGraph& o,
                                                        const std::vector<OvlId>& component,
                                                        const std::vector<double>& weights);

DataflowPlan decide(const OverlayGraph& o, const DataGraph& g, const CostModel& cm, PlanMethod method);

// Splices in child aggregators over low push-frequency input prefixes where
// that lowers the modeled optimal plan cost. Returns the number of splits.
int split_nodes(OverlayGraph& o, const DataGraph& g, const CostModel& cm);

struct AdaptThresholds {
  double min_benefit_fraction = 0.05; // |w(v)| must exceed this share of PUSH+PULL
};

// Re-decides push/pull frontier nodes against observed frequencies; flips are
// applied sequentially so the plan stays a valid partition throughout.
DataflowPlan adapt(const OverlayGraph& o, const CostModel& cm, const DataflowPlan& plan,
                   const FrequencyAnnotation& observed, const AdaptThresholds& thresholds = {});

bool plan_valid(const OverlayGraph& o, const std::vector<Decision>& decision);

// Times the aggregate's update and merge paths over k inputs at k = 1,2,4,...
// and fits monotone piecewise-linear H and L curves.
class Uda;
CostModel calibrate_cost_model(const Uda& uda, double window_factor = 1.0, int max_k = 1024);

} // namespace aggnet

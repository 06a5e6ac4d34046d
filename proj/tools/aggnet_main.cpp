// Command-line front end: compile overlays, decide dataflow, replay workloads.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "aggnet/bench.hpp"
#include "aggnet/construct.hpp"
#include "aggnet/dataflow.hpp"
#include "aggnet/engine.hpp"

using namespace aggnet;

namespace {

WindowSpec parse_window(const std::string& s) {
  auto sep = s.find(':');
  if (sep == std::string::npos) throw CLI::ValidationError("--window", "expected count:N or time:T");
  std::string kind = s.substr(0, sep);
  int64_t param = std::stoll(s.substr(sep + 1));
  if (kind == "count") return WindowSpec::count(param);
  if (kind == "time") return WindowSpec::time(param);
  throw CLI::ValidationError("--window", "expected count:N or time:T");
}

PlanMethod parse_plan(const std::string& s) {
  if (s == "optimal") return PlanMethod::Optimal;
  if (s == "greedy") return PlanMethod::Greedy;
  if (s == "all-push") return PlanMethod::AllPush;
  if (s == "all-pull") return PlanMethod::AllPull;
  throw CLI::ValidationError("--plan", "expected optimal|greedy|all-push|all-pull");
}

// vnmd needs a duplicate-insensitive aggregate; negative edges need subtraction
void check_algo_aggregate(Algorithm algo, const Uda& uda) {
  if (algo == Algorithm::VnmD && !uda.caps().duplicate_insensitive)
    throw CLI::ValidationError("--algo",
                               "vnmd builds multi-path overlays; aggregate '" + uda.name() +
                                   "' is not duplicate-insensitive");
  if (algo == Algorithm::VnmN && !uda.caps().subtractable)
    throw CLI::ValidationError("--algo", "vnmn adds negative edges; aggregate '" + uda.name() +
                                             "' does not support subtraction");
}

struct CommonArgs {
  std::string graph_file;
  bool symmetric = false;
  std::string agg = "sum";
  std::string window = "count:1";
  int hops = 1;

  void attach(CLI::App* cmd, bool need_graph = true) {
    auto* g = cmd->add_option("--graph", graph_file, "edge-list file (u<TAB>v per line)");
    if (need_graph) g->required();
    cmd->add_flag("--symmetric", symmetric, "treat edges as undirected");
    cmd->add_option("--agg", agg, "aggregate: sum|count|min|max|topk:K");
    cmd->add_option("--window", window, "window: count:N or time:T");
    cmd->add_option("--hops", hops, "neighborhood hop count");
  }

  DataGraph load() const { return load_graph_file(graph_file, {.symmetric = symmetric}); }

  QuerySpec query() const {
    QuerySpec q;
    q.aggregate = agg;
    q.window = parse_window(window);
    q.hops = hops;
    return q;
  }
};

void report_out(const MetricsReport& rep, const std::string& format, const std::string& tag) {
  if (format == "json") std::cout << rep.json() << "\n";
  else if (format == "csv") std::cout << MetricsReport::csv_header() << "\n" << rep.csv_row(tag) << "\n";
  else std::cout << rep.text();
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"ego-centric aggregation overlay engine"};
  app.require_subcommand(1);

  // ---- build ----
  CommonArgs b_common;
  std::string b_algo = "vnma", b_out = "overlay.txt";
  ConstructionParams b_params;
  auto* build_cmd = app.add_subcommand("build", "compile an overlay from a graph and query");
  b_common.attach(build_cmd);
  build_cmd->add_option("--algo", b_algo, "trivial|vnm|vnma|vnmn|vnmd|iob");
  build_cmd->add_option("--seed", b_params.seed, "construction seed");
  build_cmd->add_option("--chunk", b_params.initial_chunk_size, "initial chunk size");
  build_cmd->add_option("--iters", b_params.max_iterations, "max iterations");
  build_cmd->add_option("--k1", b_params.k1, "paths per reader (vnmn)");
  build_cmd->add_option("--k2", b_params.k2, "negative edges per path (vnmn)");
  build_cmd->add_option("--overlap", b_params.overlap_pct, "chunk overlap percent (vnmd)");
  build_cmd->add_option("-o,--out", b_out, "overlay output file");

  // ---- decide ----
  CommonArgs d_common;
  std::string d_overlay, d_out, d_plan = "optimal", d_activity;
  double d_ratio = 1.0, d_skew = 1.0, d_window_factor = 0;
  uint64_t d_seed = 1;
  bool d_split = false, d_calibrate = false;
  auto* decide_cmd = app.add_subcommand("decide", "annotate an overlay with push/pull decisions");
  d_common.attach(decide_cmd);
  decide_cmd->add_option("--overlay", d_overlay, "overlay file")->required();
  decide_cmd->add_option("--plan", d_plan, "optimal|greedy|all-push|all-pull");
  decide_cmd->add_option("--activity", d_activity, "activity file (label w r per line)");
  decide_cmd->add_option("--ratio", d_ratio, "synthetic write/read ratio");
  decide_cmd->add_option("--skew", d_skew, "synthetic Zipf skew");
  decide_cmd->add_option("--seed", d_seed, "synthetic activity seed");
  decide_cmd->add_option("--window-factor", d_window_factor, "avg live values per writer (default: window size)");
  decide_cmd->add_flag("--split", d_split, "split nodes for partial pre-computation first");
  decide_cmd->add_flag("--calibrate", d_calibrate, "measure H/L curves instead of the analytic model");
  decide_cmd->add_option("-o,--out", d_out, "decided overlay output (default: in place)");

  // ---- run ----
  CommonArgs r_common;
  std::string r_overlay, r_trace, r_plan = "optimal", r_report = "text";
  int r_threads = 1, r_write_threads = 0, r_adapt_every = 0;
  bool r_isolated = false, r_uni_thread = false;
  auto* run_cmd = app.add_subcommand("run", "replay a trace through an engine");
  r_common.attach(run_cmd);
  run_cmd->add_option("--overlay", r_overlay, "overlay file")->required();
  run_cmd->add_option("--trace", r_trace, "workload trace CSV")->required();
  run_cmd->add_option("--plan", r_plan, "optimal|greedy|all-push|all-pull");
  run_cmd->add_option("--threads", r_threads, "read worker threads");
  run_cmd->add_option("--write-threads", r_write_threads, "write worker threads (default --threads)");
  run_cmd->add_option("--adapt-every", r_adapt_every, "frontier re-decision period in events");
  run_cmd->add_flag("--isolated-latency", r_isolated, "run each read in isolation");
  run_cmd->add_flag("--uni-thread-writes", r_uni_thread, "uni-thread write model instead of queueing");
  run_cmd->add_option("--report", r_report, "json|csv|text");

  // ---- compare ----
  CommonArgs c_common;
  std::string c_algos = "trivial,vnma,iob", c_plans = "optimal,all-push,all-pull";
  std::string c_ratios = "0.05,0.2,1,5,20", c_report = "csv";
  int64_t c_count = 20000;
  int c_threads = 2;
  uint64_t c_seed = 1;
  double c_skew = 1.0;
  auto* compare_cmd = app.add_subcommand("compare", "matrix of algorithms x plans x ratios");
  c_common.attach(compare_cmd);
  compare_cmd->add_option("--algos", c_algos, "comma-separated algorithm list");
  compare_cmd->add_option("--plans", c_plans, "comma-separated plan list");
  compare_cmd->add_option("--ratios", c_ratios, "comma-separated write/read ratios");
  compare_cmd->add_option("--count", c_count, "events per cell");
  compare_cmd->add_option("--threads", c_threads, "worker threads per pool");
  compare_cmd->add_option("--seed", c_seed, "trace seed");
  compare_cmd->add_option("--skew", c_skew, "Zipf skew");
  compare_cmd->add_option("--report", c_report, "csv|text");

  // ---- validate ----
  CommonArgs v_common;
  std::string v_overlay;
  auto* validate_cmd = app.add_subcommand("validate", "check an overlay against a graph and query");
  v_common.attach(validate_cmd);
  validate_cmd->add_option("--overlay", v_overlay, "overlay file")->required();

  // ---- gen ----
  CommonArgs g_common;
  std::string g_out = "trace.csv", g_from_http;
  double g_ratio = 1.0, g_skew = 1.0;
  int64_t g_count = 10000;
  uint64_t g_seed = 1;
  bool g_degree_correlated = false;
  auto* gen_cmd = app.add_subcommand("gen", "generate a synthetic or trace-derived workload");
  g_common.attach(gen_cmd);
  gen_cmd->add_option("--ratio", g_ratio, "write/read ratio");
  gen_cmd->add_option("--skew", g_skew, "Zipf skew");
  gen_cmd->add_option("--count", g_count, "event count");
  gen_cmd->add_option("--seed", g_seed, "seed");
  gen_cmd->add_flag("--degree-correlated", g_degree_correlated, "hot nodes follow out-degree");
  gen_cmd->add_option("--from-http", g_from_http, "derive events from a Common-Log-Format trace");
  gen_cmd->add_option("-o,--out", g_out, "trace output file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*build_cmd) {
      DataGraph g = b_common.load();
      QuerySpec q = b_common.query();
      q.check();
      UdaPtr uda = make_aggregate(b_common.agg);
      Algorithm algo = algorithm_from_name(b_algo);
      check_algo_aggregate(algo, *uda);
      BipartiteGraph a = derive_bipartite(g, q);
      OverlayGraph o = build_overlay(a, algo, b_params);
      auto violations = validate(o, a, uda->caps());
      if (!violations.empty()) {
        for (auto& v : violations) std::cerr << "violation " << v.kind << ": " << v.detail << "\n";
        return 2;
      }
      save_overlay_file(o, b_out);
      std::cout << "algo=" << b_algo << "\n";
      std::cout << "overlay_nodes=" << o.node_count() << "\n";
      std::cout << "overlay_edges=" << o.edge_count() << "\n";
      if (a.edge_count() > 0) std::cout << "sharing_index=" << sharing_index(o, a) << "\n";
      std::cout << "mean_depth=" << depth_profile(o).mean << "\n";
    } else if (*decide_cmd) {
      DataGraph g = d_common.load();
      QuerySpec q = d_common.query();
      OverlayGraph o = load_overlay_file(d_overlay);
      if (!d_activity.empty()) load_activity_file(g, d_activity);
      else assign_zipf_activity(g, {.skew = d_skew, .write_read_ratio = d_ratio, .seed = d_seed});
      double wf = d_window_factor > 0 ? d_window_factor
                  : q.window.kind == WindowSpec::Kind::Count ? (double)q.window.param
                                                             : 1.0;
      UdaPtr uda = make_aggregate(d_common.agg);
      CostModel cm = d_calibrate ? calibrate_cost_model(*uda, wf)
                                 : CostModel::for_aggregate(d_common.agg, wf);
      if (d_split) std::cout << "splits=" << split_nodes(o, g, cm) << "\n";
      DataflowPlan plan = decide(o, g, cm, parse_plan(d_plan));
      for (OvlId n = 0; n < o.limit(); ++n)
        if (o.alive(n)) o.set_decision(n, plan.decision[n]);
      save_overlay_file(o, d_out.empty() ? d_overlay : d_out);
      FrequencyAnnotation f = annotate_frequencies(o, g);
      std::cout << "plan=" << d_plan << "\n";
      std::cout << "plan_cost=" << plan.modeled_cost << "\n";
      std::cout << "all_push_cost=" << plan_cost(o, f, cm, decide(o, g, cm, PlanMethod::AllPush).decision) << "\n";
      std::cout << "all_pull_cost=" << plan_cost(o, f, cm, decide(o, g, cm, PlanMethod::AllPull).decision) << "\n";
      int pushes = 0, pulls = 0;
      for (OvlId n = 0; n < o.limit(); ++n)
        if (o.alive(n)) (plan.decision[n] == Decision::Push ? pushes : pulls)++;
      std::cout << "push_nodes=" << pushes << "\npull_nodes=" << pulls << "\n";
    } else if (*run_cmd) {
      DataGraph g = r_common.load();
      QuerySpec q = r_common.query();
      OverlayGraph o = load_overlay_file(r_overlay);
      Trace trace = load_trace_file(r_trace);
      UdaPtr uda = make_aggregate(r_common.agg);
      // activity from the trace mix so the planner sees what will replay
      {
        std::map<NodeId, int64_t> w, r;
        for (auto& e : trace.events) {
          auto v = g.find(e.a);
          if (!v) continue;
          if (e.kind == WorkloadEvent::Kind::Write) ++w[*v];
          if (e.kind == WorkloadEvent::Kind::Read) ++r[*v];
        }
        double span = trace.events.empty()
                          ? 1.0
                          : std::max<int64_t>(1, trace.events.back().ts - trace.events.front().ts);
        for (NodeId v = 0; v < g.max_id(); ++v)
          if (g.alive(v)) g.set_activity(v, (double)w[v] / span, (double)r[v] / span);
      }
      double wf = q.window.kind == WindowSpec::Kind::Count ? (double)q.window.param : 1.0;
      CostModel cm = CostModel::for_aggregate(r_common.agg, wf);
      BenchConfig cfg;
      cfg.engine.read_threads = r_threads;
      cfg.engine.write_threads = r_write_threads > 0 ? r_write_threads : r_threads;
      cfg.engine.write_model = r_uni_thread ? WriteModel::UniThread : WriteModel::Queueing;
      cfg.engine.window = q.window;
      cfg.plan_method = parse_plan(r_plan);
      cfg.isolated_latency = r_isolated;
      cfg.adapt_every = r_adapt_every;
      MetricsReport rep = run_benchmark(g, o, q, uda, cm, trace, cfg);
      report_out(rep, r_report, r_plan);
    } else if (*compare_cmd) {
      QuerySpec q = c_common.query();
      UdaPtr uda = make_aggregate(c_common.agg);
      auto split_list = [](const std::string& s) {
        std::vector<std::string> out;
        std::istringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(item);
        return out;
      };
      std::cout << "algo,plan,ratio," << MetricsReport::csv_header() << "\n";
      for (const std::string& ratio_s : split_list(c_ratios)) {
        double ratio = std::stod(ratio_s);
        for (const std::string& algo_s : split_list(c_algos)) {
          Algorithm algo = algorithm_from_name(algo_s);
          check_algo_aggregate(algo, *uda);
          for (const std::string& plan_s : split_list(c_plans)) {
            DataGraph g = c_common.load();
            ZipfParams zp{.skew = c_skew, .write_read_ratio = ratio, .count = c_count, .seed = c_seed};
            Trace trace = gen_zipf(g, zp);
            BipartiteGraph a = derive_bipartite(g, q);
            ConstructionParams cp;
            cp.seed = c_seed;
            OverlayGraph o = build_overlay(a, algo, cp);
            double wf = q.window.kind == WindowSpec::Kind::Count ? (double)q.window.param : 1.0;
            CostModel cm = CostModel::for_aggregate(c_common.agg, wf);
            BenchConfig cfg;
            cfg.engine.read_threads = c_threads;
            cfg.engine.write_threads = c_threads;
            cfg.engine.window = q.window;
            cfg.plan_method = parse_plan(plan_s);
            cfg.capture_final_reads = false;
            MetricsReport rep = run_benchmark(g, o, q, uda, cm, trace, cfg);
            std::cout << algo_s << ',' << plan_s << ',' << ratio_s << ','
                      << rep.csv_row(algo_s + "/" + plan_s) << "\n";
            std::cout.flush();
          }
        }
      }
    } else if (*validate_cmd) {
      DataGraph g = v_common.load();
      QuerySpec q = v_common.query();
      OverlayGraph o = load_overlay_file(v_overlay);
      UdaPtr uda = make_aggregate(v_common.agg);
      BipartiteGraph a = derive_bipartite(g, q);
      auto violations = validate(o, a, uda->caps());
      if (violations.empty()) {
        std::cout << "overlay valid: " << o.node_count() << " nodes, " << o.edge_count()
                  << " edges\n";
        return 0;
      }
      for (auto& v : violations) std::cout << "violation " << v.kind << ": " << v.detail << "\n";
      return 2;
    } else if (*gen_cmd) {
      DataGraph g = g_common.load();
      Trace trace;
      if (!g_from_http.empty()) {
        std::ifstream f(g_from_http);
        if (!f) throw Error("cannot open " + g_from_http);
        HttpTrace h = parse_http_trace(f);
        std::cout << "clients=" << h.clients << "\nhttp_events=" << h.events.size()
                  << "\nskipped=" << h.skipped << "\n";
        trace = http_to_trace(h, g, g_ratio, g_seed);
      } else {
        ZipfParams zp{.skew = g_skew,
                      .write_read_ratio = g_ratio,
                      .count = g_count,
                      .seed = g_seed,
                      .degree_correlated = g_degree_correlated};
        trace = gen_zipf(g, zp);
      }
      save_trace_file(trace, g_out);
      std::cout << "events=" << trace.events.size() << "\nout=" << g_out << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#include "aggnet/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace aggnet {

std::string event_kind_name(WorkloadEvent::Kind k) {
  switch (k) {
    case WorkloadEvent::Kind::Read: return "R";
    case WorkloadEvent::Kind::Write: return "W";
    case WorkloadEvent::Kind::EdgeAdd: return "EADD";
    case WorkloadEvent::Kind::EdgeDel: return "EDEL";
    case WorkloadEvent::Kind::NodeAdd: return "NADD";
    case WorkloadEvent::Kind::NodeDel: return "NDEL";
  }
  return "?";
}

static WorkloadEvent::Kind kind_from_name(const std::string& s) {
  if (s == "R") return WorkloadEvent::Kind::Read;
  if (s == "W") return WorkloadEvent::Kind::Write;
  if (s == "EADD") return WorkloadEvent::Kind::EdgeAdd;
  if (s == "EDEL") return WorkloadEvent::Kind::EdgeDel;
  if (s == "NADD") return WorkloadEvent::Kind::NodeAdd;
  if (s == "NDEL") return WorkloadEvent::Kind::NodeDel;
  throw Error("unknown trace event kind " + s);
}

void save_trace(const Trace& t, std::ostream& out) {
  for (const auto& e : t.events) {
    out << e.ts << ',' << event_kind_name(e.kind) << ',' << e.a;
    switch (e.kind) {
      case WorkloadEvent::Kind::Write: out << ',' << e.value; break;
      case WorkloadEvent::Kind::EdgeAdd:
      case WorkloadEvent::Kind::EdgeDel: out << ',' << e.b; break;
      default: break;
    }
    out << '\n';
  }
}

Trace load_trace(std::istream& in) {
  Trace t;
  std::string line;
  size_t lineno = 0;
  int64_t last_ts = std::numeric_limits<int64_t>::min();
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::istringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cols.push_back(c);
    if (cols.size() < 3) throw Error("trace: bad record at line " + std::to_string(lineno));
    WorkloadEvent e;
    e.ts = std::stoll(cols[0]);
    e.kind = kind_from_name(cols[1]);
    e.a = cols[2];
    switch (e.kind) {
      case WorkloadEvent::Kind::Write:
        if (cols.size() != 4) throw Error("trace: W needs a value at line " + std::to_string(lineno));
        e.value = std::stoll(cols[3]);
        break;
      case WorkloadEvent::Kind::EdgeAdd:
      case WorkloadEvent::Kind::EdgeDel:
        if (cols.size() != 4) throw Error("trace: edge event needs two nodes at line " + std::to_string(lineno));
        e.b = cols[3];
        break;
      default:
        if (cols.size() != 3) throw Error("trace: unexpected fields at line " + std::to_string(lineno));
        break;
    }
    if (e.ts < last_ts) throw Error("trace: timestamps decrease at line " + std::to_string(lineno));
    last_ts = e.ts;
    t.events.push_back(std::move(e));
  }
  return t;
}

Trace load_trace_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open " + path);
  return load_trace(f);
}

void save_trace_file(const Trace& t, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot open " + path);
  save_trace(t, f);
}

namespace {

struct ZipfModel {
  std::vector<NodeId> ranked;
  std::vector<double> cdf;   // cumulative selection probability by rank
  std::vector<double> share; // per-rank probability mass
  double write_prob;
};

ZipfModel zipf_model(DataGraph& g, const ZipfParams& p, std::mt19937_64& rng) {
  if (p.skew <= 0 || p.write_read_ratio <= 0) throw Error("zipf: skew and ratio must be positive");
  ZipfModel m;
  for (NodeId v = 0; v < g.max_id(); ++v)
    if (g.alive(v)) m.ranked.push_back(v);
  if (m.ranked.empty()) throw Error("zipf: empty graph");
  // rank assignment: seeded shuffle, or hottest = highest out-degree
  if (p.degree_correlated) {
    std::stable_sort(m.ranked.begin(), m.ranked.end(), [&](NodeId a, NodeId b) {
      return g.out(a).size() > g.out(b).size();
    });
  } else {
    std::shuffle(m.ranked.begin(), m.ranked.end(), rng);
  }
  double total = 0;
  std::vector<double> weight(m.ranked.size());
  for (size_t i = 0; i < m.ranked.size(); ++i) {
    weight[i] = 1.0 / std::pow((double)(i + 1), p.skew);
    total += weight[i];
  }
  double acc = 0;
  for (size_t i = 0; i < m.ranked.size(); ++i) {
    m.share.push_back(weight[i] / total);
    acc += weight[i] / total;
    m.cdf.push_back(acc);
  }
  m.write_prob = p.write_read_ratio / (1.0 + p.write_read_ratio);
  // exact expected rates double as the activity estimates (events per tick)
  for (size_t i = 0; i < m.ranked.size(); ++i)
    g.set_activity(m.ranked[i], m.share[i] * m.write_prob, m.share[i] * (1.0 - m.write_prob));
  return m;
}

} // namespace

void assign_zipf_activity(DataGraph& g, const ZipfParams& p) {
  std::mt19937_64 rng(p.seed);
  (void)zipf_model(g, p, rng);
}

void load_activity_file(DataGraph& g, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open " + path);
  std::string label;
  double w, r;
  while (f >> label >> w >> r) {
    auto v = g.find(label);
    if (!v) throw Error("activity file references unknown node " + label);
    g.set_activity(*v, w, r);
  }
}

Trace gen_zipf(DataGraph& g, const ZipfParams& p) {
  std::mt19937_64 rng(p.seed);
  ZipfModel m = zipf_model(g, p, rng);
  const std::vector<NodeId>& ranked = m.ranked;
  const std::vector<double>& cdf = m.cdf;
  double write_prob = m.write_prob;

  Trace t;
  t.events.reserve(p.count);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::uniform_int_distribution<int64_t> val(0, std::max<int64_t>(1, p.value_range - 1));
  for (int64_t i = 0; i < p.count; ++i) {
    double u = uni(rng);
    size_t idx = std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
    if (idx >= ranked.size()) idx = ranked.size() - 1;
    WorkloadEvent e;
    e.ts = i;
    e.a = g.label(ranked[idx]);
    if (uni(rng) < write_prob) {
      e.kind = WorkloadEvent::Kind::Write;
      e.value = val(rng);
    } else {
      e.kind = WorkloadEvent::Kind::Read;
    }
    t.events.push_back(std::move(e));
  }
  return t;
}

HttpTrace parse_http_trace(std::istream& in) {
  HttpTrace h;
  std::string line;
  std::map<std::string, int> seen;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    size_t sp = line.find(' ');
    size_t lb = line.find('[');
    size_t rb = line.find(']');
    if (sp == std::string::npos || lb == std::string::npos || rb == std::string::npos || rb < lb) {
      ++h.skipped;
      continue;
    }
    std::string client = line.substr(0, sp);
    std::string stamp = line.substr(lb + 1, rb - lb - 1);
    // EPA style "DD:HH:MM:SS", CLF "day/mon/year:HH:MM:SS zone", or epoch digits
    int64_t ts = -1;
    if (stamp.find('/') != std::string::npos) {
      static const char* months[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                     "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
      int day = 0, year = 0, hh = 0, mm = 0, ss = 0, mon = -1;
      char mon_s[4] = {0};
      if (std::sscanf(stamp.c_str(), "%d/%3s/%d:%d:%d:%d", &day, mon_s, &year, &hh, &mm, &ss) == 6) {
        for (int m = 0; m < 12; ++m)
          if (std::string(mon_s) == months[m]) mon = m;
        if (mon >= 0)
          ts = (((int64_t)year * 372 + mon * 31 + day) * 24 + hh) * 3600 + mm * 60 + ss;
      }
    } else {
      std::vector<int64_t> parts;
      std::istringstream ps(stamp);
      std::string piece;
      bool ok = true;
      while (std::getline(ps, piece, ':')) {
        try {
          parts.push_back(std::stoll(piece));
        } catch (...) {
          ok = false;
          break;
        }
      }
      if (ok && parts.size() == 4)
        ts = parts[0] * 86400 + parts[1] * 3600 + parts[2] * 60 + parts[3];
      else if (ok && parts.size() == 1)
        ts = parts[0];
    }
    if (ts < 0) {
      ++h.skipped;
      continue;
    }
    if (!seen.count(client)) seen[client] = 1;
    h.events.push_back({std::move(client), ts});
  }
  h.clients = seen.size();
  return h;
}

Trace http_to_trace(const HttpTrace& h, DataGraph& g, double write_read_ratio, uint64_t seed,
                    int64_t value_range) {
  if (write_read_ratio <= 0) throw Error("http_to_trace: ratio must be positive");
  std::vector<NodeId> nodes;
  for (NodeId v = 0; v < g.max_id(); ++v)
    if (g.alive(v)) nodes.push_back(v);
  if (nodes.empty()) throw Error("http_to_trace: empty graph");

  // distinct clients in first-appearance order
  std::vector<std::string> clients;
  std::map<std::string, size_t> idx;
  for (const auto& e : h.events)
    if (!idx.count(e.client)) {
      idx[e.client] = clients.size();
      clients.push_back(e.client);
    }
  if (clients.empty()) throw Error("http_to_trace: no events");

  // nodes dealt to clients round-robin: every node belongs to one client,
  // every client owns >= 1 node when clients <= nodes
  std::vector<std::vector<NodeId>> owned(clients.size());
  for (size_t i = 0; i < nodes.size(); ++i) owned[i % clients.size()].push_back(nodes[i]);
  for (size_t c = 0; c < clients.size(); ++c)
    if (owned[c].empty()) owned[c].push_back(nodes[c % nodes.size()]);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::uniform_int_distribution<int64_t> val(0, std::max<int64_t>(1, value_range - 1));
  double write_prob = write_read_ratio / (1.0 + write_read_ratio);

  std::vector<HttpTrace::Event> ordered = h.events;
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto& a, const auto& b) { return a.ts < b.ts; });

  std::vector<int64_t> writes(g.max_id(), 0), reads(g.max_id(), 0);
  Trace t;
  t.events.reserve(ordered.size());
  for (const auto& e : ordered) {
    const auto& own = owned[idx[e.client]];
    NodeId v = own[(size_t)(uni(rng) * own.size()) % own.size()];
    WorkloadEvent w;
    w.ts = e.ts;
    w.a = g.label(v);
    if (uni(rng) < write_prob) {
      w.kind = WorkloadEvent::Kind::Write;
      w.value = val(rng);
      ++writes[v];
    } else {
      w.kind = WorkloadEvent::Kind::Read;
      ++reads[v];
    }
    t.events.push_back(std::move(w));
  }
  double span = ordered.empty() ? 1.0 : std::max<int64_t>(1, ordered.back().ts - ordered.front().ts);
  for (NodeId v : nodes) g.set_activity(v, (double)writes[v] / span, (double)reads[v] / span);
  return t;
}

std::string MetricsReport::text() const {
  std::ostringstream os;
  os << "wall_seconds=" << wall_seconds << "\n";
  os << "ops_per_sec=" << ops_per_sec << "\n";
  os << "read_latency_mean_us=" << read_latency_mean_us << "\n";
  os << "read_latency_p95_us=" << read_latency_p95_us << "\n";
  os << "read_latency_max_us=" << read_latency_max_us << "\n";
  for (auto& [k, v] : op_counts) os << "ops_" << k << "=" << v << "\n";
  os << "errors=" << errors << "\n";
  os << "sharing_index=" << sharing_index << "\n";
  os << "mean_depth=" << mean_depth << "\n";
  os << "plan_cost=" << plan_cost << "\n";
  return os.str();
}

std::string MetricsReport::json() const {
  nlohmann::json j;
  j["wall_seconds"] = wall_seconds;
  j["ops_per_sec"] = ops_per_sec;
  j["read_latency_us"] = {{"mean", read_latency_mean_us}, {"p95", read_latency_p95_us}, {"max", read_latency_max_us}};
  j["op_counts"] = op_counts;
  j["errors"] = errors;
  j["sharing_index"] = sharing_index;
  j["mean_depth"] = mean_depth;
  j["plan_cost"] = plan_cost;
  return j.dump(2);
}

std::string MetricsReport::csv_header() {
  return "tag,ops_per_sec,read_mean_us,read_p95_us,read_max_us,reads,writes,errors,sharing_index,"
         "mean_depth,plan_cost";
}

std::string MetricsReport::csv_row(const std::string& tag) const {
  std::ostringstream os;
  auto count = [&](const char* k) {
    auto it = op_counts.find(k);
    return it == op_counts.end() ? 0 : it->second;
  };
  os << tag << ',' << ops_per_sec << ',' << read_latency_mean_us << ',' << read_latency_p95_us << ','
     << read_latency_max_us << ',' << count("R") << ',' << count("W") << ',' << errors << ','
     << sharing_index << ',' << mean_depth << ',' << plan_cost;
  return os.str();
}

MetricsReport run_benchmark(DataGraph& g, OverlayGraph& o, const QuerySpec& q, UdaPtr uda,
                            const CostModel& cm, const Trace& trace, const BenchConfig& cfg) {
  using clock = std::chrono::steady_clock;
  MetricsReport rep;

  DataflowPlan plan = cfg.fixed_plan ? *cfg.fixed_plan : decide(o, g, cm, cfg.plan_method);
  Engine engine(g, o, uda, plan, cfg.engine);

  std::mutex lat_mutex;
  std::vector<double> latencies_us;
  std::vector<int> direct_counter(g.max_id(), 0);
  int64_t since_adapt = 0;
  auto adapt_window_start = clock::now();
  engine.reset_observed();

  auto t_start = clock::now();
  for (const auto& e : trace.events) {
    rep.op_counts[event_kind_name(e.kind)]++;
    switch (e.kind) {
      case WorkloadEvent::Kind::Write: {
        auto v = g.find(e.a);
        if (!v) {
          ++rep.errors;
          break;
        }
        if (cfg.isolated_latency) {
          engine.write(*v, e.ts, e.value);
          engine.drain();
        } else {
          engine.submit_write(*v, e.ts, e.value);
        }
        break;
      }
      case WorkloadEvent::Kind::Read: {
        auto v = g.find(e.a);
        if (!v) {
          ++rep.errors;
          break;
        }
        if (cfg.isolated_latency) {
          engine.drain();
          auto r0 = clock::now();
          (void)engine.read(*v);
          auto r1 = clock::now();
          latencies_us.push_back(std::chrono::duration<double, std::micro>(r1 - r0).count());
        } else {
          auto r0 = clock::now();
          engine.submit_read(*v, [&, r0](const AggResult&) {
            auto r1 = clock::now();
            std::lock_guard<std::mutex> lk(lat_mutex);
            latencies_us.push_back(std::chrono::duration<double, std::micro>(r1 - r0).count());
          });
        }
        break;
      }
      default: { // structural updates run in an exclusive phase
        engine.drain();
        StructureUpdate su;
        su.ts = e.ts;
        su.u = e.a;
        su.v = e.b;
        switch (e.kind) {
          case WorkloadEvent::Kind::EdgeAdd: su.kind = StructureUpdate::Kind::EdgeAdd; break;
          case WorkloadEvent::Kind::EdgeDel: su.kind = StructureUpdate::Kind::EdgeDel; break;
          case WorkloadEvent::Kind::NodeAdd: su.kind = StructureUpdate::Kind::NodeAdd; break;
          default: su.kind = StructureUpdate::Kind::NodeDel; break;
        }
        try {
          apply_structure_update(g, o, q, su, cfg.maintain, direct_counter);
          plan = decide(o, g, cm, cfg.plan_method);
          engine.set_plan(plan);
        } catch (const Error&) {
          ++rep.errors;
        }
        break;
      }
    }
    if (cfg.adapt_every > 0 && ++since_adapt >= cfg.adapt_every) {
      since_adapt = 0;
      engine.drain();
      double secs = std::chrono::duration<double>(clock::now() - adapt_window_start).count();
      std::vector<double> wr, rr;
      engine.observed_rates(secs, wr, rr);
      DataGraph observed_view = g; // same structure, observed activity
      for (NodeId v = 0; v < g.max_id(); ++v)
        if (g.alive(v)) observed_view.set_activity(v, wr[v], rr[v]);
      FrequencyAnnotation obs = annotate_frequencies(o, observed_view);
      DataflowPlan adapted = adapt(o, cm, plan, obs, cfg.adapt_thresholds);
      if (adapted.decision != plan.decision) {
        plan = adapted;
        engine.set_plan(plan);
      }
      engine.reset_observed();
      adapt_window_start = clock::now();
    }
  }
  engine.drain();
  auto t_end = clock::now();
  rep.replay_seconds = std::chrono::duration<double>(t_end - t_start).count();
  rep.wall_seconds = rep.replay_seconds;
  int64_t total_ops = 0;
  for (auto& [k, v] : rep.op_counts) total_ops += v;
  rep.ops_per_sec = rep.wall_seconds > 0 ? (double)total_ops / rep.wall_seconds : 0;
  rep.errors += (int64_t)engine.error_count();

  if (!latencies_us.empty()) {
    std::sort(latencies_us.begin(), latencies_us.end());
    double sum = 0;
    for (double x : latencies_us) sum += x;
    rep.read_latency_mean_us = sum / (double)latencies_us.size();
    rep.read_latency_p95_us = latencies_us[(size_t)((double)(latencies_us.size() - 1) * 0.95)];
    rep.read_latency_max_us = latencies_us.back();
  }

  BipartiteGraph a = derive_bipartite(g, q);
  if (a.edge_count() > 0) rep.sharing_index = sharing_index(o, a);
  rep.mean_depth = depth_profile(o).mean;
  rep.plan_cost = plan.modeled_cost;
  rep.final_decisions = plan.decision;

  if (cfg.capture_final_reads) {
    for (NodeId v = 0; v < g.max_id(); ++v) {
      if (!g.alive(v)) continue;
      if (q.reader_pred && !g.attr_equals(v, *q.reader_pred)) continue;
      rep.final_reads.push_back({g.label(v), engine.read(v)});
    }
  }
  return rep;
}

} // namespace aggnet

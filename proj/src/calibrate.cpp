#include <chrono>

#include "aggnet/dataflow.hpp"
#include "aggnet/uda.hpp"

namespace aggnet {

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

} // namespace

// Measures one push (a single contribution replacement into a k-input PAO)
// and one pull (merging k input PAOs) at k = 1,2,4,...,max_k.
CostModel calibrate_cost_model(const Uda& uda, double window_factor, int max_k) {
  using clock = std::chrono::steady_clock;
  CostModel cm;
  cm.window_factor = window_factor;
  cm.push_one.pts.clear();
  cm.pull_one.pts.clear();

  const int reps = 5;
  for (int k = 1; k <= max_k; k <<= 1) {
    std::vector<PaoPtr> inputs;
    for (int i = 0; i < k; ++i) inputs.push_back(uda.lift(i * 7 % 101));

    std::vector<double> push_times, pull_times;
    for (int rep = 0; rep < reps; ++rep) {
      PaoPtr agg = uda.initialize();
      for (const auto& in : inputs) uda.merge(*agg, *in);
      int iters = std::max(1000, 200000 / k);
      PaoPtr old_c = uda.lift(1), new_c = uda.lift(2);
      auto t0 = clock::now();
      for (int i = 0; i < iters; ++i) {
        uda.update(*agg, old_c.get(), new_c.get());
        std::swap(old_c, new_c);
      }
      auto t1 = clock::now();
      push_times.push_back(std::chrono::duration<double, std::nano>(t1 - t0).count() / iters);

      int pull_iters = std::max(10, 20000 / k);
      auto t2 = clock::now();
      for (int i = 0; i < pull_iters; ++i) {
        PaoPtr p = uda.initialize();
        for (const auto& in : inputs) uda.merge(*p, *in);
      }
      auto t3 = clock::now();
      pull_times.push_back(std::chrono::duration<double, std::nano>(t3 - t2).count() / pull_iters);
    }
    cm.push_one.pts.push_back({k, median(push_times)});
    cm.pull_one.pts.push_back({k, median(pull_times)});
  }

  // enforce monotonicity so the curves stay sane under timing noise
  for (size_t i = 1; i < cm.push_one.pts.size(); ++i)
    cm.push_one.pts[i].second = std::max(cm.push_one.pts[i].second, cm.push_one.pts[i - 1].second);
  for (size_t i = 1; i < cm.pull_one.pts.size(); ++i)
    cm.pull_one.pts[i].second = std::max(cm.pull_one.pts[i].second, cm.pull_one.pts[i - 1].second);
  return cm;
}

} // namespace aggnet

#include "aggnet/uda.hpp"

#include <algorithm>
#include <mutex>
#include <sstream>
#include <unordered_map>

namespace aggnet {

std::string AggResult::str() const {
  if (empty && items.empty() && scalar == 0) return "(empty)";
  std::ostringstream os;
  if (items.empty()) {
    os << scalar;
    if (empty) os << " (empty)";
  } else {
    os << "[";
    for (size_t i = 0; i < items.size(); ++i)
      os << (i ? " " : "") << items[i].first << "x" << items[i].second;
    os << "]";
  }
  return os.str();
}

void Uda::unmerge(Pao&, const Pao&) const {
  throw Error("aggregate " + name() + " does not support unmerge");
}

namespace {

// ---- SUM / COUNT --------------------------------------------------------

struct ScalarPao final : Pao {
  int64_t acc = 0;
  int64_t n = 0; // values aggregated; 0 means empty
  PaoPtr clone() const override { return std::make_unique<ScalarPao>(*this); }
};

class SumUda final : public Uda {
public:
  std::string name() const override { return "sum"; }
  AggCaps caps() const override { return {.duplicate_insensitive = false, .subtractable = true}; }
  PaoPtr initialize() const override { return std::make_unique<ScalarPao>(); }
  PaoPtr lift(int64_t v) const override {
    auto p = std::make_unique<ScalarPao>();
    p->acc = v;
    p->n = 1;
    return p;
  }
  void update(Pao& pao, const Pao* oldc, const Pao* newc) const override {
    auto& p = static_cast<ScalarPao&>(pao);
    if (oldc) {
      p.acc -= static_cast<const ScalarPao*>(oldc)->acc;
      p.n -= static_cast<const ScalarPao*>(oldc)->n;
    }
    if (newc) {
      p.acc += static_cast<const ScalarPao*>(newc)->acc;
      p.n += static_cast<const ScalarPao*>(newc)->n;
    }
  }
  void merge(Pao& pao, const Pao& other) const override { update(pao, nullptr, &other); }
  void unmerge(Pao& pao, const Pao& other) const override { update(pao, &other, nullptr); }
  AggResult finalize(const Pao& pao) const override {
    auto& p = static_cast<const ScalarPao&>(pao);
    return {.empty = p.n == 0, .scalar = p.acc, .items = {}};
  }
};

class CountUda final : public Uda {
public:
  std::string name() const override { return "count"; }
  AggCaps caps() const override { return {.duplicate_insensitive = false, .subtractable = true}; }
  PaoPtr initialize() const override { return std::make_unique<ScalarPao>(); }
  PaoPtr lift(int64_t) const override {
    auto p = std::make_unique<ScalarPao>();
    p->acc = 1;
    p->n = 1;
    return p;
  }
  void update(Pao& pao, const Pao* oldc, const Pao* newc) const override {
    auto& p = static_cast<ScalarPao&>(pao);
    if (oldc) {
      p.acc -= static_cast<const ScalarPao*>(oldc)->acc;
      p.n -= static_cast<const ScalarPao*>(oldc)->n;
    }
    if (newc) {
      p.acc += static_cast<const ScalarPao*>(newc)->acc;
      p.n += static_cast<const ScalarPao*>(newc)->n;
    }
  }
  void merge(Pao& pao, const Pao& other) const override { update(pao, nullptr, &other); }
  void unmerge(Pao& pao, const Pao& other) const override { update(pao, &other, nullptr); }
  AggResult finalize(const Pao& pao) const override {
    auto& p = static_cast<const ScalarPao&>(pao);
    return {.empty = p.n == 0, .scalar = p.acc, .items = {}};
  }
};

// ---- MIN / MAX ----------------------------------------------------------
// Counted multiset so that window expiry (delete-updates) stays cheap; the
// count inflation caused by duplicate paths never changes the extremum.

struct MultisetPao final : Pao {
  std::map<int64_t, int64_t> counts;
  PaoPtr clone() const override { return std::make_unique<MultisetPao>(*this); }
};

class ExtremumUda final : public Uda {
public:
  explicit ExtremumUda(bool is_max) : is_max_(is_max) {}
  std::string name() const override { return is_max_ ? "max" : "min"; }
  AggCaps caps() const override { return {.duplicate_insensitive = true, .subtractable = false}; }
  PaoPtr initialize() const override { return std::make_unique<MultisetPao>(); }
  PaoPtr lift(int64_t v) const override {
    auto p = std::make_unique<MultisetPao>();
    p->counts[v] = 1;
    return p;
  }
  void update(Pao& pao, const Pao* oldc, const Pao* newc) const override {
    // counts may dip negative while queued micro-tasks reorder; they settle
    // once the write pool drains
    auto& p = static_cast<MultisetPao&>(pao);
    if (oldc)
      for (const auto& [v, c] : static_cast<const MultisetPao*>(oldc)->counts) {
        auto it = p.counts.try_emplace(v, 0).first;
        it->second -= c;
        if (it->second == 0) p.counts.erase(it);
      }
    if (newc)
      for (const auto& [v, c] : static_cast<const MultisetPao*>(newc)->counts) {
        auto it = p.counts.try_emplace(v, 0).first;
        it->second += c;
        if (it->second == 0) p.counts.erase(it);
      }
  }
  void merge(Pao& pao, const Pao& other) const override { update(pao, nullptr, &other); }
  AggResult finalize(const Pao& pao) const override {
    auto& p = static_cast<const MultisetPao&>(pao);
    if (is_max_) {
      for (auto it = p.counts.rbegin(); it != p.counts.rend(); ++it)
        if (it->second > 0) return {.empty = false, .scalar = it->first, .items = {}};
    } else {
      for (auto it = p.counts.begin(); it != p.counts.end(); ++it)
        if (it->second > 0) return {.empty = false, .scalar = it->first, .items = {}};
    }
    return {};
  }

private:
  bool is_max_;
};

// ---- TOP-K --------------------------------------------------------------
// Exact frequency map; finalize returns the k most frequent values, ties
// ordered by value ascending.

struct FreqPao final : Pao {
  std::map<int64_t, int64_t> freq;
  PaoPtr clone() const override { return std::make_unique<FreqPao>(*this); }
};

class TopkUda final : public Uda {
public:
  explicit TopkUda(int k) : k_(k) {
    if (k < 1) throw Error("topk: k must be >= 1");
  }
  std::string name() const override { return "topk:" + std::to_string(k_); }
  AggCaps caps() const override { return {.duplicate_insensitive = false, .subtractable = false}; }
  PaoPtr initialize() const override { return std::make_unique<FreqPao>(); }
  PaoPtr lift(int64_t v) const override {
    auto p = std::make_unique<FreqPao>();
    p->freq[v] = 1;
    return p;
  }
  void update(Pao& pao, const Pao* oldc, const Pao* newc) const override {
    auto& p = static_cast<FreqPao&>(pao);
    if (oldc)
      for (const auto& [v, c] : static_cast<const FreqPao*>(oldc)->freq) {
        auto it = p.freq.try_emplace(v, 0).first;
        it->second -= c;
        if (it->second == 0) p.freq.erase(it);
      }
    if (newc)
      for (const auto& [v, c] : static_cast<const FreqPao*>(newc)->freq) {
        auto it = p.freq.try_emplace(v, 0).first;
        it->second += c;
        if (it->second == 0) p.freq.erase(it);
      }
  }
  void merge(Pao& pao, const Pao& other) const override { update(pao, nullptr, &other); }
  AggResult finalize(const Pao& pao) const override {
    auto& p = static_cast<const FreqPao&>(pao);
    std::vector<std::pair<int64_t, int64_t>> all;
    for (const auto& [v, c] : p.freq)
      if (c > 0) all.push_back({v, c});
    if (all.empty()) return {};
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    if ((int)all.size() > k_) all.resize(k_);
    return {.empty = false, .scalar = 0, .items = std::move(all)};
  }

private:
  int k_;
};

std::unordered_map<std::string, UdaPtr>& registry() {
  static std::unordered_map<std::string, UdaPtr> r;
  return r;
}
std::mutex registry_mutex;

} // namespace

void register_aggregate(const std::string& name, UdaPtr uda) {
  std::lock_guard<std::mutex> lk(registry_mutex);
  registry()[name] = std::move(uda);
}

UdaPtr make_aggregate(const std::string& spec) {
  {
    std::lock_guard<std::mutex> lk(registry_mutex);
    auto it = registry().find(spec);
    if (it != registry().end()) return it->second;
  }
  if (spec == "sum") return std::make_shared<SumUda>();
  if (spec == "count") return std::make_shared<CountUda>();
  if (spec == "min") return std::make_shared<ExtremumUda>(false);
  if (spec == "max") return std::make_shared<ExtremumUda>(true);
  if (spec.rfind("topk:", 0) == 0) return std::make_shared<TopkUda>(std::stoi(spec.substr(5)));
  throw Error("unknown aggregate " + spec);
}

std::vector<std::string> builtin_aggregates() { return {"sum", "count", "min", "max", "topk:K"}; }

} // namespace aggnet

#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "aggnet/overlay.hpp"

namespace aggnet {

// Opaque partial aggregate state; mutated only through its UDA.
struct Pao {
  virtual ~Pao() = default;
  virtual std::unique_ptr<Pao> clone() const = 0;
};

using PaoPtr = std::unique_ptr<Pao>;

struct AggResult {
  bool empty = true;
  int64_t scalar = 0;                                // sum/count/min/max
  std::vector<std::pair<int64_t, int64_t>> items;    // top-k: (value, frequency)

  bool operator==(const AggResult& o) const {
    return empty == o.empty && scalar == o.scalar && items == o.items;
  }
  std::string str() const;
};

// User-defined aggregate. `update` replaces one input contribution (insert
// when old is null, delete when the replacement is null); `merge` folds a
// second PAO in; `unmerge` is the inverse and only required when the
// subtractable capability is declared.
class Uda {
public:
  virtual ~Uda() = default;
  virtual std::string name() const = 0;
  virtual AggCaps caps() const = 0;
  virtual PaoPtr initialize() const = 0;
  virtual PaoPtr lift(int64_t value) const = 0; // single-value PAO
  virtual void update(Pao& pao, const Pao* old_contribution, const Pao* new_contribution) const = 0;
  virtual void merge(Pao& pao, const Pao& other) const = 0;
  virtual void unmerge(Pao& pao, const Pao& other) const;
  virtual AggResult finalize(const Pao& pao) const = 0;
};

using UdaPtr = std::shared_ptr<const Uda>;

// "sum", "count", "min", "max", "topk:K"
UdaPtr make_aggregate(const std::string& spec);
std::vector<std::string> builtin_aggregates();

void register_aggregate(const std::string& name, UdaPtr uda);

} // namespace aggnet

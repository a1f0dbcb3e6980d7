#include "relux/oracle.hpp"

#include <sstream>
#include <utility>

#include "relux/errors.hpp"

namespace relux {

InProcessOracle::InProcessOracle(Network net, std::optional<uint64_t> budget)
    : net_(std::move(net)), budget_(budget) {
  net_.validate();
}

double InProcessOracle::query(const Vec& x) {
  if (x.size() != net_.dim) {
    std::ostringstream os;
    os << "oracle: query dimension " << x.size() << " != " << net_.dim;
    throw InputError(os.str());
  }
  if (budget_) {
    uint64_t current = count_.load();
    for (;;) {
      if (current >= *budget_) {
        std::ostringstream os;
        os << "oracle: budget of " << *budget_ << " queries exhausted";
        throw BudgetError(os.str());
      }
      if (count_.compare_exchange_weak(current, current + 1)) break;
    }
  } else {
    count_.fetch_add(1);
  }
  return evaluate(net_, x);
}

NoisyOracle::NoisyOracle(Oracle& inner, double stddev, uint64_t seed)
    : inner_(inner), stddev_(stddev), rng_(seed) {
  if (stddev < 0.0) throw InputError("noise stddev must be >= 0");
}

double NoisyOracle::query(const Vec& x) {
  const double y = inner_.query(x);
  std::lock_guard<std::mutex> lock(mutex_);
  return y + stddev_ * rng_.normal();
}

}  // namespace relux

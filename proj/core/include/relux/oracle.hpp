#pragma once

#include <atomic>
#include <cstdint>
#include <mutex>
#include <optional>

#include "relux/network.hpp"
#include "relux/rng.hpp"

namespace relux {

struct QueryLog {
  uint64_t count = 0;
  std::optional<uint64_t> budget;
};

/// The black-box boundary.  Extraction code sees nothing but this interface:
/// it may evaluate the hidden function at chosen points and watch its own
/// query count.
class Oracle {
 public:
  virtual ~Oracle() = default;

  /// Evaluate the hidden function.  Throws InputError on a dimension
  /// mismatch and BudgetError once the budget is exhausted.
  virtual double query(const Vec& x) = 0;

  virtual int dim() const = 0;
  virtual uint64_t query_count() const = 0;
  virtual std::optional<uint64_t> budget() const { return std::nullopt; }

  QueryLog log() const { return {query_count(), budget()}; }
  std::optional<uint64_t> remaining_budget() const {
    const auto b = budget();
    if (!b) return std::nullopt;
    const uint64_t used = query_count();
    return *b > used ? *b - used : 0;
  }
};

/// Answers queries by evaluating a network held in this process.  The counter
/// is atomic and the budget check never lets the count pass the budget, even
/// under concurrent callers.
class InProcessOracle final : public Oracle {
 public:
  explicit InProcessOracle(Network net,
                           std::optional<uint64_t> budget = std::nullopt);

  double query(const Vec& x) override;
  int dim() const override { return net_.dim; }
  uint64_t query_count() const override { return count_.load(); }
  std::optional<uint64_t> budget() const override { return budget_; }

 private:
  Network net_;
  std::optional<uint64_t> budget_;
  std::atomic<uint64_t> count_{0};
};

/// Adds N(0, stddev^2) noise to an inner oracle's answers.  For robustness
/// experiments only; off by default everywhere.
class NoisyOracle final : public Oracle {
 public:
  NoisyOracle(Oracle& inner, double stddev, uint64_t seed);

  double query(const Vec& x) override;
  int dim() const override { return inner_.dim(); }
  uint64_t query_count() const override { return inner_.query_count(); }
  std::optional<uint64_t> budget() const override { return inner_.budget(); }

 private:
  Oracle& inner_;
  double stddev_;
  Rng rng_;
  std::mutex mutex_;
};

}  // namespace relux

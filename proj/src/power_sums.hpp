#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

namespace scalefit::detail {

// Fast evaluation of sum_{k=b[first]}^{b[last]-1} k^-alpha for arbitrary alpha
// and breakpoint ranges. Suffix sums of k^-a (log k)^m are tabulated lazily at
// evenly spaced nodes a; any alpha is reached from its nearest node through the
// Taylor series in (alpha - a), which converges fast because the node spacing
// keeps |alpha - a| * log k <= 1/4.
//
// One table serves every threshold pair of a fit, so each likelihood
// evaluation costs O(moments) instead of O(support width).
class PowerSumTable {
 public:
  // breakpoints: strictly increasing, >= 1. The last one is an end sentinel.
  PowerSumTable(std::vector<std::int64_t> breakpoints, double alpha_lo, double alpha_hi);

  std::size_t size() const { return breakpoints_.size(); }

  double range_sum(double alpha, std::size_t first, std::size_t last) const;

  // out[t - first] = range_sum(alpha, t, last) for t in [first, last).
  void tail_sums(double alpha, std::size_t first, std::size_t last, std::vector<double>& out) const;

 private:
  static constexpr std::size_t kMoments = 14;

  struct Node {
    // suffix[t * kMoments + m] = sum_{k >= b[t]} k^-a (log k)^m
    std::vector<double> suffix;
  };

  struct Expansion {
    const Node* node;
    std::size_t terms;
    double coeff[kMoments];
  };

  Expansion expand(double alpha) const;
  void build(std::size_t index) const;

  std::vector<std::int64_t> breakpoints_;
  double alpha_lo_;
  double step_;
  double log_max_;
  mutable std::vector<std::unique_ptr<Node>> nodes_;
  std::unique_ptr<std::once_flag[]> built_;
};

}  // namespace scalefit::detail

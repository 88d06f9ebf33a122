#include "power_sums.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace scalefit::detail {

PowerSumTable::PowerSumTable(std::vector<std::int64_t> breakpoints, double alpha_lo,
                             double alpha_hi)
    : breakpoints_(std::move(breakpoints)), alpha_lo_(alpha_lo) {
  if (breakpoints_.size() < 2 || breakpoints_.front() < 1 ||
      !std::is_sorted(breakpoints_.begin(), breakpoints_.end(), std::less_equal<>())) {
    throw std::invalid_argument("PowerSumTable needs >= 2 increasing breakpoints >= 1");
  }
  log_max_ = std::log(static_cast<double>(breakpoints_.back() - 1));
  step_ = log_max_ > 0.0 ? std::min(1.0 / 16.0, 0.5 / log_max_) : 1.0 / 16.0;
  const auto count = static_cast<std::size_t>(std::floor((alpha_hi - alpha_lo) / step_)) + 2;
  nodes_.resize(count);
  built_ = std::make_unique<std::once_flag[]>(count);
}

void PowerSumTable::build(std::size_t index) const {
  const double a = alpha_lo_ + static_cast<double>(index) * step_;
  const std::size_t q = breakpoints_.size();
  auto node = std::make_unique<Node>();
  node->suffix.assign(q * kMoments, 0.0);

  double acc[kMoments] = {};
  std::size_t t = q - 1;
  // Smallest terms first.
  for (std::int64_t k = breakpoints_.back() - 1; k >= breakpoints_.front(); --k) {
    const double lk = std::log(static_cast<double>(k));
    double p = std::exp(-a * lk);
    for (std::size_t m = 0; m < kMoments; ++m) {
      acc[m] += p;
      p *= lk;
    }
    if (k == breakpoints_[t - 1]) {
      --t;
      std::copy(acc, acc + kMoments, node->suffix.begin() + static_cast<std::ptrdiff_t>(t * kMoments));
    }
  }
  nodes_[index] = std::move(node);
}

PowerSumTable::Expansion PowerSumTable::expand(double alpha) const {
  const double pos = std::round((alpha - alpha_lo_) / step_);
  const auto index = static_cast<std::size_t>(
      std::clamp(pos, 0.0, static_cast<double>(nodes_.size() - 1)));
  std::call_once(built_[index], [&] { build(index); });

  Expansion e{};
  e.node = nodes_[index].get();
  const double delta = alpha - (alpha_lo_ + static_cast<double>(index) * step_);
  double c = 1.0;
  double bound = 1.0;
  e.coeff[0] = 1.0;
  e.terms = 1;
  for (std::size_t m = 1; m < kMoments; ++m) {
    c *= -delta / static_cast<double>(m);
    bound *= log_max_;
    if (std::abs(c) * bound < 1e-18) break;
    e.coeff[m] = c;
    e.terms = m + 1;
  }
  return e;
}

double PowerSumTable::range_sum(double alpha, std::size_t first, std::size_t last) const {
  const Expansion e = expand(alpha);
  const double* lo = e.node->suffix.data() + first * kMoments;
  const double* hi = e.node->suffix.data() + last * kMoments;
  double s = 0.0;
  for (std::size_t m = 0; m < e.terms; ++m) s += e.coeff[m] * (lo[m] - hi[m]);
  return s;
}

void PowerSumTable::tail_sums(double alpha, std::size_t first, std::size_t last,
                              std::vector<double>& out) const {
  const Expansion e = expand(alpha);
  const double* hi = e.node->suffix.data() + last * kMoments;
  out.resize(last - first);
  for (std::size_t t = first; t < last; ++t) {
    const double* lo = e.node->suffix.data() + t * kMoments;
    double s = 0.0;
    for (std::size_t m = 0; m < e.terms; ++m) s += e.coeff[m] * (lo[m] - hi[m]);
    out[t - first] = s;
  }
}

}  // namespace scalefit::detail

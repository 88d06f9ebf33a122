#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>

#include <boost/math/tools/minima.hpp>

namespace scalefit::detail {

inline constexpr int kScanPoints = 32;

// Maximizes a log-likelihood in alpha over [lo, hi]. A coarse scan brackets the
// best grid point, Brent refines inside the bracket, and the result is never
// worse than either endpoint.
template <class Objective>
double maximize_alpha(const Objective& objective, double lo, double hi, double tol) {
  std::array<double, kScanPoints> xs{};
  std::array<double, kScanPoints> fs{};
  const double step = (hi - lo) / (kScanPoints - 1);
  int best = 0;
  for (int i = 0; i < kScanPoints; ++i) {
    xs[i] = i == kScanPoints - 1 ? hi : lo + step * i;
    fs[i] = objective(xs[i]);
    if (fs[i] > fs[best]) best = i;
  }
  const double a = xs[std::max(best - 1, 0)];
  const double b = xs[std::min(best + 1, kScanPoints - 1)];

  // Brent's relative tolerance is 2^(1 - bits) * |x|; pick bits so that it is
  // at most tol / 2 anywhere in [lo, hi].
  const int bits = std::clamp(
      static_cast<int>(std::ceil(1.0 - std::log2(0.5 * tol / std::max(std::abs(hi), 1.0)))), 8,
      52);
  std::uintmax_t max_iter = 200;
  auto [x, neg_f] = boost::math::tools::brent_find_minima(
      [&](double alpha) { return -objective(alpha); }, a, b, bits, max_iter);

  double arg = x;
  double val = -neg_f;
  if (fs.front() > val) {
    arg = lo;
    val = fs.front();
  }
  if (fs.back() > val) arg = hi;
  return arg;
}

}  // namespace scalefit::detail

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <utility>

#include "scalefit/tpl.hpp"

namespace scalefit {

class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FitConfig {
  // x_min candidates are the distinct values among the floor(n * k_percent / 100)
  // smallest positive degrees, x_max candidates those among the largest.
  double k_percent = 30.0;
  double alpha_lo = 1.0 + 1e-6;
  double alpha_hi = kAlphaCap;
  double alpha_tol = 1e-6;
  int n_boot = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

struct FitResult {
  TplParams params;
  double ks_stat = 0.0;
  std::size_t n_tail = 0;
  double log_lik = 0.0;
  std::optional<double> p_value;
  std::pair<std::size_t, std::size_t> grid_sizes{0, 0};
};

// Empirical P(X >= x) of the points inside [x_min, x_max], at every integer x
// of the support.
std::map<std::int64_t, double> empirical_ccdf(const DegreeSample& sample, const TplParams& p);

// max over every integer x in [x_min, x_max] of |empirical S(x) - model S(x)|.
double ks_statistic(const DegreeSample& sample, const TplParams& p);

// Maximum-likelihood exponent for the points inside [x_min, x_max]: a
// 32-point scan over [alpha_lo, alpha_hi] brackets the optimum and Brent's
// method refines it to alpha_tol.
double mle_alpha(const DegreeSample& sample, std::int64_t x_min, std::int64_t x_max,
                 const FitConfig& cfg);

// Threshold search: every feasible (x_min, x_max) pair on the candidate grids
// gets its own MLE exponent, and the pair with the smallest KS distance wins.
// Ties prefer the larger tail, then the smaller x_min. Zero degrees are
// dropped before the grids are built.
FitResult fit_tpl(const DegreeSample& sample, const FitConfig& cfg);

// Semi-parametric bootstrap: the fraction of n_boot synthetic samples of size
// n_tail, drawn from the fitted law and refitted with the full search, whose
// KS distance is at least the observed one. Replicates whose refit fails are
// left out of both counts.
double bootstrap_pvalue(const DegreeSample& sample, const FitResult& fit, const FitConfig& cfg);

}  // namespace scalefit

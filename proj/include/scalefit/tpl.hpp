#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "scalefit/random.hpp"

namespace scalefit {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Upper cap on the exponent; degree exponents never approach it and it keeps
// the likelihood search bounded.
inline constexpr double kAlphaCap = 20.0;

// Truncated power law p(x) ~ x^-alpha on [x_min, x_max].
struct TplParams {
  double alpha = 2.0;
  double x_min = 1.0;
  double x_max = 1.0;

  friend bool operator==(const TplParams&, const TplParams&) = default;
};

// Throws DomainError unless 1 < alpha <= kAlphaCap and 1 <= x_min <= x_max < inf.
void validate(const TplParams& p);
// As validate(), and both thresholds must be integers.
void validate_discrete(const TplParams& p);

// Multiset of node degrees for one layer, kept sorted ascending.
class DegreeSample {
 public:
  DegreeSample() = default;
  explicit DegreeSample(std::vector<std::int64_t> degrees, std::string layer_name = {});

  std::span<const std::int64_t> degrees() const { return degrees_; }
  const std::string& layer_name() const { return layer_name_; }
  std::size_t size() const { return degrees_.size(); }
  bool empty() const { return degrees_.empty(); }

  // Degrees d with lo <= d <= hi.
  std::span<const std::int64_t> within(std::int64_t lo, std::int64_t hi) const;

 private:
  std::vector<std::int64_t> degrees_;
  std::string layer_name_;
};

// Continuous family. Reference math only; fitting uses the discrete family.
double pdf_continuous(double x, const TplParams& p);
double ccdf_continuous(double x, const TplParams& p);
// log S(x) in a cancellation-free form. Returns -infinity at x == x_max.
double log_ccdf_continuous(double x, const TplParams& p);

// sum_{k=lo}^{hi} k^-alpha, summed from hi down to lo with Neumaier compensation.
double zeta_trunc(double alpha, std::int64_t lo, std::int64_t hi);

double pmf_discrete(std::int64_t x, const TplParams& p);
// P(X >= x).
double ccdf_discrete(std::int64_t x, const TplParams& p);

// sum_i -alpha log d_i - n log zeta(alpha, x_min, x_max). Every degree must be
// inside the support.
double log_likelihood(const DegreeSample& sample, const TplParams& p);
double log_likelihood(std::span<const std::int64_t> degrees, const TplParams& p);

// Discrete TPL with its normalizer computed once.
class DiscreteTpl {
 public:
  explicit DiscreteTpl(const TplParams& p);

  const TplParams& params() const { return p_; }
  std::int64_t lo() const { return lo_; }
  std::int64_t hi() const { return hi_; }
  double normalizer() const { return zeta_; }

  double pmf(std::int64_t x) const;
  double ccdf(std::int64_t x) const;
  double mean() const;
  // S(x) for every x in [x_min, x_max], from a single compensated pass.
  std::vector<double> ccdf_table() const;

 private:
  void check(std::int64_t x) const;

  TplParams p_;
  std::int64_t lo_;
  std::int64_t hi_;
  double zeta_;
};

// Draws from a discrete TPL. Supports up to 2^20 points use an exact CCDF
// table with binary search; wider supports use rejection-inversion against
// the continuous envelope.
class TplSampler {
 public:
  static constexpr std::int64_t kTableLimit = std::int64_t{1} << 20;

  explicit TplSampler(const TplParams& p);

  std::int64_t operator()(Rng& rng) const;
  bool uses_table() const { return !ccdf_.empty(); }

 private:
  std::int64_t draw_table(Rng& rng) const;
  std::int64_t draw_rejection(Rng& rng) const;
  double h_integral(double x) const;
  double h_integral_inverse(double x) const;
  double h(double x) const;

  TplParams p_;
  std::int64_t lo_;
  std::int64_t hi_;
  std::vector<double> ccdf_;  // descending, ccdf_[i] = S(lo + i)
  double h_integral_lo_ = 0.0;
  double h_integral_hi_ = 0.0;
};

DegreeSample sample_discrete(const TplParams& p, std::size_t n, std::uint64_t seed);

}  // namespace scalefit

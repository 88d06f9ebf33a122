#include "scalefit/tpl.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

namespace scalefit {

namespace {

bool is_integral(double v) { return std::isfinite(v) && std::floor(v) == v; }

void check_continuous(double x, const TplParams& p) {
  validate(p);
  if (!(p.x_min < p.x_max)) {
    throw DomainError("continuous TPL needs x_min < x_max");
  }
  if (!(x >= p.x_min && x <= p.x_max)) {
    throw DomainError("x = " + std::to_string(x) + " outside [x_min, x_max]");
  }
}

}  // namespace

void validate(const TplParams& p) {
  if (!(p.alpha > 1.0 && p.alpha <= kAlphaCap)) {
    throw DomainError("alpha must lie in (1, 20], got " + std::to_string(p.alpha));
  }
  if (!std::isfinite(p.x_max)) throw DomainError("x_max must be finite");
  if (!(p.x_min >= 1.0 && p.x_min <= p.x_max)) {
    throw DomainError("thresholds must satisfy 1 <= x_min <= x_max");
  }
}

void validate_discrete(const TplParams& p) {
  validate(p);
  if (!is_integral(p.x_min) || !is_integral(p.x_max)) {
    throw DomainError("discrete TPL thresholds must be integers");
  }
}

DegreeSample::DegreeSample(std::vector<std::int64_t> degrees, std::string layer_name)
    : degrees_(std::move(degrees)), layer_name_(std::move(layer_name)) {
  for (auto d : degrees_) {
    if (d < 0) throw std::invalid_argument("negative degree in sample");
  }
  std::sort(degrees_.begin(), degrees_.end());
}

std::span<const std::int64_t> DegreeSample::within(std::int64_t lo, std::int64_t hi) const {
  auto first = std::lower_bound(degrees_.begin(), degrees_.end(), lo);
  auto last = std::upper_bound(first, degrees_.end(), hi);
  return {first, last};
}

double pdf_continuous(double x, const TplParams& p) {
  check_continuous(x, p);
  const double e = 1.0 - p.alpha;
  return (p.alpha - 1.0) / (std::pow(p.x_min, e) - std::pow(p.x_max, e)) * std::pow(x, -p.alpha);
}

double ccdf_continuous(double x, const TplParams& p) {
  check_continuous(x, p);
  const double e = 1.0 - p.alpha;
  const double top = std::pow(p.x_max, e);
  return (std::pow(x, e) - top) / (std::pow(p.x_min, e) - top);
}

double log_ccdf_continuous(double x, const TplParams& p) {
  check_continuous(x, p);
  if (x == p.x_max) return -std::numeric_limits<double>::infinity();
  // x^{1-a} - x_max^{1-a} = x^{1-a} (1 - (x / x_max)^{a-1})
  const double am1 = p.alpha - 1.0;
  const double log_xmax = std::log(p.x_max);
  const double log_x = std::log(x);
  const double log_xmin = std::log(p.x_min);
  return -am1 * (log_x - log_xmin) + std::log1p(-std::exp(am1 * (log_x - log_xmax))) -
         std::log1p(-std::exp(am1 * (log_xmin - log_xmax)));
}

double zeta_trunc(double alpha, std::int64_t lo, std::int64_t hi) {
  if (lo < 1 || lo > hi) {
    throw DomainError("zeta_trunc needs 1 <= lo <= hi");
  }
  double sum = 0.0;
  double comp = 0.0;
  for (std::int64_t k = hi; k >= lo; --k) {
    const double term = std::pow(static_cast<double>(k), -alpha);
    const double t = sum + term;
    if (std::abs(sum) >= std::abs(term)) {
      comp += (sum - t) + term;
    } else {
      comp += (term - t) + sum;
    }
    sum = t;
  }
  return sum + comp;
}

double pmf_discrete(std::int64_t x, const TplParams& p) { return DiscreteTpl(p).pmf(x); }

double ccdf_discrete(std::int64_t x, const TplParams& p) { return DiscreteTpl(p).ccdf(x); }

double log_likelihood(const DegreeSample& sample, const TplParams& p) {
  return log_likelihood(sample.degrees(), p);
}

double log_likelihood(std::span<const std::int64_t> degrees, const TplParams& p) {
  validate_discrete(p);
  const auto lo = static_cast<std::int64_t>(p.x_min);
  const auto hi = static_cast<std::int64_t>(p.x_max);
  double log_sum = 0.0;
  for (auto d : degrees) {
    if (d < lo || d > hi) {
      throw DomainError("degree " + std::to_string(d) + " outside the support");
    }
    log_sum += std::log(static_cast<double>(d));
  }
  const double n = static_cast<double>(degrees.size());
  return -p.alpha * log_sum - n * std::log(zeta_trunc(p.alpha, lo, hi));
}

DiscreteTpl::DiscreteTpl(const TplParams& p) : p_(p) {
  validate_discrete(p);
  lo_ = static_cast<std::int64_t>(p.x_min);
  hi_ = static_cast<std::int64_t>(p.x_max);
  zeta_ = zeta_trunc(p.alpha, lo_, hi_);
}

void DiscreteTpl::check(std::int64_t x) const {
  if (x < lo_ || x > hi_) {
    throw DomainError("x = " + std::to_string(x) + " outside [x_min, x_max]");
  }
}

double DiscreteTpl::pmf(std::int64_t x) const {
  check(x);
  return std::pow(static_cast<double>(x), -p_.alpha) / zeta_;
}

double DiscreteTpl::ccdf(std::int64_t x) const {
  check(x);
  return zeta_trunc(p_.alpha, x, hi_) / zeta_;
}

double DiscreteTpl::mean() const {
  double acc = 0.0;
  for (std::int64_t k = hi_; k >= lo_; --k) {
    acc += std::pow(static_cast<double>(k), 1.0 - p_.alpha);
  }
  return acc / zeta_;
}

std::vector<double> DiscreteTpl::ccdf_table() const {
  // Same summation order as zeta_trunc, so every entry equals
  // zeta_trunc(alpha, x, x_max) / zeta_trunc(alpha, x_min, x_max) bit for bit.
  std::vector<double> out(static_cast<std::size_t>(hi_ - lo_ + 1));
  double sum = 0.0;
  double comp = 0.0;
  for (std::int64_t k = hi_; k >= lo_; --k) {
    const double term = std::pow(static_cast<double>(k), -p_.alpha);
    const double t = sum + term;
    if (std::abs(sum) >= std::abs(term)) {
      comp += (sum - t) + term;
    } else {
      comp += (term - t) + sum;
    }
    sum = t;
    out[static_cast<std::size_t>(k - lo_)] = (sum + comp) / zeta_;
  }
  return out;
}

TplSampler::TplSampler(const TplParams& p) : p_(p) {
  validate_discrete(p);
  lo_ = static_cast<std::int64_t>(p.x_min);
  hi_ = static_cast<std::int64_t>(p.x_max);
  if (hi_ - lo_ < kTableLimit) {
    ccdf_ = DiscreteTpl(p).ccdf_table();
  } else {
    h_integral_lo_ = h_integral(static_cast<double>(lo_) + 0.5) - h(static_cast<double>(lo_));
    h_integral_hi_ = h_integral(static_cast<double>(hi_) + 0.5);
  }
}

std::int64_t TplSampler::operator()(Rng& rng) const {
  return uses_table() ? draw_table(rng) : draw_rejection(rng);
}

std::int64_t TplSampler::draw_table(Rng& rng) const {
  // Largest x with S(x) >= u for u in (0, 1].
  const double u = uniform01_open_low(rng);
  auto it = std::upper_bound(ccdf_.begin(), ccdf_.end(), u, std::greater<>());
  return lo_ + static_cast<std::int64_t>(it - ccdf_.begin()) - 1;
}

namespace {

// log1p(x) / x and expm1(x) / x with their series near zero.
double log1p_over_x(double x) {
  if (std::abs(x) > 1e-8) return std::log1p(x) / x;
  return 1.0 - x * (0.5 - x * (1.0 / 3.0 - 0.25 * x));
}

double expm1_over_x(double x) {
  if (std::abs(x) > 1e-8) return std::expm1(x) / x;
  return 1.0 + x * 0.5 * (1.0 + x * (1.0 / 3.0) * (1.0 + 0.25 * x));
}

}  // namespace

// H(x) = (x^{1-a} - 1) / (1 - a), an antiderivative of h(x) = x^-a.
double TplSampler::h_integral(double x) const {
  const double log_x = std::log(x);
  return expm1_over_x((1.0 - p_.alpha) * log_x) * log_x;
}

double TplSampler::h_integral_inverse(double x) const {
  double t = x * (1.0 - p_.alpha);
  t = std::max(t, -1.0);
  return std::exp(log1p_over_x(t) * x);
}

double TplSampler::h(double x) const { return std::exp(-p_.alpha * std::log(x)); }

std::int64_t TplSampler::draw_rejection(Rng& rng) const {
  // Rejection-inversion: u covers [H(lo + 1/2) - h(lo), H(hi + 1/2)], and the
  // slice of width h(k) just below H(k + 1/2) is accepted as k.
  for (;;) {
    const double u = h_integral_hi_ + uniform01(rng) * (h_integral_lo_ - h_integral_hi_);
    const double x = h_integral_inverse(u);
    auto k = static_cast<std::int64_t>(x + 0.5);
    k = std::clamp(k, lo_, hi_);
    const double kd = static_cast<double>(k);
    if (u >= h_integral(kd + 0.5) - h(kd)) return k;
  }
}

DegreeSample sample_discrete(const TplParams& p, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("sample_discrete needs n >= 1");
  const TplSampler sampler(p);
  Rng rng(seed);
  std::vector<std::int64_t> out(n);
  for (auto& v : out) v = sampler(rng);
  return DegreeSample(std::move(out));
}

}  // namespace scalefit

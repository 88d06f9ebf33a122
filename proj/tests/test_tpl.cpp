#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <mpfr.h>

#include "doctest.h"
#include "scalefit/tpl.hpp"

using namespace scalefit;

namespace {

// k^-2.5 summed at 256-bit precision; independent of the double-precision path.
double zeta_2p5_mpfr(long lo, long hi) {
  mpfr_t acc, term, root;
  mpfr_inits2(256, acc, term, root, static_cast<mpfr_ptr>(nullptr));
  mpfr_set_zero(acc, 1);
  for (long k = lo; k <= hi; ++k) {
    mpfr_sqrt_ui(root, static_cast<unsigned long>(k), MPFR_RNDN);
    mpfr_mul_ui(root, root, static_cast<unsigned long>(k), MPFR_RNDN);
    mpfr_mul_ui(root, root, static_cast<unsigned long>(k), MPFR_RNDN);
    mpfr_ui_div(term, 1, root, MPFR_RNDN);
    mpfr_add(acc, acc, term, MPFR_RNDN);
  }
  const double out = mpfr_get_d(acc, MPFR_RNDN);
  mpfr_clears(acc, term, root, static_cast<mpfr_ptr>(nullptr));
  return out;
}

}  // namespace

TEST_CASE("params validation") {
  CHECK_THROWS_AS(validate({1.0, 1, 10}), DomainError);
  CHECK_THROWS_AS(validate({20.5, 1, 10}), DomainError);
  CHECK_THROWS_AS(validate({2.0, 0.5, 10}), DomainError);
  CHECK_THROWS_AS(validate({2.0, 5, 4}), DomainError);
  CHECK_THROWS_AS(validate({2.0, 1, std::numeric_limits<double>::infinity()}), DomainError);
  CHECK_THROWS_AS(validate_discrete({2.0, 1.5, 10}), DomainError);
  CHECK_NOTHROW(validate_discrete({20.0, 3, 3}));
}

TEST_CASE("degree sample is sorted and rejects negatives") {
  DegreeSample s({5, 1, 3, 3}, "fc1");
  CHECK(std::is_sorted(s.degrees().begin(), s.degrees().end()));
  CHECK(s.layer_name() == "fc1");
  CHECK(s.within(2, 3).size() == 2);
  CHECK_THROWS(DegreeSample({1, -1}));
}

TEST_CASE("continuous pdf") {
  CHECK(pdf_continuous(1.0, {2.0, 1, 2}) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK_THROWS_AS(pdf_continuous(3.0, {2.0, 3, 3}), DomainError);
  CHECK_THROWS_AS(pdf_continuous(2.5, {2.0, 1, 2}), DomainError);
  CHECK_THROWS_AS(pdf_continuous(0.5, {2.0, 1, 2}), DomainError);

  using boost::math::quadrature::gauss_kronrod;
  for (const TplParams p : {TplParams{2.0, 1, 2}, TplParams{2.5, 1, 100}, TplParams{1.3, 5, 5000}}) {
    // Integrate in log space, where the integrand is smooth.
    auto f = [&](double u) {
      const double x = std::exp(u);
      return pdf_continuous(std::min(std::max(x, p.x_min), p.x_max), p) * x;
    };
    const double total =
        gauss_kronrod<double, 61>::integrate(f, std::log(p.x_min), std::log(p.x_max), 15, 1e-14);
    CHECK(std::abs(total - 1.0) < 1e-10);
  }
}

TEST_CASE("continuous ccdf") {
  const TplParams p{2.0, 1, 2};
  CHECK(ccdf_continuous(1.0, p) == 1.0);
  CHECK(ccdf_continuous(2.0, p) == 0.0);
  CHECK(ccdf_continuous(1.5, p) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  double prev = 2.0;
  for (double x = 1.0; x <= 2.0; x += 0.01) {
    const double s = ccdf_continuous(x, p);
    CHECK(s <= prev);
    prev = s;
  }
  CHECK_THROWS_AS(ccdf_continuous(2.1, p), DomainError);
}

TEST_CASE("log ccdf") {
  const TplParams p{2.0, 1, 2};
  CHECK(log_ccdf_continuous(1.0, p) == 0.0);
  CHECK(log_ccdf_continuous(1.5, p) == doctest::Approx(std::log(1.0 / 3.0)).epsilon(1e-14));
  CHECK(log_ccdf_continuous(2.0, p) == -std::numeric_limits<double>::infinity());

  const TplParams wide{2.5, 1, 1e9};
  for (double x : {1.0, 3.0, 10.0, 1000.0}) {
    CHECK(std::abs(log_ccdf_continuous(x, wide) - (1 - wide.alpha) * (std::log(x) - std::log(wide.x_min))) <
          1e-6);
  }

  // Strictly decreasing, and the log-log slope over [x_min, x_max / 100]
  // equals 1 - alpha when x_max / x_min >= 1e4.
  for (const TplParams q : {TplParams{2.5, 1, 1e4}, TplParams{3.0, 10, 1e6}, TplParams{2.2, 2, 1e7}}) {
    double prev = 1.0;
    for (double u = 0.0; u < 1.0; u += 0.01) {
      const double x = q.x_min * std::pow(q.x_max / q.x_min, u);
      const double v = log_ccdf_continuous(x, q);
      CHECK(v < prev);
      prev = v;
    }
    const double a = q.x_min;
    const double b = q.x_max / 100;
    const double slope =
        (log_ccdf_continuous(b, q) - log_ccdf_continuous(a, q)) / (std::log(b) - std::log(a));
    CHECK(std::abs(slope - (1 - q.alpha)) < 1e-3);
  }
}

TEST_CASE("zeta_trunc") {
  CHECK(zeta_trunc(2.5, 7, 7) == std::pow(7.0, -2.5));
  CHECK(zeta_trunc(2.0, 1, 3) == doctest::Approx(49.0 / 36.0).epsilon(1e-15));
  CHECK_THROWS_AS(zeta_trunc(2.0, 4, 3), DomainError);
  CHECK_THROWS_AS(zeta_trunc(2.0, 0, 3), DomainError);

  const double oracle = zeta_2p5_mpfr(1, 1000000);
  CHECK(std::abs(zeta_trunc(2.5, 1, 1000000) - oracle) / oracle < 1e-12);
  const double oracle_tail = zeta_2p5_mpfr(500, 200000);
  CHECK(std::abs(zeta_trunc(2.5, 500, 200000) - oracle_tail) / oracle_tail < 1e-12);
}

TEST_CASE("discrete pmf and ccdf") {
  CHECK(pmf_discrete(9, {3.0, 9, 9}) == 1.0);
  const TplParams p{2.0, 1, 3};
  CHECK(pmf_discrete(1, p) == doctest::Approx(36.0 / 49.0).epsilon(1e-15));
  CHECK(pmf_discrete(2, p) == doctest::Approx(9.0 / 49.0).epsilon(1e-15));
  CHECK(pmf_discrete(3, p) == doctest::Approx(4.0 / 49.0).epsilon(1e-15));
  CHECK_THROWS_AS(pmf_discrete(4, p), DomainError);
  CHECK_THROWS_AS(pmf_discrete(0, p), DomainError);

  CHECK(ccdf_discrete(1, p) == 1.0);
  CHECK(ccdf_discrete(2, p) == doctest::Approx(13.0 / 49.0).epsilon(1e-15));
  CHECK(ccdf_discrete(3, p) == pmf_discrete(3, p));
  CHECK_THROWS_AS(ccdf_discrete(4, p), DomainError);

  const DiscreteTpl d({2.5, 5, 5000});
  double total = 0.0;
  for (std::int64_t x = 5; x <= 5000; ++x) total += d.pmf(x);
  CHECK(std::abs(total - 1.0) < 1e-12);
}

TEST_CASE("ccdf table matches pointwise ccdf and differences give the pmf") {
  Rng rng(11);
  for (int trial = 0; trial < 6; ++trial) {
    const double alpha = 1.1 + 4.0 * uniform01(rng);
    const auto lo = static_cast<std::int64_t>(1 + uniform_index(rng, 50));
    const auto hi = lo + static_cast<std::int64_t>(uniform_index(rng, 3000));
    const DiscreteTpl d({alpha, static_cast<double>(lo), static_cast<double>(hi)});
    const auto table = d.ccdf_table();
    CHECK(table.front() == 1.0);
    CHECK(table.back() == d.pmf(hi));
    for (std::int64_t x = lo; x < hi; ++x) {
      const auto i = static_cast<std::size_t>(x - lo);
      CHECK(std::abs(table[i] - table[i + 1] - d.pmf(x)) < 1e-12);
    }
    for (std::int64_t x : {lo, (lo + hi) / 2, hi}) {
      CHECK(table[static_cast<std::size_t>(x - lo)] == d.ccdf(x));
    }
  }
}

TEST_CASE("discrete and continuous agree at large x") {
  for (double alpha : {1.5, 2.5, 3.5}) {
    const TplParams p{alpha, 1e3, 1e6};
    const DiscreteTpl d(p);
    for (double x : {1e3, 2e3, 1e4, 1e5, 5e5, 1e6}) {
      const double ratio = d.pmf(static_cast<std::int64_t>(x)) / pdf_continuous(x, p);
      CHECK(std::abs(ratio - 1.0) < 0.01);
    }
  }
}

TEST_CASE("sampling") {
  SUBCASE("degenerate support") {
    const auto s = sample_discrete({2.0, 7, 7}, 1000, 3);
    CHECK(std::all_of(s.degrees().begin(), s.degrees().end(), [](auto v) { return v == 7; }));
  }
  SUBCASE("determinism") {
    const auto a = sample_discrete({2.5, 5, 500}, 5000, 42);
    const auto b = sample_discrete({2.5, 5, 500}, 5000, 42);
    const auto c = sample_discrete({2.5, 5, 500}, 5000, 43);
    CHECK(std::equal(a.degrees().begin(), a.degrees().end(), b.degrees().begin()));
    CHECK_FALSE(std::equal(a.degrees().begin(), a.degrees().end(), c.degrees().begin()));
  }
  SUBCASE("frequencies follow the pmf") {
    const TplParams p{2.5, 5, 500};
    const std::size_t n = 1000000;
    const auto s = sample_discrete(p, n, 7);
    std::map<std::int64_t, double> counts;
    for (auto v : s.degrees()) {
      REQUIRE(v >= 5);
      REQUIRE(v <= 500);
      counts[v] += 1;
    }
    const DiscreteTpl d(p);
    double worst = 0.0;
    for (std::int64_t x = 5; x <= 500; ++x) {
      const double q = d.pmf(x);
      const double sigma = std::sqrt(static_cast<double>(n) * q * (1 - q));
      worst = std::max(worst, std::abs(counts[x] - static_cast<double>(n) * q) / sigma);
    }
    CHECK(worst < 5.0);
  }
  SUBCASE("mean converges") {
    const TplParams p{2.2, 3, 2000};
    const DiscreteTpl d(p);
    const std::size_t n = 100000;
    const auto s = sample_discrete(p, n, 99);
    double sum = 0.0;
    double sum_sq = 0.0;
    for (auto v : s.degrees()) {
      sum += static_cast<double>(v);
      sum_sq += static_cast<double>(v) * static_cast<double>(v);
    }
    const double mean = sum / static_cast<double>(n);
    const double var = sum_sq / static_cast<double>(n) - mean * mean;
    CHECK(std::abs(mean - d.mean()) < 3.0 * std::sqrt(var / static_cast<double>(n)));
  }
  SUBCASE("wide support uses rejection and still follows the pmf") {
    const TplParams p{2.5, 1, static_cast<double>(TplSampler::kTableLimit) * 4};
    const TplSampler sampler(p);
    CHECK_FALSE(sampler.uses_table());
    Rng rng(5);
    const std::size_t n = 1000000;
    std::map<std::int64_t, double> counts;
    for (std::size_t i = 0; i < n; ++i) {
      const auto v = sampler(rng);
      REQUIRE(v >= 1);
      REQUIRE(v <= static_cast<std::int64_t>(p.x_max));
      if (v <= 8) counts[v] += 1;
    }
    const DiscreteTpl d(p);
    for (std::int64_t x = 1; x <= 8; ++x) {
      const double q = d.pmf(x);
      const double sigma = std::sqrt(static_cast<double>(n) * q * (1 - q));
      CHECK(std::abs(counts[x] - static_cast<double>(n) * q) < 5.0 * sigma);
    }
  }
  CHECK_THROWS(sample_discrete({2.0, 1, 5}, 0, 1));
}

TEST_CASE("log likelihood") {
  CHECK(std::abs(log_likelihood(DegreeSample({6}), {2.7, 6, 6})) < 1e-14);
  const double expected = std::log(36.0 / 49.0) + std::log(9.0 / 49.0);
  CHECK(log_likelihood(DegreeSample({1, 2}), {2.0, 1, 3}) == doctest::Approx(expected).epsilon(1e-14));
  CHECK_THROWS_AS(log_likelihood(DegreeSample({1, 4}), {2.0, 1, 3}), DomainError);

  std::vector<std::int64_t> raw = {4, 9, 4, 17, 30, 5, 6, 4};
  const TplParams p{2.3, 4, 30};
  const double base = log_likelihood(std::span<const std::int64_t>(raw), p);
  std::mt19937 shuffler(1);
  for (int i = 0; i < 5; ++i) {
    std::shuffle(raw.begin(), raw.end(), shuffler);
    CHECK(log_likelihood(std::span<const std::int64_t>(raw), p) == doctest::Approx(base).epsilon(1e-13));
  }
}

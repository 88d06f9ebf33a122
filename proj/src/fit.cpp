#include "scalefit/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "alpha_search.hpp"
#include "power_sums.hpp"
#include "scalefit/parallel.hpp"

namespace scalefit {

void FitConfig::validate() const {
  if (!(k_percent > 0.0 && k_percent <= 50.0)) {
    throw std::invalid_argument("k_percent must lie in (0, 50]");
  }
  if (!(alpha_lo > 1.0 && alpha_lo < alpha_hi && alpha_hi <= kAlphaCap)) {
    throw std::invalid_argument("alpha bounds must lie within (1, 20]");
  }
  if (!(alpha_tol > 0.0)) throw std::invalid_argument("alpha_tol must be positive");
}

namespace {

TplParams make_params(double alpha, std::int64_t lo, std::int64_t hi) {
  return {alpha, static_cast<double>(lo), static_cast<double>(hi)};
}

std::span<const std::int64_t> restrict_checked(const DegreeSample& sample, const TplParams& p,
                                               std::size_t min_points) {
  validate_discrete(p);
  auto r = sample.within(static_cast<std::int64_t>(p.x_min), static_cast<std::int64_t>(p.x_max));
  if (r.size() < min_points) {
    throw FitError("need at least " + std::to_string(min_points) + " points inside [" +
                   std::to_string(static_cast<std::int64_t>(p.x_min)) + ", " +
                   std::to_string(static_cast<std::int64_t>(p.x_max)) + "]");
  }
  return r;
}

// Distinct positive degree values with multiplicities and prefix sums.
struct ValueTable {
  std::vector<std::int64_t> values;
  std::vector<std::size_t> count_prefix;  // size m + 1
  std::vector<double> log_prefix;         // sum of count * log(value), size m + 1

  explicit ValueTable(std::span<const std::int64_t> sorted) {
    count_prefix.push_back(0);
    log_prefix.push_back(0.0);
    for (std::size_t i = 0; i < sorted.size();) {
      const std::int64_t v = sorted[i];
      std::size_t j = i;
      while (j < sorted.size() && sorted[j] == v) ++j;
      if (v > 0) {
        const auto c = j - i;
        values.push_back(v);
        count_prefix.push_back(count_prefix.back() + c);
        log_prefix.push_back(log_prefix.back() + static_cast<double>(c) * std::log(static_cast<double>(v)));
      }
      i = j;
    }
  }

  std::size_t size() const { return values.size(); }
};

struct PairOutcome {
  double alpha = 0.0;
  double ks = std::numeric_limits<double>::infinity();
  std::size_t n_tail = 0;
  bool feasible = false;
};

// Candidate ordering: smaller D, then larger tail, then smaller x_min, then
// smaller x_max.
bool better(double d_a, std::size_t n_a, std::int64_t lo_a, std::int64_t hi_a, double d_b,
            std::size_t n_b, std::int64_t lo_b, std::int64_t hi_b) {
  if (d_a != d_b) return d_a < d_b;
  if (n_a != n_b) return n_a > n_b;
  if (lo_a != lo_b) return lo_a < lo_b;
  return hi_a < hi_b;
}

}  // namespace

std::map<std::int64_t, double> empirical_ccdf(const DegreeSample& sample, const TplParams& p) {
  const auto r = restrict_checked(sample, p, 1);
  const auto lo = static_cast<std::int64_t>(p.x_min);
  const auto hi = static_cast<std::int64_t>(p.x_max);
  const double n = static_cast<double>(r.size());
  std::map<std::int64_t, double> out;
  std::size_t below = 0;
  for (std::int64_t x = lo; x <= hi; ++x) {
    while (below < r.size() && r[below] < x) ++below;
    out.emplace_hint(out.end(), x, static_cast<double>(r.size() - below) / n);
  }
  return out;
}

double ks_statistic(const DegreeSample& sample, const TplParams& p) {
  const auto r = restrict_checked(sample, p, 2);
  const DiscreteTpl model(p);
  const auto model_ccdf = model.ccdf_table();
  const double n = static_cast<double>(r.size());
  double d = 0.0;
  std::size_t below = 0;
  for (std::int64_t x = model.lo(); x <= model.hi(); ++x) {
    while (below < r.size() && r[below] < x) ++below;
    const double emp = static_cast<double>(r.size() - below) / n;
    d = std::max(d, std::abs(emp - model_ccdf[static_cast<std::size_t>(x - model.lo())]));
  }
  return d;
}

double mle_alpha(const DegreeSample& sample, std::int64_t x_min, std::int64_t x_max,
                 const FitConfig& cfg) {
  cfg.validate();
  if (x_min < 1 || x_min > x_max) throw DomainError("mle_alpha needs 1 <= x_min <= x_max");
  if (x_min == x_max) throw FitError("alpha is unidentifiable on a single-point support");
  const auto r = restrict_checked(sample, make_params(2.0, x_min, x_max), 2);
  double log_sum = 0.0;
  for (auto d : r) log_sum += std::log(static_cast<double>(d));
  const double n = static_cast<double>(r.size());
  auto objective = [&](double alpha) {
    return -alpha * log_sum - n * std::log(zeta_trunc(alpha, x_min, x_max));
  };
  return detail::maximize_alpha(objective, cfg.alpha_lo, cfg.alpha_hi, cfg.alpha_tol);
}

FitResult fit_tpl(const DegreeSample& sample, const FitConfig& cfg) {
  cfg.validate();
  const auto all = sample.degrees();
  const auto positive = all.subspan(static_cast<std::size_t>(
      std::upper_bound(all.begin(), all.end(), std::int64_t{0}) - all.begin()));
  const ValueTable vt(positive);
  const std::size_t m = vt.size();
  const auto grid = static_cast<std::size_t>(
      std::floor(static_cast<double>(positive.size()) * cfg.k_percent / 100.0));
  if (m < 2 || grid == 0) {
    throw FitError("no feasible (x_min, x_max) pair: need two distinct positive degrees");
  }
  // x_min candidates: distinct values among the `grid` smallest degrees;
  // x_max candidates: distinct values among the `grid` largest.
  const auto value_index = [&](std::int64_t v) {
    return static_cast<std::size_t>(
        std::lower_bound(vt.values.begin(), vt.values.end(), v) - vt.values.begin());
  };
  const std::size_t n_lo = value_index(positive[grid - 1]) + 1;
  const std::size_t hi_begin = value_index(positive[positive.size() - grid]);
  const std::size_t n_hi = m - hi_begin;

  // Breakpoints are every value v and v + 1: the empirical CCDF is constant on
  // (v_a, v_{a+1}] while the model CCDF decreases, so |S - P| peaks at one of
  // these points.
  std::vector<std::int64_t> bp;
  bp.reserve(2 * m);
  for (auto v : vt.values) {
    bp.push_back(v);
    bp.push_back(v + 1);
  }
  std::sort(bp.begin(), bp.end());
  bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
  std::vector<std::size_t> at_v(m);
  std::vector<std::size_t> at_v1(m);
  for (std::size_t a = 0; a < m; ++a) {
    at_v[a] = static_cast<std::size_t>(std::lower_bound(bp.begin(), bp.end(), vt.values[a]) - bp.begin());
    at_v1[a] = static_cast<std::size_t>(
        std::lower_bound(bp.begin(), bp.end(), vt.values[a] + 1) - bp.begin());
  }
  const detail::PowerSumTable table(std::move(bp), cfg.alpha_lo, cfg.alpha_hi);

  std::vector<PairOutcome> outcomes(n_lo * n_hi);
  parallel_for(n_lo, [&](std::size_t i) {
    std::vector<double> tails;
    for (std::size_t jj = 0; jj < n_hi; ++jj) {
      const std::size_t j = hi_begin + jj;
      if (j <= i) continue;
      PairOutcome& out = outcomes[i * n_hi + jj];
      const std::size_t n_tail = vt.count_prefix[j + 1] - vt.count_prefix[i];
      const double n = static_cast<double>(n_tail);
      const double log_sum = vt.log_prefix[j + 1] - vt.log_prefix[i];
      const std::size_t first = at_v[i];
      const std::size_t last = at_v1[j];
      auto objective = [&](double alpha) {
        return -alpha * log_sum - n * std::log(table.range_sum(alpha, first, last));
      };
      const double alpha = detail::maximize_alpha(objective, cfg.alpha_lo, cfg.alpha_hi, cfg.alpha_tol);

      table.tail_sums(alpha, first, last, tails);
      const double z = tails[0];
      double d = 0.0;
      for (std::size_t a = i; a < j; ++a) {
        const double emp = static_cast<double>(vt.count_prefix[j + 1] - vt.count_prefix[a + 1]) / n;
        const double s_after = tails[at_v1[a] - first] / z;
        const double s_next = tails[at_v[a + 1] - first] / z;
        d = std::max({d, std::abs(emp - s_after), std::abs(emp - s_next)});
      }
      out = {alpha, d, n_tail, true};
    }
  });

  double best_fast = std::numeric_limits<double>::infinity();
  for (const auto& o : outcomes) {
    if (o.feasible) best_fast = std::min(best_fast, o.ks);
  }
  if (!std::isfinite(best_fast)) throw FitError("no feasible (x_min, x_max) pair");

  // Settle near-ties with the exact statistic so the reported value is
  // ks_statistic() of the returned parameters.
  constexpr double kNearTie = 1e-9;
  FitResult best;
  bool have = false;
  for (std::size_t i = 0; i < n_lo; ++i) {
    for (std::size_t jj = 0; jj < n_hi; ++jj) {
      const PairOutcome& o = outcomes[i * n_hi + jj];
      if (!o.feasible || o.ks > best_fast + kNearTie) continue;
      const auto lo = vt.values[i];
      const auto hi = vt.values[hi_begin + jj];
      const TplParams params = make_params(o.alpha, lo, hi);
      const double d = ks_statistic(sample, params);
      if (!have || better(d, o.n_tail, lo, hi, best.ks_stat, best.n_tail,
                          static_cast<std::int64_t>(best.params.x_min),
                          static_cast<std::int64_t>(best.params.x_max))) {
        best.params = params;
        best.ks_stat = d;
        best.n_tail = o.n_tail;
        have = true;
      }
    }
  }
  best.log_lik = log_likelihood(
      sample.within(static_cast<std::int64_t>(best.params.x_min), static_cast<std::int64_t>(best.params.x_max)),
      best.params);
  best.grid_sizes = {n_lo, n_hi};
  return best;
}

double bootstrap_pvalue(const DegreeSample& sample, const FitResult& fit, const FitConfig& cfg) {
  cfg.validate();
  if (cfg.n_boot < 1) throw std::invalid_argument("n_boot must be at least 1");
  validate_discrete(fit.params);
  const auto tail = sample.within(static_cast<std::int64_t>(fit.params.x_min),
                                  static_cast<std::int64_t>(fit.params.x_max));
  if (fit.n_tail < 2 || tail.size() != fit.n_tail) {
    throw std::invalid_argument("fit result does not belong to this sample");
  }
  const TplSampler sampler(fit.params);
  const auto reps = static_cast<std::size_t>(cfg.n_boot);
  // 1 = synthetic D >= observed, 0 = below, -1 = refit failed.
  std::vector<int> verdict(reps, -1);
  parallel_for(reps, [&](std::size_t b) {
    Rng rng(derive_seed(cfg.seed, b));
    std::vector<std::int64_t> draws(fit.n_tail);
    for (auto& v : draws) v = sampler(rng);
    try {
      const FitResult refit = fit_tpl(DegreeSample(std::move(draws)), cfg);
      verdict[b] = refit.ks_stat >= fit.ks_stat ? 1 : 0;
    } catch (const FitError&) {
      verdict[b] = -1;
    }
  });
  const auto valid = std::count_if(verdict.begin(), verdict.end(), [](int v) { return v >= 0; });
  if (valid == 0) throw FitError("every bootstrap refit failed");
  const auto hits = std::count(verdict.begin(), verdict.end(), 1);
  return static_cast<double>(hits) / static_cast<double>(valid);
}

}  // namespace scalefit

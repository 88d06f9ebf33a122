#include "scalefit/prefatt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "scalefit/format.hpp"
#include "scalefit/parallel.hpp"

namespace scalefit {

double delta_general(double d1, double d2, double n, double a, double pair_sum) {
  if (!(pair_sum > 0.0)) throw AttachmentError("delta_general: pair sum must be positive (empty network)");
  return 2.0 * n * a * d1 * d2 / pair_sum;
}

double pair_sum_general(std::span<const std::int64_t> degrees) {
  double sum = 0.0;
  double sq = 0.0;
  for (auto d : degrees) {
    sum += static_cast<double>(d);
    sq += static_cast<double>(d) * static_cast<double>(d);
  }
  return sum * sum - sq;
}

double delta_layered(double d1, double d2, double n_l, double a_l, double cross_sum) {
  if (!(cross_sum > 0.0)) throw AttachmentError("delta_layered: cross sum must be positive");
  return n_l * a_l * d1 * d2 / cross_sum;
}

double cross_sum_layered(std::span<const std::int64_t> lower, std::span<const std::int64_t> upper) {
  const auto sum = [](std::span<const std::int64_t> v) {
    return static_cast<double>(std::accumulate(v.begin(), v.end(), std::int64_t{0}));
  };
  return sum(lower) * sum(upper);
}

double growth_factor(double t, double n_l, double a_l, double n_lm1, double a_lm1, double deg_sum0) {
  if (!(deg_sum0 > 0.0)) throw AttachmentError("growth_factor: initial degree sum must be positive");
  if (!(t >= 0.0)) throw AttachmentError("growth_factor: t must be non-negative");
  return 1.0 + (n_l * a_l + n_lm1 * a_lm1) * t / deg_sum0;
}

const char* to_string(EdgeCountMode mode) {
  return mode == EdgeCountMode::expected_value ? "expected-value" : "poisson";
}

EdgeCountMode parse_edge_count_mode(const std::string& s) {
  if (s == "expected-value") return EdgeCountMode::expected_value;
  if (s == "poisson") return EdgeCountMode::poisson;
  throw AttachmentError("unknown edge count mode '" + s + "' (expected-value or poisson)");
}

void AttachmentConfig::validate(std::size_t n_pairs) const {
  if (rates.size() != n_pairs) {
    throw AttachmentError("need " + std::to_string(n_pairs) + " rates, got " + std::to_string(rates.size()));
  }
  for (double a : rates) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw AttachmentError("rates must be finite and non-negative");
  }
  if (timesteps < 1) throw AttachmentError("timesteps must be at least 1");
}

AttachmentState::AttachmentState(std::vector<std::int64_t> layer_sizes, std::vector<std::string> names)
    : sizes_(std::move(layer_sizes)), names_(std::move(names)) {
  if (sizes_.size() < 2) throw AttachmentError("need at least two layers");
  for (auto n : sizes_) {
    if (n <= 0) throw AttachmentError("layer sizes must be positive");
  }
  if (names_.empty()) {
    for (std::size_t l = 0; l < sizes_.size(); ++l) names_.push_back("L" + std::to_string(l));
  }
  if (names_.size() != sizes_.size()) throw AttachmentError("one name per layer");
  for (auto n : sizes_) degrees_.emplace_back(static_cast<std::size_t>(n), 0);
  pairs_.resize(sizes_.size() - 1);
}

AttachmentState AttachmentState::from_topology(const NetworkTopology& net) {
  const DegreeTable table = degree_table(net);
  std::vector<std::int64_t> sizes;
  std::vector<std::string> names;
  for (const auto& l : table.layers) {
    sizes.push_back(static_cast<std::int64_t>(l.size()));
    names.push_back(l.name);
  }
  AttachmentState s(std::move(sizes), std::move(names));
  for (const auto& p : edge_multiplicities(net)) {
    for (const auto& e : p.edges) s.add_edges(p.lower, e.lo, e.hi, e.count);
  }
  return s;
}

AttachmentState AttachmentState::from_graph(const SynthGraph& g) {
  AttachmentState s(g.sizes, g.names);
  for (std::size_t p = 0; p < g.edges.size(); ++p) {
    s.pairs_.at(p).reserve(g.edges[p].size());
    for (const auto& [a, b] : g.edges[p]) s.add_edges(p, a, b);
  }
  return s;
}

std::int64_t AttachmentState::degree_sum(std::size_t l) const {
  const auto& d = degrees_.at(l);
  return std::accumulate(d.begin(), d.end(), std::int64_t{0});
}

std::uint64_t AttachmentState::key(std::size_t pair, std::int64_t lo, std::int64_t hi) const {
  return static_cast<std::uint64_t>(lo) * static_cast<std::uint64_t>(sizes_[pair + 1]) + static_cast<std::uint64_t>(hi);
}

std::int64_t AttachmentState::multiplicity(std::size_t pair, std::int64_t lo, std::int64_t hi) const {
  const auto& m = pairs_.at(pair);
  const auto it = m.find(key(pair, lo, hi));
  return it == m.end() ? 0 : it->second;
}

void AttachmentState::add_edges(std::size_t pair, std::int64_t lo, std::int64_t hi, std::int64_t count) {
  if (pair >= pairs_.size() || lo < 0 || lo >= sizes_[pair] || hi < 0 || hi >= sizes_[pair + 1]) {
    throw AttachmentError("edge endpoint out of range");
  }
  if (count < 0) throw AttachmentError("edge counts are non-negative");
  if (count == 0) return;
  pairs_[pair][key(pair, lo, hi)] += count;
  degrees_[pair][static_cast<std::size_t>(lo)] += count;
  degrees_[pair + 1][static_cast<std::size_t>(hi)] += count;
}

namespace {

constexpr int kRetryCap = 100;

// Draws node indices with probability proportional to a frozen degree vector.
class DegreeSampler {
 public:
  explicit DegreeSampler(const std::vector<std::int64_t>& degrees) : cumulative_(degrees.size()) {
    std::partial_sum(degrees.begin(), degrees.end(), cumulative_.begin());
  }
  std::int64_t total() const { return cumulative_.empty() ? 0 : cumulative_.back(); }
  std::int64_t operator()(Rng& rng) const {
    const auto u = static_cast<std::int64_t>(uniform_index(rng, static_cast<std::uint64_t>(total())));
    return std::upper_bound(cumulative_.begin(), cumulative_.end(), u) - cumulative_.begin();
  }

 private:
  std::vector<std::int64_t> cumulative_;
};

std::int64_t draw_edge_count(double expected, EdgeCountMode mode, Rng& rng) {
  if (expected <= 0.0) return 0;
  if (mode == EdgeCountMode::poisson) return std::poisson_distribution<std::int64_t>(expected)(rng);
  const double whole = std::floor(expected);
  return static_cast<std::int64_t>(whole) + (uniform01(rng) < expected - whole ? 1 : 0);
}

struct PairStep {
  std::vector<std::pair<std::int64_t, std::int64_t>> added;
  std::int64_t drawn = 0;
  std::int64_t dropped = 0;
};

}  // namespace

Trajectory simulate(const AttachmentState& initial, const AttachmentConfig& cfg, bool keep_states) {
  cfg.validate(initial.n_pairs());
  Trajectory traj;
  traj.drawn.assign(initial.n_pairs(), 0);
  traj.dropped.assign(initial.n_pairs(), 0);

  std::vector<bool> participates(initial.n_layers(), false);
  for (std::size_t p = 0; p < initial.n_pairs(); ++p) {
    if (cfg.rates[p] > 0.0) participates[p] = participates[p + 1] = true;
  }
  for (std::size_t l = 0; l < initial.n_layers(); ++l) {
    if (!participates[l]) continue;
    const auto& d = initial.degrees(l);
    const auto zeros = std::count(d.begin(), d.end(), std::int64_t{0});
    if (zeros == static_cast<std::int64_t>(d.size())) {
      throw AttachmentError("layer '" + initial.name(l) + "' has no edges, so nothing can attach to it");
    }
    if (zeros > 0) {
      traj.warnings.push_back("layer '" + initial.name(l) + "': " + std::to_string(zeros) +
                              " nodes have degree 0 and can never gain edges");
    }
  }

  AttachmentState state = initial;
  traj.degrees.reserve(static_cast<std::size_t>(cfg.timesteps) + 1);
  const auto snapshot = [&] {
    std::vector<std::vector<std::int64_t>> d;
    for (std::size_t l = 0; l < state.n_layers(); ++l) d.push_back(state.degrees(l));
    traj.degrees.push_back(std::move(d));
  };
  snapshot();
  traj.states.push_back(state);
  std::vector<bool> saturated_warned(state.n_pairs(), false);

  for (std::int64_t t = 0; t < cfg.timesteps; ++t) {
    std::vector<PairStep> steps(state.n_pairs());
    parallel_for(state.n_pairs(), [&](std::size_t p) {
      if (cfg.rates[p] <= 0.0) return;
      Rng rng(derive_seed(derive_seed(cfg.seed, static_cast<std::uint64_t>(t)), p));
      PairStep& out = steps[p];
      const DegreeSampler lower(state.degrees(p));
      const DegreeSampler upper(state.degrees(p + 1));
      out.drawn = draw_edge_count(static_cast<double>(state.layer_size(p)) * cfg.rates[p], cfg.mode, rng);
      // Edges placed earlier in this step count as occupied.
      std::unordered_map<std::uint64_t, std::int64_t> fresh;
      for (std::int64_t e = 0; e < out.drawn; ++e) {
        bool placed = false;
        for (int attempt = 0; attempt <= kRetryCap; ++attempt) {
          const auto i = lower(rng);
          const auto j = upper(rng);
          const auto k = state.key(p, i, j);
          if (!cfg.allow_multi_edges && (state.multiplicity(p, i, j) > 0 || fresh.count(k))) continue;
          fresh[k] += 1;
          out.added.emplace_back(i, j);
          placed = true;
          break;
        }
        if (!placed) ++out.dropped;
      }
    });
    for (std::size_t p = 0; p < state.n_pairs(); ++p) {
      for (const auto& [i, j] : steps[p].added) state.add_edges(p, i, j);
      traj.drawn[p] += steps[p].drawn;
      traj.dropped[p] += steps[p].dropped;
      if (steps[p].drawn > 0 && steps[p].dropped == steps[p].drawn && !saturated_warned[p]) {
        saturated_warned[p] = true;
        traj.warnings.push_back("layers '" + state.name(p) + "' and '" + state.name(p + 1) + "': every edge at t=" +
                                std::to_string(t + 1) + " hit the retry cap (pair saturated)");
      }
    }
    state.set_time(t + 1);
    snapshot();
    if (keep_states) traj.states.push_back(state);
  }
  if (!keep_states) traj.states.push_back(std::move(state));
  return traj;
}

double growth_factor(const AttachmentState& initial, const AttachmentConfig& cfg, std::size_t l, double t) {
  cfg.validate(initial.n_pairs());
  const double up = l < initial.n_pairs() ? static_cast<double>(initial.layer_size(l)) * cfg.rates[l] : 0.0;
  const double down = l > 0 ? static_cast<double>(initial.layer_size(l - 1)) * cfg.rates[l - 1] : 0.0;
  return growth_factor(t, 1.0, up, 1.0, down, static_cast<double>(initial.degree_sum(l)));
}

namespace {

void check_consecutive(const AttachmentState& before, const AttachmentState& after, std::size_t l, bool pair) {
  if (after.time() != before.time() + 1) throw AttachmentError("states must be one step apart");
  if (before.n_layers() != after.n_layers()) throw AttachmentError("states have different layer counts");
  for (std::size_t k = 0; k < before.n_layers(); ++k) {
    if (before.layer_size(k) != after.layer_size(k)) throw AttachmentError("states have different layer sizes");
  }
  if (pair ? l >= before.n_pairs() : l >= before.n_layers()) throw AttachmentError("layer index out of range");
}

std::map<std::int64_t, std::int64_t> degree_counts(const std::vector<std::int64_t>& degrees) {
  std::map<std::int64_t, std::int64_t> c;
  for (auto d : degrees) ++c[d];
  return c;
}

}  // namespace

std::map<std::pair<std::int64_t, std::int64_t>, double> estimate_delta(const AttachmentState& before,
                                                                       const AttachmentState& after, std::size_t l) {
  check_consecutive(before, after, l, true);
  const auto& d_lo = before.degrees(l);
  const auto& d_hi = before.degrees(l + 1);
  const auto n_hi = static_cast<std::uint64_t>(before.layer_size(l + 1));
  for (const auto& [k, m] : before.edges(l)) {
    const auto it = after.edges(l).find(k);
    if (it == after.edges(l).end() || it->second < m) throw AttachmentError("edge multiplicity decreased");
  }
  std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t> fresh;
  for (const auto& [k, m] : after.edges(l)) {
    const auto gained = m - before.multiplicity(l, static_cast<std::int64_t>(k / n_hi), static_cast<std::int64_t>(k % n_hi));
    if (gained > 0) fresh[{d_lo[k / n_hi], d_hi[k % n_hi]}] += gained;
  }
  const auto c_lo = degree_counts(d_lo);
  const auto c_hi = degree_counts(d_hi);
  std::map<std::pair<std::int64_t, std::int64_t>, double> out;
  for (const auto& [a, na] : c_lo) {
    for (const auto& [b, nb] : c_hi) {
      const auto it = fresh.find({a, b});
      const double added = it == fresh.end() ? 0.0 : static_cast<double>(it->second);
      out.emplace_hint(out.end(), std::pair{a, b}, added / (static_cast<double>(na) * static_cast<double>(nb)));
    }
  }
  return out;
}

std::map<std::int64_t, double> estimate_omega(const AttachmentState& before, const AttachmentState& after,
                                              std::size_t l) {
  check_consecutive(before, after, l, false);
  const auto& d0 = before.degrees(l);
  const auto& d1 = after.degrees(l);
  std::map<std::int64_t, std::pair<std::int64_t, std::int64_t>> acc;  // degree -> (gained, nodes)
  for (std::size_t i = 0; i < d0.size(); ++i) {
    if (d1[i] < d0[i]) throw AttachmentError("node degree decreased");
    auto& [gained, nodes] = acc[d0[i]];
    gained += d1[i] - d0[i];
    ++nodes;
  }
  std::map<std::int64_t, double> out;
  for (const auto& [d, g] : acc) {
    out.emplace_hint(out.end(), d, static_cast<double>(g.first) / static_cast<double>(g.second));
  }
  return out;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const AttachmentState& layout) {
  out << "t,layer,node,degree\n";
  for (std::size_t t = 0; t < traj.degrees.size(); ++t) {
    for (std::size_t l = 0; l < traj.degrees[t].size(); ++l) {
      const auto& d = traj.degrees[t][l];
      for (std::size_t i = 0; i < d.size(); ++i) {
        out << t << ',' << layout.name(l) << ',' << i << ',' << d[i] << '\n';
      }
    }
  }
}

void write_delta_csv(std::ostream& out, const std::map<std::pair<std::int64_t, std::int64_t>, double>& delta) {
  out << "d1,d2,delta_hat\n";
  for (const auto& [k, v] : delta) out << k.first << ',' << k.second << ',' << format_double(v) << '\n';
}

void write_omega_csv(std::ostream& out, const std::map<std::int64_t, double>& omega) {
  out << "d,omega_hat\n";
  for (const auto& [d, v] : omega) out << d << ',' << format_double(v) << '\n';
}

}  // namespace scalefit

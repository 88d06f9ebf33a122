#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "scalefit/topology.hpp"

namespace scalefit {

class AttachmentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 2 N a d1 d2 / pair_sum, with pair_sum = sum over ordered pairs s != m of d_s d_m.
double delta_general(double d1, double d2, double n, double a, double pair_sum);
double pair_sum_general(std::span<const std::int64_t> degrees);

// N_l a_l d1 d2 / cross_sum, with cross_sum = sum_s sum_m d_s d_m across the two layers.
double delta_layered(double d1, double d2, double n_l, double a_l, double cross_sum);
double cross_sum_layered(std::span<const std::int64_t> lower, std::span<const std::int64_t> upper);

// c(t) = 1 + (N_l a_l + N_{l-1} a_{l-1}) t / sum_s d_s(0).
double growth_factor(double t, double n_l, double a_l, double n_lm1, double a_lm1, double deg_sum0);

enum class EdgeCountMode { expected_value, poisson };

const char* to_string(EdgeCountMode mode);
EdgeCountMode parse_edge_count_mode(const std::string& s);

struct AttachmentConfig {
  std::vector<double> rates;  // one per adjacent layer pair
  std::int64_t timesteps = 1;
  EdgeCountMode mode = EdgeCountMode::expected_value;
  bool allow_multi_edges = false;
  std::uint64_t seed = 0;

  void validate(std::size_t n_pairs) const;
};

// Layered multigraph: edge multiplicities between consecutive layers plus the
// node degrees they imply.
class AttachmentState {
 public:
  explicit AttachmentState(std::vector<std::int64_t> layer_sizes, std::vector<std::string> names = {});
  // Edge counts between consecutive degree-table layers of a network.
  // Softmax weights are not part of the state.
  static AttachmentState from_topology(const NetworkTopology& net);
  static AttachmentState from_graph(const SynthGraph& g);

  std::size_t n_layers() const { return sizes_.size(); }
  std::size_t n_pairs() const { return pairs_.size(); }
  std::int64_t layer_size(std::size_t l) const { return sizes_.at(l); }
  const std::string& name(std::size_t l) const { return names_.at(l); }
  const std::vector<std::int64_t>& degrees(std::size_t l) const { return degrees_.at(l); }
  std::int64_t degree_sum(std::size_t l) const;

  std::int64_t time() const { return time_; }
  void set_time(std::int64_t t) { time_ = t; }

  std::int64_t multiplicity(std::size_t pair, std::int64_t lo, std::int64_t hi) const;
  void add_edges(std::size_t pair, std::int64_t lo, std::int64_t hi, std::int64_t count = 1);
  // Nonzero multiplicities of a pair keyed by lo * N_{l+1} + hi.
  const std::unordered_map<std::uint64_t, std::int64_t>& edges(std::size_t pair) const { return pairs_.at(pair); }
  std::uint64_t key(std::size_t pair, std::int64_t lo, std::int64_t hi) const;

  friend bool operator==(const AttachmentState&, const AttachmentState&) = default;

 private:
  std::vector<std::int64_t> sizes_;
  std::vector<std::string> names_;
  std::vector<std::vector<std::int64_t>> degrees_;
  std::vector<std::unordered_map<std::uint64_t, std::int64_t>> pairs_;
  std::int64_t time_ = 0;
};

struct Trajectory {
  std::vector<std::vector<std::vector<std::int64_t>>> degrees;  // [t][layer][node], t = 0..T
  // Every state when requested, otherwise the initial and final ones.
  std::vector<AttachmentState> states;
  std::vector<std::int64_t> drawn;    // per pair, summed over steps
  std::vector<std::int64_t> dropped;  // per pair: retry cap exhausted
  std::vector<std::string> warnings;

  const AttachmentState& final_state() const { return states.back(); }
};

// Each step draws N_l a_l new edges per pair (stochastically rounded, or
// Poisson) and places each one on (i, j) with probability proportional to the
// degrees at the start of the step. Without multi-edges an occupied pair is
// redrawn up to 100 times, then the edge is dropped and counted.
Trajectory simulate(const AttachmentState& initial, const AttachmentConfig& cfg, bool keep_states = false);

// Expected c^l(t) for this initial state and config.
double growth_factor(const AttachmentState& initial, const AttachmentConfig& cfg, std::size_t l, double t);

// New edges between before-degree classes (d1 in layer l, d2 in layer l+1)
// divided by the number of node pairs in those classes, connected or not.
std::map<std::pair<std::int64_t, std::int64_t>, double> estimate_delta(const AttachmentState& before,
                                                                       const AttachmentState& after, std::size_t l);
// Edges gained, on both sides, by layer-l nodes of before-degree d, divided by
// the number of such nodes.
std::map<std::int64_t, double> estimate_omega(const AttachmentState& before, const AttachmentState& after,
                                              std::size_t l);

void write_trajectory_csv(std::ostream& out, const Trajectory& traj, const AttachmentState& layout);
void write_delta_csv(std::ostream& out, const std::map<std::pair<std::int64_t, std::int64_t>, double>& delta);
void write_omega_csv(std::ostream& out, const std::map<std::int64_t, double>& omega);

}  // namespace scalefit

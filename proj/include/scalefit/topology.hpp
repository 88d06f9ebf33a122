#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "scalefit/tpl.hpp"

namespace scalefit {

// Malformed network, mask or container. The message names the offending layer.
class TopologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LayerKind { input, dense, conv, pool, softmax };

const char* to_string(LayerKind kind);
LayerKind parse_layer_kind(const std::string& s);

struct Dims2 {
  std::int64_t h = 0;
  std::int64_t w = 0;
  friend bool operator==(const Dims2&, const Dims2&) = default;
};

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::dense;
  std::int64_t units = 0;     // dense, softmax, flat input
  std::int64_t channels = 0;  // image input, conv
  Dims2 spatial;              // image input
  Dims2 filter;               // conv
  Dims2 stride{1, 1};
  Dims2 padding{0, 0};
  Dims2 pool_size;            // pool
  bool pruned = false;

  static LayerSpec input_flat(std::string name, std::int64_t units);
  static LayerSpec input_image(std::string name, std::int64_t channels, Dims2 spatial);
  static LayerSpec dense(std::string name, std::int64_t units, bool pruned = false);
  static LayerSpec conv(std::string name, std::int64_t channels, Dims2 filter, bool pruned = false,
                        Dims2 stride = {1, 1}, Dims2 padding = {0, 0});
  static LayerSpec pool(std::string name, Dims2 size);
  static LayerSpec softmax(std::string name, std::int64_t units);
};

bool has_weights(LayerKind kind);
// Layers that own nodes in the degree table.
bool has_degrees(LayerKind kind);

// Retained-connection bits. Shape is [out, in] for dense/softmax weights and
// [out_ch, in_ch, kh, kw] for conv weights, row-major.
struct SparseMask {
  std::string layer_name;
  std::vector<std::int64_t> shape;
  std::vector<std::uint8_t> bits;

  static SparseMask all_retained(std::string layer_name, std::vector<std::int64_t> shape);
  std::size_t size() const { return bits.size(); }
  std::int64_t retained() const;
};

// What a layer produces: a flat vector or a stack of feature maps.
struct LayerOutput {
  bool spatial = false;
  std::int64_t channels = 0;  // for flat outputs, the unit count
  Dims2 hw{1, 1};

  std::int64_t flat_size() const { return channels * hw.h * hw.w; }
};

class NetworkTopology {
 public:
  // Pruned layers need a mask. Unpruned weighted layers without one are fully
  // connected. Throws TopologyError.
  NetworkTopology(std::vector<LayerSpec> layers, std::vector<SparseMask> masks);

  std::span<const LayerSpec> layers() const { return layers_; }
  const LayerSpec& layer(std::size_t i) const { return layers_[i]; }
  std::size_t size() const { return layers_.size(); }
  std::optional<std::size_t> find(const std::string& name) const;

  const LayerOutput& output(std::size_t i) const { return outputs_[i]; }
  // Mask of a weighted layer; throws for input and pool layers.
  const SparseMask& mask(std::size_t i) const;
  // Expected mask shape of a weighted layer.
  const std::vector<std::int64_t>& mask_shape(std::size_t i) const { return shapes_[i]; }
  // Spatial uses of each weight: the output map size for conv, 1 otherwise.
  std::int64_t uses(std::size_t i) const;
  // Node count of a layer that appears in the degree table.
  std::int64_t node_count(std::size_t i) const;

 private:
  std::vector<LayerSpec> layers_;
  std::vector<LayerOutput> outputs_;
  std::vector<std::vector<std::int64_t>> shapes_;
  std::vector<std::optional<SparseMask>> masks_;
};

struct LayerDegrees {
  std::string name;
  std::size_t layer_index = 0;  // position in the network
  std::vector<std::int64_t> up;
  std::vector<std::int64_t> down;

  std::size_t size() const { return up.size(); }
  std::int64_t total(std::size_t node) const { return up[node] + down[node]; }
  std::vector<std::int64_t> totals() const;
};

// One entry per input, dense and conv layer, in network order. Softmax weights
// count toward the layer below; softmax nodes get no entry.
struct DegreeTable {
  std::vector<LayerDegrees> layers;

  const LayerDegrees* find(const std::string& name) const;
};

DegreeTable degree_table(const NetworkTopology& net);

// Empty when every weighted layer satisfies
// sum(up below) == retained * uses == sum(down) (the last when the layer has
// an entry). Otherwise one message per violation.
std::vector<std::string> edge_conservation_errors(const NetworkTopology& net, const DegreeTable& table);

// Edge multiplicities between consecutive degree-table layers (softmax
// excluded). Each entry is (lower node, upper node, count), sorted.
struct LayerPairEdges {
  std::size_t lower = 0;  // index into DegreeTable::layers
  std::size_t upper = 0;
  struct Edge {
    std::int64_t lo;
    std::int64_t hi;
    std::int64_t count;
  };
  std::vector<Edge> edges;
};
std::vector<LayerPairEdges> edge_multiplicities(const NetworkTopology& net);

void write_degree_csv(std::ostream& out, const DegreeTable& table);

// Container format, version 1: manifest.json plus one raw byte per weight.
NetworkTopology load_container(const std::filesystem::path& manifest);
// Writes manifest.json into dir, plus a <layer>.mask file for every pruned or
// partially retained layer.
void save_container(const NetworkTopology& net, const std::filesystem::path& dir);

// Marks the floor(s * count) smallest |w| as pruned. Equal magnitudes are
// pruned in ascending flat index order.
SparseMask prune_magnitude(std::span<const double> weights, std::vector<std::int64_t> shape, double s,
                           std::string layer_name = {});

// Hidden layers are checked once per side: `up` marks the count toward the
// layer above.
struct UnrealizedNode {
  std::string layer;
  std::int64_t node = 0;
  bool up = false;
  std::int64_t target = 0;
  std::int64_t realized = 0;
};

struct SynthResult {
  NetworkTopology net;
  std::vector<UnrealizedNode> unrealized;
};

// Edge lists of a synthesized layered network: per adjacent layer pair, the
// (lower node, upper node) pairs in ascending order. Layers are named input,
// fc1, fc2, ...
struct SynthGraph {
  std::vector<std::string> names;
  std::vector<std::int64_t> sizes;
  std::vector<std::vector<std::pair<std::int64_t, std::int64_t>>> edges;
  std::vector<UnrealizedNode> unrealized;
};

// Builds an input layer plus one pruned dense layer per further size. Each
// adjacent pair gets its own target: both sides draw per-node degrees from it,
// redraws bring the two totals into agreement, and a configuration-model
// pairing with duplicate rejection realizes the bipartite graph. Nodes that end
// more than 2 away from their balanced target are reported.
SynthResult synth_masks(std::span<const std::int64_t> layer_sizes, std::span<const TplParams> pair_targets,
                        std::uint64_t seed);
// The same graph without materializing dense masks.
SynthGraph synth_graph(std::span<const std::int64_t> layer_sizes, std::span<const TplParams> pair_targets,
                       std::uint64_t seed);

}  // namespace scalefit

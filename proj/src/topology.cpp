#include "scalefit/topology.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <ostream>
#include <unordered_set>

#include "json.hpp"

namespace scalefit {

namespace {

[[noreturn]] void fail(const std::string& layer, const std::string& what) {
  throw TopologyError("layer '" + layer + "': " + what);
}

std::int64_t product(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const std::vector<std::int64_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

struct Geometry {
  std::vector<LayerOutput> outputs;
  std::vector<std::vector<std::int64_t>> shapes;
};

Geometry resolve(const std::vector<LayerSpec>& layers) {
  if (layers.empty()) throw TopologyError("network has no layers");
  Geometry g;
  std::unordered_set<std::string> names;
  bool any_weights = false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& L = layers[i];
    if (L.name.empty()) throw TopologyError("layer " + std::to_string(i) + " has no name");
    if (!names.insert(L.name).second) fail(L.name, "duplicate layer name");
    if ((i == 0) != (L.kind == LayerKind::input)) {
      fail(L.name, i == 0 ? "the first layer must be an input layer" : "only the first layer may be an input");
    }
    if (i > 0 && layers[i - 1].kind == LayerKind::softmax) fail(L.name, "softmax must be the last layer");
    LayerOutput out;
    std::vector<std::int64_t> shape;
    const LayerOutput* prev = i > 0 ? &g.outputs[i - 1] : nullptr;
    switch (L.kind) {
      case LayerKind::input:
        if (L.units > 0 && L.channels == 0) {
          out = {false, L.units, {1, 1}};
        } else if (L.units == 0 && L.channels > 0 && L.spatial.h > 0 && L.spatial.w > 0) {
          out = {true, L.channels, L.spatial};
        } else {
          fail(L.name, "input needs either units or channels with a positive spatial size");
        }
        break;
      case LayerKind::conv: {
        if (!prev->spatial) fail(L.name, "convolution after a flat layer is not supported");
        if (L.channels <= 0 || L.filter.h <= 0 || L.filter.w <= 0) fail(L.name, "conv needs channels and a filter size");
        if (L.stride.h <= 0 || L.stride.w <= 0 || L.padding.h < 0 || L.padding.w < 0) {
          fail(L.name, "invalid stride or padding");
        }
        const std::int64_t span_h = prev->hw.h + 2 * L.padding.h - L.filter.h;
        const std::int64_t span_w = prev->hw.w + 2 * L.padding.w - L.filter.w;
        if (span_h < 0 || span_w < 0) fail(L.name, "filter larger than the padded input");
        out = {true, L.channels, {span_h / L.stride.h + 1, span_w / L.stride.w + 1}};
        shape = {L.channels, prev->channels, L.filter.h, L.filter.w};
        break;
      }
      case LayerKind::pool:
        if (!prev->spatial) fail(L.name, "pooling after a flat layer is not supported");
        if (L.pool_size.h <= 0 || L.pool_size.w <= 0) fail(L.name, "pool needs a positive size");
        out = {true, prev->channels, {prev->hw.h / L.pool_size.h, prev->hw.w / L.pool_size.w}};
        if (out.hw.h == 0 || out.hw.w == 0) fail(L.name, "pool window larger than its input");
        break;
      case LayerKind::dense:
      case LayerKind::softmax:
        if (L.units <= 0) fail(L.name, "needs a positive unit count");
        out = {false, L.units, {1, 1}};
        shape = {L.units, prev->flat_size()};
        break;
    }
    if (has_weights(L.kind)) {
      any_weights = true;
    } else if (L.pruned) {
      fail(L.name, "only weighted layers can be pruned");
    }
    g.outputs.push_back(out);
    g.shapes.push_back(std::move(shape));
  }
  if (!any_weights) throw TopologyError("network has no weighted layers");
  return g;
}

// Next weighted layer above i, skipping pools.
std::optional<std::size_t> next_weighted(const NetworkTopology& net, std::size_t i) {
  for (std::size_t j = i + 1; j < net.size(); ++j) {
    if (has_weights(net.layer(j).kind)) return j;
  }
  return std::nullopt;
}

// Maps a flat input index of weighted layer j to a node of the counted layer below.
std::int64_t block_size(const NetworkTopology& net, std::size_t j) {
  const LayerOutput& in = net.output(j - 1);
  return in.spatial ? in.hw.h * in.hw.w : 1;
}

// Calls emit(out_node, in_node, edges) once per (out, in) node pair of
// weighted layer j, with the retained count times spatial uses.
template <class Emit>
void for_each_node_pair(const NetworkTopology& net, std::size_t j, std::int64_t n_in, Emit&& emit) {
  const SparseMask& m = net.mask(j);
  const auto& shape = m.shape;
  const std::int64_t uses = net.uses(j);
  std::vector<std::int64_t> acc(static_cast<std::size_t>(n_in));
  if (net.layer(j).kind == LayerKind::conv) {
    const std::int64_t kk = shape[2] * shape[3];
    for (std::int64_t o = 0; o < shape[0]; ++o) {
      for (std::int64_t c = 0; c < shape[1]; ++c) {
        const auto* p = m.bits.data() + (o * shape[1] + c) * kk;
        const std::int64_t s = std::count(p, p + kk, std::uint8_t{1});
        if (s) emit(o, c, s * uses);
      }
    }
    return;
  }
  const std::int64_t block = block_size(net, j);
  if (block == 1) {
    for (std::int64_t o = 0; o < shape[0]; ++o) {
      const auto* row = m.bits.data() + o * shape[1];
      for (std::int64_t c = 0; c < shape[1]; ++c) {
        if (row[c]) emit(o, c, std::int64_t{1});
      }
    }
    return;
  }
  for (std::int64_t o = 0; o < shape[0]; ++o) {
    std::fill(acc.begin(), acc.end(), 0);
    const auto* row = m.bits.data() + o * shape[1];
    for (std::int64_t k = 0; k < shape[1]; ++k) acc[static_cast<std::size_t>(k / block)] += row[k];
    for (std::int64_t c = 0; c < n_in; ++c) {
      if (acc[static_cast<std::size_t>(c)]) emit(o, c, acc[static_cast<std::size_t>(c)]);
    }
  }
}

using json = nlohmann::ordered_json;

}  // namespace

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::input: return "input";
    case LayerKind::dense: return "dense";
    case LayerKind::conv: return "conv";
    case LayerKind::pool: return "pool";
    case LayerKind::softmax: return "softmax";
  }
  return "?";
}

LayerKind parse_layer_kind(const std::string& s) {
  for (auto k : {LayerKind::input, LayerKind::dense, LayerKind::conv, LayerKind::pool, LayerKind::softmax}) {
    if (s == to_string(k)) return k;
  }
  throw TopologyError("unknown layer kind '" + s + "'");
}

bool has_weights(LayerKind kind) {
  return kind == LayerKind::dense || kind == LayerKind::conv || kind == LayerKind::softmax;
}

bool has_degrees(LayerKind kind) {
  return kind == LayerKind::input || kind == LayerKind::dense || kind == LayerKind::conv;
}

LayerSpec LayerSpec::input_flat(std::string name, std::int64_t units) {
  LayerSpec s;
  s.name = std::move(name);
  s.kind = LayerKind::input;
  s.units = units;
  return s;
}

LayerSpec LayerSpec::input_image(std::string name, std::int64_t channels, Dims2 spatial) {
  LayerSpec s;
  s.name = std::move(name);
  s.kind = LayerKind::input;
  s.channels = channels;
  s.spatial = spatial;
  return s;
}

LayerSpec LayerSpec::dense(std::string name, std::int64_t units, bool pruned) {
  LayerSpec s;
  s.name = std::move(name);
  s.kind = LayerKind::dense;
  s.units = units;
  s.pruned = pruned;
  return s;
}

LayerSpec LayerSpec::conv(std::string name, std::int64_t channels, Dims2 filter, bool pruned, Dims2 stride,
                          Dims2 padding) {
  LayerSpec s;
  s.name = std::move(name);
  s.kind = LayerKind::conv;
  s.channels = channels;
  s.filter = filter;
  s.pruned = pruned;
  s.stride = stride;
  s.padding = padding;
  return s;
}

LayerSpec LayerSpec::pool(std::string name, Dims2 size) {
  LayerSpec s;
  s.name = std::move(name);
  s.kind = LayerKind::pool;
  s.pool_size = size;
  return s;
}

LayerSpec LayerSpec::softmax(std::string name, std::int64_t units) {
  LayerSpec s;
  s.name = std::move(name);
  s.kind = LayerKind::softmax;
  s.units = units;
  return s;
}

SparseMask SparseMask::all_retained(std::string layer_name, std::vector<std::int64_t> shape) {
  SparseMask m;
  m.layer_name = std::move(layer_name);
  m.bits.assign(static_cast<std::size_t>(product(shape)), 1);
  m.shape = std::move(shape);
  return m;
}

std::int64_t SparseMask::retained() const { return std::count(bits.begin(), bits.end(), std::uint8_t{1}); }

NetworkTopology::NetworkTopology(std::vector<LayerSpec> layers, std::vector<SparseMask> masks)
    : layers_(std::move(layers)) {
  Geometry g = resolve(layers_);
  outputs_ = std::move(g.outputs);
  shapes_ = std::move(g.shapes);
  masks_.resize(layers_.size());
  for (auto& m : masks) {
    const auto i = find(m.layer_name);
    if (!i) throw TopologyError("mask for unknown layer '" + m.layer_name + "'");
    if (!has_weights(layers_[*i].kind)) fail(m.layer_name, "this kind of layer carries no mask");
    if (masks_[*i]) fail(m.layer_name, "more than one mask");
    if (m.shape != shapes_[*i]) {
      fail(m.layer_name, "mask shape " + shape_string(m.shape) + " does not match " + shape_string(shapes_[*i]));
    }
    if (static_cast<std::int64_t>(m.bits.size()) != product(m.shape)) {
      fail(m.layer_name, "mask holds " + std::to_string(m.bits.size()) + " entries, shape needs " +
                             std::to_string(product(m.shape)));
    }
    if (std::any_of(m.bits.begin(), m.bits.end(), [](std::uint8_t b) { return b > 1; })) {
      fail(m.layer_name, "mask entries must be 0 or 1");
    }
    masks_[*i] = std::move(m);
  }
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (!has_weights(layers_[i].kind) || masks_[i]) continue;
    if (layers_[i].pruned) fail(layers_[i].name, "pruned layer has no mask");
    masks_[i] = SparseMask::all_retained(layers_[i].name, shapes_[i]);
  }
}

std::optional<std::size_t> NetworkTopology::find(const std::string& name) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].name == name) return i;
  }
  return std::nullopt;
}

const SparseMask& NetworkTopology::mask(std::size_t i) const {
  if (!masks_.at(i)) fail(layers_[i].name, "layer has no weights");
  return *masks_[i];
}

std::int64_t NetworkTopology::uses(std::size_t i) const {
  return layers_.at(i).kind == LayerKind::conv ? outputs_[i].hw.h * outputs_[i].hw.w : 1;
}

std::int64_t NetworkTopology::node_count(std::size_t i) const {
  if (!has_degrees(layers_.at(i).kind)) fail(layers_[i].name, "layer has no degree entries");
  return outputs_[i].channels;
}

std::vector<std::int64_t> LayerDegrees::totals() const {
  std::vector<std::int64_t> t(up.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = up[i] + down[i];
  return t;
}

const LayerDegrees* DegreeTable::find(const std::string& name) const {
  for (const auto& l : layers) {
    if (l.name == name) return &l;
  }
  return nullptr;
}

DegreeTable degree_table(const NetworkTopology& net) {
  DegreeTable table;
  std::vector<std::optional<std::size_t>> entry(net.size());
  for (std::size_t i = 0; i < net.size(); ++i) {
    if (!has_degrees(net.layer(i).kind)) continue;
    const auto n = static_cast<std::size_t>(net.node_count(i));
    entry[i] = table.layers.size();
    table.layers.push_back({net.layer(i).name, i, std::vector<std::int64_t>(n), std::vector<std::int64_t>(n)});
  }
  for (std::size_t i = 0; i < net.size(); ++i) {
    if (!entry[i]) continue;
    const auto j = next_weighted(net, i);
    if (!j) continue;
    auto& lower = table.layers[*entry[i]];
    LayerDegrees* upper = entry[*j] ? &table.layers[*entry[*j]] : nullptr;
    for_each_node_pair(net, *j, static_cast<std::int64_t>(lower.size()),
                       [&](std::int64_t o, std::int64_t c, std::int64_t e) {
                         lower.up[static_cast<std::size_t>(c)] += e;
                         if (upper) upper->down[static_cast<std::size_t>(o)] += e;
                       });
  }
  return table;
}

std::vector<std::string> edge_conservation_errors(const NetworkTopology& net, const DegreeTable& table) {
  std::vector<std::string> errors;
  const auto sum = [](const std::vector<std::int64_t>& v) { return std::accumulate(v.begin(), v.end(), std::int64_t{0}); };
  const auto entry_of = [&](std::size_t layer) -> const LayerDegrees* {
    for (const auto& l : table.layers) {
      if (l.layer_index == layer) return &l;
    }
    return nullptr;
  };
  for (std::size_t j = 0; j < net.size(); ++j) {
    if (!has_weights(net.layer(j).kind)) continue;
    const std::int64_t edges = net.mask(j).retained() * net.uses(j);
    std::size_t below = j - 1;
    while (!has_degrees(net.layer(below).kind)) --below;
    const LayerDegrees* lower = entry_of(below);
    const LayerDegrees* upper = entry_of(j);
    const std::string& name = net.layer(j).name;
    if (!lower || sum(lower->up) != edges) {
      errors.push_back("layer '" + name + "': " + std::to_string(edges) + " edges but the layer below has up-degree sum " +
                       (lower ? std::to_string(sum(lower->up)) : "n/a"));
    }
    if (has_degrees(net.layer(j).kind) && (!upper || sum(upper->down) != edges)) {
      errors.push_back("layer '" + name + "': " + std::to_string(edges) + " edges but down-degree sum " +
                       (upper ? std::to_string(sum(upper->down)) : "n/a"));
    }
  }
  return errors;
}

std::vector<LayerPairEdges> edge_multiplicities(const NetworkTopology& net) {
  std::vector<LayerPairEdges> pairs;
  std::size_t entry = 0;
  for (std::size_t i = 0; i < net.size(); ++i) {
    if (!has_degrees(net.layer(i).kind)) continue;
    const auto j = next_weighted(net, i);
    if (j && has_degrees(net.layer(*j).kind)) {
      LayerPairEdges p;
      p.lower = entry;
      p.upper = entry + 1;
      for_each_node_pair(net, *j, net.node_count(i), [&](std::int64_t o, std::int64_t c, std::int64_t e) {
        p.edges.push_back({c, o, e});
      });
      std::sort(p.edges.begin(), p.edges.end(),
                [](const auto& a, const auto& b) { return a.lo != b.lo ? a.lo < b.lo : a.hi < b.hi; });
      pairs.push_back(std::move(p));
    }
    ++entry;
  }
  return pairs;
}

void write_degree_csv(std::ostream& out, const DegreeTable& table) {
  out << "layer,node,up,down,total\n";
  for (const auto& l : table.layers) {
    for (std::size_t n = 0; n < l.size(); ++n) {
      out << l.name << ',' << n << ',' << l.up[n] << ',' << l.down[n] << ',' << l.total(n) << '\n';
    }
  }
}

namespace {

Dims2 read_dims(const json& j, const char* key, const std::string& layer, std::optional<Dims2> fallback = {}) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    fail(layer, std::string("missing field '") + key + "'");
  }
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer()) {
    fail(layer, std::string("field '") + key + "' must be a pair of integers");
  }
  return {v[0].get<std::int64_t>(), v[1].get<std::int64_t>()};
}

std::int64_t read_count(const json& j, const char* key, const std::string& layer) {
  if (!j.contains(key) || !j.at(key).is_number_integer()) {
    fail(layer, std::string("field '") + key + "' must be an integer");
  }
  return j.at(key).get<std::int64_t>();
}

json dims_json(Dims2 d) { return json::array({d.h, d.w}); }

}  // namespace

NetworkTopology load_container(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw TopologyError("cannot open manifest " + manifest.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw TopologyError("manifest " + manifest.string() + " is not valid JSON: " + e.what());
  }
  if (!doc.is_object() || !doc.contains("version") || doc["version"] != 1) {
    throw TopologyError("manifest must declare \"version\": 1");
  }
  if (!doc.contains("layers") || !doc["layers"].is_array() || doc["layers"].empty()) {
    throw TopologyError("manifest has an empty layer list");
  }
  std::vector<LayerSpec> specs;
  std::vector<std::optional<std::string>> mask_files;
  for (std::size_t i = 0; i < doc["layers"].size(); ++i) {
    const json& j = doc["layers"][i];
    std::string name = "#" + std::to_string(i);
    if (!j.is_object()) fail(name, "entry is not an object");
    if (!j.contains("name") || !j["name"].is_string()) fail(name, "missing name");
    name = j["name"].get<std::string>();
    if (!j.contains("kind") || !j["kind"].is_string()) fail(name, "missing kind");
    LayerSpec s;
    s.name = name;
    try {
      s.kind = parse_layer_kind(j["kind"].get<std::string>());
    } catch (const TopologyError& e) {
      fail(name, e.what());
    }
    switch (s.kind) {
      case LayerKind::input:
        if (j.contains("units")) {
          s.units = read_count(j, "units", name);
        } else {
          s.channels = read_count(j, "channels", name);
          s.spatial = read_dims(j, "spatial", name);
        }
        break;
      case LayerKind::conv:
        s.channels = read_count(j, "channels", name);
        s.filter = read_dims(j, "filter", name);
        s.stride = read_dims(j, "stride", name, Dims2{1, 1});
        s.padding = read_dims(j, "padding", name, Dims2{0, 0});
        break;
      case LayerKind::pool:
        s.pool_size = read_dims(j, "pool_size", name);
        break;
      case LayerKind::dense:
      case LayerKind::softmax:
        s.units = read_count(j, "units", name);
        break;
    }
    if (j.contains("pruned")) {
      if (!j["pruned"].is_boolean()) fail(name, "field 'pruned' must be a boolean");
      s.pruned = j["pruned"].get<bool>();
    }
    std::optional<std::string> file;
    if (j.contains("mask_file")) {
      if (!j["mask_file"].is_string()) fail(name, "field 'mask_file' must be a string");
      file = j["mask_file"].get<std::string>();
    } else if (s.pruned) {
      fail(name, "pruned layer has no mask_file");
    }
    specs.push_back(std::move(s));
    mask_files.push_back(std::move(file));
  }
  const Geometry g = resolve(specs);
  std::vector<SparseMask> masks;
  const auto base = manifest.parent_path();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (!mask_files[i]) continue;
    const std::string& name = specs[i].name;
    if (!has_weights(specs[i].kind)) fail(name, "this kind of layer carries no mask");
    const auto path = base / *mask_files[i];
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(name, "cannot open mask file " + path.string());
    SparseMask m;
    m.layer_name = name;
    m.shape = g.shapes[i];
    m.bits.assign(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
    const auto want = product(m.shape);
    if (static_cast<std::int64_t>(m.bits.size()) != want) {
      fail(name, "mask file has " + std::to_string(m.bits.size()) + " bytes, shape " + shape_string(m.shape) +
                     " needs " + std::to_string(want));
    }
    masks.push_back(std::move(m));
  }
  return NetworkTopology(std::move(specs), std::move(masks));
}

void save_container(const NetworkTopology& net, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json layers = json::array();
  for (std::size_t i = 0; i < net.size(); ++i) {
    const LayerSpec& s = net.layer(i);
    json j;
    j["name"] = s.name;
    j["kind"] = to_string(s.kind);
    switch (s.kind) {
      case LayerKind::input:
        if (net.output(i).spatial) {
          j["channels"] = s.channels;
          j["spatial"] = dims_json(s.spatial);
        } else {
          j["units"] = s.units;
        }
        break;
      case LayerKind::conv:
        j["channels"] = s.channels;
        j["filter"] = dims_json(s.filter);
        j["stride"] = dims_json(s.stride);
        j["padding"] = dims_json(s.padding);
        break;
      case LayerKind::pool:
        j["pool_size"] = dims_json(s.pool_size);
        break;
      case LayerKind::dense:
      case LayerKind::softmax:
        j["units"] = s.units;
        break;
    }
    if (has_weights(s.kind)) {
      j["pruned"] = s.pruned;
      const SparseMask& m = net.mask(i);
      if (s.pruned || m.retained() != static_cast<std::int64_t>(m.size())) {
        if (s.name.find_first_of("/\\") != std::string::npos) fail(s.name, "name is not usable as a file name");
        const std::string file = s.name + ".mask";
        std::ofstream f(dir / file, std::ios::binary);
        f.write(reinterpret_cast<const char*>(m.bits.data()), static_cast<std::streamsize>(m.bits.size()));
        if (!f) fail(s.name, "cannot write " + (dir / file).string());
        j["mask_file"] = file;
      }
    }
    layers.push_back(std::move(j));
  }
  json doc;
  doc["version"] = 1;
  doc["layers"] = std::move(layers);
  std::ofstream out(dir / "manifest.json");
  out << doc.dump(2) << '\n';
  if (!out) throw TopologyError("cannot write " + (dir / "manifest.json").string());
}

SparseMask prune_magnitude(std::span<const double> weights, std::vector<std::int64_t> shape, double s,
                           std::string layer_name) {
  if (weights.empty()) throw std::invalid_argument("prune_magnitude: empty weight array");
  if (!(s > 0.0 && s < 1.0)) throw std::invalid_argument("prune_magnitude: s must lie in (0, 1)");
  if (product(shape) != static_cast<std::int64_t>(weights.size())) {
    throw std::invalid_argument("prune_magnitude: shape " + shape_string(shape) + " does not match " +
                                std::to_string(weights.size()) + " weights");
  }
  if (std::any_of(weights.begin(), weights.end(), [](double w) { return std::isnan(w); })) {
    throw std::invalid_argument("prune_magnitude: NaN weight");
  }
  std::vector<std::size_t> order(weights.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(weights[a]) < std::abs(weights[b]); });
  const auto cut = static_cast<std::size_t>(std::floor(s * static_cast<double>(weights.size())));
  SparseMask m;
  m.layer_name = std::move(layer_name);
  m.shape = std::move(shape);
  m.bits.assign(weights.size(), 1);
  for (std::size_t k = 0; k < cut; ++k) m.bits[order[k]] = 0;
  return m;
}

namespace {

// Makes both degree totals agree. Random nodes are redrawn from the target law
// and a redraw is kept only if it shrinks the mismatch; whatever is left is
// closed with +-1 steps. Plain +-1 nudging alone shifts too much mass off the
// lowest degrees and biases the exponent.
void balance_totals(std::vector<std::int64_t>& a, std::vector<std::int64_t>& b, const TplSampler& sampler,
                    std::int64_t lo, std::int64_t cap_a, std::int64_t cap_b, Rng& rng) {
  auto sum = [](const std::vector<std::int64_t>& v) { return std::accumulate(v.begin(), v.end(), std::int64_t{0}); };
  std::int64_t diff = sum(a) - sum(b);
  constexpr int kStaleLimit = 2000;
  for (int stale = 0; diff != 0 && stale < kStaleLimit;) {
    const bool side_a = uniform01(rng) < 0.5;
    auto& v = side_a ? a : b;
    auto& d = v[static_cast<std::size_t>(uniform_index(rng, v.size()))];
    const std::int64_t fresh = sampler(rng);
    const std::int64_t next = diff + (side_a ? fresh - d : d - fresh);
    if (std::abs(next) < std::abs(diff)) {
      d = fresh;
      diff = next;
      stale = 0;
    } else {
      ++stale;
    }
  }
  // Round-robin over a shuffled node list so no node moves twice before every
  // eligible node has moved once.
  auto adjust = [&](std::vector<std::int64_t>& v, std::int64_t step, auto ok) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(uniform_index(rng, i))]);
    }
    bool moved = true;
    while (diff != 0 && moved) {
      moved = false;
      for (std::size_t k = 0; k < order.size() && diff != 0; ++k) {
        auto& d = v[order[k]];
        if (!ok(d)) continue;
        d += step;
        diff += (&v == &a ? step : -step);
        moved = true;
      }
    }
  };
  if (diff > 0) {
    adjust(b, 1, [&](std::int64_t d) { return d < cap_b; });
    adjust(a, -1, [&](std::int64_t d) { return d > lo; });
  } else if (diff < 0) {
    adjust(a, 1, [&](std::int64_t d) { return d < cap_a; });
    adjust(b, -1, [&](std::int64_t d) { return d > lo; });
  }
}

}  // namespace

SynthGraph synth_graph(std::span<const std::int64_t> layer_sizes, std::span<const TplParams> pair_targets,
                       std::uint64_t seed) {
  if (layer_sizes.size() < 2) throw TopologyError("synth_masks needs at least two layers");
  if (pair_targets.size() != layer_sizes.size() - 1) {
    throw TopologyError("synth_masks needs one target per adjacent layer pair");
  }
  SynthGraph g;
  for (std::size_t l = 0; l < layer_sizes.size(); ++l) {
    if (layer_sizes[l] <= 0) throw TopologyError("layer sizes must be positive");
    g.names.push_back(l == 0 ? "input" : "fc" + std::to_string(l));
    g.sizes.push_back(layer_sizes[l]);
  }
  for (std::size_t p = 0; p < pair_targets.size(); ++p) {
    const TplParams& t = pair_targets[p];
    const std::string& upper_name = g.names[p + 1];
    try {
      validate_discrete(t);
    } catch (const DomainError& e) {
      fail(upper_name, std::string("invalid degree target: ") + e.what());
    }
    const std::int64_t na = layer_sizes[p];
    const std::int64_t nb = layer_sizes[p + 1];
    const double mean = DiscreteTpl(t).mean();
    if (mean > static_cast<double>(std::min(na, nb))) {
      fail(upper_name, "target mean degree exceeds the size of the neighboring layer");
    }
    Rng rng(derive_seed(seed, p));
    const TplSampler sampler(t);
    std::vector<std::int64_t> da(static_cast<std::size_t>(na));
    std::vector<std::int64_t> db(static_cast<std::size_t>(nb));
    for (auto& d : da) d = sampler(rng);
    for (auto& d : db) d = sampler(rng);
    const auto x_lo = static_cast<std::int64_t>(t.x_min);
    const auto x_hi = static_cast<std::int64_t>(t.x_max);
    balance_totals(da, db, sampler, x_lo, std::min(x_hi, nb), std::min(x_hi, na), rng);
    const auto& target_a = da;
    const auto& target_b = db;

    std::vector<std::int64_t> stub_a;
    std::vector<std::int64_t> stub_b;
    for (std::int64_t i = 0; i < na; ++i) stub_a.insert(stub_a.end(), static_cast<std::size_t>(da[static_cast<std::size_t>(i)]), i);
    for (std::int64_t i = 0; i < nb; ++i) stub_b.insert(stub_b.end(), static_cast<std::size_t>(db[static_cast<std::size_t>(i)]), i);
    for (std::size_t i = stub_b.size(); i > 1; --i) {
      std::swap(stub_b[i - 1], stub_b[static_cast<std::size_t>(uniform_index(rng, i))]);
    }
    const auto key = [nb](std::int64_t a, std::int64_t b) { return static_cast<std::uint64_t>(a * nb + b); };
    std::unordered_set<std::uint64_t> present;
    std::vector<std::pair<std::int64_t, std::int64_t>> edges;
    std::vector<std::pair<std::int64_t, std::int64_t>> leftover;
    const std::size_t n_pairs = std::min(stub_a.size(), stub_b.size());
    present.reserve(n_pairs);
    edges.reserve(n_pairs);
    for (std::size_t i = 0; i < n_pairs; ++i) {
      if (present.insert(key(stub_a[i], stub_b[i])).second) {
        edges.emplace_back(stub_a[i], stub_b[i]);
      } else {
        leftover.emplace_back(stub_a[i], stub_b[i]);
      }
    }
    // A duplicate stub pair (a, b) is resolved by a degree-preserving swap with
    // an existing edge (a2, b2): drop it, add (a, b2) and (a2, b).
    constexpr int kSwapTries = 500;
    for (const auto& [a, b] : leftover) {
      if (present.insert(key(a, b)).second) {
        edges.emplace_back(a, b);
        continue;
      }
      for (int tries = 0; tries < kSwapTries && !edges.empty(); ++tries) {
        const auto e = static_cast<std::size_t>(uniform_index(rng, edges.size()));
        const auto [a2, b2] = edges[e];
        if (a2 == a || b2 == b || present.count(key(a, b2)) || present.count(key(a2, b))) continue;
        present.erase(key(a2, b2));
        present.insert(key(a, b2));
        present.insert(key(a2, b));
        edges[e] = {a, b2};
        edges.emplace_back(a2, b);
        break;
      }
    }

    std::vector<std::int64_t> ra(static_cast<std::size_t>(na));
    std::vector<std::int64_t> rb(static_cast<std::size_t>(nb));
    for (const auto& [a, b] : edges) {
      ++ra[static_cast<std::size_t>(a)];
      ++rb[static_cast<std::size_t>(b)];
    }
    for (std::int64_t i = 0; i < na; ++i) {
      const auto k = static_cast<std::size_t>(i);
      if (std::abs(ra[k] - target_a[k]) > 2) g.unrealized.push_back({g.names[p], i, true, target_a[k], ra[k]});
    }
    for (std::int64_t i = 0; i < nb; ++i) {
      const auto k = static_cast<std::size_t>(i);
      if (std::abs(rb[k] - target_b[k]) > 2) g.unrealized.push_back({upper_name, i, false, target_b[k], rb[k]});
    }
    std::sort(edges.begin(), edges.end());
    g.edges.push_back(std::move(edges));
  }
  return g;
}

SynthResult synth_masks(std::span<const std::int64_t> layer_sizes, std::span<const TplParams> pair_targets,
                        std::uint64_t seed) {
  SynthGraph g = synth_graph(layer_sizes, pair_targets, seed);
  std::vector<LayerSpec> specs;
  for (std::size_t l = 0; l < g.sizes.size(); ++l) {
    specs.push_back(l == 0 ? LayerSpec::input_flat(g.names[0], g.sizes[0])
                           : LayerSpec::dense(g.names[l], g.sizes[l], true));
  }
  std::vector<SparseMask> masks;
  for (std::size_t p = 0; p < g.edges.size(); ++p) {
    const std::int64_t na = g.sizes[p];
    const std::int64_t nb = g.sizes[p + 1];
    SparseMask m;
    m.layer_name = g.names[p + 1];
    m.shape = {nb, na};
    m.bits.assign(static_cast<std::size_t>(na * nb), 0);
    for (const auto& [a, b] : g.edges[p]) m.bits[static_cast<std::size_t>(b * na + a)] = 1;
    masks.push_back(std::move(m));
  }
  return {NetworkTopology(std::move(specs), std::move(masks)), std::move(g.unrealized)};
}

}  // namespace scalefit

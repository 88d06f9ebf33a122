#include "scalefit/cli.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "scalefit/fit.hpp"
#include "scalefit/format.hpp"
#include "scalefit/parallel.hpp"
#include "scalefit/prefatt.hpp"
#include "scalefit/topology.hpp"

namespace scalefit {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// Bad files, flags or configs. Maps to exit code 2.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LayerData {
  std::string name;
  std::vector<std::int64_t> degrees;
};

std::vector<std::string> split_csv_line(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::int64_t parse_int(const std::string& s, const std::string& where) {
  std::int64_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw InputError(where + ": '" + s + "' is not an integer");
  return v;
}

// Degree CSV with a `layer` column and a `total` (or `degree`) column. Layers
// keep their order of first appearance.
std::vector<LayerData> read_degree_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw InputError(path.string() + " is empty");
  const auto header = split_csv_line(line);
  const auto column = [&](const char* name) -> std::ptrdiff_t {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : it - header.begin();
  };
  const auto layer_col = column("layer");
  auto value_col = column("total");
  if (value_col < 0) value_col = column("degree");
  if (layer_col < 0 || value_col < 0) {
    throw InputError(path.string() + ": header needs a 'layer' column and a 'total' or 'degree' column");
  }
  std::vector<LayerData> layers;
  std::map<std::string, std::size_t> index;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    const auto where = path.string() + ":" + std::to_string(line_no);
    if (cells.size() != header.size()) throw InputError(where + ": expected " + std::to_string(header.size()) + " fields");
    const auto& name = cells[static_cast<std::size_t>(layer_col)];
    const auto d = parse_int(cells[static_cast<std::size_t>(value_col)], where);
    if (d < 0) throw InputError(where + ": negative degree");
    auto [it, fresh] = index.emplace(name, layers.size());
    if (fresh) layers.push_back({name, {}});
    layers[it->second].degrees.push_back(d);
  }
  if (layers.empty()) throw InputError(path.string() + " has no degree rows");
  return layers;
}

std::vector<LayerData> layers_from_table(const DegreeTable& t) {
  std::vector<LayerData> out;
  for (const auto& l : t.layers) out.push_back({l.name, l.totals()});
  return out;
}

std::vector<LayerData> read_fit_input(const fs::path& path) {
  if (path.extension() == ".json") return layers_from_table(degree_table(load_container(path)));
  return read_degree_csv(path);
}

fs::path prepare_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw InputError("cannot create output directory " + dir);
  return dir;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path.string());
  return f;
}

// Layer names end up in file names.
std::string file_stem(const std::string& layer) {
  std::string s = layer;
  for (auto& c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  }
  return s;
}

struct CcdfRow {
  std::int64_t x;
  double empirical;
  double model;
};

// Rows at every distinct observed degree inside the support.
std::vector<CcdfRow> ccdf_rows(const DegreeSample& sample, const TplParams& p) {
  const auto lo = static_cast<std::int64_t>(p.x_min);
  const auto hi = static_cast<std::int64_t>(p.x_max);
  const auto r = sample.within(lo, hi);
  if (r.empty()) throw FitError("no degrees inside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  const DiscreteTpl model(p);
  const auto table = model.ccdf_table();
  std::vector<CcdfRow> rows;
  for (std::size_t i = 0; i < r.size();) {
    std::size_t j = i;
    while (j < r.size() && r[j] == r[i]) ++j;
    rows.push_back({r[i], static_cast<double>(r.size() - i) / static_cast<double>(r.size()),
                    table[static_cast<std::size_t>(r[i] - lo)]});
    i = j;
  }
  return rows;
}

void write_ccdf_csv(const fs::path& path, const std::vector<CcdfRow>& rows) {
  auto f = open_out(path);
  f << "x,empirical_ccdf,model_ccdf\n";
  for (const auto& r : rows) f << r.x << ',' << format_double(r.empirical) << ',' << format_double(r.model) << '\n';
}

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

// Log-log scatter of the empirical CCDF with the model as a line.
void write_ccdf_svg(const fs::path& path, const std::string& title, const std::vector<CcdfRow>& rows) {
  constexpr double W = 480;
  constexpr double H = 360;
  constexpr double M = 50;
  double y_min = 1.0;
  for (const auto& r : rows) {
    if (r.empirical > 0) y_min = std::min(y_min, r.empirical);
    if (r.model > 0) y_min = std::min(y_min, r.model);
  }
  const double lx0 = std::log10(static_cast<double>(rows.front().x));
  const double lx1 = std::max(std::log10(static_cast<double>(rows.back().x)), lx0 + 1e-9);
  const double ly0 = std::log10(y_min);
  const double ly1 = std::max(0.0, ly0 + 1e-9);
  const auto px = [&](double x) { return M + (std::log10(x) - lx0) / (lx1 - lx0) * (W - 2 * M); };
  const auto py = [&](double y) { return H - M - (std::log10(y) - ly0) / (ly1 - ly0) * (H - 2 * M); };
  auto f = open_out(path);
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  f << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  f << "<text x=\"" << M << "\" y=\"" << M / 2 << "\" font-size=\"14\">" << title << "</text>\n";
  f << "<line x1=\"" << M << "\" y1=\"" << H - M << "\" x2=\"" << W - M << "\" y2=\"" << H - M << "\" stroke=\"black\"/>\n";
  f << "<line x1=\"" << M << "\" y1=\"" << M << "\" x2=\"" << M << "\" y2=\"" << H - M << "\" stroke=\"black\"/>\n";
  f << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" font-size=\"12\">degree (log)</text>\n";
  f << "<text x=\"12\" y=\"" << H / 2 << "\" font-size=\"12\" transform=\"rotate(-90 12 " << H / 2
    << ")\">CCDF (log)</text>\n";
  for (const auto& r : rows) {
    if (r.empirical <= 0) continue;
    f << "<circle cx=\"" << fixed2(px(static_cast<double>(r.x))) << "\" cy=\"" << fixed2(py(r.empirical))
      << "\" r=\"2\" fill=\"none\" stroke=\"steelblue\"/>\n";
  }
  f << "<polyline fill=\"none\" stroke=\"red\" stroke-width=\"1.5\" points=\"";
  for (const auto& r : rows) {
    if (r.model > 0) f << fixed2(px(static_cast<double>(r.x))) << ',' << fixed2(py(r.model)) << ' ';
  }
  f << "\"/>\n</svg>\n";
}

json fit_json(const FitResult& r) {
  json j;
  j["alpha"] = r.params.alpha;
  j["x_min"] = static_cast<std::int64_t>(r.params.x_min);
  j["x_max"] = static_cast<std::int64_t>(r.params.x_max);
  j["ks_stat"] = r.ks_stat;
  j["n_tail"] = r.n_tail;
  j["log_lik"] = r.log_lik;
  j["grid_sizes"] = json::array({r.grid_sizes.first, r.grid_sizes.second});
  if (r.p_value) j["p_value"] = *r.p_value;
  return j;
}

void write_json(const fs::path& path, const json& doc) {
  auto f = open_out(path);
  f << doc.dump(2) << '\n';
}

// ---- degrees ----

int cmd_degrees(const std::string& manifest, const std::string& out_dir, std::ostream& out, std::ostream& err) {
  const auto net = load_container(manifest);
  const auto table = degree_table(net);
  for (const auto& e : edge_conservation_errors(net, table)) err << "warning: " << e << '\n';
  const auto dir = prepare_out_dir(out_dir);
  auto f = open_out(dir / "degrees.csv");
  write_degree_csv(f, table);
  for (const auto& l : table.layers) {
    const auto t = l.totals();
    const auto [mn, mx] = std::minmax_element(t.begin(), t.end());
    const double mean = static_cast<double>(std::accumulate(t.begin(), t.end(), std::int64_t{0})) /
                        static_cast<double>(t.size());
    out << l.name << ": n=" << t.size() << " min=" << *mn << " max=" << *mx << " mean=" << format_double(mean) << '\n';
  }
  return kExitOk;
}

// ---- fit ----

struct FitOptions {
  double k_percent = 30.0;
  double alpha_max = kAlphaCap;
  bool gof = false;
  int n_boot = 100;
  std::uint64_t seed = 0;
  bool svg = false;
  std::vector<std::string> only_layers;
};

int cmd_fit(const std::string& input, const FitOptions& o, const std::string& out_dir, std::ostream& out,
            std::ostream& err) {
  FitConfig cfg;
  cfg.k_percent = o.k_percent;
  cfg.alpha_hi = o.alpha_max;
  cfg.n_boot = o.n_boot;
  cfg.seed = o.seed;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  if (o.gof && o.n_boot < 1) throw InputError("--n-boot must be at least 1");
  auto layers = read_fit_input(input);
  if (!o.only_layers.empty()) {
    std::vector<LayerData> kept;
    for (const auto& name : o.only_layers) {
      const auto it = std::find_if(layers.begin(), layers.end(), [&](const LayerData& l) { return l.name == name; });
      if (it == layers.end()) throw InputError("no layer named '" + name + "' in " + input);
      kept.push_back(*it);
    }
    layers = std::move(kept);
  }
  const auto dir = prepare_out_dir(out_dir);

  struct Outcome {
    std::optional<FitResult> fit;
    std::string error;
    std::vector<CcdfRow> rows;
  };
  std::vector<Outcome> outcomes(layers.size());
  parallel_for(layers.size(), [&](std::size_t i) {
    const DegreeSample sample(layers[i].degrees, layers[i].name);
    try {
      FitResult r = fit_tpl(sample, cfg);
      if (o.gof) {
        FitConfig boot = cfg;
        boot.seed = derive_seed(cfg.seed, i);
        r.p_value = bootstrap_pvalue(sample, r, boot);
      }
      outcomes[i].rows = ccdf_rows(sample, r.params);
      outcomes[i].fit = r;
    } catch (const FitError& e) {
      outcomes[i].error = e.what();
    } catch (const DomainError& e) {
      outcomes[i].error = e.what();
    }
  });

  json doc;
  doc["input"] = fs::path(input).filename().string();
  doc["config"] = {{"k_percent", cfg.k_percent},
                   {"alpha_min", cfg.alpha_lo},
                   {"alpha_max", cfg.alpha_hi},
                   {"alpha_tol", cfg.alpha_tol},
                   {"gof", o.gof},
                   {"n_boot", cfg.n_boot},
                   {"seed", cfg.seed}};
  json arr = json::array();
  std::size_t fitted = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    json j;
    j["layer"] = layers[i].name;
    j["n"] = layers[i].degrees.size();
    const auto& oc = outcomes[i];
    if (oc.fit) {
      ++fitted;
      j.update(fit_json(*oc.fit));
      const auto stem = "ccdf_" + file_stem(layers[i].name);
      write_ccdf_csv(dir / (stem + ".csv"), oc.rows);
      j["ccdf_file"] = stem + ".csv";
      if (o.svg) {
        write_ccdf_svg(dir / (stem + ".svg"), layers[i].name, oc.rows);
        j["svg_file"] = stem + ".svg";
      }
      out << layers[i].name << ": alpha=" << format_double(oc.fit->params.alpha)
          << " x_min=" << static_cast<std::int64_t>(oc.fit->params.x_min)
          << " x_max=" << static_cast<std::int64_t>(oc.fit->params.x_max) << " D=" << format_double(oc.fit->ks_stat)
          << " n_tail=" << oc.fit->n_tail;
      if (oc.fit->p_value) out << " p=" << format_double(*oc.fit->p_value);
      out << '\n';
    } else {
      j["error"] = oc.error;
      err << layers[i].name << ": " << oc.error << '\n';
    }
    arr.push_back(std::move(j));
  }
  doc["layers"] = std::move(arr);
  write_json(dir / "fit.json", doc);
  return fitted > 0 ? kExitOk : kExitNoFit;
}

// ---- ccdf ----

int cmd_ccdf(const std::string& input, double alpha, std::int64_t x_min, std::int64_t x_max, const std::string& layer,
             const std::string& out_dir, std::ostream& out, std::ostream& err) {
  const TplParams p{alpha, static_cast<double>(x_min), static_cast<double>(x_max)};
  try {
    validate_discrete(p);
  } catch (const DomainError& e) {
    throw InputError(e.what());
  }
  const auto layers = read_fit_input(input);
  const LayerData* chosen = nullptr;
  if (layer.empty()) {
    if (layers.size() != 1) throw InputError("input has several layers; pick one with --layer");
    chosen = &layers.front();
  } else {
    for (const auto& l : layers) {
      if (l.name == layer) chosen = &l;
    }
    if (!chosen) throw InputError("no layer named '" + layer + "' in " + input);
  }
  const auto dir = prepare_out_dir(out_dir);
  std::vector<CcdfRow> rows;
  try {
    rows = ccdf_rows(DegreeSample(chosen->degrees, chosen->name), p);
  } catch (const FitError& e) {
    err << chosen->name << ": " << e.what() << '\n';
    return kExitNoFit;
  }
  const auto file = "ccdf_" + file_stem(chosen->name) + ".csv";
  write_ccdf_csv(dir / file, rows);
  out << file << ": " << rows.size() << " rows\n";
  return kExitOk;
}

// ---- simulate ----

struct SimulateOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<std::int64_t> timesteps;
};

template <class T>
T get_field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw InputError(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw InputError(where + ": field '" + key + "' has the wrong type");
  }
}

AttachmentState initial_state(const json& init, const fs::path& base, std::uint64_t seed) {
  if (init.contains("manifest")) {
    const auto manifest = base / get_field<std::string>(init, "manifest", "initial");
    return AttachmentState::from_topology(load_container(manifest));
  }
  const auto sizes = get_field<std::vector<std::int64_t>>(init, "layer_sizes", "initial");
  if (!init.contains("targets") || !init["targets"].is_array()) throw InputError("initial: missing 'targets' list");
  std::vector<TplParams> targets;
  for (const auto& t : init["targets"]) {
    targets.push_back({get_field<double>(t, "alpha", "initial.targets"), get_field<double>(t, "x_min", "initial.targets"),
                       get_field<double>(t, "x_max", "initial.targets")});
  }
  const auto synth_seed = init.contains("seed") ? get_field<std::uint64_t>(init, "seed", "initial") : seed;
  return AttachmentState::from_graph(synth_graph(sizes, targets, synth_seed));
}

json refit_entry(const std::vector<std::int64_t>& degrees, const FitConfig& cfg) {
  try {
    return fit_json(fit_tpl(DegreeSample(degrees), cfg));
  } catch (const FitError& e) {
    return json{{"error", e.what()}};
  } catch (const DomainError& e) {
    return json{{"error", e.what()}};
  }
}

int cmd_simulate(const std::string& config_path, const SimulateOverrides& ov, const std::string& out_dir,
                 std::ostream& out, std::ostream& err) {
  std::ifstream in(config_path);
  if (!in) throw InputError("cannot open " + config_path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(config_path + " is not valid JSON: " + e.what());
  }
  if (!doc.is_object()) throw InputError(config_path + ": expected a JSON object");
  AttachmentConfig cfg;
  cfg.rates = get_field<std::vector<double>>(doc, "rates", "config");
  cfg.timesteps = get_field<std::int64_t>(doc, "timesteps", "config");
  if (doc.contains("mode")) cfg.mode = parse_edge_count_mode(get_field<std::string>(doc, "mode", "config"));
  if (doc.contains("allow_multi_edges")) cfg.allow_multi_edges = get_field<bool>(doc, "allow_multi_edges", "config");
  if (doc.contains("seed")) cfg.seed = get_field<std::uint64_t>(doc, "seed", "config");
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.mode) cfg.mode = parse_edge_count_mode(*ov.mode);
  if (ov.timesteps) cfg.timesteps = *ov.timesteps;
  FitConfig fit_cfg;
  if (doc.contains("fit")) {
    const auto& f = doc["fit"];
    if (f.contains("k_percent")) fit_cfg.k_percent = get_field<double>(f, "k_percent", "fit");
    if (f.contains("alpha_max")) fit_cfg.alpha_hi = get_field<double>(f, "alpha_max", "fit");
  }
  try {
    fit_cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(std::string("fit: ") + e.what());
  }
  if (!doc.contains("initial") || !doc["initial"].is_object()) throw InputError("config: missing 'initial' object");
  const auto initial = initial_state(doc["initial"], fs::path(config_path).parent_path(), cfg.seed);
  cfg.validate(initial.n_pairs());

  const auto traj = simulate(initial, cfg);
  for (const auto& w : traj.warnings) err << "warning: " << w << '\n';
  // Step seeds depend only on (seed, t), so a one-step run reproduces the
  // first step of the full trajectory.
  AttachmentConfig first = cfg;
  first.timesteps = 1;
  const auto step1 = simulate(initial, first).final_state();

  const auto dir = prepare_out_dir(out_dir);
  {
    auto f = open_out(dir / "trajectory.csv");
    write_trajectory_csv(f, traj, initial);
  }
  for (std::size_t p = 0; p < initial.n_pairs(); ++p) {
    auto f = open_out(dir / ("delta_" + file_stem(initial.name(p)) + "_" + file_stem(initial.name(p + 1)) + ".csv"));
    write_delta_csv(f, estimate_delta(initial, step1, p));
  }
  for (std::size_t l = 0; l < initial.n_layers(); ++l) {
    auto f = open_out(dir / ("omega_" + file_stem(initial.name(l)) + ".csv"));
    write_omega_csv(f, estimate_omega(initial, step1, l));
  }

  const auto& final_state = traj.final_state();
  const auto T = static_cast<double>(cfg.timesteps);
  json report;
  report["timesteps"] = cfg.timesteps;
  report["mode"] = to_string(cfg.mode);
  report["allow_multi_edges"] = cfg.allow_multi_edges;
  report["seed"] = cfg.seed;
  json layers = json::array();
  for (std::size_t l = 0; l < initial.n_layers(); ++l) {
    json j;
    j["layer"] = initial.name(l);
    j["n"] = initial.layer_size(l);
    const double n = static_cast<double>(initial.layer_size(l));
    j["mean_degree_0"] = static_cast<double>(initial.degree_sum(l)) / n;
    j["mean_degree_T"] = static_cast<double>(final_state.degree_sum(l)) / n;
    if (initial.degree_sum(l) > 0) j["growth_factor_T"] = growth_factor(initial, cfg, l, T);
    j["fit_0"] = refit_entry(initial.degrees(l), fit_cfg);
    j["fit_T"] = refit_entry(final_state.degrees(l), fit_cfg);
    if (j["fit_0"].contains("alpha") && j["fit_T"].contains("alpha")) {
      j["alpha_change"] = j["fit_T"]["alpha"].get<double>() - j["fit_0"]["alpha"].get<double>();
    }
    layers.push_back(std::move(j));
  }
  report["layers"] = std::move(layers);
  report["drawn"] = traj.drawn;
  report["dropped"] = traj.dropped;
  report["warnings"] = traj.warnings;
  write_json(dir / "refit.json", report);

  for (const auto& l : report["layers"]) {
    out << l["layer"].get<std::string>() << ": mean degree " << format_double(l["mean_degree_0"].get<double>())
        << " -> " << format_double(l["mean_degree_T"].get<double>());
    if (l.contains("alpha_change")) out << ", alpha change " << format_double(l["alpha_change"].get<double>());
    out << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Truncated power-law analysis of sparse network connectivity", "scalefit"};
  app.require_subcommand(1);

  std::string out_dir = ".";

  auto* degrees = app.add_subcommand("degrees", "Per-node degrees of a topology container");
  std::string manifest;
  degrees->add_option("manifest", manifest, "manifest.json of the container")->required();
  degrees->add_option("--out", out_dir, "Output directory");

  auto* fit = app.add_subcommand("fit", "Fit a truncated power law to every layer");
  std::string fit_input;
  FitOptions fo;
  fit->add_option("input", fit_input, "Degree CSV or manifest.json")->required();
  fit->add_option("--k", fo.k_percent, "Threshold grid percentage")->capture_default_str();
  fit->add_option("--alpha-max", fo.alpha_max, "Upper bound for alpha")->capture_default_str();
  fit->add_flag("--gof", fo.gof, "Add a bootstrap goodness-of-fit p-value");
  fit->add_option("--n-boot", fo.n_boot, "Bootstrap replicates")->capture_default_str();
  fit->add_option("--seed", fo.seed, "Bootstrap seed")->capture_default_str();
  fit->add_flag("--svg", fo.svg, "Also write an SVG plot per layer");
  fit->add_option("--layer", fo.only_layers, "Only fit these layers");
  fit->add_option("--out", out_dir, "Output directory");

  auto* sim = app.add_subcommand("simulate", "Run layered preferential attachment from a JSON config");
  std::string sim_config;
  SimulateOverrides so;
  sim->add_option("config", sim_config, "Simulation config JSON")->required();
  sim->add_option("--seed", so.seed, "Override the config seed");
  sim->add_option("--mode", so.mode, "expected-value or poisson");
  sim->add_option("--timesteps", so.timesteps, "Override the number of steps");
  sim->add_option("--out", out_dir, "Output directory");

  auto* ccdf = app.add_subcommand("ccdf", "Empirical and model CCDF for given parameters");
  std::string ccdf_input;
  std::string ccdf_layer;
  double alpha = 0.0;
  std::int64_t x_min = 0;
  std::int64_t x_max = 0;
  ccdf->add_option("input", ccdf_input, "Degree CSV or manifest.json")->required();
  ccdf->add_option("--alpha", alpha, "Exponent")->required();
  ccdf->add_option("--xmin", x_min, "Lower threshold")->required();
  ccdf->add_option("--xmax", x_max, "Upper threshold")->required();
  ccdf->add_option("--layer", ccdf_layer, "Layer to use when the input has several");
  ccdf->add_option("--out", out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kExitInput;
  }

  try {
    if (*degrees) return cmd_degrees(manifest, out_dir, out, err);
    if (*fit) return cmd_fit(fit_input, fo, out_dir, out, err);
    if (*sim) return cmd_simulate(sim_config, so, out_dir, out, err);
    if (*ccdf) return cmd_ccdf(ccdf_input, alpha, x_min, x_max, ccdf_layer, out_dir, out, err);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const TopologyError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const AttachmentError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}

}  // namespace scalefit
